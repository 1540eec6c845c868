#include "outlierlab/resolvent.hpp"

#include <algorithm>
#include <cmath>

namespace outlierlab {

ProjectedResolvent::ProjectedResolvent(const EnsembleSample& sample, const MatrixXcd& isometry)
    : n_(sample.dim()), d_(isometry.cols()) {
  if (isometry.rows() != n_) throw InvalidArgument("isometry rows must equal N");
  switch (sample.storage()) {
    case EnsembleSample::Storage::diagonal:
      lambda_ = sample.diagonal_entries();
      w_ = isometry;
      break;
    case EnsembleSample::Storage::banded: {
      if (!is_canonical(isometry) || sample.band().diag.front().rows() < d_)
        throw InvalidArgument("banded samples need the canonical embedding within the leading block");
      const auto& t = sample.band();
      if (t.diag.front().rows() == d_) {
        spectral_ = false;
        band_ = t;
      } else {
        lambda_ = sample.eigvals();
        w_ = sample.eigvecs().adjoint() * isometry;
      }
      break;
    }
    case EnsembleSample::Storage::dense:
      if (is_canonical(isometry) && n_ > 600) {
        spectral_ = false;
        band_ = block_tridiagonalize(sample.matrix(), std::max<Index>(d_, 1));
      } else {
        lambda_ = sample.eigvals();
        w_ = sample.eigvecs().adjoint() * isometry;
      }
      break;
  }
}

void ProjectedResolvent::check_regular(cd z) const {
  if (std::abs(z.imag()) > 1e-10) return;
  const double x = z.real();
  if (count_above(x - 1e-10) != count_above(x + 1e-10))
    throw DomainError("point lies on the spectrum of H");
}

MatrixXcd ProjectedResolvent::block(cd z) const {
  check_regular(z);
  if (spectral_) {
    const VectorXcd inv = (z - lambda_.cast<cd>().array()).inverse();
    return w_.adjoint() * inv.asDiagonal() * w_;
  }
  const std::size_t nb = band_.diag.size();
  MatrixXcd sinv;
  for (std::size_t k = nb; k-- > 0;) {
    const Index m = band_.diag[k].rows();
    MatrixXcd s = z * MatrixXcd::Identity(m, m) - band_.diag[k];
    if (k + 1 < nb) s.noalias() -= band_.sub[k].adjoint() * sinv * band_.sub[k];
    sinv = s.partialPivLu().inverse();
  }
  return sinv;
}

std::pair<MatrixXcd, MatrixXcd> ProjectedResolvent::block_with_derivative(cd z) const {
  check_regular(z);
  if (spectral_) {
    const VectorXcd inv = (z - lambda_.cast<cd>().array()).inverse();
    const VectorXcd inv2 = inv.array().square();
    return {w_.adjoint() * inv.asDiagonal() * w_, -(w_.adjoint() * inv2.asDiagonal() * w_)};
  }
  // S_k = z - T_kk - B_k^* S_{k+1}^{-1} B_k and its z-derivative.
  const std::size_t nb = band_.diag.size();
  MatrixXcd sinv, dsinv;
  for (std::size_t k = nb; k-- > 0;) {
    const Index m = band_.diag[k].rows();
    MatrixXcd s = z * MatrixXcd::Identity(m, m) - band_.diag[k];
    MatrixXcd ds = MatrixXcd::Identity(m, m);
    if (k + 1 < nb) {
      const MatrixXcd& b = band_.sub[k];
      s.noalias() -= b.adjoint() * sinv * b;
      ds.noalias() -= b.adjoint() * dsinv * b;
    }
    Eigen::PartialPivLU<MatrixXcd> lu(s);
    sinv = lu.inverse();
    dsinv = -sinv * ds * sinv;
  }
  return {sinv, dsinv};
}

std::optional<cd> ProjectedResolvent::normalized_trace(cd z) const {
  if (!spectral_) return std::nullopt;
  check_regular(z);
  return (z - lambda_.cast<cd>().array()).inverse().sum() / static_cast<double>(n_);
}

Index ProjectedResolvent::count_above(double x) const {
  if (spectral_) return static_cast<Index>((lambda_.array() > x).count());
  return outlierlab::count_above(band_, x);
}

std::vector<double> ProjectedResolvent::eigenvalues_in(double lo, double hi) const {
  std::vector<double> out;
  if (!(lo < hi)) return out;
  if (spectral_) {
    for (Index i = 0; i < lambda_.size(); ++i)
      if (lambda_(i) > lo && lambda_(i) < hi) out.push_back(lambda_(i));
    std::sort(out.begin(), out.end());
    return out;
  }
  // Bisection on the eigenvalue counting function.
  const Index c_lo = count_above(lo);
  const Index c_hi = count_above(hi);
  for (Index target = c_hi; target < c_lo; ++target) {
    // The eigenvalue where the count drops from target + 1 to target.
    double a = lo, b = hi;
    for (int it = 0; it < 200 && b - a > 1e-14 * (1.0 + std::abs(b)); ++it) {
      const double m = 0.5 * (a + b);
      if (count_above(m) > target)
        a = m;
      else
        b = m;
    }
    out.push_back(0.5 * (a + b));
  }
  std::sort(out.begin(), out.end());
  return out;
}

double ProjectedResolvent::norm_bound() const {
  if (spectral_) return lambda_.size() ? lambda_.cwiseAbs().maxCoeff() : 0.0;
  double f2 = 0.0;
  for (const auto& b : band_.diag) f2 += b.squaredNorm();
  for (const auto& b : band_.sub) f2 += 2.0 * b.squaredNorm();
  return std::sqrt(f2);
}

}  // namespace outlierlab
