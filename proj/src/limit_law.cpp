#include "outlierlab/limit_law.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace outlierlab {

Kernel Kernel::gue(double sigma) { return Kernel(Kind::gue, sigma, SpectralMeasure::semicircle(sigma)); }
Kernel Kernel::goe(double sigma) { return Kernel(Kind::goe, sigma, SpectralMeasure::semicircle(sigma)); }
Kernel Kernel::uci(SpectralMeasure mu) { return Kernel(Kind::uci, 0.0, std::move(mu)); }

cd Kernel::scalar(cd z, cd w) const {
  if (kind_ == Kind::goe) return wigner_kernel_psi(sigma_, z, w);
  return covariance_kernel_phi(*mu_, z, w);
}

cd rate_constant(const SpectralMeasure& mu, cd theta, cd xi) {
  return theta * theta * resolvent_moment(mu, xi, 1);
}

std::vector<BlockDraw> blocks_from_m(const MatrixXcd& m, const JordanEntry& entry, cd c, std::size_t entry_index,
                                     std::size_t xi_index) {
  std::vector<BlockDraw> out;
  Index off = 0;
  for (std::size_t j = 0; j < entry.blocks.size(); ++j) {
    const int p = entry.blocks[j].p;
    const int beta = entry.blocks[j].beta;
    MatrixXcd big = entry.theta * m.block(off, off, beta, beta);
    if (off > 0) {
      const MatrixXcd m1 = m.topLeftCorner(off, off);
      Eigen::JacobiSVD<MatrixXcd> svd(m1);
      const auto& s = svd.singularValues();
      if (!(s(off - 1) > 0.0) || s(0) / s(off - 1) > 1e12) throw SingularDraw("M^I is numerically singular");
      big -= entry.theta * m.block(off, 0, beta, off) * m1.partialPivLu().solve(m.block(0, off, off, beta));
    }
    Eigen::ComplexEigenSolver<MatrixXcd> es(big, false);
    BlockDraw bd{entry_index, j, xi_index, p, beta, big, {}};
    const cd cp = std::pow(c, p);
    for (Index b = 0; b < beta; ++b) {
      const cd w = entry.theta * es.eigenvalues()(b) / cp;
      const double r = std::pow(std::abs(w), 1.0 / p);
      const double a = std::arg(w);
      for (int t = 0; t < p; ++t) bd.lambda.push_back(std::polar(r, (a + 2.0 * kPi * t) / p));
    }
    out.push_back(std::move(bd));
    off += beta;
  }
  return out;
}

LimitLawSampler::LimitLawSampler(Kernel kernel, const PerturbationMatrix& pm, std::vector<std::vector<cd>> xis)
    : kernel_(std::move(kernel)), pm_(pm), xis_(std::move(xis)) {
  const auto& entries = pm_.spec.entries();
  if (xis_.size() != entries.size()) throw InvalidArgument("one xi list per theta is required");
  offset_.resize(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& idx = pm_.index.entries[i];
    for (std::size_t n = 0; n < xis_[i].size(); ++n) {
      offset_[i].push_back(vars_.size());
      for (Index k : idx.last)
        for (Index l : idx.first) vars_.push_back({i, n, xis_[i][n], k, l});
    }
  }
  const Index nv = static_cast<Index>(vars_.size());
  const MatrixXcd& q = pm_.Q;
  const MatrixXcd& qi = pm_.Qinv;
  const MatrixXcd c1 = qi * qi.adjoint();            // Q^{-1} Q^{-*}
  const MatrixXcd c2 = q.adjoint() * q;              // Q^* Q
  const MatrixXcd p1 = qi * qi.transpose();          // Q^{-1} Q^{-T}
  const MatrixXcd p2 = q.transpose() * q;            // Q^T Q
  const MatrixXcd dq = qi * q.conjugate();           // Q^{-1} conj(Q)
  const bool goe = kernel_.kind() == Kernel::Kind::goe;
  c_.resize(nv, nv);
  p_.resize(nv, nv);
  for (Index a = 0; a < nv; ++a) {
    for (Index b = 0; b < nv; ++b) {
      const MVariable& u = vars_[a];
      const MVariable& v = vars_[b];
      const double swap = (u.k == v.l && v.k == u.l) ? 1.0 : 0.0;
      const cd kp = kernel_.scalar(u.xi, v.xi);
      const cd kc = kernel_.scalar(u.xi, std::conj(v.xi));
      if (goe) {
        p_(a, b) = kp * (p1(u.k, v.k) * p2(u.l, v.l) + swap);
        c_(a, b) = kc * (c1(u.k, v.k) * c2(v.l, u.l) + dq(u.k, v.l) * std::conj(dq(v.k, u.l)));
      } else {
        p_(a, b) = kp * swap;
        c_(a, b) = kc * c1(u.k, v.k) * c2(v.l, u.l);
      }
    }
  }
  // Real covariance of (Re X, Im X).
  MatrixXd s(2 * nv, 2 * nv);
  s.topLeftCorner(nv, nv) = 0.5 * (c_ + p_).real();
  s.bottomRightCorner(nv, nv) = 0.5 * (c_ - p_).real();
  s.topRightCorner(nv, nv) = 0.5 * (p_ - c_).imag();
  s.bottomLeftCorner(nv, nv) = 0.5 * (p_ + c_).imag();
  s = 0.5 * (s + s.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
  // Rounding-level eigenvalues belong to the exact linear constraints between
  // variables (e.g. m_kl = conj m_lk for Hermitian input); their square roots
  // would break those constraints at the 1e-8 level.
  const double cut = 1e-12 * std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  const VectorXd lam = es.eigenvalues().unaryExpr([cut](double v) { return v > cut ? v : 0.0; });
  factor_ = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

std::size_t LimitLawSampler::variable_index(std::size_t entry, std::size_t xi_index, Index k, Index l) const {
  const auto& idx = pm_.index.entries.at(entry);
  const auto kp = std::find(idx.last.begin(), idx.last.end(), k);
  const auto lp = std::find(idx.first.begin(), idx.first.end(), l);
  if (kp == idx.last.end() || lp == idx.first.end()) throw InvalidArgument("index outside J x I");
  return offset_.at(entry).at(xi_index) + static_cast<std::size_t>(kp - idx.last.begin()) * idx.first.size() +
         static_cast<std::size_t>(lp - idx.first.begin());
}

VectorXcd LimitLawSampler::sample_m(Rng& rng) const {
  const Index nv = static_cast<Index>(vars_.size());
  VectorXd z(2 * nv);
  for (Index i = 0; i < 2 * nv; ++i) z(i) = standard_normal(rng);
  const VectorXd y = factor_ * z;
  VectorXcd x(nv);
  for (Index i = 0; i < nv; ++i) x(i) = cd(y(i), y(nv + i));
  return x;
}

std::vector<BlockDraw> LimitLawSampler::blocks(const VectorXcd& x) const {
  std::vector<BlockDraw> out;
  const auto& entries = pm_.spec.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Index w = static_cast<Index>(pm_.index.entries[i].first.size());
    for (std::size_t n = 0; n < xis_[i].size(); ++n) {
      MatrixXcd m(w, w);
      const std::size_t base = offset_[i][n];
      for (Index a = 0; a < w; ++a)
        for (Index b = 0; b < w; ++b) m(a, b) = x(static_cast<Index>(base) + a * w + b);
      const cd c = rate_constant(kernel_.measure(), entries[i].theta, xis_[i][n]);
      auto bl = blocks_from_m(m, entries[i], c, i, n);
      out.insert(out.end(), bl.begin(), bl.end());
    }
  }
  return out;
}

std::vector<BlockDraw> LimitLawSampler::sample(Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    ++draws_;
    try {
      return blocks(sample_m(rng));
    } catch (const SingularDraw&) {
      ++redraws_;
    }
  }
  throw SingularDraw("1000 consecutive singular draws");
}

}  // namespace outlierlab
