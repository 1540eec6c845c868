#include "outlierlab/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace outlierlab {

namespace {

double standardized_entry(EntryLaw law, Rng& rng) {
  switch (law) {
    case EntryLaw::gaussian:
      return standard_normal(rng);
    case EntryLaw::rademacher:
      return (rng() >> 63) ? 1.0 : -1.0;
    case EntryLaw::uniform:
      return std::sqrt(3.0) * (2.0 * uniform01(rng) - 1.0);
  }
  return 0.0;
}

std::string describe(const WignerParams& p) {
  std::ostringstream os;
  os << "sigma=" << p.sigma << ",symmetry=" << (p.symmetry == Symmetry::real ? "real" : "complex")
     << ",law="
     << (p.law == EntryLaw::gaussian ? "gaussian" : p.law == EntryLaw::rademacher ? "rademacher" : "uniform");
  return os.str();
}

// Hermitian Gaussian block with off-diagonal E|h_ij|^2 = s2.
MatrixXcd gaussian_hermitian_block(Index m, double s2, bool cplx, Rng& rng) {
  MatrixXcd d(m, m);
  const double s = std::sqrt(s2);
  for (Index j = 0; j < m; ++j) {
    d(j, j) = cplx ? s * standard_normal(rng) : std::sqrt(2.0) * s * standard_normal(rng);
    for (Index i = j + 1; i < m; ++i) {
      const cd v = cplx ? complex_normal(rng, s2) : cd(s * standard_normal(rng), 0.0);
      d(i, j) = v;
      d(j, i) = std::conj(v);
    }
  }
  return d;
}

}  // namespace

Index BlockTridiagonal::dim() const {
  Index n = 0;
  for (const auto& b : diag) n += b.rows();
  return n;
}

MatrixXcd BlockTridiagonal::to_dense() const {
  const Index n = dim();
  MatrixXcd h = MatrixXcd::Zero(n, n);
  Index pos = 0;
  for (std::size_t k = 0; k < diag.size(); ++k) {
    const Index m = diag[k].rows();
    h.block(pos, pos, m, m) = diag[k];
    if (k < sub.size()) {
      const Index m2 = sub[k].rows();
      h.block(pos + m, pos, m2, m) = sub[k];
      h.block(pos, pos + m, m, m2) = sub[k].adjoint();
    }
    pos += m;
  }
  return h;
}

BlockTridiagonal block_tridiagonalize(const MatrixXcd& h_in, Index block) {
  const Index n = h_in.rows();
  if (block < 1 || block > n) throw InvalidArgument("block size must lie in [1, N]");
  BlockTridiagonal t;
  if (block == 1 && n > 1) {
    Eigen::Tridiagonalization<MatrixXcd> tri(h_in);
    const VectorXd dg = tri.diagonal();
    const VectorXd sd = tri.subDiagonal();
    for (Index i = 0; i < n; ++i) {
      t.diag.push_back(MatrixXcd::Constant(1, 1, dg(i)));
      if (i + 1 < n) t.sub.push_back(MatrixXcd::Constant(1, 1, sd(i)));
    }
    return t;
  }
  MatrixXcd h = h_in;
  Index start = 0;
  Index cur = block;
  while (true) {
    t.diag.push_back(h.block(start, start, cur, cur));
    const Index rest = start + cur;
    const Index m = n - rest;
    if (m == 0) break;
    const Index next = std::min(block, m);
    Eigen::HouseholderQR<MatrixXcd> qr(h.block(rest, start, m, cur));
    MatrixXcd r = qr.matrixQR().topRows(next).triangularView<Eigen::Upper>();
    t.sub.push_back(r);
    MatrixXcd trailing = h.block(rest, rest, m, m);
    const auto q = qr.householderQ();
    trailing.applyOnTheLeft(q.adjoint());
    trailing.applyOnTheRight(q);
    h.block(rest, rest, m, m) = trailing;
    start = rest;
    cur = next;
  }
  return t;
}

EnsembleSample EnsembleSample::dense(MatrixXcd h, Provenance prov) {
  EnsembleSample s;
  s.storage_ = Storage::dense;
  s.n_ = h.rows();
  s.h_ = std::move(h);
  s.prov_ = std::move(prov);
  return s;
}

EnsembleSample EnsembleSample::diagonal(VectorXd d, Provenance prov) {
  EnsembleSample s;
  s.storage_ = Storage::diagonal;
  s.n_ = d.size();
  s.d_ = std::move(d);
  s.prov_ = std::move(prov);
  return s;
}

EnsembleSample EnsembleSample::banded(BlockTridiagonal t, Provenance prov) {
  EnsembleSample s;
  s.storage_ = Storage::banded;
  s.n_ = t.dim();
  s.t_ = std::move(t);
  s.prov_ = std::move(prov);
  return s;
}

const MatrixXcd& EnsembleSample::matrix() const {
  if (storage_ != Storage::dense) throw InvalidArgument("sample is not stored dense");
  return h_;
}

const VectorXd& EnsembleSample::diagonal_entries() const {
  if (storage_ != Storage::diagonal) throw InvalidArgument("sample is not stored diagonal");
  return d_;
}

const BlockTridiagonal& EnsembleSample::band() const {
  if (storage_ != Storage::banded) throw InvalidArgument("sample is not stored banded");
  return t_;
}

MatrixXcd EnsembleSample::to_dense() const {
  switch (storage_) {
    case Storage::dense:
      return h_;
    case Storage::diagonal:
      return d_.cast<cd>().asDiagonal();
    case Storage::banded:
      return t_.to_dense();
  }
  return {};
}

const VectorXd& EnsembleSample::eigvals() const {
  std::lock_guard<std::mutex> lock(cache_->mu);
  if (!cache_->have_vals) {
    if (storage_ == Storage::diagonal) {
      cache_->vals = d_;
      std::sort(cache_->vals.begin(), cache_->vals.end());
    } else {
      Eigen::SelfAdjointEigenSolver<MatrixXcd> es(to_dense(), Eigen::EigenvaluesOnly);
      cache_->vals = es.eigenvalues();
    }
    cache_->have_vals = true;
  }
  return cache_->vals;
}

const MatrixXcd& EnsembleSample::eigvecs() const {
  std::lock_guard<std::mutex> lock(cache_->mu);
  if (!cache_->have_vecs) {
    if (storage_ == Storage::diagonal) {
      std::vector<Index> order(n_);
      std::iota(order.begin(), order.end(), Index{0});
      std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return d_(a) < d_(b); });
      cache_->vecs = MatrixXcd::Zero(n_, n_);
      cache_->vals.resize(n_);
      for (Index c = 0; c < n_; ++c) {
        cache_->vecs(order[c], c) = 1.0;
        cache_->vals(c) = d_(order[c]);
      }
    } else {
      Eigen::SelfAdjointEigenSolver<MatrixXcd> es(to_dense());
      cache_->vals = es.eigenvalues();
      cache_->vecs = es.eigenvectors();
    }
    cache_->have_vals = true;
    cache_->have_vecs = true;
  }
  return cache_->vecs;
}

Index EnsembleSample::count_above(double x) const {
  if (storage_ == Storage::banded) return outlierlab::count_above(t_, x);
  if (storage_ == Storage::diagonal) return static_cast<Index>((d_.array() > x).count());
  return static_cast<Index>((eigvals().array() > x).count());
}

double EnsembleSample::trace() const {
  switch (storage_) {
    case Storage::dense:
      return h_.trace().real();
    case Storage::diagonal:
      return d_.sum();
    case Storage::banded: {
      double s = 0.0;
      for (const auto& b : t_.diag) s += b.trace().real();
      return s;
    }
  }
  return 0.0;
}

EnsembleSample EnsembleSample::shifted(double c) const {
  switch (storage_) {
    case Storage::dense:
      return dense(h_ + c * MatrixXcd::Identity(n_, n_), prov_);
    case Storage::diagonal:
      return diagonal(d_.array() + c, prov_);
    case Storage::banded: {
      BlockTridiagonal t = t_;
      for (auto& b : t.diag) b += c * MatrixXcd::Identity(b.rows(), b.cols());
      return banded(std::move(t), prov_);
    }
  }
  return *this;
}

EnsembleSample sample_wigner(const WignerParams& params, Index n, std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("N must be at least 2");
  if (!(params.sigma > 0.0)) throw InvalidArgument("sigma must be positive");
  Rng rng(seed);
  const bool cplx = params.symmetry == Symmetry::complex;
  const double scale = params.sigma / std::sqrt(static_cast<double>(n));
  MatrixXcd h(n, n);
  for (Index j = 0; j < n; ++j) {
    h(j, j) = scale * (cplx ? 1.0 : std::sqrt(2.0)) * standardized_entry(params.law, rng);
    for (Index i = j + 1; i < n; ++i) {
      cd v;
      if (cplx) {
        const double re = standardized_entry(params.law, rng);
        const double im = standardized_entry(params.law, rng);
        v = scale * cd(re, im) / std::sqrt(2.0);
      } else {
        v = scale * standardized_entry(params.law, rng);
      }
      h(i, j) = v;
      h(j, i) = std::conj(v);
    }
  }
  return EnsembleSample::dense(std::move(h), {"wigner", n, seed, describe(params)});
}

EnsembleSample sample_wigner_banded(const WignerParams& params, Index n, Index block,
                                    std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("N must be at least 2");
  if (params.law != EntryLaw::gaussian) throw InvalidArgument("banded sampling needs Gaussian entries");
  if (block < 1 || block > n) throw InvalidArgument("block size must lie in [1, N]");
  Rng rng(seed);
  const bool cplx = params.symmetry == Symmetry::complex;
  const double s2 = params.sigma * params.sigma / static_cast<double>(n);
  const double s = std::sqrt(s2);
  BlockTridiagonal t;
  Index done = 0;
  Index cur = block;
  while (true) {
    t.diag.push_back(gaussian_hermitian_block(cur, s2, cplx, rng));
    done += cur;
    const Index m = n - done;
    if (m == 0) break;
    const Index next = std::min(block, m);
    // R factor of an m x cur Gaussian panel (Bartlett decomposition).
    MatrixXcd r = MatrixXcd::Zero(next, cur);
    for (Index i = 0; i < next; ++i) {
      const double dof = cplx ? 2.0 * static_cast<double>(m - i) : static_cast<double>(m - i);
      const double chi2 = 2.0 * std::gamma_distribution<double>(dof / 2.0, 1.0)(rng);
      r(i, i) = s * std::sqrt(cplx ? chi2 / 2.0 : chi2);
      for (Index j = i + 1; j < cur; ++j)
        r(i, j) = cplx ? complex_normal(rng, s2) : cd(s * standard_normal(rng), 0.0);
    }
    t.sub.push_back(std::move(r));
    cur = next;
  }
  std::string desc = describe(params) + ",block=" + std::to_string(block);
  return EnsembleSample::banded(std::move(t), {"wigner-banded", n, seed, desc});
}

EnsembleSample sample_uci(const SpectralMeasure& mu, Index n, DiagonalMode mode, std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("N must be at least 2");
  VectorXd d(n);
  if (mode == DiagonalMode::quantile) {
    for (Index i = 0; i < n; ++i) d(i) = mu.quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
  } else {
    Rng rng(seed);
    std::vector<double> weights;
    for (const auto& a : mu.atoms()) weights.push_back(a.w);
    for (const auto& s : mu.semicircles()) weights.push_back(s.w);
    for (const auto& u : mu.uniforms()) weights.push_back(u.w);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    const std::size_t na = mu.atoms().size();
    const std::size_t ns = mu.semicircles().size();
    for (Index i = 0; i < n; ++i) {
      const std::size_t c = pick(rng);
      if (c < na) {
        d(i) = mu.atoms()[c].x;
      } else if (c < na + ns) {
        const auto& sc = mu.semicircles()[c - na];
        const double u1 = uniform01(rng);
        const double u2 = uniform01(rng);
        d(i) = sc.center + 2.0 * sc.sigma * std::sqrt(u1) * std::cos(2.0 * kPi * u2);
      } else {
        const auto& un = mu.uniforms()[c - na - ns];
        d(i) = un.lo + (un.hi - un.lo) * uniform01(rng);
      }
    }
  }
  return EnsembleSample::diagonal(std::move(d), {mode == DiagonalMode::quantile ? "uci-quantile" : "uci-iid", n,
                                                 seed, ""});
}

MatrixXcd sample_haar_isometry(Index n, Index k, Rng& rng) {
  if (k < 0 || k > n) throw InvalidArgument("isometry needs k <= N");
  MatrixXcd g(n, k);
  for (Index c = 0; c < k; ++c)
    for (Index r = 0; r < n; ++r) g(r, c) = complex_normal(rng);
  Eigen::HouseholderQR<MatrixXcd> qr(g);
  MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(n, k);
  for (Index c = 0; c < k; ++c) {
    const cd r = qr.matrixQR()(c, c);
    const double a = std::abs(r);
    if (a > 0.0) q.col(c) *= r / a;
  }
  return q;
}

Index count_above(const BlockTridiagonal& t, double x) {
  const std::size_t nb = t.diag.size();
  Index count = 0;
  MatrixXcd sinv;  // inverse of the Schur complement of the trailing part
  for (std::size_t kk = nb; kk-- > 0;) {
    const Index m = t.diag[kk].rows();
    MatrixXcd s = x * MatrixXcd::Identity(m, m) - t.diag[kk];
    if (kk + 1 < nb) s -= t.sub[kk].adjoint() * sinv * t.sub[kk];
    if (m == 1) {
      double v = s(0, 0).real();
      if (v == 0.0) v = -1e-300;
      if (v < 0.0) ++count;
      sinv = MatrixXcd::Constant(1, 1, 1.0 / v);
    } else {
      Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (s + s.adjoint()));
      VectorXd lam = es.eigenvalues();
      for (Index i = 0; i < m; ++i) {
        if (lam(i) == 0.0) lam(i) = -1e-300;
        if (lam(i) < 0.0) ++count;
      }
      sinv = es.eigenvectors() * lam.cwiseInverse().cast<cd>().asDiagonal() * es.eigenvectors().adjoint();
    }
  }
  return count;
}

}  // namespace outlierlab
