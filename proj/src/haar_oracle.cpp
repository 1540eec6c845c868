#include "outlierlab/haar_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "outlierlab/ensembles.hpp"

namespace outlierlab {

Permutation identity_permutation(int q) {
  Permutation s(static_cast<std::size_t>(q));
  std::iota(s.begin(), s.end(), 0);
  return s;
}

Permutation compose(const Permutation& a, const Permutation& b) {
  if (a.size() != b.size()) throw InvalidArgument("permutation sizes differ");
  Permutation r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[static_cast<std::size_t>(b[i])];
  return r;
}

Permutation inverse(const Permutation& s) {
  Permutation r(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) r[static_cast<std::size_t>(s[i])] = static_cast<int>(i);
  return r;
}

std::vector<std::vector<int>> cycles(const Permutation& s) {
  std::vector<std::vector<int>> out;
  std::vector<bool> seen(s.size(), false);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (seen[i]) continue;
    std::vector<int> c;
    for (int j = static_cast<int>(i); !seen[static_cast<std::size_t>(j)]; j = s[static_cast<std::size_t>(j)]) {
      seen[static_cast<std::size_t>(j)] = true;
      c.push_back(j);
    }
    out.push_back(std::move(c));
  }
  return out;
}

int cycle_count(const Permutation& s) { return static_cast<int>(cycles(s).size()); }

std::vector<int> cycle_type(const Permutation& s) {
  std::vector<int> t;
  for (const auto& c : cycles(s)) t.push_back(static_cast<int>(c.size()));
  std::sort(t.rbegin(), t.rend());
  return t;
}

Permutation from_cycles(int q, const std::vector<std::vector<int>>& one_based) {
  Permutation s = identity_permutation(q);
  std::vector<bool> used(static_cast<std::size_t>(q), false);
  for (const auto& c : one_based) {
    if (c.empty()) throw InvalidArgument("empty cycle");
    for (std::size_t i = 0; i < c.size(); ++i) {
      const int a = c[i] - 1;
      if (a < 0 || a >= q || used[static_cast<std::size_t>(a)]) throw InvalidArgument("malformed cycle decomposition");
      used[static_cast<std::size_t>(a)] = true;
      s[static_cast<std::size_t>(a)] = c[(i + 1) % c.size()] - 1;
    }
  }
  return s;
}

std::vector<Permutation> all_permutations(int q) {
  std::vector<Permutation> out;
  Permutation s = identity_permutation(q);
  do {
    out.push_back(s);
  } while (std::next_permutation(s.begin(), s.end()));
  return out;
}

cd trace_sigma(const Permutation& s, const std::vector<MatrixXcd>& m) {
  if (m.size() != s.size()) throw InvalidArgument("one matrix per permuted index is required");
  for (const auto& x : m)
    if (x.rows() != m.front().rows() || x.cols() != x.rows()) throw InvalidArgument("matrices must be square of equal size");
  cd result = 1.0;
  for (const auto& c : cycles(s)) {
    if (c.size() == 1) {
      result *= m[static_cast<std::size_t>(c[0])].trace();
      continue;
    }
    MatrixXcd prod = m[static_cast<std::size_t>(c[0])];
    for (std::size_t i = 1; i + 1 < c.size(); ++i) prod = prod * m[static_cast<std::size_t>(c[i])];
    // Tr(X Y) without forming X Y.
    const MatrixXcd& last = m[static_cast<std::size_t>(c.back())];
    result *= (prod.array() * last.transpose().array()).sum();
  }
  return result;
}

cd trace_sigma(const PermutationTrace& pt) {
  const int q = static_cast<int>(pt.matrices.size());
  std::size_t covered = 0;
  for (const auto& c : pt.cycles) covered += c.size();
  if (covered != static_cast<std::size_t>(q)) throw InvalidArgument("cycles must cover every index exactly once");
  return trace_sigma(from_cycles(q, pt.cycles), pt.matrices);
}

std::vector<Permutation> perfect_matchings(int n2) {
  if (n2 < 0 || n2 % 2 != 0) throw InvalidArgument("perfect matchings need an even size");
  std::vector<Permutation> out;
  Permutation cur = identity_permutation(n2);
  std::vector<bool> used(static_cast<std::size_t>(n2), false);
  auto rec = [&](auto&& self) -> void {
    int first = -1;
    for (int i = 0; i < n2; ++i)
      if (!used[static_cast<std::size_t>(i)]) {
        first = i;
        break;
      }
    if (first < 0) {
      out.push_back(cur);
      return;
    }
    used[static_cast<std::size_t>(first)] = true;
    for (int j = first + 1; j < n2; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      used[static_cast<std::size_t>(j)] = true;
      cur[static_cast<std::size_t>(first)] = j;
      cur[static_cast<std::size_t>(j)] = first;
      self(self);
      cur[static_cast<std::size_t>(j)] = j;
      used[static_cast<std::size_t>(j)] = false;
    }
    cur[static_cast<std::size_t>(first)] = first;
    used[static_cast<std::size_t>(first)] = false;
  };
  rec(rec);
  return out;
}

double WeingartenTable::operator()(const Permutation& s) const {
  for (std::size_t i = 0; i < perms.size(); ++i)
    if (perms[i] == s) return values(static_cast<Index>(i));
  throw InvalidArgument("permutation outside the table");
}

std::map<std::vector<int>, double> WeingartenTable::by_class() const {
  std::map<std::vector<int>, double> out;
  for (std::size_t i = 0; i < perms.size(); ++i) out[cycle_type(perms[i])] = values(static_cast<Index>(i));
  return out;
}

WeingartenTable weingarten(int q, Index n) {
  if (q < 1 || q > 4) throw InvalidArgument("q must lie in [1, 4]");
  if (n < q) throw SingularGram("Gram matrix is singular for N < q");
  WeingartenTable t;
  t.q = q;
  t.n = n;
  t.perms = all_permutations(q);
  const Index m = static_cast<Index>(t.perms.size());
  MatrixXd g(m, m);
  for (Index a = 0; a < m; ++a)
    for (Index b = 0; b < m; ++b)
      g(a, b) = std::pow(static_cast<double>(n),
                         cycle_count(compose(t.perms[static_cast<std::size_t>(a)], inverse(t.perms[static_cast<std::size_t>(b)]))));
  Eigen::FullPivLU<MatrixXd> lu(g);
  if (!lu.isInvertible()) throw SingularGram("Gram matrix is singular");
  const MatrixXd w = lu.inverse();
  t.gram_residual = (g * w - MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
  // W(s, t) = Wg(s t^{-1}); the column of the identity (index 0) gives Wg(s).
  t.values = w.col(0);
  return t;
}

cd haar_moment_exact(const std::vector<MatrixXcd>& t, const std::vector<MatrixXcd>& a) {
  const int q = static_cast<int>(t.size());
  if (a.size() != t.size() || q == 0) throw InvalidArgument("T and A lists must have equal nonzero length");
  const Index n = t.front().rows();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i].rows() != n || t[i].cols() != n || a[i].rows() != n || a[i].cols() != n)
      throw InvalidArgument("all matrices must be N x N");
  const WeingartenTable wg = weingarten(q, n);
  const auto& perms = wg.perms;
  std::vector<cd> tr_t, tr_a_inv;
  for (const auto& s : perms) {
    tr_t.push_back(trace_sigma(s, t));
    tr_a_inv.push_back(trace_sigma(inverse(s), a));
  }
  cd sum = 0.0;
  for (std::size_t i = 0; i < perms.size(); ++i)
    for (std::size_t j = 0; j < perms.size(); ++j)
      sum += wg(compose(perms[i], inverse(perms[j]))) * tr_t[i] * tr_a_inv[j];
  return std::pow(static_cast<double>(n), q / 2.0) * sum;
}

cd haar_moment_draw(const std::vector<MatrixXcd>& t, const std::vector<MatrixXcd>& a, Rng& rng) {
  const Index n = t.front().rows();
  const MatrixXcd u = sample_haar_isometry(n, n, rng);
  cd prod = 1.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const MatrixXcd b = u.adjoint() * t[i] * u;
    prod *= std::sqrt(static_cast<double>(n)) * (b.array() * a[i].transpose().array()).sum();
  }
  return prod;
}

std::vector<std::vector<MatrixXcd>> bilinear_fluctuation_samples(const std::vector<MatrixXcd>& t, Index p, Index n,
                                                                 Index trials, Rng& rng) {
  for (const auto& m : t)
    if (m.rows() != n || m.cols() != n) throw InvalidArgument("T matrices must be N x N");
  std::vector<std::vector<MatrixXcd>> out;
  out.reserve(static_cast<std::size_t>(trials));
  const double s = std::sqrt(static_cast<double>(n));
  for (Index k = 0; k < trials; ++k) {
    const MatrixXcd u = sample_haar_isometry(n, p, rng);
    std::vector<MatrixXcd> row;
    for (const auto& m : t) row.push_back(s * u.adjoint() * m * u);
    out.push_back(std::move(row));
  }
  return out;
}

namespace {

struct MomentKey {
  std::vector<int> p, q;
  bool operator<(const MomentKey& o) const { return std::tie(p, q) < std::tie(o.p, o.q); }
};

cd wick(const MatrixXcd& c, const MatrixXcd& pc, std::vector<int> p, std::vector<int> q, std::map<MomentKey, cd>& memo) {
  const std::size_t n = p.size();
  int total = 0;
  for (std::size_t i = 0; i < n; ++i) total += p[i] + q[i];
  if (total == 0) return 1.0;
  if (total % 2) return 0.0;
  const MomentKey key{p, q};
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  cd r = 0.0;
  std::size_t i = n;
  for (std::size_t k = 0; k < n && i == n; ++k)
    if (p[k] > 0) i = k;
  if (i < n) {
    --p[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (p[j] > 0) {
        auto pp = p;
        --pp[j];
        r += static_cast<double>(p[j]) * pc(static_cast<Index>(i), static_cast<Index>(j)) * wick(c, pc, pp, q, memo);
      }
      if (q[j] > 0) {
        auto qq = q;
        --qq[j];
        r += static_cast<double>(q[j]) * c(static_cast<Index>(i), static_cast<Index>(j)) * wick(c, pc, p, qq, memo);
      }
    }
  } else {
    for (std::size_t k = 0; k < n && i == n; ++k)
      if (q[k] > 0) i = k;
    --q[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (p[j] > 0) {
        auto pp = p;
        --pp[j];
        r += static_cast<double>(p[j]) * c(static_cast<Index>(j), static_cast<Index>(i)) * wick(c, pc, pp, q, memo);
      }
      if (q[j] > 0) {
        auto qq = q;
        --qq[j];
        r += static_cast<double>(q[j]) * std::conj(pc(static_cast<Index>(i), static_cast<Index>(j))) *
             wick(c, pc, p, qq, memo);
      }
    }
  }
  memo[key] = r;
  return r;
}

GaussianMomentRow moment_row(const std::string& name, cd theory, const std::vector<cd>& vals) {
  const double n = static_cast<double>(vals.size());
  cd m = 0.0;
  for (const cd& v : vals) m += v;
  m /= n;
  double ss = 0.0;
  for (const cd& v : vals) ss += std::norm(v - m);
  const double se = std::sqrt(ss / (n - 1.0) / n);
  return {name, theory, m, se, se > 0.0 ? std::abs(m - theory) / se : 0.0};
}

}  // namespace

cd gaussian_moment(const MatrixXcd& c, const MatrixXcd& p, const std::vector<int>& powers,
                   const std::vector<int>& conj_powers) {
  if (powers.size() != conj_powers.size() || static_cast<Index>(powers.size()) != c.rows())
    throw InvalidArgument("power vectors must match the covariance size");
  std::map<MomentKey, cd> memo;
  return wick(c, p, powers, conj_powers, memo);
}

std::vector<GaussianMomentRow> gaussian_moment_check(const std::vector<cd>& z, double sigma2, cd tau2,
                                                     std::size_t min_samples) {
  if (z.size() < std::max<std::size_t>(min_samples, 2)) throw InsufficientData("too few samples for moment checks");
  auto collect = [&](auto fn) {
    std::vector<cd> v;
    v.reserve(z.size());
    for (const cd& x : z) v.push_back(fn(x));
    return v;
  };
  auto mono = [](cd x, int p, int q) { return std::pow(x, p) * std::pow(std::conj(x), q); };
  std::vector<GaussianMomentRow> rows;
  rows.push_back(moment_row("E[Z]", 0.0, collect([](cd x) { return x; })));
  rows.push_back(moment_row("E[Z^2]", tau2, collect([](cd x) { return x * x; })));
  rows.push_back(moment_row("E[|Z|^2]", sigma2, collect([](cd x) { return cd(std::norm(x)); })));
  rows.push_back(moment_row("E[Z^4]", 3.0 * tau2 * tau2, collect([](cd x) { return x * x * x * x; })));
  rows.push_back(moment_row("E[|Z|^4]", 2.0 * sigma2 * sigma2 + std::norm(tau2),
                            collect([](cd x) { return cd(std::norm(x) * std::norm(x)); })));
  for (auto [p, q] : std::vector<std::pair<int, int>>{{0, 0}, {1, 0}, {0, 1}, {1, 1}}) {
    const std::string name = "recursion(p=" + std::to_string(p) + ",q=" + std::to_string(q) + ")";
    rows.push_back(moment_row(name, 0.0, collect([&](cd x) {
                                return mono(x, p + 2, q + 2) - sigma2 * (q + 2.0) * mono(x, p + 1, q + 1) -
                                       tau2 * (p + 1.0) * mono(x, p, q + 2);
                              })));
  }
  return rows;
}

std::vector<GaussianMomentRow> gaussian_pair_check(const std::vector<cd>& x, const std::vector<cd>& y,
                                                   const MatrixXcd& c, const MatrixXcd& p, std::size_t min_samples) {
  if (x.size() != y.size()) throw InvalidArgument("paired samples differ in length");
  if (x.size() < std::max<std::size_t>(min_samples, 2)) throw InsufficientData("too few samples for moment checks");
  struct Spec {
    const char* name;
    std::vector<int> pw, cpw;
  };
  const std::vector<Spec> specs = {
      {"E[X conj Y]", {1, 0}, {0, 1}},        {"E[X Y]", {1, 1}, {0, 0}},
      {"E[|X|^2 |Y|^2]", {1, 1}, {1, 1}},     {"E[X^2 conj(Y)^2]", {2, 0}, {0, 2}},
      {"E[X^2 Y^2]", {2, 2}, {0, 0}},         {"E[X^2 Y conj X]", {2, 1}, {1, 0}},
  };
  std::vector<GaussianMomentRow> rows;
  for (const auto& s : specs) {
    std::vector<cd> vals;
    vals.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      vals.push_back(std::pow(x[i], s.pw[0]) * std::pow(y[i], s.pw[1]) * std::pow(std::conj(x[i]), s.cpw[0]) *
                     std::pow(std::conj(y[i]), s.cpw[1]));
    rows.push_back(moment_row(s.name, gaussian_moment(c, p, s.pw, s.cpw), vals));
  }
  return rows;
}

}  // namespace outlierlab
