#include <gtest/gtest.h>

#include <cmath>

#include "outlierlab/ensembles.hpp"
#include "outlierlab/haar_oracle.hpp"
#include "outlierlab/stats.hpp"

using namespace outlierlab;

namespace {

MatrixXcd alternating(Index n) {
  MatrixXcd t = MatrixXcd::Zero(n, n);
  for (Index i = 0; i < n; ++i) t(i, i) = (i % 2 == 0) ? 1.0 : -1.0;
  return t;
}

MatrixXcd e11(Index n) {
  MatrixXcd a = MatrixXcd::Zero(n, n);
  a(0, 0) = 1.0;
  return a;
}

long double_factorial(int n) { return n <= 1 ? 1 : n * double_factorial(n - 2); }

}  // namespace

TEST(Permutations, CyclesAndComposition) {
  const auto s = from_cycles(6, {{1, 3}, {2, 5, 6}});
  EXPECT_EQ(cycles(s), (std::vector<std::vector<int>>{{0, 2}, {1, 4, 5}, {3}}));
  EXPECT_EQ(cycle_type(s), (std::vector<int>{3, 2, 1}));
  EXPECT_EQ(compose(s, inverse(s)), identity_permutation(6));
  EXPECT_EQ(all_permutations(4).size(), 24u);
  EXPECT_THROW(from_cycles(3, {{1, 1}}), InvalidArgument);
  EXPECT_THROW(from_cycles(3, {{1, 4}}), InvalidArgument);
}

TEST(TraceSigma, Examples) {
  const MatrixXcd i2 = MatrixXcd::Identity(2, 2);
  PermutationTrace pt{{{1, 3}, {2, 5, 6}, {4}}, std::vector<MatrixXcd>(6, i2)};
  EXPECT_EQ(trace_sigma(pt), cd(8.0));
  MatrixXcd m(2, 2);
  m << 1, 0, 0, -1;
  EXPECT_EQ(trace_sigma(identity_permutation(2), {m, m}), cd(0.0));
  EXPECT_EQ(trace_sigma(from_cycles(2, {{1, 2}}), {m, m}), cd(2.0));
}

TEST(PerfectMatchings, ListsAndCounts) {
  const auto m4 = perfect_matchings(4);
  ASSERT_EQ(m4.size(), 3u);
  std::set<Permutation> got(m4.begin(), m4.end());
  for (const auto& c : {std::vector<std::vector<int>>{{1, 2}, {3, 4}}, {{1, 3}, {2, 4}}, {{1, 4}, {2, 3}}})
    EXPECT_TRUE(got.count(from_cycles(4, c)));
  EXPECT_EQ(perfect_matchings(2), (std::vector<Permutation>{from_cycles(2, {{1, 2}})}));
  for (int n2 = 2; n2 <= 12; n2 += 2) {
    const auto m = perfect_matchings(n2);
    EXPECT_EQ(static_cast<long>(m.size()), double_factorial(n2 - 1));
    for (const auto& s : m) EXPECT_EQ(cycle_type(s), std::vector<int>(n2 / 2, 2));
  }
}

TEST(Weingarten, ClosedFormsAndClassConstancy) {
  EXPECT_NEAR(weingarten(1, 7)(identity_permutation(1)), 1.0 / 7.0, 1e-15);
  const auto w2 = weingarten(2, 10);
  EXPECT_NEAR(w2(identity_permutation(2)), 1.0 / 99.0, 1e-15);
  EXPECT_NEAR(w2(from_cycles(2, {{1, 2}})), -1.0 / 990.0, 1e-15);
  const auto w3 = weingarten(3, 9);
  const double t = w3(from_cycles(3, {{1, 2}}));
  EXPECT_NEAR(w3(from_cycles(3, {{1, 3}})), t, 1e-12 * std::abs(t));
  EXPECT_NEAR(w3(from_cycles(3, {{2, 3}})), t, 1e-12 * std::abs(t));
  for (int q = 1; q <= 4; ++q) EXPECT_LT(weingarten(q, 12).gram_residual, 1e-10);
  EXPECT_THROW(weingarten(3, 2), SingularGram);
}

TEST(Weingarten, LeadingExponentPerClass) {
  // Wg(s) ~ N^{-2q + #cycles(s)}. The exact q = 4 values carry factors
  // N^2 - k^2 for k <= 3, which steepen the local slope by ~0.7 at N = 8.
  const std::vector<Index> ns = {16, 32, 64, 128};
  for (int q = 2; q <= 4; ++q) {
    std::vector<WeingartenTable> tables;
    for (Index n : ns) tables.push_back(weingarten(q, n));
    for (const auto& [type, unused] : tables[0].by_class()) {
      std::vector<double> x, y;
      for (std::size_t i = 0; i < ns.size(); ++i) {
        x.push_back(std::log(static_cast<double>(ns[i])));
        y.push_back(std::log(std::abs(tables[i].by_class().at(type))));
      }
      const double slope = stats::least_squares(x, y).slope;
      EXPECT_NEAR(slope, -2.0 * q + static_cast<double>(type.size()), 0.1) << "q=" << q;
    }
  }
}

TEST(HaarMoment, ExactValues) {
  const Index n = 10;
  MatrixXcd t = MatrixXcd::Zero(n, n);
  t(0, 0) = 1.0;
  t(1, 1) = -1.0;
  EXPECT_LT(std::abs(haar_moment_exact({t}, {e11(n)})), 1e-15);
  // q = 2: two Weingarten classes give 10 * (2/99 - 2/990) = 2/11.
  EXPECT_NEAR(std::abs(haar_moment_exact({t, t}, {e11(n), e11(n)}) - 2.0 / 11.0), 0.0, 1e-12);

  const Index big = 200;
  const MatrixXcd tb = alternating(big);
  EXPECT_NEAR(haar_moment_exact({tb, tb}, {e11(big), e11(big)}).real(), 1.0, 0.01);
  // Four-fold: three matchings, each (Tr A^2)^2 = 1 with (1/N) Tr T^2 = 1.
  const auto four = haar_moment_exact({tb, tb, tb, tb}, std::vector<MatrixXcd>(4, e11(big)));
  EXPECT_NEAR(four.real(), 3.0, 0.15);
}

TEST(HaarMoment, OddTracelessMomentsVanish) {
  // |E| <= C N^{-1/2}: sqrt(N) |E| levels off while |E| itself decays.
  std::vector<double> v, scaled;
  for (Index n : {24, 48, 96, 192}) {
    // Traceless with Tr T^3 = 2N, so the third moment is not identically zero.
    MatrixXcd t = MatrixXcd::Zero(n, n);
    for (Index i = 0; i < n; ++i) t(i, i) = (i % 3 == 0) ? 2.0 : -1.0;
    MatrixXcd a = MatrixXcd::Zero(n, n);
    a(0, 0) = 1.0;
    a(1, 1) = 0.5;
    v.push_back(std::abs(haar_moment_exact({t, t, t}, {a, a, a})));
    scaled.push_back(std::sqrt(static_cast<double>(n)) * v.back());
  }
  for (std::size_t i = 1; i < v.size(); ++i) EXPECT_LT(v[i], v[i - 1]);
  EXPECT_LT(scaled.back() / scaled[scaled.size() - 2], 1.05);
  EXPECT_LT(*std::max_element(scaled.begin(), scaled.end()), 5.0);
}

TEST(HaarMoment, ExactAgreesWithMonteCarlo) {
  const Index n = 10;
  MatrixXcd t = MatrixXcd::Zero(n, n);
  t(0, 0) = 1.0;
  t(1, 1) = -1.0;
  const std::vector<MatrixXcd> ts = {t, t}, as = {e11(n), e11(n)};
  const cd exact = haar_moment_exact(ts, as);
  Rng rng(1);
  std::vector<double> re;
  for (int i = 0; i < 1000000; ++i) re.push_back(haar_moment_draw(ts, as, rng).real());
  EXPECT_LT(std::abs(stats::mean(re) - exact.real()), 4.0 * stats::std_error(re));
}

TEST(Bilinear, CovarianceStructure) {
  const Index n = 200;
  Rng rng(2);
  const auto samples = bilinear_fluctuation_samples({alternating(n)}, 2, n, 10000, rng);
  std::vector<cd> g12, g11;
  for (const auto& s : samples) {
    g12.push_back(s[0](0, 1));
    g11.push_back(s[0](0, 0));
  }
  // Off-diagonal entry: sigma^2 = 1, tau^2 = E[G12 G12] = 0.
  for (const auto& row : gaussian_moment_check(g12, 1.0, 0.0)) EXPECT_LT(row.z, 4.0) << row.name;
  // Diagonal entry of a real T is real: sigma^2 = tau^2 = 1.
  for (const auto& row : gaussian_moment_check(g11, 1.0, 1.0)) EXPECT_LT(row.z, 4.0) << row.name;
}

TEST(GaussianMoments, WickRecursion) {
  MatrixXcd c(1, 1), p(1, 1);
  c << 1.7;
  p << cd(0.4, 0.9);
  const double s2 = 1.7;
  const cd t2(0.4, 0.9);
  EXPECT_LT(std::abs(gaussian_moment(c, p, {4}, {0}) - 3.0 * t2 * t2), 1e-12);
  EXPECT_LT(std::abs(gaussian_moment(c, p, {2}, {2}) - (2.0 * s2 * s2 + std::norm(t2))), 1e-12);
  EXPECT_LT(std::abs(gaussian_moment(c, p, {3}, {0})), 1e-15);
  // E[Z^{p+2} conj Z^{q+2}] = sigma^2 (q+2) E[Z^{p+1} conj Z^{q+1}] + tau^2 (p+1) E[Z^p conj Z^{q+2}]
  for (int a = 0; a <= 2; ++a)
    for (int b = 0; b <= 2; ++b) {
      const cd lhs = gaussian_moment(c, p, {a + 2}, {b + 2});
      const cd rhs = s2 * double(b + 2) * gaussian_moment(c, p, {a + 1}, {b + 1}) +
                     t2 * double(a + 1) * gaussian_moment(c, p, {a}, {b + 2});
      EXPECT_LT(std::abs(lhs - rhs), 1e-10 * (1.0 + std::abs(lhs)));
    }
}

TEST(GaussianMoments, SyntheticSamples) {
  Rng rng(3);
  std::vector<cd> complex_g, real_g;
  for (int i = 0; i < 20000; ++i) {
    complex_g.push_back(complex_normal(rng, 1.0));
    real_g.push_back(standard_normal(rng));
  }
  for (const auto& row : gaussian_moment_check(complex_g, 1.0, 0.0)) EXPECT_LT(row.z, 4.0) << row.name;
  for (const auto& row : gaussian_moment_check(real_g, 1.0, 1.0)) EXPECT_LT(row.z, 4.0) << row.name;
  EXPECT_THROW(gaussian_moment_check(std::vector<cd>(10, 0.0), 1.0, 0.0), InsufficientData);
}

TEST(ExactIdentities, ResolventExpansion) {
  const MatrixXcd i3 = MatrixXcd::Identity(3, 3);
  EXPECT_LT(resolvent_expansion_check(i3, 1.0, 3), 1e-15);
  EXPECT_LT(resolvent_expansion_check(i3, 1.0, 1), 1e-15);
  Rng rng(4);
  MatrixXcd a = MatrixXcd::Identity(5, 5) * 3.0;
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j) a(i, j) += complex_normal(rng, 0.2);
  EXPECT_LT(resolvent_expansion_check(a, 0.3, 5), 1e-10);
  EXPECT_THROW(resolvent_expansion_check(i3, -1.0, 2), SingularInput);

  // Real scalars and unevaluated expressions go through the same template.
  MatrixXd r(2, 2);
  r << 2.0, 1.0, 0.0, 3.0;
  EXPECT_LT(resolvent_expansion_check(r, 0.5, 4), 1e-14);
  EXPECT_LT(resolvent_expansion_check(r.transpose() + MatrixXd::Identity(2, 2), -0.25, 2), 1e-14);
}

TEST(ExactIdentities, SchurInverse) {
  MatrixXcd a(1, 1), b(1, 1), c(1, 1), d(1, 1);
  a << 2.0;
  b << 1.0;
  c << 3.0;
  d << 4.0;
  EXPECT_LT(schur_inverse_check(a, b, c, d), 1e-15);
  Rng rng(5);
  auto random = [&](Index r, Index s, double shift) {
    MatrixXcd m(r, s);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < s; ++j) m(i, j) = complex_normal(rng, 1.0) + (i == j ? shift : 0.0);
    return m;
  };
  EXPECT_LT(schur_inverse_check(random(2, 2, 4.0), MatrixXcd::Zero(2, 4), MatrixXcd::Zero(4, 2), random(4, 4, 4.0)),
            1e-12);
  EXPECT_LT(schur_inverse_check(random(2, 2, 4.0), random(2, 4, 0.0), random(4, 2, 0.0), random(4, 4, 4.0)), 1e-10);
  EXPECT_THROW(schur_inverse_check(a, b, c, MatrixXcd::Zero(1, 1)), SingularInput);

  MatrixXd ra(1, 1), rb(1, 2), rc(2, 1);
  ra << 5.0;
  rb << 1.0, 2.0;
  rc << 0.5, -1.0;
  EXPECT_LT(schur_inverse_check(ra, rb, rc, 3.0 * MatrixXd::Identity(2, 2)), 1e-14);
}
