#include <gtest/gtest.h>

#include <cmath>

#include "outlierlab/experiment.hpp"
#include "outlierlab/fluctuations.hpp"
#include "outlierlab/limit_law.hpp"
#include "outlierlab/stats.hpp"

using namespace outlierlab;

namespace {

PerturbationMatrix identity_pm(const JordanSpec& spec) {
  Rng rng(0);
  return realize(spec, QMode{}, rng);
}

SpectralMeasure atom_uniform_measure() { return SpectralMeasure({{-1.0, 0.5}}, {}, {{1.0, 2.0, 0.5}}); }

bool within(double est, double se, double target, double k) { return std::abs(est - target) <= k * se + 1e-12; }

}  // namespace

TEST(ResolventStatistic, DirectSummationOnDiagonalSample) {
  const auto mu = atom_uniform_measure();
  const auto sample = sample_uci(mu, 50, DiagonalMode::quantile, 1);
  Rng rng(2);
  const MatrixXcd u = sample_haar_isometry(50, 2, rng);
  const JordanSpec spec({JordanEntry{cd(4.0), {{1, 2}}}});
  const auto pm = identity_pm(spec);
  const ProjectedResolvent r(sample, u);
  const cd xi(3.1, 0.4), theta(4.0);
  const MatrixXcd m = resolvent_statistic(r, pm, xi, theta);
  const VectorXd d = sample.diagonal_entries();
  for (Index k = 0; k < 2; ++k)
    for (Index l = 0; l < 2; ++l) {
      cd s = 0.0;
      for (Index a = 0; a < 50; ++a) s += std::conj(u(a, k)) * u(a, l) / (xi - d(a));
      const cd expect = std::sqrt(50.0) * (s - (k == l ? 1.0 / theta : 0.0));
      EXPECT_LT(std::abs(m(k, l) - expect), 1e-12);
    }
  EXPECT_THROW(resolvent_statistic(r, pm, cd(d(10), 0.0), theta), DomainError);
}

TEST(ResolventStatistic, GueVarianceAndCentering) {
  const double xi = 2.5;
  const auto pm = identity_pm(JordanSpec({JordanEntry{cd(2.0), {{1, 2}}}}));
  std::vector<double> diag, off_re, off_im;
  for (std::uint64_t t = 0; t < 4000; ++t) {
    const auto s = sample_wigner_banded({}, 1000, 2, 1000 + t);
    const ProjectedResolvent r(s, MatrixXcd::Identity(1000, 2));
    const MatrixXcd m = resolvent_statistic(r, pm, xi, 2.0);
    diag.push_back(std::norm(m(0, 0)));
    off_re.push_back(m(0, 1).real());
    off_im.push_back(m(0, 1).imag());
  }
  const double phi = 1.0 / 3.0 - 0.25;  // int (xi - x)^-2 dmu_sc - G(xi)^2 at xi = 2.5
  EXPECT_NEAR(covariance_kernel_phi(SpectralMeasure::semicircle(1.0), xi, xi).real(), phi, 1e-10);
  // Second moment of the diagonal entry; its mean is O(N^{-1/2}).
  EXPECT_TRUE(within(stats::mean(diag), stats::std_error(diag), phi, 4.0)) << stats::mean(diag);
  EXPECT_TRUE(within(stats::mean(off_re), stats::std_error(off_re), 0.0, 3.0));
  EXPECT_TRUE(within(stats::mean(off_im), stats::std_error(off_im), 0.0, 3.0));
}

TEST(RescaleCluster, SingleBlockAndTieBreak) {
  const JordanEntry one{cd(2.0), {{1, 1}}};
  const auto s = rescale_cluster({cd(2.53, 0.01)}, 2.5, one, 400);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_LT(std::abs(s[0].lambda[0] - 20.0 * cd(0.03, 0.01)), 1e-12);
  EXPECT_THROW(rescale_cluster({2.4, 2.6}, 2.5, one, 400), SkipTrial);

  const JordanEntry two{cd(2.0), {{2, 1}, {1, 1}}};
  const std::vector<cd> eq = {cd(0.5), cd(0.0, 0.5), cd(-0.5)};
  const auto t = rescale_cluster(eq, 0.0, two, 100);
  ASSERT_EQ(t[0].deviations.size(), 2u);
  EXPECT_EQ(t[0].deviations[0], cd(0.5));
  EXPECT_EQ(t[0].deviations[1], cd(0.0, 0.5));
  EXPECT_EQ(t[1].deviations[0], cd(-0.5));
}

TEST(RescaleCluster, SeparatedClassesAreNeverMisassigned) {
  const JordanEntry e{cd(1.5, 2.0), {{5, 1}, {3, 1}}};
  Rng rng(4);
  for (Index n : {250, 1000, 5000, 20000}) {
    for (int trial = 0; trial < 200; ++trial) {
      const double big = std::pow(static_cast<double>(n), -0.1);
      const double small = big / (4.0 + 4.0 * uniform01(rng));
      std::vector<cd> cl;
      for (int k = 0; k < 5; ++k) cl.push_back(std::polar(big * (1.0 + 0.3 * uniform01(rng)), 6.2832 * uniform01(rng)));
      for (int k = 0; k < 3; ++k) cl.push_back(std::polar(small * (1.0 + 0.3 * uniform01(rng)) / 1.3, 6.2832 * uniform01(rng)));
      const auto s = rescale_cluster(cl, 0.0, e, n);
      for (const cd& d : s[0].deviations) EXPECT_GE(std::abs(d), big);
      for (const cd& d : s[1].deviations) EXPECT_LT(std::abs(d), big);
      EXPECT_NEAR(std::abs(s[1].lambda[0]) / std::abs(s[1].deviations[0]), std::pow(static_cast<double>(n), 1.0 / 6.0),
                  1e-9);
    }
  }
}

TEST(EstimateRate, SyntheticSlopeAndPreconditions) {
  const std::vector<Index> ns = {250, 1000, 4000};
  std::vector<double> dev;
  for (Index n : ns) dev.push_back(std::pow(static_cast<double>(n), -0.25));
  const auto fit = estimate_rate(ns, dev);
  EXPECT_NEAR(fit.slope, -0.25, 1e-12);
  EXPECT_NEAR(fit.std_error, 0.0, 1e-10);
  EXPECT_THROW(estimate_rate({250, 1000}, {0.1, 0.05}), InsufficientData);
  EXPECT_THROW(estimate_rate({250, 500, 1000}, {0.1, 0.07, 0.05}), InsufficientData);
}

TEST(Polygon, ExactRootsAndCountCheck) {
  for (int p : {1, 3, 5}) {
    std::vector<cd> roots;
    for (int k = 0; k < p; ++k) roots.push_back(std::polar(0.7, 0.3 + 2.0 * kPi * k / p));
    const auto s = polygon_statistics({roots, roots}, p);
    EXPECT_NEAR(s.gap_mean, 2.0 * kPi / p, 1e-12);
    EXPECT_NEAR(s.gap_std, 0.0, 1e-12);
    EXPECT_NEAR(s.radius_cv, 0.0, 1e-12);
  }
  EXPECT_THROW(polygon_statistics({{1.0, -1.0}}, 3), InvalidArgument);
  const auto sh = cluster_shape({std::polar(2.0, 0.1), std::polar(8.0, 1.0)});
  EXPECT_NEAR(sh.modulus, 4.0, 1e-12);
  EXPECT_NEAR(sh.arg, 1.1, 1e-12);
}

TEST(LimitLaw, SingleBlockDrawsAreRegularPolygons) {
  const JordanSpec spec({JordanEntry{cd(1.5, 2.0), {{5, 1}}}, JordanEntry{cd(-2.0, 1.5), {{3, 1}}}});
  const auto sc = SpectralMeasure::semicircle(1.0);
  std::vector<std::vector<cd>> xis;
  for (const auto& e : spec.entries()) xis.push_back(solve_outlier_set(sc, e.theta).solutions);
  LimitLawSampler sampler(Kernel::gue(1.0), identity_pm(spec), xis);
  Rng rng(5);
  std::vector<std::vector<cd>> five, three;
  for (int t = 0; t < 200; ++t)
    for (const auto& b : sampler.sample(rng)) (b.p == 5 ? five : three).push_back(b.lambda);
  const auto s5 = polygon_statistics(five, 5);
  const auto s3 = polygon_statistics(three, 3);
  EXPECT_NEAR(s5.gap_std, 0.0, 1e-9);
  EXPECT_NEAR(s5.radius_cv, 0.0, 1e-9);
  EXPECT_NEAR(s3.gap_std, 0.0, 1e-9);
}

TEST(LimitLaw, GueSpikeVarianceMatchesClosedForm) {
  // For sigma = 1, theta = 2 the outlier fluctuation sqrt(N)(lambda - xi) has
  // variance 1 - 1/theta^2 in the complex case.
  const JordanSpec spec({JordanEntry{cd(2.0), {{1, 1}}}});
  LimitLawSampler sampler(Kernel::gue(1.0), identity_pm(spec), {{cd(2.5)}});
  Rng rng(6);
  std::vector<double> sq, im;
  for (int t = 0; t < 100000; ++t) {
    const auto b = sampler.sample(rng);
    sq.push_back(std::norm(b[0].lambda[0]));
    im.push_back(std::abs(b[0].lambda[0].imag()));
  }
  EXPECT_TRUE(within(stats::mean(sq), stats::std_error(sq), 0.75, 4.0)) << stats::mean(sq);
  EXPECT_LT(*std::max_element(im.begin(), im.end()), 1e-10);
}

TEST(LimitLaw, HermitianPerturbationGivesHermitianM) {
  const JordanSpec spec({JordanEntry{cd(2.0), {{1, 3}}}, JordanEntry{cd(-3.0), {{1, 2}}}});
  auto pm = identity_pm(spec);
  Rng qrng(7);
  pm.Q = sample_haar_isometry(5, 5, qrng);
  pm.Qinv = pm.Q.adjoint();
  pm.A0 = pm.Q * pm.J * pm.Qinv;
  const auto sc = SpectralMeasure::semicircle(1.0);
  std::vector<std::vector<cd>> xis;
  for (const auto& e : spec.entries()) xis.push_back(solve_outlier_set(sc, e.theta).solutions);
  for (const Kernel& k : {Kernel::gue(1.0), Kernel::goe(1.0)}) {
    LimitLawSampler sampler(k, pm, xis);
    Rng rng(8);
    for (int t = 0; t < 200; ++t)
      for (const auto& b : sampler.sample(rng)) {
        EXPECT_LT((b.M - b.M.adjoint()).cwiseAbs().maxCoeff(), 1e-10 * (1.0 + b.M.cwiseAbs().maxCoeff()));
        for (const cd& z : b.lambda) EXPECT_LT(std::abs(z.imag()), 1e-8);
      }
  }
}

TEST(LimitLaw, SamplerReproducesItsCovariance) {
  const auto mu = atom_uniform_measure();
  const JordanSpec spec({JordanEntry{cd(4.0), {{1, 1}}}, JordanEntry{cd(-2.0), {{1, 1}}}});
  const auto pm = identity_pm(spec);
  std::vector<std::vector<cd>> xis;
  for (const auto& e : spec.entries()) xis.push_back(solve_outlier_set(mu, e.theta).solutions);
  ASSERT_EQ(xis[0].size(), 2u);
  ASSERT_EQ(xis[1].size(), 2u);

  const JordanSpec blocks({JordanEntry{cd(1.5, 2.0), {{2, 1}, {1, 1}}}});
  Rng qrng(9);
  const auto gpm = realize(blocks, QMode{QMode::Kind::ginibre, 20.0}, qrng);
  const auto sc = SpectralMeasure::semicircle(1.0);
  const std::vector<std::vector<cd>> gxis = {solve_outlier_set(sc, cd(1.5, 2.0)).solutions};

  const std::vector<std::pair<Kernel, std::pair<PerturbationMatrix, std::vector<std::vector<cd>>>>> cases = {
      {Kernel::uci(mu), {pm, xis}}, {Kernel::gue(1.0), {gpm, gxis}}, {Kernel::goe(1.0), {gpm, gxis}}};
  for (const auto& [kernel, setup] : cases) {
    const LimitLawSampler sampler(kernel, setup.first, setup.second);
    Rng rng(10);
    std::vector<VectorXcd> draws;
    for (int t = 0; t < 100000; ++t) draws.push_back(sampler.sample_m(rng));
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < sampler.variables().size(); ++i) labels.push_back(std::to_string(i));
    for (const auto& row : covariance_comparison(draws, sampler.covariance(), sampler.pseudo_covariance(), labels))
      EXPECT_LT(std::abs(row.z), 4.0) << row.name << " " << row.empirical << " vs " << row.theoretical;
  }
}

TEST(LimitLaw, SameSetXisAreCorrelated) {
  const auto mu = atom_uniform_measure();
  const auto pred = solve_outlier_set(mu, 4.0);
  ASSERT_EQ(pred.solutions.size(), 2u);
  const cd phi = Kernel::uci(mu).scalar(pred.solutions[0], std::conj(pred.solutions[1]));
  EXPECT_GT(std::abs(phi), 1e-3);
  EXPECT_LT(std::abs(phi - covariance_kernel_phi(mu, pred.solutions[0], std::conj(pred.solutions[1]))), 1e-14);
}

TEST(Fluctuations, EmpiricalSpikeVarianceMatchesLimitSampler) {
  ExperimentConfig cfg;
  cfg.n_grid = {2000};
  cfg.trials = 400;
  cfg.delta = 0.2;
  cfg.master_seed = 21;
  const Experiment ex(cfg);
  std::vector<double> sq;
  for (const auto& o : ex.run(2000)) {
    ASSERT_TRUE(o.ok) << o.error;
    const auto& cl = o.result.report.clusters;
    if (cl.size() != 1 || cl[0].members.size() != 1) continue;
    sq.push_back(std::norm(std::sqrt(2000.0) * (cl[0].members[0] - cl[0].xi)));
  }
  ASSERT_GE(sq.size(), 380u);
  EXPECT_TRUE(within(stats::mean(sq), stats::std_error(sq), 0.75, 4.0)) << stats::mean(sq);
}
