#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "outlierlab/experiment.hpp"
#include "outlierlab/outliers.hpp"
#include "outlierlab/resolvent.hpp"

using namespace outlierlab;

namespace {

struct Setup {
  EnsembleSample sample;
  PerturbationMatrix pm;
  EmbeddedPerturbation ep;
};

Setup wigner_setup(const JordanSpec& spec, Index n, std::uint64_t seed, EmbedMode mode = EmbedMode::canonical,
                   QMode q = {}) {
  Rng rng(seed);
  auto pm = realize(spec, q, rng);
  auto ep = embed(pm, n, mode, rng);
  return {sample_wigner({}, n, seed), pm, ep};
}

std::vector<cd> exterior(const std::vector<cd>& eigs, const SpectralMeasure& mu, double delta) {
  std::vector<cd> out;
  for (const cd& z : eigs)
    if (support_distance(mu, z) > delta) out.push_back(z);
  return out;
}

double nearest(const std::vector<cd>& v, cd z) {
  double best = 1e300;
  for (const cd& x : v) best = std::min(best, std::abs(x - z));
  return best;
}

JordanSpec pentagon_triangle_spec() {
  return JordanSpec({JordanEntry{cd(1.5, 2.0), {{5, 1}}}, JordanEntry{cd(-2.0, 1.5), {{3, 1}}}});
}

SpectralMeasure outnumbering_measure() { return SpectralMeasure({{-1.0, 0.4}, {1.0, 0.4}}, {{0.0, 1.0, 0.2}}, {}); }

}  // namespace

TEST(DenseSpectrum, ZeroPerturbationAndTrace) {
  auto s = wigner_setup(JordanSpec({JordanEntry{cd(2.0), {{1, 1}}}}), 80, 1);
  s.ep.a0.setZero();
  auto eigs = perturbed_spectrum_dense(s.sample, s.ep);
  std::sort(eigs.begin(), eigs.end(), [](cd a, cd b) { return a.real() < b.real(); });
  for (Index i = 0; i < 80; ++i) EXPECT_NEAR(std::abs(eigs[static_cast<std::size_t>(i)] - s.sample.eigvals()(i)), 0.0, 1e-8);

  auto t = wigner_setup(pentagon_triangle_spec(), 120, 2, EmbedMode::canonical, {QMode::Kind::ginibre, 20.0});
  cd sum = 0.0;
  for (const cd& z : perturbed_spectrum_dense(t.sample, t.ep)) sum += z;
  EXPECT_LT(std::abs(sum - (t.sample.trace() + t.ep.a0.trace())), 1e-6 * 120);
}

TEST(DenseSpectrum, NilpotentFreeTriangularCase) {
  Rng rng(3);
  const auto pm = realize(JordanSpec({JordanEntry{cd(3.0), {{2, 1}}}}), QMode{}, rng);
  const auto ep = embed(pm, 10, EmbedMode::canonical, rng);
  const auto zero = EnsembleSample::dense(MatrixXcd::Zero(10, 10), {});
  const auto eigs = perturbed_spectrum_dense(zero, ep);
  const auto threes = std::count_if(eigs.begin(), eigs.end(), [](cd z) { return std::abs(z - 3.0) < 1e-6; });
  const auto zeros = std::count_if(eigs.begin(), eigs.end(), [](cd z) { return std::abs(z) < 1e-12; });
  EXPECT_EQ(threes, 2);
  EXPECT_EQ(zeros, 8);
}

TEST(DenseSpectrum, SingleSpikeNearTwoPointFive) {
  const auto s = wigner_setup(JordanSpec({JordanEntry{cd(2.0), {{1, 1}}}}), 200, 4);
  const auto out = exterior(perturbed_spectrum_dense(s.sample, s.ep), SpectralMeasure::semicircle(1.0), 0.2);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_LT(std::abs(out[0] - 2.5), 0.2);
}

TEST(CharacteristicF, Examples) {
  auto s = wigner_setup(JordanSpec({JordanEntry{cd(2.0), {{1, 1}}}}), 150, 5);
  const ProjectedResolvent r(s.sample, s.ep.isometry);
  const MatrixXcd zero = MatrixXcd::Zero(1, 1);
  for (const cd z : {cd(3.0), cd(0.2, 0.5), cd(-4.0, 1.0)}) EXPECT_EQ(characteristic_f(r, zero, z), cd(1.0));

  const auto out = exterior(perturbed_spectrum_dense(s.sample, s.ep), SpectralMeasure::semicircle(1.0), 0.2);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_LT(std::abs(characteristic_f(s.sample, s.ep, out[0])), 1e-6);

  const double norm = (s.sample.to_dense() + s.ep.dense()).operatorNorm();
  for (double a : {0.0, 1.0, 2.5, 4.0})
    EXPECT_LT(std::abs(characteristic_f(r, s.ep.a0, std::polar(10.0 * norm, a)) - 1.0), 0.5);
  EXPECT_THROW(characteristic_f(r, s.ep.a0, s.sample.eigvals()(7)), DomainError);
}

TEST(LimitF0, Examples) {
  const auto sc = SpectralMeasure::semicircle(1.0);
  EXPECT_NEAR(std::abs(limit_f0(sc, {{2.0, 1}}, 3.0) - (std::sqrt(5.0) - 2.0)), 0.0, 1e-14);
  EXPECT_EQ(limit_f0(sc, {{0.0, 3}}, cd(2.5, 1.0)), cd(1.0));
  const auto mu = outnumbering_measure();
  const auto pred = solve_outlier_set(mu, cd(0.0, std::sqrt(2.0)));
  for (const cd& xi : pred.solutions) EXPECT_LT(std::abs(limit_f0(mu, {{cd(0.0, std::sqrt(2.0)), 1}}, xi)), 1e-10);
  EXPECT_THROW(limit_f0(sc, {{2.0, 1}}, 1.0), DomainError);
}

TEST(Classify, PartitionAndCapturePrecondition) {
  const auto sc = SpectralMeasure::semicircle(1.0);
  const std::vector<OutlierPrediction> preds = {solve_outlier_set(sc, 2.0), solve_outlier_set(sc, -3.0)};
  const std::vector<cd> eigs = {0.0, 1.9, 2.52, 2.45, cd(0.0, 1.0), -3.3, 3.5};
  const auto rep = classify_and_match(eigs, preds, sc, 0.2, 0.1);
  EXPECT_EQ(rep.bulk.size() + rep.outliers.size(), eigs.size());
  ASSERT_EQ(rep.clusters.size(), 2u);
  EXPECT_EQ(rep.clusters[0].members.size(), 2u);
  EXPECT_EQ(rep.clusters[1].members.size(), 1u);
  EXPECT_EQ(rep.unmatched.size(), 2u);
  for (const auto& c : rep.clusters)
    for (const cd& z : c.members) EXPECT_LE(std::abs(z - c.xi), 0.1);
  EXPECT_FALSE(rep.counts_match());
  EXPECT_THROW(classify_and_match(eigs, preds, sc, 0.2, 0.35), InvalidArgument);
  EXPECT_NEAR(default_capture(preds, sc, 0.2), 0.5 * (0.5 - 0.2), 1e-12);
}

TEST(CrossPath, DenseOutliersAreZerosOfFAndNewtonRecoversThem) {
  struct Case {
    JordanSpec spec;
    EmbedMode mode;
    QMode q;
  };
  const std::vector<Case> cases = {
      {JordanSpec({JordanEntry{cd(2.0), {{1, 1}}}}), EmbedMode::canonical, {}},
      {pentagon_triangle_spec(), EmbedMode::canonical, {}},
      {pentagon_triangle_spec(), EmbedMode::haar, {QMode::Kind::ginibre, 20.0}},
      {JordanSpec({JordanEntry{cd(2.5, 1.0), {{2, 1}, {1, 1}}}, JordanEntry{cd(-3.0), {{1, 2}}}}), EmbedMode::canonical,
       {QMode::Kind::ginibre, 20.0}},
  };
  const auto sc = SpectralMeasure::semicircle(1.0);
  for (std::size_t c = 0; c < cases.size(); ++c)
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto s = wigner_setup(cases[c].spec, 300, 100 * c + seed, cases[c].mode, cases[c].q);
      const auto out = exterior(perturbed_spectrum_dense(s.sample, s.ep), sc, 0.3);
      const ProjectedResolvent r(s.sample, s.ep.isometry);
      for (const cd& z : out) EXPECT_LT(std::abs(characteristic_f(r, s.ep.a0, z)), 1e-6) << z;

      const auto census = exterior_roots(r, s.ep.a0, sc, 0.3, {});
      EXPECT_TRUE(census.contour_resolved);
      ASSERT_EQ(census.expected, static_cast<Index>(out.size())) << "case " << c << " seed " << seed;
      ASSERT_EQ(census.roots.size(), out.size());
      for (const cd& z : census.roots) EXPECT_LT(nearest(out, z), 1e-6);

      for (const auto& e : cases[c].spec.entries()) {
        const auto pred = solve_outlier_set(sc, e.theta);
        for (const cd& xi : pred.solutions) {
          const NewtonResult nr = newton_on_f(r, s.ep.a0, xi);
          ASSERT_TRUE(nr.converged);
          EXPECT_LT(nearest(out, nr.root), 1e-6);
        }
      }
    }
}

TEST(CrossPath, CensusMatchesDenseForUciAndBandedWigner) {
  // UCI: diagonal H with a Haar embedding.
  const auto mu = outnumbering_measure();
  const JordanSpec spec({JordanEntry{cd(0.0, std::sqrt(2.0)), {{1, 1}}}});
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);
    const auto pm = realize(spec, QMode{}, rng);
    const auto ep = embed(pm, 300, EmbedMode::haar, rng);
    const auto sample = sample_uci(mu, 300, DiagonalMode::quantile, seed);
    const auto out = exterior(perturbed_spectrum_dense(sample, ep), mu, 0.2);
    const ProjectedResolvent r(sample, ep.isometry);
    const auto census = exterior_roots(r, ep.a0, mu, 0.2, {});
    ASSERT_TRUE(census.complete());
    ASSERT_EQ(census.roots.size(), out.size());
    for (const cd& z : census.roots) EXPECT_LT(nearest(out, z), 1e-6);
  }
  // Banded Gaussian Wigner against its own dense form.
  const auto sc = SpectralMeasure::semicircle(1.0);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);
    const auto pm = realize(pentagon_triangle_spec(), QMode{QMode::Kind::ginibre, 20.0}, rng);
    const auto ep = embed(pm, 300, EmbedMode::canonical, rng);
    const auto band = sample_wigner_banded({}, 300, 8, seed);
    const auto dense = EnsembleSample::dense(band.to_dense(), {});
    const auto out = exterior(perturbed_spectrum_dense(dense, ep), sc, 0.3);
    const ProjectedResolvent r(band, ep.isometry);
    const auto census = exterior_roots(r, ep.a0, sc, 0.3, {});
    ASSERT_TRUE(census.complete());
    ASSERT_EQ(census.roots.size(), out.size());
    for (const cd& z : census.roots) EXPECT_LT(nearest(out, z), 1e-6);
  }
}

TEST(Outliers, ShiftEquivariance) {
  const auto s = wigner_setup(pentagon_triangle_spec(), 150, 9);
  const double c = 0.75;
  auto a = perturbed_spectrum_dense(s.sample, s.ep);
  auto b = perturbed_spectrum_dense(s.sample.shifted(c), s.ep);
  for (const cd& z : a) EXPECT_LT(nearest(b, z + c), 1e-8);
}

TEST(Outliers, NoSpikeMeansNoOutliers) {
  int clean = 0;
  for (std::uint64_t t = 0; t < 40; ++t) {
    const auto s = sample_wigner_banded({}, 2000, 1, 300 + t);
    if (s.count_above(2.2) == 0 && s.count_above(-2.2) == 2000) ++clean;
  }
  EXPECT_GE(clean, 38);
}

TEST(Outliers, CountLawForJordanBlocks) {
  ExperimentConfig cfg;
  // Blocks of size two spread like N^{-1/4}, well inside the capture radius at N = 1000.
  cfg.jordan = JordanSpec({JordanEntry{cd(2.5, 1.0), {{2, 1}}}, JordanEntry{cd(-3.0), {{1, 2}}}});
  cfg.n_grid = {1000};
  cfg.trials = 100;
  cfg.master_seed = 11;
  const Experiment ex(cfg);
  ASSERT_EQ(ex.expected_total(), 4);
  std::map<std::pair<std::size_t, int>, int> hist;
  for (const auto& o : ex.run(1000)) {
    ASSERT_TRUE(o.ok) << o.error;
    for (const auto& c : o.result.report.clusters) ++hist[{c.prediction, static_cast<int>(c.members.size())}];
  }
  for (std::size_t i = 0; i < 2; ++i) {
    int mode = -1, best = -1;
    for (const auto& [key, v] : hist)
      if (key.first == i && v > best) best = v, mode = key.second;
    EXPECT_EQ(mode, cfg.jordan.entries()[i].multiplicity());
  }
}

TEST(Outliers, SpikeClusterCountAtModerateN) {
  ExperimentConfig cfg;
  cfg.n_grid = {1000};
  cfg.trials = 40;
  cfg.master_seed = 12;
  const Experiment ex(cfg);
  int good = 0;
  for (const auto& o : ex.run(1000))
    if (o.ok && o.result.report.counts_match() && o.result.report.unmatched.empty()) ++good;
  EXPECT_GE(good, 38);
}

TEST(Outliers, OutnumberingTheRank) {
  ExperimentConfig cfg;
  cfg.ensemble.kind = EnsembleConfig::Kind::uci;
  cfg.measure = outnumbering_measure();
  cfg.jordan = JordanSpec({JordanEntry{cd(0.0, std::sqrt(2.0)), {{1, 1}}}});
  cfg.n_grid = {2000};
  cfg.trials = 10;
  cfg.master_seed = 13;
  const Experiment ex(cfg);
  ASSERT_EQ(ex.expected_total(), 2);
  for (const auto& o : ex.run(2000)) {
    ASSERT_TRUE(o.ok) << o.error;
    EXPECT_EQ(o.result.report.outliers.size(), 2u);
  }
}
