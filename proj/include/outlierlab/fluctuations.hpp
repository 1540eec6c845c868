#pragma once

#include <string>
#include <vector>

#include "outlierlab/jordan.hpp"
#include "outlierlab/resolvent.hpp"

namespace outlierlab {

// sqrt(N) Q^{-1} (R(xi) - I / theta) Q; the m-statistics of theta are its
// entries in J(theta) x I(theta).
MatrixXcd resolvent_statistic(const ProjectedResolvent& r, const PerturbationMatrix& pm, cd xi, cd theta);

struct ClassSamples {
  int p = 1;
  int beta = 1;
  std::vector<cd> deviations;  // lambda - xi, decreasing modulus
  std::vector<cd> lambda;      // N^{1/(2p)} * deviation
};

// Splits a cluster around xi into Jordan size classes by deviation modulus.
// Throws SkipTrial when the cluster size differs from sum p * beta.
std::vector<ClassSamples> rescale_cluster(const std::vector<cd>& cluster, cd xi, const JordanEntry& entry, Index n);

struct RateFit {
  double slope = 0.0;
  double std_error = 0.0;
  double intercept = 0.0;
};

// Least-squares slope of log(mean deviation) against log N.
RateFit estimate_rate(const std::vector<Index>& ns, const std::vector<double>& mean_deviation);

struct PolygonStats {
  double gap_mean = 0.0;
  double gap_std = 0.0;
  double radius_cv = 0.0;
  std::size_t trials = 0;
};

PolygonStats polygon_statistics(const std::vector<std::vector<cd>>& per_trial, int p);

// Labeling-free summary of one p-cluster: geometric-mean modulus and the
// argument of the product, which for exact p-th roots of w equal |w|^{1/p}
// and arg(w) up to the sign (-1)^{p-1}.
struct ClusterShape {
  double modulus;
  double arg;
};

ClusterShape cluster_shape(const std::vector<cd>& lambda);

struct MomentRow {
  std::string name;
  double empirical = 0.0;
  double theoretical = 0.0;
  double std_error = 0.0;
  double z = 0.0;
};

// Empirical second moments of sampled vectors against C = E[x x^*] and
// P = E[x x^T]: one row per (pair, moment, re/im part).
std::vector<MomentRow> covariance_comparison(const std::vector<VectorXcd>& samples, const MatrixXcd& c,
                                             const MatrixXcd& p, const std::vector<std::string>& labels,
                                             std::size_t min_samples = 1000);

}  // namespace outlierlab
