#include "outlierlab/fluctuations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "outlierlab/stats.hpp"

namespace outlierlab {

MatrixXcd resolvent_statistic(const ProjectedResolvent& r, const PerturbationMatrix& pm, cd xi, cd theta) {
  const Index d = pm.Q.rows();
  if (r.rank() != d) throw InvalidArgument("resolvent rank differs from the perturbation size");
  const MatrixXcd centered = r.block(xi) - MatrixXcd::Identity(d, d) / theta;
  return std::sqrt(static_cast<double>(r.n())) * pm.Qinv * centered * pm.Q;
}

std::vector<ClassSamples> rescale_cluster(const std::vector<cd>& cluster, cd xi, const JordanEntry& entry, Index n) {
  if (static_cast<int>(cluster.size()) != entry.multiplicity()) throw SkipTrial("cluster size differs from sum p*beta");
  std::vector<std::size_t> order(cluster.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(cluster[a] - xi) > std::abs(cluster[b] - xi); });
  std::vector<ClassSamples> out;
  std::size_t pos = 0;
  for (const auto& b : entry.blocks) {
    ClassSamples cs;
    cs.p = b.p;
    cs.beta = b.beta;
    const double scale = std::pow(static_cast<double>(n), 1.0 / (2.0 * b.p));
    for (int t = 0; t < b.p * b.beta; ++t, ++pos) {
      const cd dev = cluster[order[pos]] - xi;
      cs.deviations.push_back(dev);
      cs.lambda.push_back(scale * dev);
    }
    out.push_back(std::move(cs));
  }
  return out;
}

RateFit estimate_rate(const std::vector<Index>& ns, const std::vector<double>& mean_deviation) {
  if (ns.size() != mean_deviation.size()) throw InvalidArgument("mismatched rate inputs");
  const std::set<Index> distinct(ns.begin(), ns.end());
  if (distinct.size() < 3 || *distinct.rbegin() < 8 * *distinct.begin())
    throw InsufficientData("rate fit needs three N values spanning a factor of 8");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!(mean_deviation[i] > 0.0)) throw InvalidArgument("mean deviation must be positive");
    x.push_back(std::log(static_cast<double>(ns[i])));
    y.push_back(std::log(mean_deviation[i]));
  }
  const auto f = stats::least_squares(x, y);
  return {f.slope, f.slope_stderr, f.intercept};
}

PolygonStats polygon_statistics(const std::vector<std::vector<cd>>& per_trial, int p) {
  if (p < 1) throw InvalidArgument("p must be positive");
  std::vector<double> gaps, cvs;
  for (const auto& pts : per_trial) {
    if (static_cast<int>(pts.size()) != p) throw InvalidArgument("each trial needs exactly p points");
    std::vector<double> args, radii;
    for (const cd& z : pts) {
      args.push_back(std::arg(z));
      radii.push_back(std::abs(z));
    }
    std::sort(args.begin(), args.end());
    for (int i = 0; i + 1 < p; ++i) gaps.push_back(args[i + 1] - args[i]);
    gaps.push_back(2.0 * kPi - (args.back() - args.front()));
    const double rm = std::accumulate(radii.begin(), radii.end(), 0.0) / p;
    double rv = 0.0;
    for (double r : radii) rv += (r - rm) * (r - rm);
    cvs.push_back(rm > 0.0 ? std::sqrt(rv / p) / rm : 0.0);
  }
  PolygonStats s;
  s.trials = per_trial.size();
  if (gaps.empty()) return s;
  s.gap_mean = stats::mean(gaps);
  double v = 0.0;
  for (double g : gaps) v += (g - s.gap_mean) * (g - s.gap_mean);
  s.gap_std = std::sqrt(v / static_cast<double>(gaps.size()));
  s.radius_cv = stats::mean(cvs);
  return s;
}

ClusterShape cluster_shape(const std::vector<cd>& lambda) {
  if (lambda.empty()) throw InvalidArgument("empty cluster");
  double log_mod = 0.0;
  cd prod = 1.0;
  for (const cd& z : lambda) {
    log_mod += std::log(std::abs(z));
    prod *= z / std::abs(z);
  }
  return {std::exp(log_mod / static_cast<double>(lambda.size())), std::arg(prod)};
}

std::vector<MomentRow> covariance_comparison(const std::vector<VectorXcd>& samples, const MatrixXcd& c,
                                             const MatrixXcd& p, const std::vector<std::string>& labels,
                                             std::size_t min_samples) {
  if (samples.size() < std::max<std::size_t>(min_samples, 3))
    throw InsufficientData("covariance comparison needs more samples");
  const Index nv = c.rows();
  const double n = static_cast<double>(samples.size());
  VectorXcd mean = VectorXcd::Zero(nv);
  for (const auto& s : samples) mean += s;
  mean /= n;
  std::vector<MomentRow> rows;
  // Moments that vanish identically (e.g. imaginary parts of real variables)
  // agree to rounding and get z = 0 instead of a ratio of two rounding errors.
  const double scale = std::max(c.diagonal().real().cwiseAbs().maxCoeff(), 1e-300);
  auto add = [&](const std::string& name, const std::vector<double>& vals, double theory) {
    const double m = stats::mean(vals);
    const double se = stats::std_error(vals);
    const bool exact = std::abs(m - theory) <= 1e-10 * scale;
    rows.push_back({name, m, theory, se, exact || se == 0.0 ? 0.0 : (m - theory) / se});
  };
  for (Index a = 0; a < nv; ++a) {
    for (Index b = a; b < nv; ++b) {
      std::vector<double> pr, pi, cr, ci;
      for (const auto& s : samples) {
        const cd xa = s(a) - mean(a);
        const cd xb = s(b) - mean(b);
        const cd pp = xa * xb;
        const cd cc = xa * std::conj(xb);
        pr.push_back(pp.real());
        pi.push_back(pp.imag());
        cr.push_back(cc.real());
        ci.push_back(cc.imag());
      }
      const std::string tag = labels[a] + "," + labels[b];
      add("E[x x'](" + tag + ").re", pr, p(a, b).real());
      add("E[x x'](" + tag + ").im", pi, p(a, b).imag());
      add("E[x conj x'](" + tag + ").re", cr, c(a, b).real());
      if (a != b) add("E[x conj x'](" + tag + ").im", ci, c(a, b).imag());
    }
  }
  return rows;
}

}  // namespace outlierlab
