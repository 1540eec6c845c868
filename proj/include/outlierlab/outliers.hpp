#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "outlierlab/ensembles.hpp"
#include "outlierlab/jordan.hpp"
#include "outlierlab/resolvent.hpp"
#include "outlierlab/spectral_measure.hpp"

namespace outlierlab {

// All eigenvalues of H + U A0 U^* from a dense complex eigensolver.
std::vector<cd> perturbed_spectrum_dense(const EnsembleSample& sample, const EmbeddedPerturbation& ep);

// f(z) = det(I - R(z) A0).
cd characteristic_f(const ProjectedResolvent& r, const MatrixXcd& a0, cd z);
cd characteristic_f(const EnsembleSample& sample, const EmbeddedPerturbation& ep, cd z);

// f0(z) = prod_i (1 - G(z) theta_i)^{k_i}.
cd limit_f0(const SpectralMeasure& mu, const std::vector<std::pair<cd, int>>& eigenvalues, cd z);
cd limit_f0(const SpectralMeasure& mu, const JordanSpec& spec, cd z);

struct NewtonOptions {
  int max_iter = 80;
  double step_tol = 1e-12;
  // Iterates for which this returns false abort the run.
  std::function<bool(cd)> admissible;
};

struct NewtonResult {
  cd root;
  bool converged = false;
  int iterations = 0;
  double abs_f = 0.0;
};

// Newton on f with the known roots deflated out (Maehly's correction).
NewtonResult newton_on_f(const ProjectedResolvent& r, const MatrixXcd& a0, cd seed,
                         const std::vector<cd>& deflate = {}, const NewtonOptions& opts = {});

// {z : dist(z, supp mu) > delta}. Support pieces closer than 2 delta share
// one bounded complementary component.
class ExteriorRegion {
 public:
  struct Component {
    double lo, hi;
    std::vector<Interval> pieces;
  };

  ExteriorRegion(const SpectralMeasure& mu, double delta);

  bool contains(cd z) const;
  double delta() const { return delta_; }
  const std::vector<Component>& components() const { return components_; }
  // Counterclockwise boundary of the delta-neighbourhood of component c,
  // t in [0, 1).
  cd boundary_point(std::size_t c, double t) const;
  // Real intervals lying in the region (may be unbounded).
  std::vector<Interval> real_gaps() const;

 private:
  const SpectralMeasure* mu_;
  double delta_;
  std::vector<Component> components_;
};

struct CensusOptions {
  int initial_samples = 128;
  int max_bisections = 40;
  // Quadtree localisation stops splitting boxes below this side length.
  double min_box = 1e-4;
  int max_boxes = 20000;
  NewtonOptions newton;
};

struct RootCensus {
  Index expected = 0;              // zeros of f in the region, from the argument principle
  std::vector<double> natural;     // eigenvalues of H in the region
  std::vector<long> winding;       // per component
  std::vector<cd> roots;           // zeros of f located in the region
  bool contour_resolved = true;
  Index evaluations = 0;
  bool complete() const { return contour_resolved && static_cast<Index>(roots.size()) == expected; }
};

// Counts and locates the eigenvalues of H + U A0 U^* in the exterior region
// without a dense eigensolve. Seeds are tried in order; roots they miss are
// localised by bisecting boxes on their winding numbers.
RootCensus exterior_roots(const ProjectedResolvent& r, const MatrixXcd& a0, const SpectralMeasure& mu,
                          double delta, const std::vector<cd>& seeds, const CensusOptions& opts = {});

struct Cluster {
  std::size_t prediction = 0;  // index into the prediction list
  std::size_t solution = 0;    // index into its solutions
  cd xi;
  cd theta;
  int expected = 0;
  std::vector<cd> members;
};

struct OutlierReport {
  std::vector<cd> all_eigs;
  std::vector<cd> bulk;
  std::vector<cd> outliers;
  std::vector<Cluster> clusters;
  std::vector<cd> unmatched;
  double delta = 0.0;
  double capture = 0.0;

  bool counts_match() const;
};

double default_delta(Index n);
// min(half the minimum xi separation, half of (support distance - delta)),
// over the xi's lying in the exterior region.
double default_capture(const std::vector<OutlierPrediction>& preds, const SpectralMeasure& mu, double delta);

OutlierReport classify_and_match(const std::vector<cd>& eigs, const std::vector<OutlierPrediction>& preds,
                                 const SpectralMeasure& mu, double delta, std::optional<double> capture = {});

}  // namespace outlierlab
