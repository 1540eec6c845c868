#pragma once

#include <optional>
#include <vector>

#include "outlierlab/core.hpp"

namespace outlierlab {

struct Atom {
  double x;
  double w;
};

struct SemicirclePart {
  double center;
  double sigma;
  double w;
};

struct UniformPart {
  double lo;
  double hi;
  double w;
};

struct Interval {
  double lo;
  double hi;
};

// Compactly supported probability measure: atoms + scaled semicircles +
// uniform segments. Immutable after construction.
class SpectralMeasure {
 public:
  SpectralMeasure(std::vector<Atom> atoms, std::vector<SemicirclePart> semicircles,
                  std::vector<UniformPart> uniforms);

  static SpectralMeasure semicircle(double sigma, double center = 0.0);
  // A single Dirac mass. Rejected by the public constructor; kept for kernel
  // null tests.
  static SpectralMeasure point_mass(double x);

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<SemicirclePart>& semicircles() const { return semicircles_; }
  const std::vector<UniformPart>& uniforms() const { return uniforms_; }

  // Connected components of the support, ascending; atoms appear as [a, a].
  const std::vector<Interval>& support() const { return support_; }
  // Support pieces before merging (one per component of the mixture).
  const std::vector<Interval>& pieces() const { return pieces_; }
  double diameter() const { return support_.back().hi - support_.front().lo; }

  double cdf(double x) const;
  // inf{x : F(x) >= u}, u in (0, 1).
  double quantile(double u) const;

 private:
  SpectralMeasure() = default;
  void finalize();

  std::vector<Atom> atoms_;
  std::vector<SemicirclePart> semicircles_;
  std::vector<UniformPart> uniforms_;
  std::vector<Interval> pieces_;
  std::vector<Interval> support_;
};

double support_distance(const SpectralMeasure& mu, cd z);

// G_mu(z) = int mu(dx) / (z - x).
cd cauchy_transform(const SpectralMeasure& mu, cd z);

// int (z - x)^{-(k+1)} mu(dx), 0 <= k <= 12.
cd resolvent_moment(const SpectralMeasure& mu, cd z, int k);

// Phi(z, w) = int (z-x)^{-1}(w-x)^{-1} mu(dx) - G(z) G(w).
cd covariance_kernel_phi(const SpectralMeasure& mu, cd z, cd w);

// psi_sc(z, w) = G^2(z) G^2(w) (sigma^2 + sigma^4 phi_sc(z, w)).
cd wigner_kernel_psi(double sigma, cd z, cd w);

struct SolveOptions {
  double tol = 1e-10;
  double delta_min = 1e-3;
  // Grid pitch; 0 selects the default min(0.1, diameter / 20).
  double pitch = 0.0;
  int max_iter = 100;
  // Search box; empty selects the default around the support.
  std::optional<std::pair<cd, cd>> box;
};

struct OutlierPrediction {
  cd theta;
  int multiplicity_k = 1;
  std::vector<cd> solutions;
  // Roots closer to the support than delta_min.
  std::vector<cd> marginal;
  int failed_seeds = 0;
  bool boundary_hit = false;
  Index m() const { return static_cast<Index>(solutions.size()); }
};

OutlierPrediction solve_outlier_set(const SpectralMeasure& mu, cd theta,
                                    const SolveOptions& opts = {}, int multiplicity_k = 1);

}  // namespace outlierlab
