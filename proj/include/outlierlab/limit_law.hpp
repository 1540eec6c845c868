#pragma once

#include <optional>
#include <vector>

#include "outlierlab/jordan.hpp"
#include "outlierlab/rng.hpp"
#include "outlierlab/spectral_measure.hpp"

namespace outlierlab {

// Covariance kernel of the limiting m-statistics.
class Kernel {
 public:
  enum class Kind { gue, goe, uci };

  static Kernel gue(double sigma);
  static Kernel goe(double sigma);
  static Kernel uci(SpectralMeasure mu);

  Kind kind() const { return kind_; }
  const SpectralMeasure& measure() const { return *mu_; }
  // Phi for gue/uci, psi for goe (equal to Phi_sc).
  cd scalar(cd z, cd w) const;

 private:
  Kernel(Kind kind, double sigma, SpectralMeasure mu) : kind_(kind), sigma_(sigma), mu_(std::move(mu)) {}
  Kind kind_;
  double sigma_;
  std::optional<SpectralMeasure> mu_;
};

struct MVariable {
  std::size_t entry;     // theta index
  std::size_t xi_index;  // position in that theta's xi list
  cd xi;
  Index k;  // in J(theta)
  Index l;  // in I(theta)
};

struct BlockDraw {
  std::size_t entry = 0;
  std::size_t cls = 0;
  std::size_t xi_index = 0;
  int p = 1;
  int beta = 1;
  MatrixXcd M;              // theta (M^IV - M^III (M^I)^{-1} M^II)
  std::vector<cd> lambda;   // p * beta limit deviations
};

// theta^2 int (xi - x)^{-2} mu(dx): the factor relating eigenvalues of M to
// the p-th powers of the rescaled deviations, Lambda^p = theta mu(M) / c^p.
cd rate_constant(const SpectralMeasure& mu, cd theta, cd xi);

// Per-class limit deviations implied by one realization of the m-array of a
// single (theta, xi). `m` is indexed by positions in J(theta) x I(theta).
// Throws SingularDraw when M^I has condition number above 1e12.
std::vector<BlockDraw> blocks_from_m(const MatrixXcd& m, const JordanEntry& entry, cd theta_rate_constant,
                                     std::size_t entry_index, std::size_t xi_index);

class LimitLawSampler {
 public:
  // xis[i] lists the xi's of entry i (possibly empty).
  LimitLawSampler(Kernel kernel, const PerturbationMatrix& pm, std::vector<std::vector<cd>> xis);

  const std::vector<MVariable>& variables() const { return vars_; }
  // C(a, b) = E[X_a conj(X_b)], P(a, b) = E[X_a X_b].
  const MatrixXcd& covariance() const { return c_; }
  const MatrixXcd& pseudo_covariance() const { return p_; }
  std::size_t variable_index(std::size_t entry, std::size_t xi_index, Index k, Index l) const;

  VectorXcd sample_m(Rng& rng) const;
  // One joint draw of every block's limit deviations. Singular draws are
  // redrawn and counted.
  std::vector<BlockDraw> sample(Rng& rng);
  std::vector<BlockDraw> blocks(const VectorXcd& x) const;

  std::size_t draws() const { return draws_; }
  std::size_t redraws() const { return redraws_; }
  const Kernel& kernel() const { return kernel_; }

 private:
  Kernel kernel_;
  PerturbationMatrix pm_;
  std::vector<std::vector<cd>> xis_;
  std::vector<MVariable> vars_;
  std::vector<std::vector<std::size_t>> offset_;  // first variable of (entry, xi)
  MatrixXcd c_, p_;
  MatrixXd factor_;  // real square root of the stacked (re, im) covariance
  std::size_t draws_ = 0;
  std::size_t redraws_ = 0;
};

}  // namespace outlierlab
