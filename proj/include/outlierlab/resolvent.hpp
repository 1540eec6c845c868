#pragma once

#include <optional>
#include <utility>

#include "outlierlab/ensembles.hpp"
#include "outlierlab/jordan.hpp"

namespace outlierlab {

// R(z) = U^* (z - H)^{-1} U for a fixed N x d isometry U, evaluated in
// O(N d^2) per point from either a spectral form (eigenvalues plus the
// projected eigenvectors V^* U) or a block tridiagonal form whose leading
// block spans the columns of U.
class ProjectedResolvent {
 public:
  ProjectedResolvent(const EnsembleSample& sample, const MatrixXcd& isometry);

  Index n() const { return n_; }
  Index rank() const { return d_; }

  MatrixXcd block(cd z) const;
  std::pair<MatrixXcd, MatrixXcd> block_with_derivative(cd z) const;

  // (1/N) Tr (z - H)^{-1}; only for spectral forms.
  std::optional<cd> normalized_trace(cd z) const;

  Index count_above(double x) const;
  // Eigenvalues of H inside (lo, hi), ascending.
  std::vector<double> eigenvalues_in(double lo, double hi) const;
  // Upper bound on the operator norm of H.
  double norm_bound() const;

  // Throws DomainError when z is within 1e-10 of Spec(H).
  void check_regular(cd z) const;

 private:
  Index n_ = 0;
  Index d_ = 0;
  bool spectral_ = true;
  VectorXd lambda_;
  MatrixXcd w_;
  BlockTridiagonal band_;
};

}  // namespace outlierlab
