#pragma once

#include <map>
#include <string>
#include <vector>

#include "outlierlab/core.hpp"
#include "outlierlab/rng.hpp"

namespace outlierlab {

// One-line notation on {0, ..., q-1}: s[i] is the image of i.
using Permutation = std::vector<int>;

Permutation identity_permutation(int q);
Permutation compose(const Permutation& a, const Permutation& b);  // a after b
Permutation inverse(const Permutation& s);
// Cycles in canonical order: each starts at its smallest element, cycles
// sorted by that element.
std::vector<std::vector<int>> cycles(const Permutation& s);
int cycle_count(const Permutation& s);
// Cycle type, descending.
std::vector<int> cycle_type(const Permutation& s);
// Builds a permutation of {1..q} from 1-based cycles; fixed points may be
// omitted. Throws InvalidArgument on repeated or out-of-range entries.
Permutation from_cycles(int q, const std::vector<std::vector<int>>& one_based);
std::vector<Permutation> all_permutations(int q);

struct PermutationTrace {
  std::vector<std::vector<int>> cycles;  // 1-based, covering {1..q} exactly once
  std::vector<MatrixXcd> matrices;
};

// prod over cycles (i1 ... ik) of Tr(M_{i1} ... M_{ik}).
cd trace_sigma(const PermutationTrace& pt);
cd trace_sigma(const Permutation& s, const std::vector<MatrixXcd>& m);

// All products of n2 / 2 disjoint transpositions of {0..n2-1}.
std::vector<Permutation> perfect_matchings(int n2);

struct WeingartenTable {
  int q = 0;
  Index n = 0;
  std::vector<Permutation> perms;  // all of S_q
  VectorXd values;                 // Wg(perms[i])
  double gram_residual = 0.0;      // max |G Wg-matrix - I|

  double operator()(const Permutation& s) const;
  std::map<std::vector<int>, double> by_class() const;
};

// Wg from the inverse of the Gram matrix N^{#cycles(s t^{-1})}, q <= 4.
WeingartenTable weingarten(int q, Index n);

// E prod_t sqrt(N) Tr(U^* T_t U A_t) over Haar U, exactly.
cd haar_moment_exact(const std::vector<MatrixXcd>& t, const std::vector<MatrixXcd>& a);

// One Monte Carlo draw of the same product.
cd haar_moment_draw(const std::vector<MatrixXcd>& t, const std::vector<MatrixXcd>& a, Rng& rng);

// samples[trial][m](i, j) = sqrt(N) <u_i, T_m u_j> for the first p Haar columns.
std::vector<std::vector<MatrixXcd>> bilinear_fluctuation_samples(const std::vector<MatrixXcd>& t, Index p, Index n,
                                                                 Index trials, Rng& rng);

struct GaussianMomentRow {
  std::string name;
  cd theoretical;
  cd empirical;
  double std_error = 0.0;
  double z = 0.0;  // |empirical - theoretical| / std_error
};

// E prod_i X_i^{p_i} conj(X_i)^{q_i} for a centered complex Gaussian vector
// with C(i, j) = E[X_i conj X_j] and P(i, j) = E[X_i X_j], by Wick recursion.
cd gaussian_moment(const MatrixXcd& c, const MatrixXcd& p, const std::vector<int>& powers,
                   const std::vector<int>& conj_powers);

std::vector<GaussianMomentRow> gaussian_moment_check(const std::vector<cd>& samples, double sigma2, cd tau2,
                                                     std::size_t min_samples = 1000);
// Cross moments of a pair against its 2 x 2 covariance and pseudo-covariance.
std::vector<GaussianMomentRow> gaussian_pair_check(const std::vector<cd>& x, const std::vector<cd>& y,
                                                   const MatrixXcd& c, const MatrixXcd& p,
                                                   std::size_t min_samples = 1000);

// max |sum_{k=1}^p (-lambda)^{k-1} A^{-k} + (-lambda)^p A^{-p} (A + lambda)^{-1} - (A + lambda)^{-1}|.
template <typename Derived>
double resolvent_expansion_check(const Eigen::MatrixBase<Derived>& a_in, typename Derived::Scalar lambda, int p) {
  using M = Matrix<typename Derived::Scalar>;
  if (p < 1) throw InvalidArgument("p must be at least 1");
  const M a = a_in;
  const Index n = a.rows();
  const M shifted = a + lambda * M::Identity(n, n);
  Eigen::FullPivLU<M> lu_a(a), lu_s(shifted);
  if (!lu_a.isInvertible() || !lu_s.isInvertible()) throw SingularInput("A or A + lambda I is singular");
  const M ai = lu_a.inverse();
  const M si = lu_s.inverse();
  M sum = M::Zero(n, n);
  M apow = M::Identity(n, n);
  typename Derived::Scalar coef(1);
  for (int k = 1; k <= p; ++k) {
    apow = apow * ai;
    sum += coef * apow;
    coef *= -lambda;
  }
  sum += coef * apow * si;
  return (sum - si).cwiseAbs().maxCoeff();
}

// Block inverse through the Schur complement of D against a direct inverse.
template <typename DA, typename DB, typename DC, typename DD>
double schur_inverse_check(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b,
                           const Eigen::MatrixBase<DC>& c, const Eigen::MatrixBase<DD>& d) {
  using M = Matrix<typename DA::Scalar>;
  const Index na = a.rows(), nd = d.rows();
  if (a.cols() != na || d.cols() != nd || b.rows() != na || b.cols() != nd || c.rows() != nd || c.cols() != na)
    throw InvalidArgument("block shapes are inconsistent");
  Eigen::FullPivLU<M> lu_d(d);
  if (!lu_d.isInvertible()) throw SingularInput("D is singular");
  const M di = lu_d.inverse();
  const M s = a - b * di * c;
  Eigen::FullPivLU<M> lu_s(s);
  if (!lu_s.isInvertible()) throw SingularInput("Schur complement is singular");
  const M si = lu_s.inverse();
  M formula(na + nd, na + nd);
  formula.topLeftCorner(na, na) = si;
  formula.topRightCorner(na, nd) = -si * b * di;
  formula.bottomLeftCorner(nd, na) = -di * c * si;
  formula.bottomRightCorner(nd, nd) = di + di * c * si * b * di;
  M full(na + nd, na + nd);
  full << a, b, c, d;
  return (formula - full.fullPivLu().inverse()).cwiseAbs().maxCoeff();
}

}  // namespace outlierlab
