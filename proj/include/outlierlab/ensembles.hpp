#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "outlierlab/core.hpp"
#include "outlierlab/rng.hpp"
#include "outlierlab/spectral_measure.hpp"

namespace outlierlab {

enum class Symmetry { real, complex };
enum class EntryLaw { gaussian, rademacher, uniform };

struct WignerParams {
  double sigma = 1.0;
  Symmetry symmetry = Symmetry::complex;
  EntryLaw law = EntryLaw::gaussian;
};

struct Provenance {
  std::string kind;
  Index n = 0;
  std::uint64_t seed = 0;
  std::string params;
};

// Hermitian block tridiagonal matrix. diag[k] is Hermitian, sub[k] is the
// block below diag[k] (rows of block k+1, columns of block k).
struct BlockTridiagonal {
  std::vector<MatrixXcd> diag;
  std::vector<MatrixXcd> sub;

  Index dim() const;
  MatrixXcd to_dense() const;
};

// Orthogonal reduction of a Hermitian matrix to block tridiagonal form with
// the first `block` coordinates fixed, so the top-left block of every
// resolvent is preserved.
BlockTridiagonal block_tridiagonalize(const MatrixXcd& h, Index block);

// One realized Hermitian matrix. Storage is dense, diagonal (UCI after moving
// the Haar conjugation into the embedding) or block tridiagonal (Gaussian
// Wigner in the canonical embedding).
class EnsembleSample {
 public:
  enum class Storage { dense, diagonal, banded };

  static EnsembleSample dense(MatrixXcd h, Provenance prov);
  static EnsembleSample diagonal(VectorXd d, Provenance prov);
  static EnsembleSample banded(BlockTridiagonal t, Provenance prov);

  Storage storage() const { return storage_; }
  Index dim() const { return n_; }
  const Provenance& provenance() const { return prov_; }

  const MatrixXcd& matrix() const;             // dense only
  const VectorXd& diagonal_entries() const;    // diagonal only
  const BlockTridiagonal& band() const;        // banded only
  MatrixXcd to_dense() const;

  // Ascending eigenvalues and matching eigenvectors, computed once.
  const VectorXd& eigvals() const;
  const MatrixXcd& eigvecs() const;

  // #{eigenvalues > x}.
  Index count_above(double x) const;
  double trace() const;

  // Shifted copy H + c I with the same provenance.
  EnsembleSample shifted(double c) const;

 private:
  struct Cache {
    std::mutex mu;
    bool have_vals = false;
    bool have_vecs = false;
    VectorXd vals;
    MatrixXcd vecs;
  };

  Storage storage_ = Storage::dense;
  Index n_ = 0;
  Provenance prov_;
  MatrixXcd h_;
  VectorXd d_;
  BlockTridiagonal t_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

// Entry std for each law is matched to the variance profile: off-diagonal
// E|W_ij|^2 = sigma^2 (real and imaginary parts sigma^2/2 each when complex),
// diagonal variance 2 sigma^2 (real) or sigma^2 (complex).
EnsembleSample sample_wigner(const WignerParams& params, Index n, std::uint64_t seed);

// Gaussian Wigner in block tridiagonal form. Equal in law to the Householder
// reduction of sample_wigner with the first `block` coordinates fixed.
EnsembleSample sample_wigner_banded(const WignerParams& params, Index n, Index block,
                                    std::uint64_t seed);

enum class DiagonalMode { quantile, iid };

EnsembleSample sample_uci(const SpectralMeasure& mu, Index n, DiagonalMode mode, std::uint64_t seed);

// First k columns of a Haar unitary.
MatrixXcd sample_haar_isometry(Index n, Index k, Rng& rng);

// Inertia of z - T at real z via the Schur complement recursion.
Index count_above(const BlockTridiagonal& t, double x);

}  // namespace outlierlab
