#pragma once

#include <optional>
#include <vector>

#include "outlierlab/core.hpp"
#include "outlierlab/rng.hpp"

namespace outlierlab {

struct JordanBlockClass {
  int p;
  int beta;
};

struct JordanEntry {
  cd theta;
  std::vector<JordanBlockClass> blocks;  // p strictly decreasing
  int multiplicity() const;              // sum of p * beta
};

class JordanSpec {
 public:
  // rank_bound defaults to ceil(d / 2), the smallest r with d <= 2r.
  explicit JordanSpec(std::vector<JordanEntry> entries, std::optional<int> rank_bound = {});

  const std::vector<JordanEntry>& entries() const { return entries_; }
  Index dimension() const { return dimension_; }
  int rank_bound() const { return rank_bound_; }

 private:
  std::vector<JordanEntry> entries_;
  Index dimension_ = 0;
  int rank_bound_ = 0;
};

// 0-based positions in the build_jcf layout.
struct ClassIndices {
  std::vector<Index> k, k_minus, l, l_minus;
};

struct EntryIndices {
  std::vector<Index> first;  // I(theta)
  std::vector<Index> last;   // J(theta)
  std::vector<ClassIndices> classes;
};

struct IndexSets {
  std::vector<EntryIndices> entries;
};

MatrixXcd build_jcf(const JordanSpec& spec);
IndexSets index_sets(const JordanSpec& spec);

struct QMode {
  enum class Kind { identity, ginibre };
  Kind kind = Kind::identity;
  double condition_cap = 20.0;
};

struct PerturbationMatrix {
  JordanSpec spec;
  MatrixXcd J, Q, Qinv, A0;
  IndexSets index;
};

PerturbationMatrix realize(const JordanSpec& spec, const QMode& mode, Rng& rng);

enum class EmbedMode { canonical, haar };

struct EmbeddedPerturbation {
  MatrixXcd isometry;  // N x d
  MatrixXcd a0;        // d x d
  EmbedMode mode = EmbedMode::canonical;

  Index n() const { return isometry.rows(); }
  MatrixXcd dense() const { return isometry * a0 * isometry.adjoint(); }
};

EmbeddedPerturbation embed(const PerturbationMatrix& pm, Index n, EmbedMode mode, Rng& rng);

// True when the isometry is [I_d; 0].
bool is_canonical(const MatrixXcd& isometry);

}  // namespace outlierlab
