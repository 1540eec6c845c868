#include "outlierlab/jordan.hpp"

#include "outlierlab/ensembles.hpp"

namespace outlierlab {

int JordanEntry::multiplicity() const {
  int k = 0;
  for (const auto& b : blocks) k += b.p * b.beta;
  return k;
}

JordanSpec::JordanSpec(std::vector<JordanEntry> entries, std::optional<int> rank_bound)
    : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.theta == cd(0.0)) throw InvalidArgument("theta must be nonzero");
    if (e.blocks.empty()) throw InvalidArgument("entry without blocks");
    for (std::size_t j = 0; j < e.blocks.size(); ++j) {
      if (e.blocks[j].p < 1 || e.blocks[j].beta < 1) throw InvalidArgument("block sizes must be positive");
      if (j > 0 && e.blocks[j].p >= e.blocks[j - 1].p)
        throw InvalidArgument("block sizes must be strictly decreasing");
    }
    for (std::size_t i2 = 0; i2 < i; ++i2)
      if (entries_[i2].theta == e.theta) throw InvalidArgument("theta values must be distinct");
    dimension_ += e.multiplicity();
  }
  rank_bound_ = rank_bound ? *rank_bound : static_cast<int>((dimension_ + 1) / 2);
  if (dimension_ > 2 * rank_bound_) throw InvalidArgument("dimension exceeds 2r");
}

MatrixXcd build_jcf(const JordanSpec& spec) {
  const Index d = spec.dimension();
  MatrixXcd j = MatrixXcd::Zero(d, d);
  Index pos = 0;
  for (const auto& e : spec.entries()) {
    for (const auto& b : e.blocks) {
      for (int c = 0; c < b.beta; ++c) {
        for (int t = 0; t < b.p; ++t) {
          j(pos + t, pos + t) = e.theta;
          if (t + 1 < b.p) j(pos + t, pos + t + 1) = 1.0;
        }
        pos += b.p;
      }
    }
  }
  return j;
}

IndexSets index_sets(const JordanSpec& spec) {
  IndexSets out;
  Index pos = 0;
  for (const auto& e : spec.entries()) {
    EntryIndices ei;
    for (const auto& b : e.blocks) {
      ClassIndices ci;
      ci.k_minus = ei.last;
      ci.l_minus = ei.first;
      for (int c = 0; c < b.beta; ++c) {
        ci.l.push_back(pos);
        ci.k.push_back(pos + b.p - 1);
        pos += b.p;
      }
      ei.first.insert(ei.first.end(), ci.l.begin(), ci.l.end());
      ei.last.insert(ei.last.end(), ci.k.begin(), ci.k.end());
      ei.classes.push_back(std::move(ci));
    }
    out.entries.push_back(std::move(ei));
  }
  return out;
}

PerturbationMatrix realize(const JordanSpec& spec, const QMode& mode, Rng& rng) {
  const Index d = spec.dimension();
  PerturbationMatrix pm{spec, build_jcf(spec), MatrixXcd::Identity(d, d), MatrixXcd::Identity(d, d),
                        MatrixXcd(), index_sets(spec)};
  if (mode.kind == QMode::Kind::ginibre) {
    if (!(mode.condition_cap > 1.0)) throw InvalidArgument("condition cap must exceed 1");
    bool accepted = false;
    for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
      MatrixXcd g(d, d);
      for (Index c = 0; c < d; ++c)
        for (Index r = 0; r < d; ++r) g(r, c) = complex_normal(rng);
      Eigen::JacobiSVD<MatrixXcd> svd(g);
      const auto& s = svd.singularValues();
      if (s(d - 1) > 0.0 && s(0) / s(d - 1) <= mode.condition_cap) {
        pm.Q = g;
        accepted = true;
      }
    }
    if (!accepted) throw RetryExhausted("no Ginibre draw met the condition cap in 100 attempts");
    pm.Qinv = pm.Q.partialPivLu().inverse();
  }
  pm.A0 = pm.Q * pm.J * pm.Qinv;
  return pm;
}

EmbeddedPerturbation embed(const PerturbationMatrix& pm, Index n, EmbedMode mode, Rng& rng) {
  const Index d = pm.A0.rows();
  if (n < 4 * pm.spec.rank_bound()) throw InvalidArgument("N must be at least 4r");
  EmbeddedPerturbation ep;
  ep.a0 = pm.A0;
  ep.mode = mode;
  if (mode == EmbedMode::canonical)
    ep.isometry = MatrixXcd::Identity(n, d);
  else
    ep.isometry = sample_haar_isometry(n, d, rng);
  return ep;
}

bool is_canonical(const MatrixXcd& isometry) {
  const Index d = isometry.cols();
  if (isometry.rows() < d) return false;
  if (!isometry.topRows(d).isIdentity(0.0)) return false;
  return isometry.bottomRows(isometry.rows() - d).isZero(0.0);
}

}  // namespace outlierlab
