#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "outlierlab/ensembles.hpp"
#include "outlierlab/jordan.hpp"
#include "outlierlab/limit_law.hpp"
#include "outlierlab/outliers.hpp"
#include "outlierlab/spectral_measure.hpp"

namespace outlierlab {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct EnsembleConfig {
  enum class Kind { wigner, uci };
  Kind kind = Kind::wigner;
  WignerParams wigner;
  DiagonalMode uci_mode = DiagonalMode::quantile;
};

struct Tolerances {
  double solver_tol = 1e-10;
  double delta_min = 1e-3;
  double newton_step_tol = 1e-12;
};

struct HaarCheckConfig {
  Index n = 200;
  Index trials = 10000;
  double z_threshold = 4.0;
  double exact_tol = 1e-10;
};

struct ExperimentConfig {
  std::string name = "experiment";
  // For Wigner ensembles the measure is the semicircle of the configured sigma.
  SpectralMeasure measure = SpectralMeasure::semicircle(1.0);
  EnsembleConfig ensemble;
  JordanSpec jordan{{JordanEntry{cd(2.0), {{1, 1}}}}};
  QMode q_mode;
  EmbedMode embed_mode = EmbedMode::canonical;
  bool unsafe_embedding = false;
  std::vector<Index> n_grid{1000};
  Index trials = 100;
  std::optional<double> delta;
  std::optional<double> capture;
  Tolerances tolerances;
  // Largest N handled by the dense eigensolver; above it the resolvent census.
  Index dense_max_n = 400;
  Index min_covariance_trials = 100;
  double max_failure_rate = 0.10;
  HaarCheckConfig haar;
  std::uint64_t master_seed = 1;
  std::string output_dir = "out";

  // Throws InvalidArgument on violated invariants.
  void validate() const;
};

// Reads the documented JSON layout; // and /* */ comments are allowed.
ExperimentConfig config_from_json(const Json& j);
Json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);

// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

// Per-(N, trial) record of one simulated matrix.
struct TrialResult {
  Index n = 0;
  Index trial = 0;
  std::string path;        // "dense" or "census"
  OutlierReport report;    // all_eigs holds only exterior roots on the census path
  VectorXcd m_statistics;  // ordered as LimitLawSampler::variables(); empty unless requested
};

struct TrialOutcome {
  Index n = 0;
  Index trial = 0;
  bool ok = false;
  std::string error;
  TrialResult result;
};

class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const SpectralMeasure& measure() const { return config_.measure; }
  // One prediction per Jordan entry, in entry order.
  const std::vector<OutlierPrediction>& predictions() const { return predictions_; }
  // Q is drawn once per run from the (master_seed, 0, 0, "Q") stream.
  const PerturbationMatrix& perturbation() const { return pm_; }
  Index expected_total() const;

  double delta(Index n) const;
  double capture(Index n) const;

  Kernel kernel() const;
  LimitLawSampler limit_sampler() const;

  TrialResult run_trial(Index n, Index trial, bool with_m_statistics = false) const;
  // Trials [0, trials) at one N on OUTLIERLAB_WORKERS threads; results in
  // trial order. Throws RunFailed when the failure rate exceeds the cap.
  std::vector<TrialOutcome> run(Index n, bool with_m_statistics = false) const;

 private:
  ExperimentConfig config_;
  std::vector<OutlierPrediction> predictions_;
  PerturbationMatrix pm_;
};

struct RunFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Worker count from OUTLIERLAB_WORKERS, default 1.
unsigned worker_count();

// Predicted Pearson correlations of the real parts of sqrt(N)(outlier - xi)
// for pairs of simple (p = 1, beta = 1) clusters, from the linear limit
// Lambda = m / (-G'(xi)).
struct CorrelationPrediction {
  std::size_t entry_a, xi_a, entry_b, xi_b;
  double rho_re;
  double rho_im;
};
std::vector<CorrelationPrediction> simple_cluster_correlations(const Experiment& ex);

// Subcommands. Each writes into config.output_dir and returns the JSON it wrote.
Json cmd_predict(const ExperimentConfig& config);
Json cmd_simulate(const ExperimentConfig& config);
Json cmd_fluct(const ExperimentConfig& config);
Json cmd_haar_check(const ExperimentConfig& config);
Json cmd_report(const ExperimentConfig& config);

// Round-trip decimal form with 17 significant digits.
std::string format_double(double x);

}  // namespace outlierlab
