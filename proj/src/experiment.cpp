#include "outlierlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "outlierlab/fluctuations.hpp"
#include "outlierlab/haar_oracle.hpp"
#include "outlierlab/resolvent.hpp"
#include "outlierlab/stats.hpp"

namespace outlierlab {

namespace fs = std::filesystem;

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

// ---------------------------------------------------------------- JSON I/O

cd complex_from_json(const Json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
  if (j.is_object()) return {j.value("re", 0.0), j.value("im", 0.0)};
  throw InvalidArgument("complex value must be a number, [re, im] or {re, im}");
}

Json complex_to_json(cd z) { return Json::array({z.real(), z.imag()}); }

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw InvalidArgument("unknown key '" + k + "' in " + where);
}

template <class E>
E enum_from(const Json& j, const std::vector<std::pair<std::string, E>>& table, const std::string& what) {
  const auto s = j.get<std::string>();
  for (const auto& [name, value] : table)
    if (name == s) return value;
  throw InvalidArgument("unknown " + what + " '" + s + "'");
}

template <class E>
std::string enum_name(E e, const std::vector<std::pair<std::string, E>>& table) {
  for (const auto& [name, value] : table)
    if (value == e) return name;
  return "?";
}

const std::vector<std::pair<std::string, Symmetry>> kSymmetry = {{"complex", Symmetry::complex},
                                                                 {"real", Symmetry::real}};
const std::vector<std::pair<std::string, EntryLaw>> kLaw = {
    {"gaussian", EntryLaw::gaussian}, {"rademacher", EntryLaw::rademacher}, {"uniform", EntryLaw::uniform}};
const std::vector<std::pair<std::string, DiagonalMode>> kDiag = {{"quantile", DiagonalMode::quantile},
                                                                 {"iid", DiagonalMode::iid}};
const std::vector<std::pair<std::string, EmbedMode>> kEmbed = {{"canonical", EmbedMode::canonical},
                                                               {"haar", EmbedMode::haar}};
const std::vector<std::pair<std::string, QMode::Kind>> kQ = {{"identity", QMode::Kind::identity},
                                                             {"ginibre", QMode::Kind::ginibre}};

SpectralMeasure measure_from_json(const Json& j) {
  reject_unknown(j, {"atoms", "semicircle", "uniform"}, "measure");
  std::vector<Atom> atoms;
  std::vector<SemicirclePart> sc;
  std::vector<UniformPart> un;
  for (const auto& a : j.value("atoms", Json::array())) atoms.push_back({a.at("x"), a.at("w")});
  for (const auto& s : j.value("semicircle", Json::array()))
    sc.push_back({s.value("center", 0.0), s.at("sigma"), s.at("w")});
  for (const auto& u : j.value("uniform", Json::array())) un.push_back({u.at("lo"), u.at("hi"), u.at("w")});
  return SpectralMeasure(std::move(atoms), std::move(sc), std::move(un));
}

Json measure_to_json(const SpectralMeasure& mu) {
  Json j{{"atoms", Json::array()}, {"semicircle", Json::array()}, {"uniform", Json::array()}};
  for (const auto& a : mu.atoms()) j["atoms"].push_back({{"x", a.x}, {"w", a.w}});
  for (const auto& s : mu.semicircles())
    j["semicircle"].push_back({{"center", s.center}, {"sigma", s.sigma}, {"w", s.w}});
  for (const auto& u : mu.uniforms()) j["uniform"].push_back({{"lo", u.lo}, {"hi", u.hi}, {"w", u.w}});
  return j;
}

JordanSpec jordan_from_json(const Json& j, std::optional<int> rank_bound) {
  if (!j.is_array()) throw InvalidArgument("jordan must be a list of {theta, blocks}");
  std::vector<JordanEntry> entries;
  for (const auto& e : j) {
    reject_unknown(e, {"theta", "blocks"}, "jordan entry");
    JordanEntry je{complex_from_json(e.at("theta")), {}};
    for (const auto& b : e.at("blocks")) {
      if (!b.is_array() || b.size() != 2) throw InvalidArgument("blocks are [p, beta] pairs");
      je.blocks.push_back({b[0].get<int>(), b[1].get<int>()});
    }
    entries.push_back(std::move(je));
  }
  return JordanSpec(std::move(entries), rank_bound);
}

Json jordan_to_json(const JordanSpec& s) {
  Json entries = Json::array();
  for (const auto& e : s.entries()) {
    Json blocks = Json::array();
    for (const auto& b : e.blocks) blocks.push_back({b.p, b.beta});
    entries.push_back({{"theta", complex_to_json(e.theta)}, {"blocks", blocks}});
  }
  return entries;
}

std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- output

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::string& hash, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    out_ << "# outlierlab schema " << kSchemaVersion << " config_hash " << hash << "\n" << header << "\n";
  }
  template <class... T>
  void row(const T&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(fields), first = false), ...);
    out_ << "\n";
  }
  void line(const std::string& text) { out_ << text << "\n"; }

 private:
  static std::string cell(double x) { return format_double(x); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I i) {
    return std::to_string(i);
  }
  std::ofstream out_;
};

Json stamped(const ExperimentConfig& c) {
  return Json{{"schema_version", kSchemaVersion}, {"config_hash", config_hash(c)}, {"name", c.name}};
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << "\n";
}

fs::path prepare_dir(const ExperimentConfig& c) {
  fs::path dir(c.output_dir);
  fs::create_directories(dir);
  return dir;
}

std::string cluster_label(const Cluster& c) { return std::to_string(c.prediction) + ":" + std::to_string(c.solution); }

}  // namespace

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  if (n_grid.empty()) throw InvalidArgument("n_grid must not be empty");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] <= n_grid[i - 1]) throw InvalidArgument("n_grid must be strictly ascending");
  if (n_grid.front() < 4 * jordan.rank_bound()) throw InvalidArgument("every N must be at least 4r");
  if (trials < 1) throw InvalidArgument("trials must be at least 1");
  if (ensemble.kind == EnsembleConfig::Kind::wigner && embed_mode == EmbedMode::haar && !unsafe_embedding)
    throw InvalidArgument("Wigner ensembles require the canonical embedding unless unsafe_embedding is set");
  if (delta && *delta <= 0.0) throw InvalidArgument("delta must be positive");
  if (capture && *capture <= 0.0) throw InvalidArgument("capture must be positive");
  if (ensemble.kind == EnsembleConfig::Kind::wigner && ensemble.wigner.sigma <= 0.0)
    throw InvalidArgument("sigma must be positive");
  if (dense_max_n < 1) throw InvalidArgument("dense_max_n must be positive");
  if (max_failure_rate < 0.0 || max_failure_rate > 1.0) throw InvalidArgument("max_failure_rate must lie in [0, 1]");
  if (haar.n < 4 || haar.trials < 2) throw InvalidArgument("haar check needs n >= 4 and trials >= 2");
}

ExperimentConfig config_from_json(const Json& j) {
  reject_unknown(j,
                 {"name", "measure", "ensemble", "jordan", "rank_bound", "q_mode", "embed_mode", "unsafe_embedding", "n_grid",
                  "trials", "delta", "capture", "tolerances", "dense_max_n", "min_covariance_trials",
                  "max_failure_rate", "haar", "master_seed", "output_dir"},
                 "config");
  ExperimentConfig c;
  c.name = j.value("name", c.name);
  if (j.contains("ensemble")) {
    const Json& e = j["ensemble"];
    reject_unknown(e, {"kind", "sigma", "symmetry", "law", "mode"}, "ensemble");
    const std::string kind = e.value("kind", "wigner");
    if (kind == "wigner") {
      c.ensemble.kind = EnsembleConfig::Kind::wigner;
      c.ensemble.wigner.sigma = e.value("sigma", 1.0);
      if (e.contains("symmetry")) c.ensemble.wigner.symmetry = enum_from(e["symmetry"], kSymmetry, "symmetry");
      if (e.contains("law")) c.ensemble.wigner.law = enum_from(e["law"], kLaw, "entry law");
    } else if (kind == "uci") {
      c.ensemble.kind = EnsembleConfig::Kind::uci;
      if (e.contains("mode")) c.ensemble.uci_mode = enum_from(e["mode"], kDiag, "uci mode");
    } else {
      throw InvalidArgument("unknown ensemble kind '" + kind + "'");
    }
  }
  if (c.ensemble.kind == EnsembleConfig::Kind::wigner) {
    c.measure = SpectralMeasure::semicircle(c.ensemble.wigner.sigma);
    if (j.contains("measure")) throw InvalidArgument("Wigner ensembles fix the measure; remove 'measure'");
  } else {
    if (!j.contains("measure")) throw InvalidArgument("UCI ensembles need a 'measure'");
    c.measure = measure_from_json(j["measure"]);
  }
  std::optional<int> rank_bound;
  if (j.contains("rank_bound") && !j["rank_bound"].is_null()) rank_bound = j["rank_bound"].get<int>();
  if (j.contains("jordan")) c.jordan = jordan_from_json(j["jordan"], rank_bound);
  else if (rank_bound) c.jordan = JordanSpec(c.jordan.entries(), rank_bound);
  if (j.contains("q_mode")) {
    const Json& q = j["q_mode"];
    reject_unknown(q, {"kind", "condition_cap"}, "q_mode");
    if (q.contains("kind")) c.q_mode.kind = enum_from(q["kind"], kQ, "q_mode");
    c.q_mode.condition_cap = q.value("condition_cap", c.q_mode.condition_cap);
  }
  if (j.contains("embed_mode")) c.embed_mode = enum_from(j["embed_mode"], kEmbed, "embed_mode");
  c.unsafe_embedding = j.value("unsafe_embedding", false);
  if (j.contains("n_grid")) c.n_grid = j["n_grid"].get<std::vector<Index>>();
  c.trials = j.value("trials", c.trials);
  if (j.contains("delta") && !j["delta"].is_null()) c.delta = j["delta"].get<double>();
  if (j.contains("capture") && !j["capture"].is_null()) c.capture = j["capture"].get<double>();
  if (j.contains("tolerances")) {
    const Json& t = j["tolerances"];
    reject_unknown(t, {"solver_tol", "delta_min", "newton_step_tol"}, "tolerances");
    c.tolerances.solver_tol = t.value("solver_tol", c.tolerances.solver_tol);
    c.tolerances.delta_min = t.value("delta_min", c.tolerances.delta_min);
    c.tolerances.newton_step_tol = t.value("newton_step_tol", c.tolerances.newton_step_tol);
  }
  c.dense_max_n = j.value("dense_max_n", c.dense_max_n);
  c.min_covariance_trials = j.value("min_covariance_trials", c.min_covariance_trials);
  c.max_failure_rate = j.value("max_failure_rate", c.max_failure_rate);
  if (j.contains("haar")) {
    const Json& h = j["haar"];
    reject_unknown(h, {"n", "trials", "z_threshold", "exact_tol"}, "haar");
    c.haar.n = h.value("n", c.haar.n);
    c.haar.trials = h.value("trials", c.haar.trials);
    c.haar.z_threshold = h.value("z_threshold", c.haar.z_threshold);
    c.haar.exact_tol = h.value("exact_tol", c.haar.exact_tol);
  }
  if (j.contains("master_seed")) {
    const Json& s = j["master_seed"];
    c.master_seed = s.is_string() ? std::stoull(s.get<std::string>(), nullptr, 0) : s.get<std::uint64_t>();
  }
  c.output_dir = j.value("output_dir", c.output_dir);
  c.validate();
  return c;
}

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["name"] = c.name;
  if (c.ensemble.kind == EnsembleConfig::Kind::wigner) {
    j["ensemble"] = {{"kind", "wigner"},
                     {"sigma", c.ensemble.wigner.sigma},
                     {"symmetry", enum_name(c.ensemble.wigner.symmetry, kSymmetry)},
                     {"law", enum_name(c.ensemble.wigner.law, kLaw)}};
  } else {
    j["ensemble"] = {{"kind", "uci"}, {"mode", enum_name(c.ensemble.uci_mode, kDiag)}};
    j["measure"] = measure_to_json(c.measure);
  }
  j["jordan"] = jordan_to_json(c.jordan);
  j["rank_bound"] = c.jordan.rank_bound();
  j["q_mode"] = {{"kind", enum_name(c.q_mode.kind, kQ)}, {"condition_cap", c.q_mode.condition_cap}};
  j["embed_mode"] = enum_name(c.embed_mode, kEmbed);
  j["unsafe_embedding"] = c.unsafe_embedding;
  j["n_grid"] = c.n_grid;
  j["trials"] = c.trials;
  j["delta"] = c.delta ? Json(*c.delta) : Json(nullptr);
  j["capture"] = c.capture ? Json(*c.capture) : Json(nullptr);
  j["tolerances"] = {{"solver_tol", c.tolerances.solver_tol},
                     {"delta_min", c.tolerances.delta_min},
                     {"newton_step_tol", c.tolerances.newton_step_tol}};
  j["dense_max_n"] = c.dense_max_n;
  j["min_covariance_trials"] = c.min_covariance_trials;
  j["max_failure_rate"] = c.max_failure_rate;
  j["haar"] = {{"n", c.haar.n},
               {"trials", c.haar.trials},
               {"z_threshold", c.haar.z_threshold},
               {"exact_tol", c.haar.exact_tol}};
  j["master_seed"] = c.master_seed;
  j["output_dir"] = c.output_dir;
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(Json::parse(ss.str(), nullptr, true, true));
}

std::string config_hash(const ExperimentConfig& c) {
  Json j = config_to_json(c);
  j.erase("output_dir");
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return hex64(h);
}

unsigned worker_count() {
  if (const char* v = std::getenv("OUTLIERLAB_WORKERS")) {
    const long n = std::strtol(v, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  return 1;
}

// ---------------------------------------------------------------- Experiment

namespace {

PerturbationMatrix frozen_perturbation(const ExperimentConfig& c) {
  c.validate();
  Rng rng = make_stream(c.master_seed, 0, 0, "Q");
  return realize(c.jordan, c.q_mode, rng);
}

}  // namespace

Experiment::Experiment(ExperimentConfig config) : config_(std::move(config)), pm_(frozen_perturbation(config_)) {
  SolveOptions opts;
  opts.tol = config_.tolerances.solver_tol;
  opts.delta_min = config_.tolerances.delta_min;
  for (const auto& e : config_.jordan.entries())
    predictions_.push_back(solve_outlier_set(config_.measure, e.theta, opts, e.multiplicity()));
}

Index Experiment::expected_total() const {
  Index t = 0;
  for (const auto& p : predictions_) t += p.m() * p.multiplicity_k;
  return t;
}

double Experiment::delta(Index n) const {
  if (config_.delta) return *config_.delta;
  // The N-scaled default must still leave every predicted xi outside the bulk zone.
  double d = default_delta(n);
  for (const auto& p : predictions_)
    for (const cd& xi : p.solutions) d = std::min(d, 0.5 * support_distance(config_.measure, xi));
  return d;
}

double Experiment::capture(Index n) const {
  return config_.capture.value_or(default_capture(predictions_, config_.measure, delta(n)));
}

Kernel Experiment::kernel() const {
  if (config_.ensemble.kind == EnsembleConfig::Kind::uci) return Kernel::uci(config_.measure);
  return config_.ensemble.wigner.symmetry == Symmetry::complex ? Kernel::gue(config_.ensemble.wigner.sigma)
                                                               : Kernel::goe(config_.ensemble.wigner.sigma);
}

LimitLawSampler Experiment::limit_sampler() const {
  std::vector<std::vector<cd>> xis;
  for (const auto& p : predictions_) xis.push_back(p.solutions);
  return LimitLawSampler(kernel(), pm_, xis);
}

TrialResult Experiment::run_trial(Index n, Index trial, bool with_m_statistics) const {
  const auto un = static_cast<std::uint64_t>(n);
  const auto ut = static_cast<std::uint64_t>(trial);
  const std::uint64_t seed = stream_seed(config_.master_seed, un, ut, "ensemble");
  Rng embed_rng = make_stream(config_.master_seed, un, ut, "embed");
  const Index d = pm_.A0.rows();
  const bool dense = n <= config_.dense_max_n;

  std::optional<EnsembleSample> sample;
  EmbeddedPerturbation ep;
  if (config_.ensemble.kind == EnsembleConfig::Kind::uci) {
    // The Haar conjugation of a UCI matrix is carried by the embedding.
    sample = sample_uci(config_.measure, n, config_.ensemble.uci_mode, seed);
    ep = embed(pm_, n, EmbedMode::haar, embed_rng);
  } else {
    ep = embed(pm_, n, config_.embed_mode, embed_rng);
    const auto& w = config_.ensemble.wigner;
    if (!dense && w.law == EntryLaw::gaussian && config_.embed_mode == EmbedMode::canonical)
      sample = sample_wigner_banded(w, n, d, seed);
    else
      sample = sample_wigner(w, n, seed);
  }

  TrialResult tr;
  tr.n = n;
  tr.trial = trial;
  const double dl = delta(n);
  std::optional<ProjectedResolvent> r;
  std::vector<cd> eigs;
  if (dense) {
    tr.path = "dense";
    eigs = perturbed_spectrum_dense(*sample, ep);
  } else {
    tr.path = "census";
    r.emplace(*sample, ep.isometry);
    std::vector<cd> seeds;
    for (const auto& p : predictions_)
      for (const cd& xi : p.solutions) seeds.push_back(xi);
    CensusOptions co;
    co.newton.step_tol = config_.tolerances.newton_step_tol;
    const RootCensus census = exterior_roots(*r, ep.a0, config_.measure, dl, seeds, co);
    if (!census.complete())
      throw SolverError("root census incomplete: located " + std::to_string(census.roots.size()) + " of " +
                        std::to_string(census.expected) + (census.contour_resolved ? "" : ", contour unresolved"));
    eigs = census.roots;
  }
  tr.report = classify_and_match(eigs, predictions_, config_.measure, dl, capture(n));

  if (with_m_statistics) {
    if (!r) r.emplace(*sample, ep.isometry);
    std::vector<cd> values;
    for (std::size_t i = 0; i < predictions_.size(); ++i) {
      const auto& idx = pm_.index.entries[i];
      const cd theta = config_.jordan.entries()[i].theta;
      for (const cd& xi : predictions_[i].solutions) {
        const MatrixXcd s = resolvent_statistic(*r, pm_, xi, theta);
        for (Index k : idx.last)
          for (Index l : idx.first) values.push_back(s(k, l));
      }
    }
    tr.m_statistics = Eigen::Map<const VectorXcd>(values.data(), static_cast<Index>(values.size()));
  }
  return tr;
}

std::vector<TrialOutcome> Experiment::run(Index n, bool with_m_statistics) const {
  const Index trials = config_.trials;
  std::vector<TrialOutcome> out(static_cast<std::size_t>(trials));
  std::atomic<Index> next{0};
  auto work = [&] {
    for (Index t = next++; t < trials; t = next++) {
      TrialOutcome& o = out[static_cast<std::size_t>(t)];
      o.n = n;
      o.trial = t;
      try {
        o.result = run_trial(n, t, with_m_statistics);
        o.ok = true;
      } catch (const std::exception& e) {
        o.error = e.what();
      }
    }
  };
  const unsigned workers = std::min<unsigned>(worker_count(), static_cast<unsigned>(trials));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  const auto failed = std::count_if(out.begin(), out.end(), [](const TrialOutcome& o) { return !o.ok; });
  if (static_cast<double>(failed) > config_.max_failure_rate * static_cast<double>(trials)) {
    std::string first;
    for (const auto& o : out)
      if (!o.ok) {
        first = o.error;
        break;
      }
    throw RunFailed(std::to_string(failed) + " of " + std::to_string(trials) + " trials failed at N=" +
                    std::to_string(n) + "; first error: " + first);
  }
  return out;
}

std::vector<CorrelationPrediction> simple_cluster_correlations(const Experiment& ex) {
  struct Simple {
    std::size_t entry, xi;
    std::size_t var;
    cd alpha;  // Lambda = alpha * m
  };
  const LimitLawSampler sampler = ex.limit_sampler();
  const auto& entries = ex.config().jordan.entries();
  std::vector<Simple> simple;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].blocks.size() != 1 || entries[i].blocks[0].p != 1 || entries[i].blocks[0].beta != 1) continue;
    const auto& idx = ex.perturbation().index.entries[i];
    const auto& sols = ex.predictions()[i].solutions;
    for (std::size_t s = 0; s < sols.size(); ++s) {
      const cd alpha = 1.0 / resolvent_moment(ex.measure(), sols[s], 1);
      simple.push_back({i, s, sampler.variable_index(i, s, idx.last[0], idx.first[0]), alpha});
    }
  }
  const MatrixXcd& c = sampler.covariance();
  const MatrixXcd& p = sampler.pseudo_covariance();
  auto moments = [&](const Simple& a, const Simple& b) {
    const cd pp = a.alpha * b.alpha * p(static_cast<Index>(a.var), static_cast<Index>(b.var));
    const cd cc = a.alpha * std::conj(b.alpha) * c(static_cast<Index>(a.var), static_cast<Index>(b.var));
    return std::pair<double, double>{0.5 * (pp + cc).real(), 0.5 * (cc - pp).real()};  // Re-Re, Im-Im
  };
  std::vector<CorrelationPrediction> out;
  for (std::size_t a = 0; a < simple.size(); ++a)
    for (std::size_t b = a + 1; b < simple.size(); ++b) {
      const auto [rr, ii] = moments(simple[a], simple[b]);
      const auto [ra, ia] = moments(simple[a], simple[a]);
      const auto [rb, ib] = moments(simple[b], simple[b]);
      const double rho_re = (ra > 0 && rb > 0) ? rr / std::sqrt(ra * rb) : 0.0;
      const double rho_im = (ia > 0 && ib > 0) ? ii / std::sqrt(ia * ib) : 0.0;
      out.push_back({simple[a].entry, simple[a].xi, simple[b].entry, simple[b].xi, rho_re, rho_im});
    }
  return out;
}

// ---------------------------------------------------------------- commands

Json cmd_predict(const ExperimentConfig& config) {
  const Experiment ex(config);
  Json j = stamped(config);
  Json entries = Json::array();
  for (std::size_t i = 0; i < ex.predictions().size(); ++i) {
    const auto& p = ex.predictions()[i];
    const auto& e = config.jordan.entries()[i];
    Json sols = Json::array(), marginal = Json::array(), clusters = Json::array();
    for (const cd& z : p.solutions) sols.push_back(complex_to_json(z));
    for (const cd& z : p.marginal) marginal.push_back(complex_to_json(z));
    Json classes = Json::array();
    for (const auto& b : e.blocks)
      classes.push_back({{"p", b.p}, {"beta", b.beta}, {"rate_exponent", 1.0 / (2.0 * b.p)}});
    for (const cd& z : p.solutions)
      clusters.push_back({{"xi", complex_to_json(z)}, {"size", p.multiplicity_k}, {"classes", classes}});
    entries.push_back({{"theta", complex_to_json(e.theta)},
                       {"k", p.multiplicity_k},
                       {"m", p.m()},
                       {"solutions", sols},
                       {"marginal", marginal},
                       {"failed_seeds", p.failed_seeds},
                       {"boundary_hit", p.boundary_hit},
                       {"clusters", clusters}});
  }
  j["entries"] = entries;
  j["expected_total"] = ex.expected_total();
  write_json(prepare_dir(config) / "predictions.json", j);
  return j;
}

Json cmd_simulate(const ExperimentConfig& config) {
  const Experiment ex(config);
  const fs::path dir = prepare_dir(config);
  const std::string hash = config_hash(config);
  CsvWriter trials_csv(dir / "trials.csv", hash, "trial_id,N,seed,eig_re,eig_im,class,cluster_id");
  CsvWriter status_csv(dir / "trial_status.csv", hash, "trial_id,N,status,path,outliers,expected,counts_match,error");
  Json per_n = Json::array();
  for (Index n : config.n_grid) {
    const auto outcomes = ex.run(n);
    std::map<Index, Index> hist;
    Index ok = 0, mismatched = 0, with_outlier = 0;
    std::map<std::string, std::vector<double>> dev;
    for (const auto& o : outcomes) {
      const std::uint64_t seed =
          stream_seed(config.master_seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(o.trial), "ensemble");
      if (!o.ok) {
        std::string err = o.error;
        std::replace(err.begin(), err.end(), ',', ';');
        status_csv.row(o.trial, n, "failed", "", 0, ex.expected_total(), 0, err);
        continue;
      }
      ++ok;
      const auto& rep = o.result.report;
      const Index count = static_cast<Index>(rep.outliers.size());
      ++hist[count];
      if (count > 0) ++with_outlier;
      if (!rep.counts_match()) ++mismatched;
      status_csv.row(o.trial, n, "ok", o.result.path, count, ex.expected_total(), rep.counts_match() ? 1 : 0, "");
      for (const cd& z : rep.bulk) trials_csv.row(o.trial, n, seed, z.real(), z.imag(), "bulk", "");
      for (const auto& c : rep.clusters)
        for (const cd& z : c.members) {
          trials_csv.row(o.trial, n, seed, z.real(), z.imag(), "outlier", cluster_label(c));
          dev[cluster_label(c)].push_back(std::abs(z - c.xi));
        }
      for (const cd& z : rep.unmatched) trials_csv.row(o.trial, n, seed, z.real(), z.imag(), "outlier", "");
    }
    Index modal = -1, best = -1;
    Json h = Json::object();
    for (const auto& [k, v] : hist) {
      h[std::to_string(k)] = v;
      if (v > best) best = v, modal = k;
    }
    Json devs = Json::object();
    for (const auto& [k, v] : dev) devs[k] = {{"mean_abs_deviation", stats::mean(v)}, {"count", v.size()}};
    const double done = static_cast<double>(std::max<Index>(ok, 1));
    per_n.push_back({{"n", n},
                     {"trials", config.trials},
                     {"completed", ok},
                     {"failure_rate", static_cast<double>(config.trials - ok) / static_cast<double>(config.trials)},
                     {"count_histogram", h},
                     {"modal_count", modal},
                     {"expected_total", ex.expected_total()},
                     {"mismatch_rate", static_cast<double>(mismatched) / done},
                     {"outlier_rate", static_cast<double>(with_outlier) / done},
                     {"delta", ex.delta(n)},
                     {"capture", ex.capture(n)},
                     {"clusters", devs}});
  }
  Json j = stamped(config);
  j["runs"] = per_n;
  write_json(dir / "summary.json", j);
  return j;
}

Json cmd_fluct(const ExperimentConfig& config) {
  const Experiment ex(config);
  const fs::path dir = prepare_dir(config);
  const std::string hash = config_hash(config);
  const auto& entries = config.jordan.entries();
  CsvWriter lam_csv(dir / "lambda_samples.csv", hash, "n,theta_id,xi_id,p_class,trial,member,re,im");
  CsvWriter spec_csv(dir / "spectrum_scatter.csv", hash, "n,trial,kind,re,im");
  CsvWriter dev_csv(dir / "clusters_rescaled.csv", hash, "n,theta_id,xi_id,p_class,trial,member,dev_re,dev_im");

  const auto correlations = simple_cluster_correlations(ex);
  std::vector<std::pair<std::size_t, std::size_t>> simple_ids;
  for (const auto& c : correlations)
    for (auto id : {std::pair{c.entry_a, c.xi_a}, std::pair{c.entry_b, c.xi_b}})
      if (std::find(simple_ids.begin(), simple_ids.end(), id) == simple_ids.end()) simple_ids.push_back(id);
  std::string corr_header = "n,trial";
  for (const auto& [e, x] : simple_ids)
    corr_header += ",l" + std::to_string(e) + "_" + std::to_string(x) + "_re,l" + std::to_string(e) + "_" +
                   std::to_string(x) + "_im";
  CsvWriter corr_csv(dir / "correlation_scatter.csv", hash, corr_header);

  // key: (entry, xi, class index)
  using Key = std::tuple<std::size_t, std::size_t, std::size_t>;
  std::map<Key, std::vector<double>> mean_dev_by_n;  // one value per N
  std::map<Key, Json> polygons;
  Json discards = Json::array();
  Json covariance = stamped(config);
  const Index n_last = config.n_grid.back();

  for (Index n : config.n_grid) {
    const bool last = n == n_last;
    const auto outcomes = ex.run(n, last);
    std::map<Key, std::vector<double>> devs;
    std::map<Key, std::vector<std::vector<cd>>> per_trial;
    Index skipped = 0, ok = 0;
    std::vector<VectorXcd> m_samples;
    std::vector<std::vector<cd>> simple_lambda;  // per trial, per simple cluster
    for (const auto& o : outcomes) {
      if (!o.ok) continue;
      ++ok;
      const auto& rep = o.result.report;
      if (o.trial == 0) {
        for (const cd& z : rep.bulk) spec_csv.row(n, o.trial, "bulk", z.real(), z.imag());
        for (const cd& z : rep.outliers) spec_csv.row(n, o.trial, "outlier", z.real(), z.imag());
      }
      if (last && o.result.m_statistics.size() > 0) m_samples.push_back(o.result.m_statistics);
      std::vector<cd> row(simple_ids.size(), cd(NAN, NAN));
      bool trial_ok = true;
      for (const auto& c : rep.clusters) {
        std::vector<ClassSamples> cls;
        try {
          cls = rescale_cluster(c.members, c.xi, entries[c.prediction], n);
        } catch (const SkipTrial&) {
          trial_ok = false;
          continue;
        }
        for (std::size_t k = 0; k < cls.size(); ++k) {
          const Key key{c.prediction, c.solution, k};
          auto& pt = per_trial[key];
          pt.push_back(cls[k].lambda);
          for (std::size_t m = 0; m < cls[k].lambda.size(); ++m) {
            lam_csv.row(n, c.prediction, c.solution, cls[k].p, o.trial, m, cls[k].lambda[m].real(),
                        cls[k].lambda[m].imag());
            dev_csv.row(n, c.prediction, c.solution, cls[k].p, o.trial, m, cls[k].deviations[m].real(),
                        cls[k].deviations[m].imag());
            devs[key].push_back(std::abs(cls[k].deviations[m]));
          }
        }
        const auto it = std::find(simple_ids.begin(), simple_ids.end(), std::pair{c.prediction, c.solution});
        if (it != simple_ids.end() && cls.size() == 1 && cls[0].lambda.size() == 1)
          row[static_cast<std::size_t>(it - simple_ids.begin())] = cls[0].lambda[0];
      }
      if (!trial_ok) ++skipped;
      if (!simple_ids.empty()) {
        simple_lambda.push_back(row);
        std::string line = std::to_string(n) + "," + std::to_string(o.trial);
        for (const cd& z : row) line += "," + format_double(z.real()) + "," + format_double(z.imag());
        corr_csv.line(line);
      }
    }
    discards.push_back({{"n", n}, {"completed", ok},
                        {"discard_rate", ok ? static_cast<double>(skipped) / static_cast<double>(ok) : 1.0}});
    for (const auto& [key, v] : devs) {
      auto& series = mean_dev_by_n[key];
      series.push_back(stats::mean(v));
    }
    for (const auto& [key, trials] : per_trial) {
      const auto& b = entries[std::get<0>(key)].blocks[std::get<2>(key)];
      if (b.beta != 1 || b.p < 2) continue;
      const PolygonStats ps = polygon_statistics(trials, b.p);
      polygons[key].push_back({{"n", n},
                               {"p", b.p},
                               {"gap_mean", ps.gap_mean},
                               {"gap_expected", 2.0 * kPi / b.p},
                               {"gap_std", ps.gap_std},
                               {"radius_cv", ps.radius_cv},
                               {"trials", ps.trials}});
    }

    if (last) {
      // Outlier correlations between simple clusters.
      Json corr = Json::array();
      for (const auto& pr : correlations) {
        const auto ia = static_cast<std::size_t>(
            std::find(simple_ids.begin(), simple_ids.end(), std::pair{pr.entry_a, pr.xi_a}) - simple_ids.begin());
        const auto ib = static_cast<std::size_t>(
            std::find(simple_ids.begin(), simple_ids.end(), std::pair{pr.entry_b, pr.xi_b}) - simple_ids.begin());
        std::vector<double> xa, xb;
        for (const auto& row : simple_lambda)
          if (std::isfinite(row[ia].real()) && std::isfinite(row[ib].real())) {
            xa.push_back(row[ia].real());
            xb.push_back(row[ib].real());
          }
        Json item{{"a", {{"theta_id", pr.entry_a}, {"xi_id", pr.xi_a}}},
                  {"b", {{"theta_id", pr.entry_b}, {"xi_id", pr.xi_b}}},
                  {"pairs", xa.size()},
                  {"rho_predicted", pr.rho_re}};
        if (xa.size() >= 4) {
          const double r = stats::pearson(xa, xb);
          item["rho_empirical"] = r;
          item["z_vs_zero"] = stats::fisher_z(r, 0.0, xa.size());
          item["z_vs_predicted"] = stats::fisher_z(r, pr.rho_re, xa.size());
        }
        corr.push_back(item);
      }
      covariance["n"] = n;
      covariance["outlier_correlations"] = corr;
      const auto min_trials = static_cast<std::size_t>(config.min_covariance_trials);
      if (m_samples.size() < min_trials) {
        covariance["m_statistics"] = {{"error", "InsufficientData"},
                                      {"samples", m_samples.size()},
                                      {"required", min_trials}};
      } else {
        const LimitLawSampler sampler = ex.limit_sampler();
        std::vector<std::string> labels;
        for (const auto& v : sampler.variables())
          labels.push_back("m[" + std::to_string(v.entry) + "," + std::to_string(v.xi_index) + "," +
                           std::to_string(v.k) + "," + std::to_string(v.l) + "]");
        Json rows = Json::array();
        for (const auto& r : covariance_comparison(m_samples, sampler.covariance(), sampler.pseudo_covariance(),
                                                   labels, min_trials))
          rows.push_back({{"name", r.name},
                          {"empirical", r.empirical},
                          {"theoretical", r.theoretical},
                          {"stderr", r.std_error},
                          {"z", r.z},
                          {"flag", r.z > 3.0}});
        covariance["m_statistics"] = rows;
      }
    }
  }

  Json rates = stamped(config);
  Json fits = Json::array();
  for (const auto& [key, series] : mean_dev_by_n) {
    const auto& b = entries[std::get<0>(key)].blocks[std::get<2>(key)];
    Json item{{"theta_id", std::get<0>(key)},
              {"xi_id", std::get<1>(key)},
              {"p", b.p},
              {"beta", b.beta},
              {"n_grid", config.n_grid},
              {"mean_deviation", series},
              {"slope_expected", -1.0 / (2.0 * b.p)}};
    if (series.size() == config.n_grid.size()) {
      try {
        const RateFit f = estimate_rate(config.n_grid, series);
        item["slope"] = f.slope;
        item["stderr"] = f.std_error;
        item["intercept"] = f.intercept;
      } catch (const InsufficientData& e) {
        item["error"] = e.what();
      }
    } else {
      item["error"] = "class missing at some N";
    }
    fits.push_back(item);
  }
  rates["fits"] = fits;
  rates["discards"] = discards;
  write_json(dir / "rates.json", rates);

  Json poly = stamped(config);
  poly["classes"] = Json::array();
  for (const auto& [key, rows] : polygons)
    poly["classes"].push_back({{"theta_id", std::get<0>(key)}, {"xi_id", std::get<1>(key)}, {"by_n", rows}});
  write_json(dir / "polygon.json", poly);
  write_json(dir / "covariance.json", covariance);

  Json j = stamped(config);
  j["rates"] = rates;
  j["polygon"] = poly;
  j["covariance"] = covariance;
  return j;
}

namespace {

Json moment_json(const std::string& name, cd value, cd theory, double se, double threshold) {
  const double z = se > 0.0 ? std::abs(value - theory) / se : 0.0;
  return {{"name", name}, {"kind", "monte_carlo"}, {"value", complex_to_json(value)},
          {"theory", complex_to_json(theory)}, {"stderr", se}, {"z", z}, {"pass", z < threshold}};
}

Json moment_json(const GaussianMomentRow& r, double threshold) {
  return moment_json(r.name, r.empirical, r.theoretical, r.std_error, threshold);
}

Json exact_json(const std::string& name, double residual, double tol) {
  return {{"name", name}, {"kind", "exact"}, {"residual", residual}, {"pass", residual < tol}};
}

std::pair<cd, double> sample_mean(const std::vector<cd>& v) {
  cd m = 0.0;
  for (const cd& x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (const cd& x : v) ss += std::norm(x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
}

MatrixXcd random_complex(Index r, Index c, Rng& rng) {
  MatrixXcd m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = complex_normal(rng);
  return m;
}

unsigned long long double_factorial(int n) {
  unsigned long long r = 1;
  for (int k = n; k > 1; k -= 2) r *= static_cast<unsigned long long>(k);
  return r;
}

}  // namespace

Json cmd_haar_check(const ExperimentConfig& config) {
  const auto& h = config.haar;
  const double tol = h.exact_tol;
  const double zt = h.z_threshold;
  Json rows = Json::array();
  Rng rng = make_stream(config.master_seed, static_cast<std::uint64_t>(h.n), 0, "haar_exact");

  {
    const MatrixXcd a = random_complex(6, 6, rng) + 4.0 * MatrixXcd::Identity(6, 6);
    rows.push_back(exact_json("resolvent expansion (p=3)", resolvent_expansion_check(a, cd(0.3, 0.2), 3), tol));
  }
  {
    const MatrixXcd a = random_complex(3, 3, rng) + 4.0 * MatrixXcd::Identity(3, 3);
    const MatrixXcd d = random_complex(4, 4, rng) + 4.0 * MatrixXcd::Identity(4, 4);
    rows.push_back(exact_json("Schur block inverse",
                              schur_inverse_check(a, random_complex(3, 4, rng), random_complex(4, 3, rng), d), tol));
  }
  for (int q = 1; q <= 4; ++q)
    rows.push_back(exact_json("Gram-Weingarten q=" + std::to_string(q), weingarten(q, h.n).gram_residual, tol));
  {
    const WeingartenTable w = weingarten(2, 10);
    const double res = std::max(std::abs(w(identity_permutation(2)) - 1.0 / 99.0),
                                std::abs(w(Permutation{1, 0}) + 1.0 / 990.0));
    rows.push_back(exact_json("Weingarten closed form q=2 N=10", res, tol));
  }
  for (int n2 = 2; n2 <= 8; n2 += 2) {
    const double diff = std::abs(static_cast<double>(perfect_matchings(n2).size()) -
                                 static_cast<double>(double_factorial(n2 - 1)));
    rows.push_back(exact_json("perfect matchings |M(" + std::to_string(n2) + ")|", diff, 0.5));
  }

  // Haar bilinear forms sqrt(N) <u_i, T u_j> with a traceless Hermitian T.
  const Index n = h.n;
  VectorXd t(n);
  for (Index i = 0; i < n; ++i) t(i) = std::sqrt(3.0) * (2.0 * (static_cast<double>(i) + 0.5) / n - 1.0);
  t.array() -= t.mean();
  const MatrixXcd tm = t.cast<cd>().asDiagonal();
  const double v = t.squaredNorm() / static_cast<double>(n);
  Rng mc = make_stream(config.master_seed, static_cast<std::uint64_t>(n), 0, "haar_mc");
  const auto samples = bilinear_fluctuation_samples({tm}, 2, n, h.trials, mc);
  std::vector<cd> z11, z12, z11_cubed;
  for (const auto& s : samples) {
    z11.push_back(s[0](0, 0));
    z12.push_back(s[0](0, 1));
    z11_cubed.push_back(std::pow(s[0](0, 0), 3));
  }
  for (const auto& r : gaussian_moment_check(z11, v, v, 2)) {
    Json row = moment_json(r, zt);
    row["name"] = "Haar diagonal form: " + r.name;
    rows.push_back(row);
  }
  {
    std::vector<cd> sq;
    for (const cd& z : z12) sq.push_back(std::norm(z));
    const auto [m, se] = sample_mean(sq);
    rows.push_back(moment_json("Haar off-diagonal form: E[|Z|^2]", m, v, se, zt));
  }
  {
    const auto [m, se] = sample_mean(z11_cubed);
    rows.push_back(moment_json("traceless moment q=3", m, 0.0, se, zt));
  }
  {
    // Exact Weingarten moment against direct Haar draws at small N.
    const Index ns = 5;
    Rng small = make_stream(config.master_seed, static_cast<std::uint64_t>(ns), 0, "haar_small");
    std::vector<MatrixXcd> ts, as;
    for (int q = 0; q < 2; ++q) {
      MatrixXcd x = random_complex(ns, ns, small);
      ts.push_back(x - (x.trace() / static_cast<double>(ns)) * MatrixXcd::Identity(ns, ns));
      as.push_back(random_complex(ns, ns, small));
    }
    const cd exact = haar_moment_exact(ts, as);
    std::vector<cd> draws;
    for (Index k = 0; k < h.trials; ++k) draws.push_back(haar_moment_draw(ts, as, small));
    const auto [m, se] = sample_mean(draws);
    rows.push_back(moment_json("Weingarten moment q=2 N=5 vs Haar draws", m, exact, se, zt));
  }
  {
    // Real Gaussian synthetic input: Z^4 moment 3 tau^4.
    Rng g = make_stream(config.master_seed, 0, 0, "haar_synthetic");
    std::vector<cd> z;
    const double s2 = 1.5;
    for (Index k = 0; k < h.trials; ++k) z.push_back(std::sqrt(s2) * standard_normal(g));
    for (const auto& r : gaussian_moment_check(z, s2, s2, 2)) {
      Json row = moment_json(r, zt);
      row["name"] = "real Gaussian: " + r.name;
      rows.push_back(row);
    }
  }

  bool all = true;
  for (const auto& r : rows) all = all && r["pass"].get<bool>();
  Json j = stamped(config);
  j["n"] = h.n;
  j["trials"] = h.trials;
  j["z_threshold"] = zt;
  j["checks"] = rows;
  j["all_pass"] = all;
  write_json(prepare_dir(config) / "haar_check.json", j);
  return j;
}

Json cmd_report(const ExperimentConfig& config) {
  const fs::path dir = prepare_dir(config);
  Json j = stamped(config);
  Json sections = Json::object();
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json" && e.path().filename() != "report.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    try {
      sections[f.stem().string()] = Json::parse(in);
    } catch (const Json::parse_error& e) {
      sections[f.stem().string()] = {{"error", e.what()}};
    }
  }
  j["sections"] = sections;
  write_json(dir / "report.json", j);
  return j;
}

}  // namespace outlierlab
