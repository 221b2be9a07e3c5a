// Experiment orchestration: runs the adaptive-window learner and baselines
// over generated environments with common random numbers, computes dynamic
// regret traces, and emits machine-readable results.
#pragma once

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "saws/engine.hpp"
#include "saws/envgen.hpp"
#include "saws/problems.hpp"
#include "saws/segmentation.hpp"

namespace saws {

using json = nlohmann::json;

// Shortest round-trip decimal for bit-reproducible text output.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Learners: a uniform decide/observe interface over the window policies.

class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::string name() const = 0;
  // Decision for period n together with the look-back window it used.
  virtual OnlinePoint decide(std::size_t n) = 0;
  virtual void observe(const SampleBatch& batch) = 0;
};

class SawsLearner final : public Learner {
 public:
  SawsLearner(std::shared_ptr<const LossModel> model, FeasibleSet set,
              ThresholdSchedule schedule, EngineOptions opts, std::optional<Vec> theta1)
      : runner_(std::move(model), std::move(set), std::move(schedule), opts,
                std::move(theta1)) {}
  std::string name() const override { return "saws"; }
  OnlinePoint decide(std::size_t n) override { return runner_.decide(n); }
  void observe(const SampleBatch& b) override { runner_.observe(b); }

 private:
  OnlineRunner runner_;
};

// Solves the pre-average over a fixed trailing window each period.
class FixedWindowLearner final : public Learner {
 public:
  FixedWindowLearner(std::shared_ptr<const LossModel> model, FeasibleSet set,
                     std::size_t k, SolverOptions solver, std::optional<Vec> theta1)
      : model_(std::move(model)), set_(std::move(set)), k_(k), solver_(solver) {
    theta1_ = theta1 ? set_.project(*theta1) : set_.project(zeros(set_.dimension()));
    if (k_ < 1) throw ConfigError("fixed-window: k must be >= 1");
  }
  std::string name() const override { return "fixed-window:" + std::to_string(k_); }

  OnlinePoint decide(std::size_t n) override {
    if (n == 1) return {theta1_, 0};
    const std::size_t k = std::min(k_, n - 1);
    return solve_window(*model_, set_, history_, k, n, solver_);
  }

  void observe(const SampleBatch& b) override {
    history_.push_back(b);
    while (history_.size() > k_) history_.erase(history_.begin());
  }

  static OnlinePoint solve_window(const LossModel& model, const FeasibleSet& set,
                                  const std::vector<SampleBatch>& history,
                                  std::size_t k, std::size_t n,
                                  const SolverOptions& solver) {
    std::vector<const SampleBatch*> recent;
    for (std::size_t i = history.size() - k; i < history.size(); ++i)
      recent.push_back(&history[i]);
    auto loss = model.window_loss(recent);
    const std::size_t B = recent.empty() ? 1 : recent[0]->size();
    const SolverBudget budget =
        SolverBudget::for_window(model.regime(), model.constants(), model.dimension(),
                                 B, n, k, solver.gap_constant_A, solver.max_iters);
    SolveResult res =
        minimize_empirical(*loss, set, budget, std::nullopt, solver.use_closed_forms);
    return {std::move(res.theta), k};
  }

 private:
  std::shared_ptr<const LossModel> model_;
  FeasibleSet set_;
  std::size_t k_;
  SolverOptions solver_;
  Vec theta1_;
  std::vector<SampleBatch> history_;
};

// Pools all data since period 1 (the k = n-1 policy).
class ErmAllLearner final : public Learner {
 public:
  ErmAllLearner(std::shared_ptr<const LossModel> model, FeasibleSet set,
                SolverOptions solver, std::optional<Vec> theta1)
      : model_(std::move(model)), set_(std::move(set)), solver_(solver) {
    theta1_ = theta1 ? set_.project(*theta1) : set_.project(zeros(set_.dimension()));
  }
  std::string name() const override { return "erm-all"; }
  OnlinePoint decide(std::size_t n) override {
    if (n == 1) return {theta1_, 0};
    return FixedWindowLearner::solve_window(*model_, set_, history_, n - 1, n, solver_);
  }
  void observe(const SampleBatch& b) override { history_.push_back(b); }

 private:
  std::shared_ptr<const LossModel> model_;
  FeasibleSet set_;
  SolverOptions solver_;
  Vec theta1_;
  std::vector<SampleBatch> history_;
};

// Knows the true segment boundaries and pools exactly the data of the current
// piece; at a piece's first period it falls back to the single most recent
// batch.
class RestartOracleLearner final : public Learner {
 public:
  RestartOracleLearner(std::shared_ptr<const LossModel> model, FeasibleSet set,
                       std::vector<std::size_t> boundaries, SolverOptions solver,
                       std::optional<Vec> theta1)
      : model_(std::move(model)),
        set_(std::move(set)),
        boundaries_(std::move(boundaries)),
        solver_(solver) {
    theta1_ = theta1 ? set_.project(*theta1) : set_.project(zeros(set_.dimension()));
  }
  std::string name() const override { return "restart-oracle"; }

  OnlinePoint decide(std::size_t n) override {
    if (n == 1) return {theta1_, 0};
    // first period of the piece containing n
    std::size_t piece_start = 1;
    for (std::size_t b : boundaries_)
      if (b < n) piece_start = std::max(piece_start, b + 1);
    const std::size_t k = std::clamp<std::size_t>(n - piece_start, 1, n - 1);
    return FixedWindowLearner::solve_window(*model_, set_, history_, k, n, solver_);
  }

  void observe(const SampleBatch& b) override { history_.push_back(b); }

 private:
  std::shared_ptr<const LossModel> model_;
  FeasibleSet set_;
  std::vector<std::size_t> boundaries_;
  SolverOptions solver_;
  Vec theta1_;
  std::vector<SampleBatch> history_;
};

// ---------------------------------------------------------------------------
// Traces

struct PeriodRecord {
  std::size_t n = 0;
  std::size_t window = 0;  // K_n
  double excess = 0.0;
  double excess_se = 0.0;
  double cum_regret = 0.0;
};

struct RegretTrace {
  std::string learner;
  std::uint64_t replication = 0;
  std::vector<PeriodRecord> rows;
  double wall_seconds = 0.0;   // in-memory only, never serialized
  std::string config_hash;
};

// CSV columns are pinned: n,K_n,excess,excess_se,cum_regret.
inline void emit_csv(const RegretTrace& trace, std::ostream& os) {
  os << "n,K_n,excess,excess_se,cum_regret\n";
  for (const PeriodRecord& r : trace.rows)
    os << r.n << ',' << r.window << ',' << format_double(r.excess) << ','
       << format_double(r.excess_se) << ',' << format_double(r.cum_regret) << '\n';
}

// ---------------------------------------------------------------------------
// Experiment configuration

struct ScheduleConfig {
  Regime regime = Regime::strongly_convex;
  double alpha = 0.05;
  std::optional<double> c_tau;     // fixed constant...
  std::vector<double> cv_grid;     // ...or cross-validated over this grid
  std::size_t cv_prefix = 128;
};

struct PathConfig {
  std::string kind;  // constant | zigzag | alternating | tv-budget | piecewise | hard-sc | hard-lip | csv
  Vec constant_value;
  std::string zigzag_pattern;
  double u = 0.0;
  double V = 0.0;
  std::string step_law = "uniform";
  std::vector<std::size_t> boundaries;
  std::vector<Vec> levels;
  std::vector<double> jumps;
  double gamma = 1.0;
  double c = 0.5;
  std::string file;
};

struct ExperimentConfig {
  FamilyConfig family;
  PathConfig path;
  std::size_t horizon = 128;
  std::size_t batch_size = 1;
  ScheduleConfig schedule;
  SolverOptions solver;
  std::vector<std::string> learners{"saws"};
  std::size_t replications = 1;
  std::uint64_t seed = 1;
  std::size_t mc_samples = 100000;
  std::string out_dir;
  std::optional<Vec> theta1;  // initial decision; default projection of the origin
};

namespace detail {

inline void require_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& where, std::vector<std::string>& errors) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) errors.push_back(where + ": unknown key '" + it.key() + "'");
  }
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

inline std::string config_hash(const json& j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(detail::fnv1a(j.dump())));
  return buf;
}

// Strict parse: unknown keys and invalid ranges are collected and reported
// together.
inline ExperimentConfig parse_config(const json& j) {
  std::vector<std::string> errors;
  ExperimentConfig cfg;

  detail::require_keys(j,
                       {"family", "path", "horizon", "batch_size", "schedule", "solver",
                        "learners", "replications", "seed", "mc_samples", "out_dir",
                        "theta1", "sweep"},
                       "config", errors);

  if (!j.contains("family") || !j["family"].is_object()) {
    errors.push_back("config: missing 'family' object");
  } else {
    const json& f = j["family"];
    detail::require_keys(f,
                         {"name", "d", "sigma0", "M", "nu", "c1", "c2", "sigma_diag",
                          "noise_sd", "domain"},
                         "family", errors);
    try {
      cfg.family.family = family_from_string(f.value("name", ""));
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
    cfg.family.d = f.value("d", std::size_t{1});
    cfg.family.sigma0 = f.value("sigma0", 1.0);
    cfg.family.M = f.value("M", 4.0);
    cfg.family.nu = f.value("nu", 0.5);
    cfg.family.c1 = f.value("c1", 1.0);
    cfg.family.c2 = f.value("c2", 1.0);
    if (f.contains("sigma_diag")) cfg.family.sigma_diag = f["sigma_diag"].get<Vec>();
    cfg.family.noise_sd = f.value("noise_sd", -1.0);
    if (f.contains("domain")) {
      const json& dom = f["domain"];
      detail::require_keys(dom, {"kind", "center", "radius", "lo", "hi"}, "domain",
                           errors);
      const std::string kind = dom.value("kind", "");
      try {
        if (kind == "ball") {
          cfg.family.domain_override = FeasibleSet::ball(
              dom.value("center", Vec(cfg.family.d, 0.0)), dom.value("radius", 1.0));
        } else if (kind == "box") {
          cfg.family.domain_override =
              FeasibleSet::box(dom["lo"].get<Vec>(), dom["hi"].get<Vec>());
        } else if (kind == "interval") {
          cfg.family.domain_override =
              FeasibleSet::interval(dom.value("lo", 0.0), dom.value("hi", 1.0));
        } else {
          errors.push_back("domain: unknown kind '" + kind + "'");
        }
      } catch (const std::exception& e) {
        errors.push_back(std::string("domain: ") + e.what());
      }
    }
  }

  if (!j.contains("path") || !j["path"].is_object()) {
    errors.push_back("config: missing 'path' object");
  } else {
    const json& p = j["path"];
    detail::require_keys(p,
                         {"kind", "value", "pattern", "u", "V", "step_law", "boundaries",
                          "levels", "jumps", "gamma", "c", "file"},
                         "path", errors);
    cfg.path.kind = p.value("kind", "");
    if (p.contains("value")) cfg.path.constant_value = p["value"].get<Vec>();
    cfg.path.zigzag_pattern = p.value("pattern", "small");
    cfg.path.u = p.value("u", 0.0);
    cfg.path.V = p.value("V", 0.0);
    cfg.path.step_law = p.value("step_law", "uniform");
    if (p.contains("boundaries"))
      cfg.path.boundaries = p["boundaries"].get<std::vector<std::size_t>>();
    if (p.contains("levels")) {
      for (const json& lv : p["levels"]) cfg.path.levels.push_back(lv.get<Vec>());
    }
    if (p.contains("jumps")) cfg.path.jumps = p["jumps"].get<std::vector<double>>();
    cfg.path.gamma = p.value("gamma", 1.0);
    cfg.path.c = p.value("c", 0.5);
    cfg.path.file = p.value("file", "");
  }

  cfg.horizon = j.value("horizon", std::size_t{128});
  cfg.batch_size = j.value("batch_size", std::size_t{1});
  if (cfg.horizon < 1) errors.push_back("config: horizon must be >= 1");
  if (cfg.batch_size < 1) errors.push_back("config: batch_size must be >= 1");

  if (!j.contains("schedule") || !j["schedule"].is_object()) {
    errors.push_back("config: missing 'schedule' object");
  } else {
    const json& s = j["schedule"];
    detail::require_keys(s, {"regime", "alpha", "c_tau", "cv_grid", "cv_prefix"},
                         "schedule", errors);
    const std::string regime = s.value("regime", "strongly-convex");
    if (regime == "strongly-convex")
      cfg.schedule.regime = Regime::strongly_convex;
    else if (regime == "lipschitz")
      cfg.schedule.regime = Regime::lipschitz;
    else
      errors.push_back("schedule: unknown regime '" + regime + "'");
    cfg.schedule.alpha = s.value("alpha", 0.05);
    if (!(cfg.schedule.alpha > 0.0 && cfg.schedule.alpha <= 1.0))
      errors.push_back("schedule: alpha must lie in (0,1]");
    if (s.contains("c_tau")) cfg.schedule.c_tau = s["c_tau"].get<double>();
    if (s.contains("cv_grid")) cfg.schedule.cv_grid = s["cv_grid"].get<std::vector<double>>();
    cfg.schedule.cv_prefix = s.value("cv_prefix", std::size_t{128});
    if (!cfg.schedule.c_tau && cfg.schedule.cv_grid.empty())
      cfg.schedule.cv_grid = {0.01, 0.1, 1.0, 10.0};
  }

  if (j.contains("solver")) {
    const json& s = j["solver"];
    detail::require_keys(s, {"max_iters", "gap_constant", "closed_forms"}, "solver",
                         errors);
    cfg.solver.max_iters = s.value("max_iters", std::size_t{400});
    cfg.solver.gap_constant_A = s.value("gap_constant", 1.0);
    cfg.solver.use_closed_forms = s.value("closed_forms", true);
  }

  if (j.contains("learners")) cfg.learners = j["learners"].get<std::vector<std::string>>();
  if (cfg.learners.empty()) errors.push_back("config: learners must be non-empty");
  cfg.replications = j.value("replications", std::size_t{1});
  if (cfg.replications < 1) errors.push_back("config: replications must be >= 1");
  cfg.seed = j.value("seed", std::uint64_t{1});
  cfg.mc_samples = j.value("mc_samples", std::size_t{100000});
  cfg.out_dir = j.value("out_dir", "");
  if (j.contains("theta1")) cfg.theta1 = j["theta1"].get<Vec>();

  if (!errors.empty()) {
    std::string msg = "configuration invalid:";
    for (const std::string& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

inline std::vector<Vec> load_path_csv(std::istream& is) {
  std::vector<Vec> values;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("path csv: empty file");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Vec row;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        first = false;
        continue;  // the period column
      }
      row.push_back(std::strtod(cell.c_str(), nullptr));
    }
    if (row.empty()) throw ConfigError("path csv: row without coordinates");
    values.push_back(std::move(row));
  }
  return values;
}

// Materialize the configured parameter path (with segment hint when the
// construction implies one).
inline ParameterPath build_path(const ExperimentConfig& cfg, const FeasibleSet& domain) {
  const PathConfig& p = cfg.path;
  const std::size_t N = cfg.horizon;
  if (p.kind == "constant") {
    if (p.constant_value.empty())
      throw ConfigError("path: constant requires 'value'");
    ParameterPath path;
    path.values.assign(N, p.constant_value);
    path.segment_hint = std::vector<std::size_t>{0, N - 1};
    return path;
  }
  if (p.kind == "zigzag") return gen_zigzag(zigzag_from_string(p.zigzag_pattern), N);
  if (p.kind == "alternating") return gen_zigzag(ZigzagKind::alternating, N, p.u);
  if (p.kind == "tv-budget") {
    const StepLaw law = p.step_law == "exponential" ? StepLaw::exponential
                                                    : StepLaw::uniform;
    return gen_tv_budget(N, p.V, law, domain, cfg.seed);
  }
  if (p.kind == "piecewise") {
    if (p.boundaries.empty() || p.levels.size() != p.boundaries.size())
      throw ConfigError("path: piecewise needs matching 'boundaries' and 'levels'");
    ParameterPath path;
    path.values.reserve(N);
    std::size_t seg = 0;
    for (std::size_t n = 1; n <= N; ++n) {
      // boundaries are segment ends; periods past the last boundary keep the
      // final level
      while (seg + 1 < p.boundaries.size() && n > p.boundaries[seg]) ++seg;
      path.values.push_back(p.levels[seg]);
    }
    std::vector<std::size_t> hint{0};
    for (std::size_t b : p.boundaries) hint.push_back(b);
    if (hint.back() != N - 1) hint.push_back(N - 1);
    path.segment_hint = hint;
    path.total_variation = ParameterPath::realized_tv(path.values);
    return path;
  }
  if (p.kind == "hard-sc")
    return gen_hard_instance_sc(N, p.boundaries, p.jumps, p.gamma, p.c, cfg.family.d,
                                cfg.batch_size, cfg.seed);
  if (p.kind == "hard-lip")
    return gen_hard_instance_lip(N, p.boundaries, p.jumps, cfg.family.d,
                                 cfg.batch_size, cfg.seed);
  if (p.kind == "csv") {
    std::ifstream f(p.file);
    if (!f) throw ConfigError("path: cannot open '" + p.file + "'");
    ParameterPath path;
    path.values = load_path_csv(f);
    if (path.values.size() != N)
      throw ConfigError("path: csv length does not match the horizon");
    path.total_variation = ParameterPath::realized_tv(path.values);
    return path;
  }
  throw ConfigError("path: unknown kind '" + p.kind + "'");
}

// ---------------------------------------------------------------------------
// Reference curves (constants set to 1)

// Strongly convex class lower bound: 1 + sum_j min{d/B, len_j - 1} + sum_j r_j^2.
inline double lower_bound_reference_sc(std::span<const std::size_t> segment_lengths,
                                       std::span<const double> jumps, std::size_t d,
                                       std::size_t B) {
  if (segment_lengths.size() != jumps.size())
    throw ContractError("lower_bound_reference_sc: lengths/jumps mismatch");
  const double dB = static_cast<double>(d) / static_cast<double>(B);
  double total = 1.0;
  for (std::size_t j = 0; j < segment_lengths.size(); ++j) {
    const double len = static_cast<double>(segment_lengths[j]);
    total += std::min(dB, std::max(0.0, len - 1.0)) + jumps[j] * jumps[j];
  }
  return total;
}

// Lipschitz class lower bound:
// 1 + sum_j min{sqrt(d len_j / B), (len_j - 2)_+} + sum_j r_j.
inline double lower_bound_reference_lip(std::span<const std::size_t> segment_lengths,
                                        std::span<const double> jumps, std::size_t d,
                                        std::size_t B) {
  if (segment_lengths.size() != jumps.size())
    throw ContractError("lower_bound_reference_lip: lengths/jumps mismatch");
  const double dB = static_cast<double>(d) / static_cast<double>(B);
  double total = 1.0;
  for (std::size_t j = 0; j < segment_lengths.size(); ++j) {
    const double len = static_cast<double>(segment_lengths[j]);
    total += std::min(std::sqrt(dB * len), std::max(0.0, len - 2.0)) + jumps[j];
  }
  return total;
}

// Total-variation lower bounds of the corollaries.
inline double lower_bound_reference_tv(Regime regime, double V, std::size_t N,
                                       std::size_t d, std::size_t B) {
  const double dB = static_cast<double>(d) / static_cast<double>(B);
  const double NN = static_cast<double>(N);
  if (regime == Regime::strongly_convex)
    return 1.0 + dB + std::cbrt(NN) * std::pow(V * dB, 2.0 / 3.0);
  return 1.0 + std::sqrt(NN * dB) + std::pow(NN, 2.0 / 3.0) * std::cbrt(V * dB);
}

// ---------------------------------------------------------------------------
// Experiment driver

struct ExperimentResult {
  std::vector<RegretTrace> traces;  // sorted by (learner, replication)
  json config_echo;
  double chosen_c_tau = 0.0;
};

namespace detail {

inline std::unique_ptr<Learner> make_learner(const std::string& spec,
                                             const Environment& env,
                                             const ThresholdSchedule& schedule,
                                             const EngineOptions& opts,
                                             const ParameterPath& path,
                                             const std::optional<Vec>& theta1) {
  if (spec == "saws")
    return std::make_unique<SawsLearner>(env.model_ptr(), env.domain(), schedule, opts,
                                         theta1);
  if (spec.rfind("fixed-window:", 0) == 0) {
    const std::size_t k = std::stoul(spec.substr(13));
    return std::make_unique<FixedWindowLearner>(env.model_ptr(), env.domain(), k,
                                                opts.solver, theta1);
  }
  if (spec == "erm-all")
    return std::make_unique<ErmAllLearner>(env.model_ptr(), env.domain(), opts.solver,
                                           theta1);
  if (spec == "restart-oracle") {
    if (!path.segment_hint)
      throw ConfigError("restart-oracle: the configured path has no true boundaries");
    return std::make_unique<RestartOracleLearner>(env.model_ptr(), env.domain(),
                                                  *path.segment_hint, opts.solver,
                                                  theta1);
  }
  throw ConfigError("unknown learner '" + spec + "'");
}

inline RegretTrace run_one(const Environment& env, const ParameterPath& path,
                           const std::string& learner_spec,
                           const ThresholdSchedule& schedule, const EngineOptions& opts,
                           std::uint64_t rep, const std::string& hash,
                           const std::optional<Vec>& theta1) {
  const auto t0 = std::chrono::steady_clock::now();
  auto learner = make_learner(learner_spec, env, schedule, opts, path, theta1);
  PopulationOracle oracle = env.population_oracle(rep);
  RegretTrace trace;
  trace.learner = learner->name();
  trace.replication = rep;
  trace.config_hash = hash;
  double cum = 0.0;
  for (std::size_t n = 1; n <= env.horizon(); ++n) {
    OnlinePoint point = learner->decide(n);
    const ExcessEstimate e = oracle.at(n).excess(point.decision);
    cum += e.value;
    trace.rows.push_back({n, point.window, e.value, e.std_error, cum});
    learner->observe(env.batch(n, rep));
  }
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return trace;
}

}  // namespace detail

// Cross-validate the threshold constant on the replication-0 stream prefix.
inline double choose_c_tau(const ExperimentConfig& cfg, const Environment& env) {
  if (cfg.schedule.c_tau) return *cfg.schedule.c_tau;
  const std::size_t N0 = std::min(cfg.schedule.cv_prefix, env.horizon());
  std::vector<SampleBatch> prefix;
  prefix.reserve(N0);
  for (std::size_t n = 1; n <= N0; ++n) prefix.push_back(env.batch(n, 0));
  std::vector<ThresholdSchedule> candidates;
  std::vector<double> grid = cfg.schedule.cv_grid;
  std::sort(grid.begin(), grid.end());  // ties resolve toward the smallest constant
  for (double c : grid)
    candidates.push_back(ThresholdSchedule{cfg.schedule.regime, c, cfg.schedule.alpha,
                                           env.model().dimension(), cfg.batch_size});
  EngineOptions opts;
  opts.solver = cfg.solver;
  const std::size_t h =
      select_hyperparameter_cv(env.model_ptr(), env.domain(), prefix, candidates, opts);
  return grid[h];
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const json& echo,
                                       bool parallel = false) {
  FamilyConfig fam = cfg.family;
  auto probe_model = make_model(fam);
  if (probe_model->regime() != cfg.schedule.regime)
    throw ConfigError("config: schedule regime does not match the family's tag");
  const FeasibleSet domain =
      fam.domain_override ? *fam.domain_override : probe_model->default_domain();

  ParameterPath path = build_path(cfg, domain);
  Environment env =
      make_environment(fam, path.values, cfg.batch_size, cfg.seed, cfg.mc_samples);

  const double c_tau = choose_c_tau(cfg, env);
  const ThresholdSchedule schedule{cfg.schedule.regime, c_tau, cfg.schedule.alpha,
                                   env.model().dimension(), cfg.batch_size};
  EngineOptions opts;
  opts.solver = cfg.solver;

  const std::string hash = config_hash(echo);

  struct Job {
    std::string learner;
    std::uint64_t rep;
  };
  std::vector<Job> jobs;
  for (const std::string& learner : cfg.learners)
    for (std::uint64_t rep = 0; rep < cfg.replications; ++rep)
      jobs.push_back({learner, rep});

  std::vector<RegretTrace> traces(jobs.size());
  if (parallel) {
    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(),
                                                       jobs.size()));
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= jobs.size()) return;
          traces[i] = detail::run_one(env, path, jobs[i].learner, schedule, opts,
                                      jobs[i].rep, hash, cfg.theta1);
        }
      });
    for (std::thread& t : pool) t.join();
  } else {
    for (std::size_t i = 0; i < jobs.size(); ++i)
      traces[i] = detail::run_one(env, path, jobs[i].learner, schedule, opts,
                                  jobs[i].rep, hash, cfg.theta1);
  }

  std::stable_sort(traces.begin(), traces.end(),
                   [](const RegretTrace& a, const RegretTrace& b) {
                     return a.learner != b.learner ? a.learner < b.learner
                                                   : a.replication < b.replication;
                   });
  ExperimentResult result;
  result.traces = std::move(traces);
  result.config_echo = echo;
  result.chosen_c_tau = c_tau;
  return result;
}

// ---------------------------------------------------------------------------
// Emitters

inline double quantile_of(std::vector<double> v, double q) {
  if (v.empty()) throw ContractError("quantile_of: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * v[lo] + w * v[hi];
}

inline json summarize(const ExperimentResult& result) {
  std::map<std::string, std::vector<double>> finals;
  for (const RegretTrace& t : result.traces)
    finals[t.learner].push_back(t.rows.back().cum_regret);
  json learners = json::object();
  for (const auto& [name, vals] : finals) {
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    learners[name] = {{"replications", vals.size()},
                      {"final_regret",
                       {{"median", quantile_of(vals, 0.5)},
                        {"q25", quantile_of(vals, 0.25)},
                        {"q75", quantile_of(vals, 0.75)},
                        {"mean", mean}}}};
  }
  return json{{"config_hash", result.traces.empty() ? "" : result.traces[0].config_hash},
              {"chosen_c_tau", result.chosen_c_tau},
              {"learners", learners}};
}

inline void emit_plot_data(const ExperimentResult& result, std::ostream& os) {
  os << "learner,rep,n,K_n,excess,cum_regret\n";
  for (const RegretTrace& t : result.traces)
    for (const PeriodRecord& r : t.rows)
      os << t.learner << ',' << t.replication << ',' << r.n << ',' << r.window << ','
         << format_double(r.excess) << ',' << format_double(r.cum_regret) << '\n';
}

inline std::string trace_filename(const RegretTrace& t) {
  return "trace_" + t.learner + "_rep" + std::to_string(t.replication) + ".csv";
}

inline void write_outputs(const ExperimentResult& result, const std::string& dir) {
  for (const RegretTrace& t : result.traces) {
    std::ofstream f(dir + "/" + trace_filename(t), std::ios::binary);
    if (!f) throw ConfigError("cannot write to output directory '" + dir + "'");
    emit_csv(t, f);
  }
  {
    std::ofstream f(dir + "/plot_data.csv", std::ios::binary);
    emit_plot_data(result, f);
  }
  {
    std::ofstream f(dir + "/summary.json", std::ios::binary);
    f << summarize(result).dump(2) << "\n";
  }
}

}  // namespace saws
