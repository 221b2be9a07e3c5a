// Stability-based adaptive window selection: pairwise stability tests over a
// ladder of candidate look-back windows, the offline selection rule, the
// online loop with dyadic candidates and bounded memory, and rolling
// cross-validation for the threshold constant.
#pragma once

#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <numeric>

#include "saws/domain.hpp"
#include "saws/solver.hpp"

namespace saws {

// Test levels tau(n, k): the stochastic-error scale of pooling k batches.
//   strongly convex: C_tau * (d / (B k)) * log(1/alpha + d + B + n)
//   lipschitz:       C_tau * sqrt((d / (B k)) * log(1/alpha + B + n))
// Natural logarithm throughout; any base change is absorbed by C_tau.
struct ThresholdSchedule {
  Regime regime = Regime::strongly_convex;
  double c_tau = 1.0;
  double alpha = 0.05;  // confidence level in (0, 1]
  std::size_t d = 1;
  std::size_t B = 1;

  double threshold(std::size_t n, std::size_t k) const {
    if (n < 2 || k < 1 || k > n - 1)
      throw WindowError("threshold: need 1 <= k <= n-1");
    if (c_tau <= 0.0 || alpha <= 0.0 || alpha > 1.0)
      throw ConfigError("threshold: require c_tau > 0 and alpha in (0,1]");
    const double dd = static_cast<double>(d);
    const double Bd = static_cast<double>(B);
    const double nn = static_cast<double>(n);
    const double kk = static_cast<double>(k);
    if (regime == Regime::strongly_convex)
      return c_tau * (dd / (Bd * kk)) * std::log(1.0 / alpha + dd + Bd + nn);
    return c_tau * std::sqrt((dd / (Bd * kk)) * std::log(1.0 / alpha + Bd + nn));
  }

  // The C of the threshold-regularity condition tau(n,k) <= C tau(n, 2k ^ n).
  double regularity_constant() const {
    return regime == Regime::strongly_convex ? 2.0 : std::sqrt(2.0);
  }
};

// T_{i,k} with pass == (gap <= tau(i)): the candidate theta_k survives the
// comparison on the smaller window i.
inline bool pairwise_test(const WindowLoss& f_i, const Vec& theta_hat_i,
                          const Vec& theta_hat_k, double tau_i) {
  return f_i.value(theta_hat_k) - f_i.value(theta_hat_i) <= tau_i;
}

// Outcome of one offline selection: solves, the lower-triangular pass matrix
// and the largest admissible window. Index s = 0 always passes (self test).
struct WindowSelection {
  std::size_t selected_index = 0;   // s_hat, index into `windows`
  std::size_t selected_window = 1;  // k_{s_hat}
  Vec decision;
  std::vector<std::size_t> windows;
  std::vector<SolveResult> solves;
  std::vector<std::vector<bool>> tests;  // tests[s][i], i <= s, true = pass
};

struct EngineOptions {
  SolverOptions solver;
  bool warm_start = true;          // warm start each solve from the previous window
  bool parallel_candidates = false;  // requires warm_start == false
};

// The offline window-selection rule over an arbitrary increasing candidate
// ladder: solve every candidate window, test each against all smaller ones at
// level tau(n, k_i), and keep the largest candidate passing all of its tests
// ("expand until a smaller window testifies against it").
inline WindowSelection select_window_offline(
    const LossModel& model, const FeasibleSet& set,
    std::span<const SampleBatch* const> recent,  // oldest..newest = period n-1
    std::size_t n, std::vector<std::size_t> candidates,
    const ThresholdSchedule& schedule, const EngineOptions& opts = {}) {
  if (candidates.empty())
    throw ContractError("select_window_offline: empty candidate list");
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    if (candidates[s] < 1 || candidates[s] > n - 1)
      throw WindowError("select_window_offline: candidate window out of range");
    if (s > 0 && candidates[s] <= candidates[s - 1])
      throw ContractError("select_window_offline: candidates must be strictly increasing");
  }
  if (recent.size() < candidates.back())
    throw WindowError("select_window_offline: not enough retained batches");

  const std::size_t m = candidates.size();
  const std::size_t B = recent.empty() ? 1 : recent[0]->size();

  std::vector<std::unique_ptr<WindowLoss>> losses(m);
  auto make_loss = [&](std::size_t s) {
    const std::size_t k = candidates[s];
    return model.window_loss(recent.subspan(recent.size() - k, k));
  };

  std::vector<SolveResult> solves(m);
  auto solve_one = [&](std::size_t s, std::optional<Vec> warm) {
    const SolverBudget budget =
        SolverBudget::for_window(schedule.regime, model.constants(), model.dimension(),
                                 B, n, candidates[s], opts.solver.gap_constant_A,
                                 opts.solver.max_iters);
    return minimize_empirical(*losses[s], set, budget, std::move(warm),
                              opts.solver.use_closed_forms);
  };

  for (std::size_t s = 0; s < m; ++s) losses[s] = make_loss(s);

  if (opts.parallel_candidates && !opts.warm_start) {
    std::vector<std::future<SolveResult>> futs(m);
    for (std::size_t s = 0; s < m; ++s)
      futs[s] = std::async(std::launch::async,
                           [&, s] { return solve_one(s, std::nullopt); });
    for (std::size_t s = 0; s < m; ++s) solves[s] = futs[s].get();
  } else {
    for (std::size_t s = 0; s < m; ++s) {
      std::optional<Vec> warm;
      if (opts.warm_start && s > 0) warm = solves[s - 1].theta;
      solves[s] = solve_one(s, std::move(warm));
    }
  }

  std::vector<double> taus(m);
  for (std::size_t s = 0; s < m; ++s) taus[s] = schedule.threshold(n, candidates[s]);

  std::vector<std::vector<bool>> tests(m);
  std::size_t s_hat = 0;
  for (std::size_t s = 0; s < m; ++s) {
    tests[s].resize(s + 1, true);
    bool admissible = true;
    for (std::size_t i = 0; i + 1 <= s; ++i) {
      // reuse the solver's achieved value f_{n,k_i}(theta_hat_i)
      const double gap = losses[i]->value(solves[s].theta) - solves[i].objective;
      const bool pass = gap <= taus[i];
      tests[s][i] = pass;
      admissible = admissible && pass;
    }
    if (admissible) s_hat = s;  // the self test (i == s) always passes
  }

  WindowSelection out;
  out.selected_index = s_hat;
  out.selected_window = candidates[s_hat];
  out.decision = solves[s_hat].theta;
  out.windows = std::move(candidates);
  out.solves = std::move(solves);
  out.tests = std::move(tests);
  return out;
}

// Dyadic candidate ladder for the online loop: 1, 2, 4, ..., capped by the
// memory bound K_prev + 1 as the final (largest) candidate.
inline std::vector<std::size_t> candidate_windows(std::size_t K_prev) {
  const std::size_t last = K_prev + 1;
  const std::size_t m = ceil_log2(last) + 1;
  std::vector<std::size_t> ks;
  ks.reserve(m);
  std::size_t p = 1;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    ks.push_back(p);
    p <<= 1;
  }
  ks.push_back(last);
  return ks;
}

struct OnlinePoint {
  Vec decision;             // theta_n
  std::size_t window = 0;   // K_n (0 at n = 1)
};

// Sequential state of the online algorithm. Data that leaves the retained
// window is discarded and never consulted again, so memory stays O(K_n * B).
class OnlineRunner {
 public:
  OnlineRunner(std::shared_ptr<const LossModel> model, FeasibleSet set,
               ThresholdSchedule schedule, EngineOptions opts = {},
               std::optional<Vec> theta1 = std::nullopt)
      : model_(std::move(model)),
        set_(std::move(set)),
        schedule_(std::move(schedule)),
        opts_(opts) {
    theta1_ = theta1 ? set_.project(*theta1) : set_.project(zeros(set_.dimension()));
  }

  // Decision for period n (call with n = 1, 2, ... in order).
  OnlinePoint decide(std::size_t n) {
    if (n != next_period_)
      throw ContractError("OnlineRunner::decide: periods must be consecutive from 1");
    if (n == 1) return {theta1_, 0};
    std::vector<const SampleBatch*> recent;
    recent.reserve(retained_.size());
    for (const SampleBatch& b : retained_) recent.push_back(&b);
    WindowSelection sel = select_window_offline(*model_, set_, recent, n,
                                                candidate_windows(K_), schedule_, opts_);
    K_ = sel.selected_window;
    return {std::move(sel.decision), K_};
  }

  // Reveal the batch of the period just decided.
  void observe(SampleBatch batch) {
    if (batch.period != next_period_)
      throw ContractError("OnlineRunner::observe: unexpected period");
    retained_.push_back(std::move(batch));
    // keep exactly the K_n + 1 most recent batches for the next period
    while (retained_.size() > K_ + 1) retained_.pop_front();
    ++next_period_;
  }

  std::size_t memory_window() const { return K_; }
  std::size_t retained_batches() const { return retained_.size(); }
  const Vec& initial_decision() const { return theta1_; }

 private:
  std::shared_ptr<const LossModel> model_;
  FeasibleSet set_;
  ThresholdSchedule schedule_;
  EngineOptions opts_;
  Vec theta1_;
  std::size_t K_ = 0;          // K_{n-1} entering period n
  std::size_t next_period_ = 1;
  std::deque<SampleBatch> retained_;
};

// Run the online algorithm over a stream of N batches (periods 1..N).
inline std::vector<OnlinePoint> run_online(
    std::shared_ptr<const LossModel> model, const FeasibleSet& set,
    const std::function<SampleBatch(std::size_t)>& stream, std::size_t N,
    const ThresholdSchedule& schedule, const EngineOptions& opts = {},
    std::optional<Vec> theta1 = std::nullopt) {
  OnlineRunner runner(std::move(model), set, schedule, opts, std::move(theta1));
  std::vector<OnlinePoint> out;
  out.reserve(N);
  for (std::size_t n = 1; n <= N; ++n) {
    out.push_back(runner.decide(n));
    runner.observe(stream(n));
  }
  return out;
}

inline std::vector<OnlinePoint> run_online(std::shared_ptr<const LossModel> model,
                                           const FeasibleSet& set,
                                           std::span<const SampleBatch> stream,
                                           const ThresholdSchedule& schedule,
                                           const EngineOptions& opts = {},
                                           std::optional<Vec> theta1 = std::nullopt) {
  return run_online(
      std::move(model), set, [&](std::size_t n) { return stream[n - 1]; },
      stream.size(), schedule, opts, std::move(theta1));
}

// Rolling leave-one-out cross-validation over candidate threshold schedules:
// run the online loop with each schedule on the prefix and score it by the sum
// of each period's own-batch loss at the decision made for that period. Ties
// go to the first candidate, so list schedules with C_tau increasing.
inline std::size_t select_hyperparameter_cv(
    std::shared_ptr<const LossModel> model, const FeasibleSet& set,
    std::span<const SampleBatch> prefix,
    std::span<const ThresholdSchedule> schedules, const EngineOptions& opts = {},
    std::optional<Vec> theta1 = std::nullopt) {
  if (schedules.empty())
    throw ContractError("select_hyperparameter_cv: no candidate schedules");
  if (prefix.size() < 2)
    throw ContractError("select_hyperparameter_cv: need a prefix of length >= 2");
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h < schedules.size(); ++h) {
    const std::vector<OnlinePoint> run =
        run_online(model, set, prefix, schedules[h], opts, theta1);
    double score = 0.0;
    for (std::size_t n = 1; n <= prefix.size(); ++n) {
      const SampleBatch* b = &prefix[n - 1];
      score += model->window_loss(std::span<const SampleBatch* const>(&b, 1))
                   ->value(run[n - 1].decision);
    }
    if (score < best_score) {
      best_score = score;
      best = h;
    }
  }
  return best;
}

}  // namespace saws
