// Approximate minimization of windowed empirical losses. Closed forms are
// used whenever the loss exposes one (certified gap 0); otherwise projected
// (sub)gradient descent against a regime-specific sub-optimality budget.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "saws/domain.hpp"

namespace saws {

struct SolverBudget {
  Regime regime = Regime::strongly_convex;
  double target_gap = 0.0;
  std::size_t max_iters = 400;

  // The budget of the optimization-error assumptions:
  //   strongly convex: A * M * sigma * d * log(d + Bn) / (Bk)
  //   lipschitz:       A * sigma * sqrt(d * log(1 + Bn) / (Bk))
  static SolverBudget for_window(Regime regime, const RegularityConstants& c,
                                 std::size_t d, std::size_t B, std::size_t n,
                                 std::size_t k, double A = 1.0,
                                 std::size_t max_iters = 400) {
    SolverBudget b;
    b.regime = regime;
    b.max_iters = max_iters;
    const double Bk = static_cast<double>(B) * static_cast<double>(k);
    const double Bn = static_cast<double>(B) * static_cast<double>(n);
    const double dd = static_cast<double>(d);
    if (regime == Regime::strongly_convex) {
      b.target_gap = A * c.M * c.sigma * dd * std::log(dd + Bn) / Bk;
    } else {
      b.target_gap = A * c.sigma * std::sqrt(dd * std::log(1.0 + Bn) / Bk);
    }
    return b;
  }
};

struct SolveResult {
  Vec theta;                // always inside Omega
  double objective = 0.0;   // f(theta), reused by the stability tests
  std::optional<double> certified_gap;  // nullopt: "uncertified"
  std::size_t iterations = 0;
};

struct SolverOptions {
  std::size_t max_iters = 400;
  double gap_constant_A = 1.0;  // the A of the optimization-error budget
  bool use_closed_forms = true;
};

namespace detail {

// Projected gradient with fixed step 1/L: monotone descent on smooth losses.
inline SolveResult projected_gradient(const WindowLoss& loss, const FeasibleSet& set,
                                      const SolverBudget& budget, Vec theta) {
  const double L = loss.curvature_upper().value_or(
      std::max(1.0, norm2(loss.subgradient(theta)) / std::max(1e-12, set.diameter())));
  const double step = 1.0 / std::max(L, 1e-12);
  const std::optional<double> rho = loss.curvature_lower();

  double best_val = loss.value(theta);
  Vec best = theta;
  std::optional<double> cert;
  std::size_t it = 0;
  for (; it < budget.max_iters; ++it) {
    Vec g = loss.subgradient(theta);
    if (rho && *rho > 0.0) {
      // Gradient-norm certificate, valid while the iterate stays interior.
      const double gap_bound = dot(g, g) / (2.0 * *rho);
      Vec interior_check = theta;
      add_scaled(interior_check, -1e-9, g);
      if (set.contains(interior_check) && set.contains(theta)) {
        cert = gap_bound;
        if (gap_bound <= budget.target_gap) break;
      }
    }
    Vec next = theta;
    add_scaled(next, -step, g);
    next = set.project(next);
    const double nv = loss.value(next);
    if (nv <= best_val) {
      best_val = nv;
      best = next;
    }
    if (distance2(next, theta) <= 1e-14 * (1.0 + norm2(theta))) {
      theta = next;
      break;
    }
    theta = next;
  }
  const double final_val = loss.value(theta);
  if (final_val <= best_val) {
    best_val = final_val;
    best = theta;
  }
  if (cert && *cert > budget.target_gap) cert = std::nullopt;  // budget exhausted
  return {std::move(best), best_val, cert, it};
}

// Subgradient method with eta_t = M / (G sqrt(t)); keeps the best iterate.
inline SolveResult subgradient_method(const WindowLoss& loss, const FeasibleSet& set,
                                      const SolverBudget& budget, Vec theta) {
  const double M = std::max(set.diameter(), 1e-12);
  double G = 1e-12;
  double best_val = loss.value(theta);
  Vec best = theta;
  std::size_t it = 0;
  for (; it < budget.max_iters; ++it) {
    Vec g = loss.subgradient(theta);
    G = std::max(G, norm2(g));
    const double eta = M / (G * std::sqrt(static_cast<double>(it + 1)));
    add_scaled(theta, -eta, g);
    theta = set.project(theta);
    const double v = loss.value(theta);
    if (v < best_val) {
      best_val = v;
      best = theta;
    }
  }
  return {std::move(best), best_val, std::nullopt, it};
}

}  // namespace detail

// Approximate minimizer of a windowed empirical loss over the feasible set.
// Never throws on a missed budget: the window-selection algorithm tolerates
// approximate minimizers, so a short solve is merely "uncertified".
inline SolveResult minimize_empirical(const WindowLoss& loss, const FeasibleSet& set,
                                      const SolverBudget& budget,
                                      std::optional<Vec> warm_start = std::nullopt,
                                      bool use_closed_forms = true) {
  if (loss.dimension() != set.dimension())
    throw ContractError("minimize_empirical: loss/set dimension mismatch");
  if (use_closed_forms) {
    if (auto exact = loss.closed_form_minimizer(set)) {
      return {*exact, loss.value(*exact), 0.0, 0};
    }
  }
  Vec init = warm_start ? set.project(*warm_start) : set.project(zeros(set.dimension()));
  if (budget.regime == Regime::strongly_convex)
    return detail::projected_gradient(loss, set, budget, std::move(init));
  return detail::subgradient_method(loss, set, budget, std::move(init));
}

}  // namespace saws
