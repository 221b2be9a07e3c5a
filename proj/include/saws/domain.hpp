// Core domain types: feasible sets with Euclidean projection, sample batches,
// the loss-model interface, windowed empirical losses (pre-averages) and
// population-loss oracles.
#pragma once

#include <cassert>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "saws/common.hpp"

namespace saws {

enum class Regime { strongly_convex, lipschitz };

inline std::string to_string(Regime r) {
  return r == Regime::strongly_convex ? "strongly-convex" : "lipschitz";
}

// Convex feasible set with closed-form Euclidean projection. Balls, boxes and
// intervals cover every construction used by the problem families; general
// polytopes would need an LP/QP solver and are out of scope.
class FeasibleSet {
 public:
  enum class Kind { ball, box };

  static FeasibleSet ball(Vec center, double radius) {
    if (radius < 0.0 || !all_finite(center))
      throw ContractError("FeasibleSet::ball: invalid center/radius");
    FeasibleSet s;
    s.kind_ = Kind::ball;
    s.center_ = std::move(center);
    s.radius_ = radius;
    return s;
  }

  static FeasibleSet box(Vec lower, Vec upper) {
    if (lower.size() != upper.size())
      throw ContractError("FeasibleSet::box: bound dimension mismatch");
    for (std::size_t i = 0; i < lower.size(); ++i)
      if (!(lower[i] <= upper[i]))
        throw ContractError("FeasibleSet::box: lower bound exceeds upper bound");
    FeasibleSet s;
    s.kind_ = Kind::box;
    s.lower_ = std::move(lower);
    s.upper_ = std::move(upper);
    return s;
  }

  static FeasibleSet interval(double lo, double hi) { return box({lo}, {hi}); }

  // Ball around the origin, B(0, r).
  static FeasibleSet origin_ball(std::size_t d, double radius) {
    return ball(zeros(d), radius);
  }

  // Sup-norm ball B_inf(0, r) as a box.
  static FeasibleSet sup_ball(std::size_t d, double radius) {
    return box(Vec(d, -radius), Vec(d, radius));
  }

  Kind kind() const { return kind_; }

  std::size_t dimension() const {
    return kind_ == Kind::ball ? center_.size() : lower_.size();
  }

  // diam(Omega), the constant M of the regularity conditions.
  double diameter() const {
    if (kind_ == Kind::ball) return 2.0 * radius_;
    Vec diag(lower_.size());
    for (std::size_t i = 0; i < diag.size(); ++i) diag[i] = upper_[i] - lower_[i];
    return norm2(diag);
  }

  // Radius of the largest inscribed ball around the set's center.
  double inradius() const {
    if (kind_ == Kind::ball) return radius_;
    double r = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lower_.size(); ++i)
      r = std::min(r, (upper_[i] - lower_[i]) / 2.0);
    return r;
  }

  Vec center() const {
    if (kind_ == Kind::ball) return center_;
    Vec c(lower_.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = (lower_[i] + upper_[i]) / 2.0;
    return c;
  }

  Vec project(const Vec& x) const {
    if (x.size() != dimension())
      throw ContractError("FeasibleSet::project: dimension mismatch");
    if (!all_finite(x)) throw ContractError("FeasibleSet::project: non-finite input");
    if (kind_ == Kind::ball) {
      Vec y(x);
      add_scaled(y, -1.0, center_);
      const double n = norm2(y);
      if (n <= radius_) return x;
      Vec p(center_);
      add_scaled(p, radius_ / n, y);
      return p;
    }
    Vec p(x);
    for (std::size_t i = 0; i < p.size(); ++i)
      p[i] = std::clamp(p[i], lower_[i], upper_[i]);
    return p;
  }

  bool contains(const Vec& x, double tol = 1e-12) const {
    if (x.size() != dimension()) return false;
    if (kind_ == Kind::ball) {
      Vec y(x);
      add_scaled(y, -1.0, center_);
      return norm2(y) <= radius_ + tol;
    }
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] < lower_[i] - tol || x[i] > upper_[i] + tol) return false;
    return true;
  }

  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  double radius() const { return radius_; }

 private:
  FeasibleSet() = default;
  Kind kind_ = Kind::ball;
  Vec center_;      // ball
  double radius_ = 0.0;
  Vec lower_, upper_;  // box
};

inline Vec project(const FeasibleSet& set, const Vec& x) { return set.project(x); }

// One period's data: B i.i.d. points z_{n,1..B}, each a flat real vector whose
// layout is family-specific.
struct SampleBatch {
  std::size_t period = 0;  // n >= 1
  std::vector<Vec> samples;

  std::size_t size() const { return samples.size(); }
};

// Regularity constants attached to a loss model. Which ones are meaningful
// depends on the regime tag; values for the concrete families are
// order-of-magnitude presets, not re-derived analytics.
struct RegularityConstants {
  double rho = 1.0;     // strong convexity of F_n
  double L = 1.0;       // smoothness of F_n
  double r = 1.0;       // interior-minimizer radius
  double sigma = 1.0;   // noise scale
  double lambda = 1.0;  // curvature / Lipschitz scale
  double M = 1.0;       // diam(Omega)

  double kappa() const { return L / rho; }
};

class WindowLoss;  // below

// Pointwise loss l(theta, z) with subgradient and regularity metadata.
// The bridge between raw data and the optimization layer.
class LossModel {
 public:
  virtual ~LossModel() = default;

  virtual std::size_t dimension() const = 0;
  virtual Regime regime() const = 0;
  virtual const RegularityConstants& constants() const = 0;

  virtual double loss(const Vec& theta, const Vec& z) const = 0;
  virtual Vec subgradient(const Vec& theta, const Vec& z) const = 0;

  // Windowed empirical loss over the given batches (oldest first). The default
  // averages pointwise; families with exploitable structure may return a
  // sufficient-statistic implementation, which must stay exactly equal to the
  // arithmetic mean.
  virtual std::unique_ptr<WindowLoss> window_loss(
      std::span<const SampleBatch* const> batches) const;

  virtual std::string name() const = 0;
};

// The pre-average f_{n,k}: arithmetic mean of the pointwise losses over the k
// most recent batches, evaluable and (sub)differentiable.
class WindowLoss {
 public:
  virtual ~WindowLoss() = default;

  virtual std::size_t window() const = 0;        // k
  virtual std::size_t points() const = 0;        // k * B
  virtual std::size_t dimension() const = 0;

  virtual double value(const Vec& theta) const = 0;
  virtual Vec subgradient(const Vec& theta) const = 0;

  // Exact constrained minimizer when the family admits one (window mean,
  // sample quantile, sign-pattern vertex). nullopt means "use the iterative
  // solver".
  virtual std::optional<Vec> closed_form_minimizer(const FeasibleSet& set) const {
    (void)set;
    return std::nullopt;
  }

  // Strong-convexity modulus of this empirical loss when known (> 0 admits a
  // gradient-norm optimality certificate).
  virtual std::optional<double> curvature_lower() const { return std::nullopt; }
  // Smoothness constant of this empirical loss when known.
  virtual std::optional<double> curvature_upper() const { return std::nullopt; }
};

class AveragedWindowLoss final : public WindowLoss {
 public:
  AveragedWindowLoss(const LossModel& model,
                     std::vector<const SampleBatch*> batches)
      : model_(model), batches_(std::move(batches)) {
    for (const SampleBatch* b : batches_) points_ += b->size();
    if (points_ == 0) throw WindowError("window loss over empty batches");
  }

  std::size_t window() const override { return batches_.size(); }
  std::size_t points() const override { return points_; }
  std::size_t dimension() const override { return model_.dimension(); }

  double value(const Vec& theta) const override {
    double s = 0.0;
    for (const SampleBatch* b : batches_)
      for (const Vec& z : b->samples) s += model_.loss(theta, z);
    return s / static_cast<double>(points_);
  }

  Vec subgradient(const Vec& theta) const override {
    Vec g = zeros(model_.dimension());
    for (const SampleBatch* b : batches_)
      for (const Vec& z : b->samples)
        add_scaled(g, 1.0, model_.subgradient(theta, z));
    for (double& v : g) v /= static_cast<double>(points_);
    return g;
  }

  const std::vector<const SampleBatch*>& batches() const { return batches_; }

 private:
  const LossModel& model_;
  std::vector<const SampleBatch*> batches_;
  std::size_t points_ = 0;
};

inline std::unique_ptr<WindowLoss> LossModel::window_loss(
    std::span<const SampleBatch* const> batches) const {
  return std::make_unique<AveragedWindowLoss>(
      *this, std::vector<const SampleBatch*>(batches.begin(), batches.end()));
}

// f_{n,k} from a period-indexed history: pre-averages the batches of periods
// n-k, ..., n-1. Requires 1 <= k <= n-1 and those periods present.
inline std::unique_ptr<WindowLoss> pre_average(const LossModel& model,
                                               std::span<const SampleBatch> history,
                                               std::size_t n, std::size_t k) {
  if (n < 2 || k < 1 || k > n - 1)
    throw WindowError("pre_average: window k=" + std::to_string(k) +
                      " out of range for period n=" + std::to_string(n));
  std::vector<const SampleBatch*> picked;
  picked.reserve(k);
  for (std::size_t p = n - k; p <= n - 1; ++p) {
    const SampleBatch* found = nullptr;
    for (const SampleBatch& b : history)
      if (b.period == p) {
        found = &b;
        break;
      }
    if (!found)
      throw WindowError("pre_average: missing batch for period " + std::to_string(p));
    picked.push_back(found);
  }
  return model.window_loss(picked);
}

struct ExcessEstimate {
  double value = 0.0;
  double std_error = 0.0;  // 0 in closed-form mode
};

// Population loss F_n. Either closed-form (exact values and minimum) or a
// seeded Monte-Carlo estimate on a fixed evaluation sample. The fixed sample
// makes the estimator a deterministic function, so its minimum is a
// well-defined number that the factory certifies with a solver.
class PopulationLoss {
 public:
  static PopulationLoss closed_form(std::function<double(const Vec&)> value,
                                    double min_value,
                                    std::optional<Vec> minimizer = std::nullopt) {
    PopulationLoss p;
    p.value_ = std::move(value);
    p.min_value_ = min_value;
    p.minimizer_ = std::move(minimizer);
    p.monte_carlo_ = false;
    return p;
  }

  static PopulationLoss monte_carlo(std::shared_ptr<const LossModel> model,
                                    std::shared_ptr<const std::vector<Vec>> sample,
                                    std::optional<std::uint64_t> seed,
                                    double min_value,
                                    std::optional<Vec> minimizer = std::nullopt) {
    if (!seed)
      throw ConfigError("PopulationLoss: Monte-Carlo mode requires a seed");
    if (!sample || sample->empty())
      throw ContractError("PopulationLoss: empty Monte-Carlo sample");
    PopulationLoss p;
    p.model_ = std::move(model);
    p.sample_ = std::move(sample);
    p.seed_ = *seed;
    p.min_value_ = min_value;
    p.minimizer_ = std::move(minimizer);
    p.monte_carlo_ = true;
    return p;
  }

  bool is_monte_carlo() const { return monte_carlo_; }
  double min_value() const { return min_value_; }
  const std::optional<Vec>& minimizer() const { return minimizer_; }

  double value(const Vec& theta) const {
    if (!monte_carlo_) return value_(theta);
    double s = 0.0;
    for (const Vec& z : *sample_) s += model_->loss(theta, z);
    return s / static_cast<double>(sample_->size());
  }

  // F_n(theta) - inf F_n. In Monte-Carlo mode the reference point is the
  // certified sample minimizer and the standard error is that of the paired
  // loss differences.
  ExcessEstimate excess(const Vec& theta) const {
    if (!monte_carlo_) return {value_(theta) - min_value_, 0.0};
    if (minimizer_) {
      const std::size_t m = sample_->size();
      double mean = 0.0, m2 = 0.0;
      std::size_t c = 0;
      for (const Vec& z : *sample_) {
        const double diff = model_->loss(theta, z) - model_->loss(*minimizer_, z);
        ++c;
        const double d1 = diff - mean;
        mean += d1 / static_cast<double>(c);
        m2 += d1 * (diff - mean);
      }
      const double var = m > 1 ? m2 / static_cast<double>(m - 1) : 0.0;
      return {mean, std::sqrt(var / static_cast<double>(m))};
    }
    return {value(theta) - min_value_, 0.0};
  }

 private:
  PopulationLoss() = default;
  bool monte_carlo_ = false;
  std::function<double(const Vec&)> value_;
  double min_value_ = 0.0;
  std::optional<Vec> minimizer_;
  std::shared_ptr<const LossModel> model_;
  std::shared_ptr<const std::vector<Vec>> sample_;
  std::uint64_t seed_ = 0;
};

inline ExcessEstimate population_excess(const PopulationLoss& problem, const Vec& theta) {
  return problem.excess(theta);
}

}  // namespace saws
