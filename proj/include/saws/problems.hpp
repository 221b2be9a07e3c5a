// The seven concrete problem families as loss models with samplers, admissible
// ranges and population-loss oracles. Regularity constants are presets in the
// order of the families' analyses, not re-derived.
//
// Every family separates a data point into (base randomness, parameter): the
// base draw is parameter-free and the sample is a deterministic transform of
// both. Batches and Monte-Carlo evaluation samples therefore share base
// randomness across periods and learners (common random numbers).
#pragma once

#include <map>
#include <memory>

#include "saws/domain.hpp"
#include "saws/rng.hpp"
#include "saws/solver.hpp"

namespace saws {

enum class Family {
  gaussian_mean,
  linear_regression,
  logistic_regression,
  linear_opt,
  quantile_regression,
  newsvendor,
  svm,
};

inline std::string to_string(Family f) {
  switch (f) {
    case Family::gaussian_mean: return "gaussian-mean";
    case Family::linear_regression: return "linear-regression";
    case Family::logistic_regression: return "logistic-regression";
    case Family::linear_opt: return "linear-opt";
    case Family::quantile_regression: return "quantile-regression";
    case Family::newsvendor: return "newsvendor";
    case Family::svm: return "svm";
  }
  throw ContractError("unknown family");
}

inline Family family_from_string(const std::string& s) {
  for (Family f : {Family::gaussian_mean, Family::linear_regression,
                   Family::logistic_regression, Family::linear_opt,
                   Family::quantile_regression, Family::newsvendor, Family::svm})
    if (to_string(f) == s) return f;
  throw ConfigError("unknown problem family '" + s + "'");
}

namespace detail {

inline double log1pexp(double t) {
  if (t > 35.0) return t;
  if (t < -35.0) return std::exp(t);
  return std::log1p(std::exp(t));
}

inline double logistic_fn(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ContractError("normal_quantile: p in (0,1)");
  double lo = -12.0, hi = 12.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// nu-quantile of the standard Laplace(0, 1) distribution
inline double laplace_quantile(double nu) {
  if (!(nu > 0.0 && nu < 1.0)) throw ContractError("laplace_quantile: nu in (0,1)");
  return nu < 0.5 ? std::log(2.0 * nu) : -std::log(2.0 * (1.0 - nu));
}

// check loss rho_nu(u) = (1 - nu) (-u)_+ + nu u_+
inline double check_loss(double nu, double u) {
  return u >= 0.0 ? nu * u : (nu - 1.0) * u;
}

inline double check_loss_right_slope(double nu, double u) {
  return u > 0.0 ? nu : nu - 1.0;  // derivative wrt u, right choice at the kink
}

// smallest empirical nu-quantile minimizer: the ceil(nu * m)-th order statistic
inline double sample_quantile(std::vector<double> sorted, double nu) {
  const std::size_t m = sorted.size();
  std::size_t k = static_cast<std::size_t>(std::ceil(nu * static_cast<double>(m)));
  k = std::clamp<std::size_t>(k, 1, m);
  return sorted[k - 1];
}

}  // namespace detail

// Family-specific loss model plus the sampler hooks used by environments.
class FamilyModel : public LossModel {
 public:
  // Dimension of the base randomness vector for one data point.
  virtual std::size_t base_dimension() const = 0;
  // Draw parameter-free base randomness for one data point.
  virtual Vec draw_base(Rng& rng) const = 0;
  // Deterministic transform of (period parameter, base draw) into a sample.
  virtual Vec to_sample(const Vec& param, const Vec& base) const = 0;

  // Closed-form population loss when available.
  virtual std::optional<PopulationLoss> population_closed_form(
      const Vec& param, const FeasibleSet& domain) const {
    (void)param;
    (void)domain;
    return std::nullopt;
  }

  // Analytic population minimizer when available (used as the Monte-Carlo
  // reference point).
  virtual std::optional<Vec> analytic_minimizer(const Vec& param,
                                                const FeasibleSet& domain) const {
    (void)param;
    (void)domain;
    return std::nullopt;
  }

  // Throws ConfigError naming the violated condition.
  virtual void validate_parameter(const Vec& param, const FeasibleSet& domain,
                                  bool default_domain) const = 0;

  virtual FeasibleSet default_domain() const = 0;
};

// ---------------------------------------------------------------------------
// Gaussian mean estimation: l(theta, z) = 0.5 ||theta - z||^2, P_n = N(theta*_n, sigma0^2 I)

class GaussianMeanModel final : public FamilyModel {
 public:
  GaussianMeanModel(std::size_t d, double sigma0, double M) : d_(d), sigma0_(sigma0) {
    constants_.rho = constants_.L = constants_.lambda = 1.0;
    constants_.sigma = std::max(sigma0, 1e-12);
    constants_.M = M;
    constants_.r = M / 4.0;
  }

  std::size_t dimension() const override { return d_; }
  Regime regime() const override { return Regime::strongly_convex; }
  const RegularityConstants& constants() const override { return constants_; }
  std::string name() const override { return "gaussian-mean"; }

  double loss(const Vec& theta, const Vec& z) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < d_; ++i) {
      const double diff = theta[i] - z[i];
      s += diff * diff;
    }
    return 0.5 * s;
  }

  Vec subgradient(const Vec& theta, const Vec& z) const override {
    Vec g(theta);
    add_scaled(g, -1.0, z);
    return g;
  }

  std::size_t base_dimension() const override { return d_; }
  Vec draw_base(Rng& rng) const override {
    Vec b(d_);
    for (double& v : b) v = rng.normal();
    return b;
  }
  Vec to_sample(const Vec& param, const Vec& base) const override {
    Vec z(param);
    add_scaled(z, sigma0_, base);
    return z;
  }

  std::optional<PopulationLoss> population_closed_form(
      const Vec& param, const FeasibleSet& domain) const override {
    const double floor = 0.5 * sigma0_ * sigma0_ * static_cast<double>(d_);
    Vec star = param;
    if (!domain.contains(star)) star = domain.project(star);
    const double min_value = floor + 0.5 * distance2(star, param) * distance2(star, param);
    return PopulationLoss::closed_form(
        [param, floor](const Vec& theta) {
          const double dist = distance2(theta, param);
          return 0.5 * dist * dist + floor;
        },
        min_value, star);
  }

  std::optional<Vec> analytic_minimizer(const Vec& param,
                                        const FeasibleSet& domain) const override {
    return domain.project(param);
  }

  void validate_parameter(const Vec& param, const FeasibleSet& domain,
                          bool default_domain) const override {
    if (param.size() != d_) throw ConfigError("gaussian-mean: parameter dimension != d");
    if (default_domain) {
      if (norm2(param) > constants_.M / 4.0 + 1e-12)
        throw ConfigError("gaussian-mean: requires ||theta*|| <= M/4");
    } else if (!domain.contains(param)) {
      throw ConfigError("gaussian-mean: theta* must lie in the feasible set");
    }
  }

  FeasibleSet default_domain() const override {
    return FeasibleSet::origin_ball(d_, constants_.M / 2.0);
  }

  class QuadraticWindowLoss final : public WindowLoss {
   public:
    QuadraticWindowLoss(Vec mean, double offset, std::size_t k, std::size_t pts)
        : mean_(std::move(mean)), offset_(offset), k_(k), pts_(pts) {}
    std::size_t window() const override { return k_; }
    std::size_t points() const override { return pts_; }
    std::size_t dimension() const override { return mean_.size(); }
    double value(const Vec& theta) const override {
      const double dist = distance2(theta, mean_);
      return 0.5 * dist * dist + offset_;
    }
    Vec subgradient(const Vec& theta) const override {
      Vec g(theta);
      add_scaled(g, -1.0, mean_);
      return g;
    }
    std::optional<Vec> closed_form_minimizer(const FeasibleSet& set) const override {
      return set.project(mean_);
    }
    std::optional<double> curvature_lower() const override { return 1.0; }
    std::optional<double> curvature_upper() const override { return 1.0; }

   private:
    Vec mean_;
    double offset_;
    std::size_t k_, pts_;
  };

  std::unique_ptr<WindowLoss> window_loss(
      std::span<const SampleBatch* const> batches) const override {
    Vec mean = zeros(d_);
    double sumsq = 0.0;
    std::size_t pts = 0;
    for (const SampleBatch* b : batches)
      for (const Vec& z : b->samples) {
        add_scaled(mean, 1.0, z);
        sumsq += dot(z, z);
        ++pts;
      }
    if (pts == 0) throw WindowError("window loss over empty batches");
    for (double& v : mean) v /= static_cast<double>(pts);
    const double offset = 0.5 * (sumsq / static_cast<double>(pts) - dot(mean, mean));
    return std::make_unique<QuadraticWindowLoss>(std::move(mean), offset,
                                                 batches.size(), pts);
  }

 private:
  std::size_t d_;
  double sigma0_;
  RegularityConstants constants_;
};

// ---------------------------------------------------------------------------
// Linear regression: z = (x, y), l = 0.5 (y - x' theta)^2,
// x ~ N(0, diag(Sigma)), y = x' theta*_n + eps, eps ~ N(0, noise_sd^2).

class LinearRegressionModel final : public FamilyModel {
 public:
  LinearRegressionModel(std::size_t d, double sigma0, double M, Vec sigma_diag = {},
                        double noise_sd = -1.0)
      : d_(d), sigma0_(sigma0), noise_sd_(noise_sd > 0 ? noise_sd : sigma0) {
    sigma_diag_ = sigma_diag.empty() ? Vec(d, sigma0 * sigma0) : std::move(sigma_diag);
    if (sigma_diag_.size() != d)
      throw ConfigError("linear-regression: covariance diagonal size != d");
    double lo = sigma_diag_[0], hi = sigma_diag_[0];
    for (double v : sigma_diag_) {
      if (v <= 0.0) throw ConfigError("linear-regression: covariance must be positive");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    constants_.rho = lo;
    constants_.L = hi;
    constants_.lambda = sigma0;
    constants_.sigma = (M + 1.0) * sigma0 * sigma0;
    constants_.M = M;
    constants_.r = M / 4.0;
  }

  std::size_t dimension() const override { return d_; }
  Regime regime() const override { return Regime::strongly_convex; }
  const RegularityConstants& constants() const override { return constants_; }
  std::string name() const override { return "linear-regression"; }

  double loss(const Vec& theta, const Vec& z) const override {
    double pred = 0.0;
    for (std::size_t i = 0; i < d_; ++i) pred += z[i] * theta[i];
    const double resid = z[d_] - pred;
    return 0.5 * resid * resid;
  }

  Vec subgradient(const Vec& theta, const Vec& z) const override {
    double pred = 0.0;
    for (std::size_t i = 0; i < d_; ++i) pred += z[i] * theta[i];
    const double resid = z[d_] - pred;
    Vec g(d_);
    for (std::size_t i = 0; i < d_; ++i) g[i] = -resid * z[i];
    return g;
  }

  std::size_t base_dimension() const override { return d_ + 1; }
  Vec draw_base(Rng& rng) const override {
    Vec b(d_ + 1);
    for (double& v : b) v = rng.normal();
    return b;
  }
  Vec to_sample(const Vec& param, const Vec& base) const override {
    Vec z(d_ + 1);
    double pred = 0.0;
    for (std::size_t i = 0; i < d_; ++i) {
      z[i] = std::sqrt(sigma_diag_[i]) * base[i];
      pred += z[i] * param[i];
    }
    z[d_] = pred + noise_sd_ * base[d_];
    return z;
  }

  std::optional<PopulationLoss> population_closed_form(
      const Vec& param, const FeasibleSet& domain) const override {
    (void)domain;
    const double floor = 0.5 * noise_sd_ * noise_sd_;
    const Vec diag = sigma_diag_;
    return PopulationLoss::closed_form(
        [param, diag, floor](const Vec& theta) {
          double q = 0.0;
          for (std::size_t i = 0; i < theta.size(); ++i) {
            const double diff = theta[i] - param[i];
            q += diag[i] * diff * diff;
          }
          return 0.5 * q + floor;
        },
        floor, param);
  }

  std::optional<Vec> analytic_minimizer(const Vec& param,
                                        const FeasibleSet&) const override {
    return param;
  }

  void validate_parameter(const Vec& param, const FeasibleSet& domain,
                          bool default_domain) const override {
    if (param.size() != d_)
      throw ConfigError("linear-regression: parameter dimension != d");
    if (default_domain) {
      if (norm2(param) > constants_.M / 4.0 + 1e-12)
        throw ConfigError("linear-regression: requires ||theta*|| <= M/4");
    } else if (!domain.contains(param)) {
      throw ConfigError("linear-regression: theta* must lie in the feasible set");
    }
  }

  FeasibleSet default_domain() const override {
    return FeasibleSet::origin_ball(d_, constants_.M / 2.0);
  }

  // Quadratic sufficient statistics: value = 0.5 theta' H theta - b' theta + c.
  class QuadWindowLoss final : public WindowLoss {
   public:
    QuadWindowLoss(std::vector<Vec> H, Vec b, double c, std::size_t k, std::size_t pts)
        : H_(std::move(H)), b_(std::move(b)), c_(c), k_(k), pts_(pts) {
      // power iteration for the curvature range (d is small)
      const std::size_t d = b_.size();
      Vec v(d, 1.0 / std::sqrt(static_cast<double>(d)));
      double lmax = 0.0;
      for (int it = 0; it < 60; ++it) {
        Vec w = mul(v);
        const double n = norm2(w);
        if (n < 1e-300) break;
        lmax = n;
        for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / n;
      }
      lmax_ = std::max(lmax, 1e-12);
      // smallest eigenvalue via shifted power iteration
      Vec u(d, 0.0);
      u[0] = 1.0;
      double mu = 0.0;
      for (int it = 0; it < 60; ++it) {
        Vec w = mul(u);
        for (std::size_t i = 0; i < d; ++i) w[i] = lmax_ * u[i] - w[i];
        const double n = norm2(w);
        if (n < 1e-300) break;
        mu = n;
        for (std::size_t i = 0; i < d; ++i) u[i] = w[i] / n;
      }
      lmin_ = std::max(lmax_ - mu, 0.0);
    }

    std::size_t window() const override { return k_; }
    std::size_t points() const override { return pts_; }
    std::size_t dimension() const override { return b_.size(); }

    double value(const Vec& theta) const override {
      Vec Ht = mul(theta);
      return 0.5 * dot(theta, Ht) - dot(b_, theta) + c_;
    }
    Vec subgradient(const Vec& theta) const override {
      Vec g = mul(theta);
      add_scaled(g, -1.0, b_);
      return g;
    }
    std::optional<double> curvature_lower() const override {
      return lmin_ > 1e-10 ? std::optional<double>(lmin_) : std::nullopt;
    }
    std::optional<double> curvature_upper() const override { return lmax_; }

   private:
    Vec mul(const Vec& x) const {
      Vec y(b_.size(), 0.0);
      for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j) y[i] += H_[i][j] * x[j];
      return y;
    }
    std::vector<Vec> H_;
    Vec b_;
    double c_;
    std::size_t k_, pts_;
    double lmax_ = 1.0, lmin_ = 0.0;
  };

  std::unique_ptr<WindowLoss> window_loss(
      std::span<const SampleBatch* const> batches) const override {
    std::vector<Vec> H(d_, zeros(d_));
    Vec b = zeros(d_);
    double c = 0.0;
    std::size_t pts = 0;
    for (const SampleBatch* batch : batches)
      for (const Vec& z : batch->samples) {
        for (std::size_t i = 0; i < d_; ++i) {
          for (std::size_t j = 0; j < d_; ++j) H[i][j] += z[i] * z[j];
          b[i] += z[d_] * z[i];
        }
        c += 0.5 * z[d_] * z[d_];
        ++pts;
      }
    if (pts == 0) throw WindowError("window loss over empty batches");
    const double inv = 1.0 / static_cast<double>(pts);
    for (auto& row : H)
      for (double& v : row) v *= inv;
    for (double& v : b) v *= inv;
    c *= inv;
    return std::make_unique<QuadWindowLoss>(std::move(H), std::move(b), c,
                                            batches.size(), pts);
  }

 private:
  std::size_t d_;
  double sigma0_, noise_sd_;
  Vec sigma_diag_;
  RegularityConstants constants_;
};

// ---------------------------------------------------------------------------
// Logistic regression: z = (x, y), l = log(1 + exp(x' theta)) - y x' theta,
// x ~ N(0, sigma0^2 I), P(y = 1 | x) = logistic(x' theta*_n).

class LogisticRegressionModel final : public FamilyModel {
 public:
  LogisticRegressionModel(std::size_t d, double sigma0, double M)
      : d_(d), sigma0_(sigma0) {
    // rho = c gamma sigma0^2 with c unspecified by the analysis; 0.1 is an
    // order-of preset.
    constants_.rho = 0.1 * sigma0 * sigma0;
    constants_.L = 0.25 * sigma0 * sigma0;
    constants_.lambda = sigma0;
    constants_.sigma = sigma0;
    constants_.M = M;
    constants_.r = M / 4.0;
  }

  std::size_t dimension() const override { return d_; }
  Regime regime() const override { return Regime::strongly_convex; }
  const RegularityConstants& constants() const override { return constants_; }
  std::string name() const override { return "logistic-regression"; }

  double loss(const Vec& theta, const Vec& z) const override {
    double t = 0.0;
    for (std::size_t i = 0; i < d_; ++i) t += z[i] * theta[i];
    return detail::log1pexp(t) - z[d_] * t;
  }

  Vec subgradient(const Vec& theta, const Vec& z) const override {
    double t = 0.0;
    for (std::size_t i = 0; i < d_; ++i) t += z[i] * theta[i];
    const double w = detail::logistic_fn(t) - z[d_];
    Vec g(d_);
    for (std::size_t i = 0; i < d_; ++i) g[i] = w * z[i];
    return g;
  }

  std::size_t base_dimension() const override { return d_ + 1; }
  Vec draw_base(Rng& rng) const override {
    Vec b(d_ + 1);
    for (std::size_t i = 0; i < d_; ++i) b[i] = rng.normal();
    b[d_] = rng.uniform();
    return b;
  }
  Vec to_sample(const Vec& param, const Vec& base) const override {
    Vec z(d_ + 1);
    double t = 0.0;
    for (std::size_t i = 0; i < d_; ++i) {
      z[i] = sigma0_ * base[i];
      t += z[i] * param[i];
    }
    z[d_] = base[d_] < detail::logistic_fn(t) ? 1.0 : 0.0;
    return z;
  }

  std::optional<Vec> analytic_minimizer(const Vec& param,
                                        const FeasibleSet&) const override {
    return param;  // the teacher parameter minimizes the population loss
  }

  void validate_parameter(const Vec& param, const FeasibleSet& domain,
                          bool default_domain) const override {
    if (param.size() != d_)
      throw ConfigError("logistic-regression: parameter dimension != d");
    if (default_domain) {
      if (norm2(param) > constants_.M / 4.0 + 1e-12)
        throw ConfigError("logistic-regression: requires ||theta*|| <= M/4");
    } else if (!domain.contains(param)) {
      throw ConfigError("logistic-regression: theta* must lie in the feasible set");
    }
  }

  FeasibleSet default_domain() const override {
    return FeasibleSet::origin_ball(d_, constants_.M / 2.0);
  }

 private:
  std::size_t d_;
  double sigma0_;
  RegularityConstants constants_;
};

// ---------------------------------------------------------------------------
// Stochastic linear optimization: l(theta, z) = z' theta on Omega = B_inf(0, 1/sqrt(d)),
// z = sqrt(d) x o y with P(x_j = +-1) = 1/2 +- mu_j and y uniform over basis
// vectors. The population loss uses the sampler's true mean E z = 2 mu / sqrt(d).

inline Vec sample_linear_opt(const Vec& mu, std::size_t d, Rng& rng) {
  if (mu.size() != d) throw ContractError("sample_linear_opt: mu dimension != d");
  if (norm_inf(mu) > 0.5 + 1e-12)
    throw ConfigError("sample_linear_opt: requires ||mu||_inf <= 1/2");
  const std::size_t j = static_cast<std::size_t>(rng.integer(d));
  const double sign = rng.uniform() < 0.5 + mu[j] ? 1.0 : -1.0;
  Vec z = zeros(d);
  z[j] = std::sqrt(static_cast<double>(d)) * sign;
  return z;
}

class LinearOptModel final : public FamilyModel {
 public:
  explicit LinearOptModel(std::size_t d) : d_(d) {
    constants_.sigma = 4.0;
    constants_.lambda = 2.0;
    constants_.M = 2.0;  // diam(B_inf(0, 1/sqrt(d))) in l2
    constants_.rho = 0.0;
    constants_.L = 0.0;
    constants_.r = 0.0;
  }

  std::size_t dimension() const override { return d_; }
  Regime regime() const override { return Regime::lipschitz; }
  const RegularityConstants& constants() const override { return constants_; }
  std::string name() const override { return "linear-opt"; }

  double loss(const Vec& theta, const Vec& z) const override { return dot(z, theta); }
  Vec subgradient(const Vec&, const Vec& z) const override { return z; }

  std::size_t base_dimension() const override { return 2; }
  Vec draw_base(Rng& rng) const override {
    return {static_cast<double>(rng.integer(d_)), rng.uniform()};
  }
  Vec to_sample(const Vec& param, const Vec& base) const override {
    const std::size_t j = static_cast<std::size_t>(base[0]);
    const double sign = base[1] < 0.5 + param[j] ? 1.0 : -1.0;
    Vec z = zeros(d_);
    z[j] = std::sqrt(static_cast<double>(d_)) * sign;
    return z;
  }

  std::optional<PopulationLoss> population_closed_form(
      const Vec& param, const FeasibleSet& domain) const override {
    Vec mean = scaled(param, 2.0 / std::sqrt(static_cast<double>(d_)));
    Vec vertex = linear_minimizer(mean, domain);
    const double min_value = dot(mean, vertex);
    return PopulationLoss::closed_form(
        [mean](const Vec& theta) { return dot(mean, theta); }, min_value, vertex);
  }

  std::optional<Vec> analytic_minimizer(const Vec& param,
                                        const FeasibleSet& domain) const override {
    return linear_minimizer(scaled(param, 2.0 / std::sqrt(static_cast<double>(d_))),
                            domain);
  }

  void validate_parameter(const Vec& param, const FeasibleSet& domain,
                          bool default_domain) const override {
    (void)domain;
    (void)default_domain;
    if (param.size() != d_) throw ConfigError("linear-opt: parameter dimension != d");
    if (norm_inf(param) > 0.5 + 1e-12)
      throw ConfigError("linear-opt: requires ||mu||_inf <= 1/2");
  }

  FeasibleSet default_domain() const override {
    return FeasibleSet::sup_ball(d_, 1.0 / std::sqrt(static_cast<double>(d_)));
  }

  static Vec linear_minimizer(const Vec& cost, const FeasibleSet& set) {
    if (set.kind() == FeasibleSet::Kind::box) {
      Vec v(cost.size());
      for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = cost[i] >= 0.0 ? set.lower()[i] : set.upper()[i];
      return v;
    }
    const double n = norm2(cost);
    Vec v = set.center();
    if (n > 0.0) add_scaled(v, -set.radius() / n, cost);
    return v;
  }

  class LinearWindowLoss final : public WindowLoss {
   public:
    LinearWindowLoss(Vec mean, std::size_t k, std::size_t pts)
        : mean_(std::move(mean)), k_(k), pts_(pts) {}
    std::size_t window() const override { return k_; }
    std::size_t points() const override { return pts_; }
    std::size_t dimension() const override { return mean_.size(); }
    double value(const Vec& theta) const override { return dot(mean_, theta); }
    Vec subgradient(const Vec&) const override { return mean_; }
    std::optional<Vec> closed_form_minimizer(const FeasibleSet& set) const override {
      return linear_minimizer(mean_, set);
    }

   private:
    Vec mean_;
    std::size_t k_, pts_;
  };

  std::unique_ptr<WindowLoss> window_loss(
      std::span<const SampleBatch* const> batches) const override {
    Vec mean = zeros(d_);
    std::size_t pts = 0;
    for (const SampleBatch* b : batches)
      for (const Vec& z : b->samples) {
        add_scaled(mean, 1.0, z);
        ++pts;
      }
    if (pts == 0) throw WindowError("window loss over empty batches");
    for (double& v : mean) v /= static_cast<double>(pts);
    return std::make_unique<LinearWindowLoss>(std::move(mean), batches.size(), pts);
  }

 private:
  std::size_t d_;
  RegularityConstants constants_;
};

// ---------------------------------------------------------------------------
// Quantile regression: z = (x, y), l = rho_nu(y - x' theta),
// x ~ N(0, sigma0^2 I), y = x' theta*_n + (Laplace(0,1) - q_nu). The noise is
// centered so its nu-quantile is zero, making theta*_n the population
// minimizer.

class QuantileRegressionModel final : public FamilyModel {
 public:
  QuantileRegressionModel(std::size_t d, double sigma0, double M, double nu)
      : d_(d), sigma0_(sigma0), nu_(nu) {
    if (!(nu > 0.0 && nu < 1.0))
      throw ConfigError("quantile-regression: requires nu in (0,1)");
    q_shift_ = detail::laplace_quantile(nu);
    constants_.sigma = M * sigma0;
    constants_.lambda = sigma0;
    constants_.M = M;
    constants_.rho = 0.0;
    constants_.L = 0.0;
    constants_.r = 0.0;
  }

  std::size_t dimension() const override { return d_; }
  Regime regime() const override { return Regime::lipschitz; }
  const RegularityConstants& constants() const override { return constants_; }
  std::string name() const override { return "quantile-regression"; }

  double loss(const Vec& theta, const Vec& z) const override {
    double pred = 0.0;
    for (std::size_t i = 0; i < d_; ++i) pred += z[i] * theta[i];
    return detail::check_loss(nu_, z[d_] - pred);
  }

  Vec subgradient(const Vec& theta, const Vec& z) const override {
    double pred = 0.0;
    for (std::size_t i = 0; i < d_; ++i) pred += z[i] * theta[i];
    const double slope = -detail::check_loss_right_slope(nu_, z[d_] - pred);
    Vec g(d_);
    for (std::size_t i = 0; i < d_; ++i) g[i] = slope * z[i];
    return g;
  }

  std::size_t base_dimension() const override { return d_ + 1; }
  Vec draw_base(Rng& rng) const override {
    Vec b(d_ + 1);
    for (std::size_t i = 0; i < d_; ++i) b[i] = rng.normal();
    b[d_] = rng.laplace(1.0);
    return b;
  }
  Vec to_sample(const Vec& param, const Vec& base) const override {
    Vec z(d_ + 1);
    double pred = 0.0;
    for (std::size_t i = 0; i < d_; ++i) {
      z[i] = sigma0_ * base[i];
      pred += z[i] * param[i];
    }
    z[d_] = pred + base[d_] - q_shift_;
    return z;
  }

  std::optional<Vec> analytic_minimizer(const Vec& param,
                                        const FeasibleSet&) const override {
    return param;
  }

  void validate_parameter(const Vec& param, const FeasibleSet& domain,
                          bool default_domain) const override {
    if (param.size() != d_)
      throw ConfigError("quantile-regression: parameter dimension != d");
    if (default_domain) {
      if (norm2(param) > constants_.M / 4.0 + 1e-12)
        throw ConfigError("quantile-regression: requires ||theta*|| <= M/4");
    } else if (!domain.contains(param)) {
      throw ConfigError("quantile-regression: theta* must lie in the feasible set");
    }
  }

  FeasibleSet default_domain() const override {
    return FeasibleSet::origin_ball(d_, constants_.M / 2.0);
  }

  double nu() const { return nu_; }

 private:
  std::size_t d_;
  double sigma0_, nu_, q_shift_;
  RegularityConstants constants_;
};

// ---------------------------------------------------------------------------
// Newsvendor: d = 1, l(theta, z) = c1 (theta - z)_+ + c2 (z - theta)_+,
// demand z ~ N(mu_n, sigma0^2). A special case of quantile regression with
// nu = c2 / (c1 + c2), up to the factor (c1 + c2).

class NewsvendorModel final : public FamilyModel {
 public:
  NewsvendorModel(double c1, double c2, double sigma0, double M)
      : c1_(c1), c2_(c2), sigma0_(sigma0) {
    if (!(c1 > 0.0) || !(c2 > 0.0))
      throw ConfigError("newsvendor: requires c1 > 0 and c2 > 0");
    nu_ = c2 / (c1 + c2);
    constants_.sigma = (c1 + c2) * M * sigma0;
    constants_.lambda = (c1 + c2) * sigma0;
    constants_.M = M;
    constants_.rho = 0.0;
    constants_.L = 0.0;
    constants_.r = 0.0;
  }

  std::size_t dimension() const override { return 1; }
  Regime regime() const override { return Regime::lipschitz; }
  const RegularityConstants& constants() const override { return constants_; }
  std::string name() const override { return "newsvendor"; }

  double loss(const Vec& theta, const Vec& z) const override {
    const double over = theta[0] - z[0];
    return over >= 0.0 ? c1_ * over : -c2_ * over;
  }

  Vec subgradient(const Vec& theta, const Vec& z) const override {
    return {theta[0] - z[0] > 0.0 ? c1_ : -c2_};
  }

  std::size_t base_dimension() const override { return 1; }
  Vec draw_base(Rng& rng) const override { return {rng.normal()}; }
  Vec to_sample(const Vec& param, const Vec& base) const override {
    return {param[0] + sigma0_ * base[0]};
  }

  std::optional<Vec> analytic_minimizer(const Vec& param,
                                        const FeasibleSet& domain) const override {
    // nu-quantile of N(mu, sigma0^2); a point mass when sigma0 = 0
    const double q =
        sigma0_ > 0.0 ? param[0] + sigma0_ * detail::normal_quantile(nu_) : param[0];
    return domain.project(Vec{q});
  }

  void validate_parameter(const Vec& param, const FeasibleSet& domain,
                          bool) const override {
    if (param.size() != 1) throw ConfigError("newsvendor: demand parameter must be 1-d");
    const double q =
        sigma0_ > 0.0 ? param[0] + sigma0_ * detail::normal_quantile(nu_) : param[0];
    if (!domain.contains(Vec{q}))
      throw ConfigError(
          "newsvendor: the nu-quantile of the demand must lie in the feasible set");
  }

  FeasibleSet default_domain() const override {
    return FeasibleSet::interval(0.0, constants_.M);
  }

  double nu() const { return nu_; }

  class CheckLossWindow final : public WindowLoss {
   public:
    CheckLossWindow(std::vector<double> sorted, double c1, double c2, double nu,
                    std::size_t k)
        : sorted_(std::move(sorted)), c1_(c1), c2_(c2), nu_(nu), k_(k) {
      prefix_.resize(sorted_.size() + 1, 0.0);
      for (std::size_t i = 0; i < sorted_.size(); ++i)
        prefix_[i + 1] = prefix_[i] + sorted_[i];
    }
    std::size_t window() const override { return k_; }
    std::size_t points() const override { return sorted_.size(); }
    std::size_t dimension() const override { return 1; }
    double value(const Vec& theta) const override {
      const double t = theta[0];
      const std::size_t below =
          std::upper_bound(sorted_.begin(), sorted_.end(), t) - sorted_.begin();
      const double m = static_cast<double>(sorted_.size());
      const double sum_below = prefix_[below];
      const double sum_above = prefix_.back() - sum_below;
      const double over = c1_ * (static_cast<double>(below) * t - sum_below);
      const double under = c2_ * (sum_above - static_cast<double>(sorted_.size() - below) * t);
      return (over + under) / m;
    }
    Vec subgradient(const Vec& theta) const override {
      const double t = theta[0];
      const std::size_t below =
          std::upper_bound(sorted_.begin(), sorted_.end(), t) - sorted_.begin();
      const double m = static_cast<double>(sorted_.size());
      return {(c1_ * static_cast<double>(below) -
               c2_ * static_cast<double>(sorted_.size() - below)) /
              m};
    }
    std::optional<Vec> closed_form_minimizer(const FeasibleSet& set) const override {
      return set.project(Vec{detail::sample_quantile(sorted_, nu_)});
    }

   private:
    std::vector<double> sorted_;
    std::vector<double> prefix_;
    double c1_, c2_, nu_;
    std::size_t k_;
  };

  std::unique_ptr<WindowLoss> window_loss(
      std::span<const SampleBatch* const> batches) const override {
    std::vector<double> samples;
    for (const SampleBatch* b : batches)
      for (const Vec& z : b->samples) samples.push_back(z[0]);
    if (samples.empty()) throw WindowError("window loss over empty batches");
    std::sort(samples.begin(), samples.end());
    return std::make_unique<CheckLossWindow>(std::move(samples), c1_, c2_, nu_,
                                             batches.size());
  }

 private:
  double c1_, c2_, sigma0_, nu_;
  RegularityConstants constants_;
};

// ---------------------------------------------------------------------------
// Soft-margin SVM: z = (x, y), y in {-1, +1}, l = (1 - y x' theta)_+,
// x ~ N(0, sigma0^2 I), labels from a logistic teacher at theta*_n.

class SvmModel final : public FamilyModel {
 public:
  SvmModel(std::size_t d, double sigma0, double M) : d_(d), sigma0_(sigma0) {
    constants_.sigma = M * sigma0;
    constants_.lambda = sigma0;
    constants_.M = M;
    constants_.rho = 0.0;
    constants_.L = 0.0;
    constants_.r = 0.0;
  }

  std::size_t dimension() const override { return d_; }
  Regime regime() const override { return Regime::lipschitz; }
  const RegularityConstants& constants() const override { return constants_; }
  std::string name() const override { return "svm"; }

  double loss(const Vec& theta, const Vec& z) const override {
    double t = 0.0;
    for (std::size_t i = 0; i < d_; ++i) t += z[i] * theta[i];
    return std::max(0.0, 1.0 - z[d_] * t);
  }

  Vec subgradient(const Vec& theta, const Vec& z) const override {
    double t = 0.0;
    for (std::size_t i = 0; i < d_; ++i) t += z[i] * theta[i];
    Vec g = zeros(d_);
    if (1.0 - z[d_] * t > 0.0)
      for (std::size_t i = 0; i < d_; ++i) g[i] = -z[d_] * z[i];
    return g;
  }

  std::size_t base_dimension() const override { return d_ + 1; }
  Vec draw_base(Rng& rng) const override {
    Vec b(d_ + 1);
    for (std::size_t i = 0; i < d_; ++i) b[i] = rng.normal();
    b[d_] = rng.uniform();
    return b;
  }
  Vec to_sample(const Vec& param, const Vec& base) const override {
    Vec z(d_ + 1);
    double t = 0.0;
    for (std::size_t i = 0; i < d_; ++i) {
      z[i] = sigma0_ * base[i];
      t += z[i] * param[i];
    }
    z[d_] = base[d_] < detail::logistic_fn(t) ? 1.0 : -1.0;
    return z;
  }

  void validate_parameter(const Vec& param, const FeasibleSet&,
                          bool) const override {
    if (param.size() != d_) throw ConfigError("svm: parameter dimension != d");
    if (!all_finite(param)) throw ConfigError("svm: teacher parameter must be finite");
  }

  FeasibleSet default_domain() const override {
    return FeasibleSet::origin_ball(d_, constants_.M / 2.0);
  }

 private:
  std::size_t d_;
  double sigma0_;
  RegularityConstants constants_;
};

// ---------------------------------------------------------------------------

struct FamilyConfig {
  Family family = Family::gaussian_mean;
  std::size_t d = 1;
  double sigma0 = 1.0;
  double M = 4.0;
  double nu = 0.5;            // quantile regression
  double c1 = 1.0, c2 = 1.0;  // newsvendor
  Vec sigma_diag;             // linear regression covariate covariance diagonal
  double noise_sd = -1.0;     // linear regression noise (default sigma0)
  std::optional<FeasibleSet> domain_override;
};

inline std::shared_ptr<FamilyModel> make_model(const FamilyConfig& cfg) {
  switch (cfg.family) {
    case Family::gaussian_mean:
      return std::make_shared<GaussianMeanModel>(cfg.d, cfg.sigma0, cfg.M);
    case Family::linear_regression:
      return std::make_shared<LinearRegressionModel>(cfg.d, cfg.sigma0, cfg.M,
                                                     cfg.sigma_diag, cfg.noise_sd);
    case Family::logistic_regression:
      return std::make_shared<LogisticRegressionModel>(cfg.d, cfg.sigma0, cfg.M);
    case Family::linear_opt:
      return std::make_shared<LinearOptModel>(cfg.d);
    case Family::quantile_regression:
      return std::make_shared<QuantileRegressionModel>(cfg.d, cfg.sigma0, cfg.M, cfg.nu);
    case Family::newsvendor:
      return std::make_shared<NewsvendorModel>(cfg.c1, cfg.c2, cfg.sigma0, cfg.M);
    case Family::svm:
      return std::make_shared<SvmModel>(cfg.d, cfg.sigma0, cfg.M);
  }
  throw ConfigError("make_model: unknown family");
}

// Per-replication population oracle. Monte-Carlo families materialize one base
// evaluation sample per replication and reuse it across periods and learners.
class PopulationOracle {
 public:
  PopulationOracle(std::shared_ptr<const FamilyModel> model, FeasibleSet domain,
                   std::vector<Vec> path, std::uint64_t seed, std::uint64_t rep,
                   std::size_t mc_samples)
      : model_(std::move(model)),
        domain_(std::move(domain)),
        path_(std::move(path)),
        seed_(seed),
        rep_(rep),
        mc_samples_(mc_samples) {}

  const PopulationLoss& at(std::size_t period) {
    if (period < 1 || period > path_.size())
      throw ContractError("PopulationOracle: period out of range");
    auto it = cache_.find(period);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(period, build(period)).first->second;
  }

 private:
  PopulationLoss build(std::size_t period) {
    const Vec& param = path_[period - 1];
    if (auto closed = model_->population_closed_form(param, domain_)) return *closed;
    // Monte-Carlo mode on the shared base sample
    ensure_base();
    auto sample = std::make_shared<std::vector<Vec>>();
    sample->reserve(base_.size());
    for (const Vec& b : base_) sample->push_back(model_->to_sample(param, b));
    Vec minimizer;
    if (auto analytic = model_->analytic_minimizer(param, domain_)) {
      minimizer = domain_.project(*analytic);
    } else {
      // certify the sample minimum with the iterative solver
      SampleBatch all;
      all.period = period;
      all.samples = *sample;
      const SampleBatch* ptr = &all;
      auto loss = model_->window_loss(std::span<const SampleBatch* const>(&ptr, 1));
      SolverBudget budget;
      budget.regime = model_->regime();
      budget.target_gap = 0.0;
      budget.max_iters = 2000;
      minimizer = minimize_empirical(*loss, domain_, budget).theta;
    }
    double min_value = 0.0;
    for (const Vec& z : *sample) min_value += model_->loss(minimizer, z);
    min_value /= static_cast<double>(sample->size());
    return PopulationLoss::monte_carlo(model_, std::move(sample), seed_, min_value,
                                       std::move(minimizer));
  }

  void ensure_base() {
    if (!base_.empty()) return;
    Rng rng(RngKey{seed_, rng_tag::eval_sample, rep_, 0});
    base_.reserve(mc_samples_);
    for (std::size_t i = 0; i < mc_samples_; ++i) base_.push_back(model_->draw_base(rng));
  }

  std::shared_ptr<const FamilyModel> model_;
  FeasibleSet domain_;
  std::vector<Vec> path_;
  std::uint64_t seed_, rep_;
  std::size_t mc_samples_;
  std::vector<Vec> base_;
  std::map<std::size_t, PopulationLoss> cache_;
};

// A fully specified non-stationary environment: model, feasible set, parameter
// path, and keyed samplers for batches and population oracles.
class Environment {
 public:
  Environment(std::shared_ptr<const FamilyModel> model, FeasibleSet domain,
              std::vector<Vec> path, std::size_t batch_size, std::uint64_t seed,
              std::size_t mc_samples)
      : model_(std::move(model)),
        domain_(std::move(domain)),
        path_(std::move(path)),
        batch_size_(batch_size),
        seed_(seed),
        mc_samples_(mc_samples) {}

  const FamilyModel& model() const { return *model_; }
  std::shared_ptr<const FamilyModel> model_ptr() const { return model_; }
  const FeasibleSet& domain() const { return domain_; }
  const std::vector<Vec>& path() const { return path_; }
  std::size_t horizon() const { return path_.size(); }
  std::size_t batch_size() const { return batch_size_; }
  std::uint64_t seed() const { return seed_; }

  // Batches are independent across periods and identical for every learner
  // within a replication.
  SampleBatch batch(std::size_t period, std::uint64_t rep) const {
    if (period < 1 || period > path_.size())
      throw ContractError("Environment::batch: period out of range");
    Rng rng(RngKey{seed_, rng_tag::batches, rep, period});
    SampleBatch b;
    b.period = period;
    b.samples.reserve(batch_size_);
    for (std::size_t i = 0; i < batch_size_; ++i)
      b.samples.push_back(model_->to_sample(path_[period - 1], model_->draw_base(rng)));
    return b;
  }

  PopulationOracle population_oracle(std::uint64_t rep) const {
    return PopulationOracle(model_, domain_, path_, seed_, rep, mc_samples_);
  }

 private:
  std::shared_ptr<const FamilyModel> model_;
  FeasibleSet domain_;
  std::vector<Vec> path_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::size_t mc_samples_;
};

inline Environment make_environment(const FamilyConfig& cfg, std::vector<Vec> path,
                                    std::size_t batch_size, std::uint64_t seed,
                                    std::size_t mc_samples = 100000) {
  if (path.empty()) throw ConfigError("make_environment: empty parameter path");
  if (batch_size < 1) throw ConfigError("make_environment: batch size must be >= 1");
  auto model = make_model(cfg);
  FeasibleSet domain = cfg.domain_override ? *cfg.domain_override
                                           : model->default_domain();
  if (domain.dimension() != model->dimension())
    throw ConfigError("make_environment: feasible set dimension != d");
  for (const Vec& p : path) {
    if (!all_finite(p)) throw ConfigError("make_environment: non-finite path value");
    model->validate_parameter(p, domain, !cfg.domain_override.has_value());
  }
  return Environment(std::move(model), std::move(domain), std::move(path), batch_size,
                     seed, mc_samples);
}

}  // namespace saws
