// Numerical toolkit for the (eps, delta) functional-closeness measure: the
// minimal delta between two grid functions, the sub-level-set sandwich,
// certified closeness from sufficient conditions, quasi-stationarity and the
// bias/variance balance point k_bar.
//
// Functions live on finite shared grids, so every quantity here is grid-exact.
// Against the continuum the discretization error is two-sided: coarse grids
// miss extreme points (pushing delta* down) but also overestimate the infima
// (pushing the other function's gaps up), so delta* converges with the mesh
// without being a one-sided bound.
#pragma once

#include <functional>
#include <memory>
#include <span>

#include "saws/domain.hpp"

namespace saws {

class GridDomain {
 public:
  explicit GridDomain(std::vector<Vec> points) : points_(std::move(points)) {
    if (points_.empty()) throw ContractError("GridDomain: empty grid");
    const std::size_t d = points_[0].size();
    for (const Vec& p : points_)
      if (p.size() != d || !all_finite(p))
        throw ContractError("GridDomain: ragged or non-finite grid point");
  }

  static std::shared_ptr<const GridDomain> interval(double lo, double hi,
                                                    std::size_t n_points = 2001) {
    if (!(lo <= hi) || n_points < 1)
      throw ContractError("GridDomain::interval: invalid range");
    std::vector<Vec> pts;
    pts.reserve(n_points);
    if (n_points == 1) {
      pts.push_back({(lo + hi) / 2.0});
    } else {
      const double h = (hi - lo) / static_cast<double>(n_points - 1);
      for (std::size_t i = 0; i < n_points; ++i)
        pts.push_back({lo + h * static_cast<double>(i)});
    }
    return std::make_shared<GridDomain>(std::move(pts));
  }

  // Tensor grid over the bounding box of the set, filtered to the set
  // (covers balls and boxes in up to two axes).
  static std::shared_ptr<const GridDomain> from_set(const FeasibleSet& set,
                                                    std::size_t per_axis = 2001) {
    const std::size_t d = set.dimension();
    if (d > 2)
      throw ContractError("GridDomain::from_set: grids are limited to two axes");
    Vec c = set.center();
    Vec lo(d), hi(d);
    if (set.kind() == FeasibleSet::Kind::ball) {
      for (std::size_t i = 0; i < d; ++i) {
        lo[i] = c[i] - set.radius();
        hi[i] = c[i] + set.radius();
      }
    } else {
      lo = set.lower();
      hi = set.upper();
    }
    std::vector<Vec> pts;
    if (d == 1) {
      for (std::size_t i = 0; i < per_axis; ++i) {
        const double t = per_axis == 1 ? 0.5
                                       : static_cast<double>(i) /
                                             static_cast<double>(per_axis - 1);
        Vec p{lo[0] + t * (hi[0] - lo[0])};
        if (set.contains(p)) pts.push_back(std::move(p));
      }
    } else {
      for (std::size_t i = 0; i < per_axis; ++i)
        for (std::size_t j = 0; j < per_axis; ++j) {
          const double ti = per_axis == 1 ? 0.5
                                          : static_cast<double>(i) /
                                                static_cast<double>(per_axis - 1);
          const double tj = per_axis == 1 ? 0.5
                                          : static_cast<double>(j) /
                                                static_cast<double>(per_axis - 1);
          Vec p{lo[0] + ti * (hi[0] - lo[0]), lo[1] + tj * (hi[1] - lo[1])};
          if (set.contains(p)) pts.push_back(std::move(p));
        }
    }
    return std::make_shared<GridDomain>(std::move(pts));
  }

  std::size_t size() const { return points_.size(); }
  std::size_t dimension() const { return points_[0].size(); }
  const Vec& point(std::size_t i) const { return points_[i]; }
  const std::vector<Vec>& points() const { return points_; }

 private:
  std::vector<Vec> points_;
};

class GridFunction {
 public:
  GridFunction(std::shared_ptr<const GridDomain> domain, std::vector<double> values)
      : domain_(std::move(domain)), values_(std::move(values)) {
    if (!domain_ || values_.size() != domain_->size())
      throw ContractError("GridFunction: values/grid size mismatch");
    min_ = values_[0];
    for (double v : values_) {
      if (!std::isfinite(v)) throw ContractError("GridFunction: non-finite value");
      min_ = std::min(min_, v);
    }
  }

  static GridFunction sample(std::shared_ptr<const GridDomain> domain,
                             const std::function<double(const Vec&)>& fn) {
    std::vector<double> vals;
    vals.reserve(domain->size());
    for (const Vec& p : domain->points()) vals.push_back(fn(p));
    return GridFunction(std::move(domain), std::move(vals));
  }

  const std::shared_ptr<const GridDomain>& domain() const { return domain_; }
  const std::vector<double>& values() const { return values_; }
  double value(std::size_t i) const { return values_[i]; }
  double min() const { return min_; }
  double max() const {
    double m = values_[0];
    for (double v : values_) m = std::max(m, v);
    return m;
  }
  double range() const { return max() - min_; }
  std::size_t size() const { return values_.size(); }

  // sub-optimality at grid index i
  double gap(std::size_t i) const { return values_[i] - min_; }

  GridFunction shifted(double a) const {
    std::vector<double> vals(values_);
    for (double& v : vals) v += a;
    return GridFunction(domain_, std::move(vals));
  }

 private:
  std::shared_ptr<const GridDomain> domain_;
  std::vector<double> values_;
  double min_ = 0.0;
};

inline void require_shared_grid(const GridFunction& f, const GridFunction& g) {
  if (f.domain() == g.domain()) return;
  if (f.size() != g.size())
    throw ContractError("closeness: functions live on different grids");
  for (std::size_t i = 0; i < f.size(); ++i)
    if (distance2(f.domain()->point(i), g.domain()->point(i)) > 1e-9)
      throw ContractError("closeness: functions live on different grids");
}

struct ClosenessParams {
  double eps = 0.0;
  double delta = 0.0;
};

// Smallest delta >= 0 making f and g (eps, delta)-close on the shared grid:
//   delta* = max(0, max_theta [e^-eps g~ - f~], max_theta [e^-eps f~ - g~])
// with f~ = f - min f, g~ = g - min g.
inline double min_delta(const GridFunction& f, const GridFunction& g, double eps) {
  require_shared_grid(f, g);
  if (eps < 0.0) throw ContractError("min_delta: eps must be >= 0");
  const double scale = std::exp(-eps);
  double worst = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double fg = f.gap(i), gg = g.gap(i);
    worst = std::max(worst, scale * gg - fg);
    worst = std::max(worst, scale * fg - gg);
  }
  return std::max(0.0, worst);
}

inline bool is_close(const GridFunction& f, const GridFunction& g, double eps,
                     double delta) {
  return min_delta(f, g, eps) <= delta;
}

// Sub-level set membership: h(theta) <= min h + t.
inline std::vector<bool> sublevel_set(const GridFunction& h, double t) {
  std::vector<bool> in(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) in[i] = h.gap(i) <= t;
  return in;
}

// The sandwich S(g, e^-eps (t - delta)) <= S(f, t) <= S(g, e^eps (t + delta))
// checked at every level in t_grid. At eps = 0 and with t_grid containing all
// realized sub-optimality gaps and their delta-shifts, this is equivalent to
// is_close; for eps > 0 the left inclusion is slightly stronger than the
// closeness definition, so only sandwich => close holds in general.
inline bool sublevel_inclusion_holds(const GridFunction& f, const GridFunction& g,
                                     double eps, double delta,
                                     std::span<const double> t_grid) {
  require_shared_grid(f, g);
  const double up = std::exp(eps), down = std::exp(-eps);
  for (double t : t_grid) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double fg = f.gap(i), gg = g.gap(i);
      if (gg <= down * (t - delta) && !(fg <= t)) return false;   // left inclusion
      if (fg <= t && !(gg <= up * (t + delta))) return false;     // right inclusion
    }
  }
  return true;
}

// All realized sub-optimality levels plus their images under the sandwich's
// affine level maps; enough t's to detect every violation.
inline std::vector<double> exhaustive_t_grid(const GridFunction& f,
                                             const GridFunction& g, double eps,
                                             double delta) {
  const double up = std::exp(eps);
  std::vector<double> ts;
  ts.reserve(4 * f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    ts.push_back(f.gap(i));
    ts.push_back(g.gap(i));
    ts.push_back(up * g.gap(i) + delta);
    ts.push_back(up * f.gap(i) + delta);
  }
  return ts;
}

// Certified (eps, delta) pairs from the sufficient conditions.

// |f - g - c| <= D0 on Omega for some constant c.
inline ClosenessParams closeness_sup_norm(double D0) {
  if (D0 < 0.0) throw ContractError("closeness_sup_norm: D0 must be >= 0");
  return {0.0, 2.0 * D0};
}

// sup ||grad f - grad g|| <= D1 on a convex Omega with diameter M.
inline ClosenessParams closeness_gradient_sup(double M, double D1) {
  if (M < 0.0 || D1 < 0.0) throw ContractError("closeness_gradient_sup: bad inputs");
  return {0.0, 2.0 * M * D1};
}

// g rho-strongly convex and L-smooth with an r-interior minimizer:
// (log 2, 3 L D1^2 / rho^2) when D1 <= rho r, and in any case
// (log 2, 3 L M r min{(D1/(rho r))^2, D1/(rho r)}).
inline ClosenessParams closeness_strongly_convex_gradient(double rho, double L,
                                                          double r, double M,
                                                          double D1) {
  if (rho <= 0.0 || L < rho)
    throw ContractError("closeness_strongly_convex_gradient: need 0 < rho <= L");
  if (r <= 0.0 || M < 0.0 || D1 < 0.0)
    throw ContractError("closeness_strongly_convex_gradient: bad inputs");
  if (D1 <= rho * r) return {std::log(2.0), 3.0 * L * D1 * D1 / (rho * rho)};
  const double ratio = D1 / (rho * r);
  return {std::log(2.0), 3.0 * L * M * r * std::min(ratio * ratio, ratio)};
}

// Both functions rho-strongly convex and L-smooth with interior minimizers:
// (log(2L/rho), (rho/2) ||theta_f* - theta_g*||^2).
inline ClosenessParams closeness_minimizers(double rho, double L,
                                            double minimizer_distance) {
  if (rho <= 0.0 || L < rho)
    throw ContractError("closeness_minimizers: need 0 < rho <= L");
  if (minimizer_distance < 0.0)
    throw ContractError("closeness_minimizers: negative distance");
  return {std::log(2.0 * L / rho),
          0.5 * rho * minimizer_distance * minimizer_distance};
}

enum class SufficientKind { sup_norm, gradient_sup, strongly_convex_gradient, minimizers };

struct SufficientInputs {
  double D0 = 0.0;
  double D1 = 0.0;
  double M = 0.0;
  double rho = 1.0;
  double L = 1.0;
  double r = 1.0;
  double minimizer_distance = 0.0;
};

inline ClosenessParams closeness_from_sufficient(SufficientKind kind,
                                                 const SufficientInputs& in) {
  switch (kind) {
    case SufficientKind::sup_norm:
      return closeness_sup_norm(in.D0);
    case SufficientKind::gradient_sup:
      return closeness_gradient_sup(in.M, in.D1);
    case SufficientKind::strongly_convex_gradient:
      return closeness_strongly_convex_gradient(in.rho, in.L, in.r, in.M, in.D1);
    case SufficientKind::minimizers:
      return closeness_minimizers(in.rho, in.L, in.minimizer_distance);
  }
  throw ContractError("closeness_from_sufficient: unknown kind");
}

// Smallest delta making the whole sequence pairwise (eps, delta)-close.
inline double quasi_stationarity_delta(std::span<const GridFunction> fns, double eps) {
  double worst = 0.0;
  for (std::size_t i = 0; i < fns.size(); ++i)
    for (std::size_t j = i + 1; j < fns.size(); ++j)
      worst = std::max(worst, min_delta(fns[i], fns[j], eps));
  return worst;
}

// Stochastic-error profile psi(n, k), non-increasing in k, plus the leeway
// constant of the general theory.
struct ErrorProfile {
  double eps = 0.0;
  std::function<double(std::size_t n, std::size_t k)> psi;
};

// k_bar: the largest k such that every one of the k most recent population
// losses is (eps, psi(k))-close to the latest one. `past` is ordered oldest to
// newest, past.back() = F_{n-1}. The bias/variance balance point.
inline std::size_t compute_kbar(std::span<const GridFunction> past, double eps,
                                const std::function<double(std::size_t)>& psi_of_k) {
  if (past.empty()) throw ContractError("compute_kbar: empty sequence");
  const GridFunction& latest = past.back();
  std::size_t kbar = 0;
  double max_delta = 0.0;
  for (std::size_t k = 1; k <= past.size(); ++k) {
    max_delta = std::max(max_delta, min_delta(past[past.size() - k], latest, eps));
    if (max_delta <= psi_of_k(k))
      kbar = k;
    else
      break;  // max_delta grows with k while psi shrinks
  }
  return kbar;
}

inline std::size_t compute_kbar(std::span<const GridFunction> past,
                                const ErrorProfile& profile, std::size_t n) {
  return compute_kbar(past, profile.eps,
                      [&](std::size_t k) { return profile.psi(n, k); });
}

}  // namespace saws
