// Non-stationarity pattern generators: the four zigzag patterns, random paths
// with an exact total-variation budget, and the hard-instance constructions
// behind the minimax problem classes, together with independent
// class-membership checkers.
#pragma once

#include <span>

#include "saws/domain.hpp"
#include "saws/rng.hpp"

namespace saws {

struct ParameterPath {
  std::vector<Vec> values;
  double total_variation = 0.0;                       // realized, l2 steps
  std::optional<std::vector<std::size_t>> segment_hint;  // boundaries 0..N-1

  std::size_t horizon() const { return values.size(); }

  static double realized_tv(std::span<const Vec> vals) {
    double tv = 0.0;
    for (std::size_t i = 0; i + 1 < vals.size(); ++i)
      tv += distance2(vals[i], vals[i + 1]);
    return tv;
  }
};

enum class ZigzagKind { large, small, uneven, alternating };

inline ZigzagKind zigzag_from_string(const std::string& s) {
  if (s == "large") return ZigzagKind::large;
  if (s == "small") return ZigzagKind::small;
  if (s == "uneven") return ZigzagKind::uneven;
  if (s == "alternating") return ZigzagKind::alternating;
  throw ConfigError("unknown zigzag pattern '" + s + "'");
}

// The four canonical 1-d patterns on [0, 1] with d = B = 1. All have total
// variation of order sqrt(N) but very different segmentation complexity.
// Block lengths are floored; the remainder is absorbed by the final block.
inline ParameterPath gen_zigzag(ZigzagKind kind, std::size_t N, double u = 0.0) {
  if (N < 4) throw ConfigError("gen_zigzag: requires N >= 4");
  const double root_n = std::sqrt(static_cast<double>(N));
  const double step = 1.0 / root_n;
  std::vector<Vec> vals;
  vals.reserve(N);
  std::vector<std::size_t> hint{0};

  auto clip01 = [](double x) { return std::clamp(x, 0.0, 1.0); };

  switch (kind) {
    case ZigzagKind::large: {
      const std::size_t block =
          std::max<std::size_t>(1, static_cast<std::size_t>(std::cbrt(static_cast<double>(N))));
      double x = 0.0;
      double dir = 1.0;
      for (std::size_t n = 0; n < N; ++n) {
        vals.push_back({clip01(x)});
        if ((n + 1) % block == 0) dir = -dir;
        double next = x + dir * step;
        if (next < 0.0 || next > 1.0) {  // reflect at the boundary
          dir = -dir;
          next = x + dir * step;
        }
        x = next;
      }
      for (std::size_t b = block; b < N - 1; b += block) hint.push_back(b);
      hint.push_back(N - 1);
      break;
    }
    case ZigzagKind::small: {
      // theta*_{n+1} = theta*_n - (-1)^n step, starting at 0 (1-based n)
      double x = 0.0;
      for (std::size_t n = 1; n <= N; ++n) {
        vals.push_back({clip01(x)});
        x -= (n % 2 == 0 ? 1.0 : -1.0) * step;
      }
      hint.push_back(N - 1);
      break;
    }
    case ZigzagKind::uneven: {
      const std::size_t jumpy = static_cast<std::size_t>(root_n);
      double x = 0.0;
      for (std::size_t n = 1; n <= N; ++n) {
        vals.push_back({x});
        if (n <= jumpy) x = x == 0.0 ? 1.0 : 0.0;  // unit jump
      }
      for (std::size_t b = 1; b <= std::min(jumpy, N - 1); ++b) hint.push_back(b);
      if (hint.back() != N - 1) hint.push_back(N - 1);
      break;
    }
    case ZigzagKind::alternating: {
      const double lo = 1.0 / root_n;
      const double hi = std::pow(static_cast<double>(N), -1.0 / 6.0);
      if (!(u >= lo - 1e-12 && u <= hi + 1e-12))
        throw ConfigError("gen_zigzag: alternating requires u in [N^-1/2, N^-1/6]");
      const std::size_t block =
          std::max<std::size_t>(1, static_cast<std::size_t>(root_n * u));
      double level = 0.0;
      std::size_t k = 0;  // completed blocks
      for (std::size_t n = 1; n <= N; ++n) {
        vals.push_back({clip01(level)});
        if (n % block == 0) {
          ++k;
          level -= (k % 2 == 0 ? 1.0 : -1.0) * u;  // - (-1)^k u
        }
      }
      // near-constant segments of length about u^-2
      const std::size_t seg =
          std::max<std::size_t>(block, static_cast<std::size_t>(1.0 / (u * u)));
      for (std::size_t b = seg; b < N - 1; b += seg) hint.push_back(b);
      hint.push_back(N - 1);
      break;
    }
  }

  ParameterPath path;
  path.values = std::move(vals);
  path.total_variation = ParameterPath::realized_tv(path.values);
  path.segment_hint = std::move(hint);
  return path;
}

enum class StepLaw { uniform, exponential };

// Random path with realized total variation exactly V (the last step absorbs
// the rounding). Steps are kept feasible by redirecting toward the region's
// center, which preserves step lengths; this needs per-step lengths at most
// the inradius, i.e. V <= (N - 1) * inradius / 3.
inline ParameterPath gen_tv_budget(std::size_t N, double V, StepLaw law,
                                   const FeasibleSet& region, std::uint64_t seed) {
  if (N < 1) throw ConfigError("gen_tv_budget: requires N >= 1");
  if (V < 0.0) throw ConfigError("gen_tv_budget: requires V >= 0");
  const std::size_t d = region.dimension();
  ParameterPath path;
  Vec x = region.center();
  path.values.push_back(x);
  if (N == 1 || V == 0.0) {
    path.values.resize(N, x);
    path.total_variation = 0.0;
    return path;
  }
  const double inr = region.inradius();
  if (V > (static_cast<double>(N - 1)) * inr / 3.0)
    throw ConfigError("gen_tv_budget: V exceeds the feasible budget (N-1)*inradius/3");

  Rng rng(RngKey{seed, rng_tag::path, 0, 0});
  std::vector<double> mags(N - 1);
  double total = 0.0;
  for (double& m : mags) {
    if (law == StepLaw::uniform) {
      m = rng.uniform(0.5, 1.5);
    } else {
      // exponential magnitudes, capped so no single step dominates
      m = std::min(3.0, -std::log(1.0 - rng.uniform() * (1.0 - 1e-12)));
    }
    m = std::max(m, 1e-3);
    total += m;
  }
  for (double& m : mags) m *= V / total;
  // exact budget: the final step absorbs accumulated rounding
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < mags.size(); ++i) acc += mags[i];
  mags.back() = V - acc;

  for (std::size_t i = 0; i < N - 1; ++i) {
    Vec dir(d);
    double n2 = 0.0;
    for (double& v : dir) {
      v = rng.normal();
      n2 += v * v;
    }
    if (n2 < 1e-300) dir[0] = 1.0;
    const double n = std::max(norm2(dir), 1e-300);
    for (double& v : dir) v /= n;
    Vec cand = x;
    add_scaled(cand, mags[i], dir);
    if (!region.contains(cand)) {
      // same length, aimed at the center
      Vec to_center = region.center();
      add_scaled(to_center, -1.0, x);
      const double dist = norm2(to_center);
      if (dist < 1e-300) {
        cand = x;  // center itself: any direction of length <= inradius stays
        add_scaled(cand, mags[i] / std::max(norm2(dir), 1e-300), dir);
        cand = region.project(cand);
      } else {
        cand = x;
        add_scaled(cand, mags[i] / dist, to_center);
      }
    }
    x = cand;
    path.values.push_back(x);
  }
  path.total_variation = ParameterPath::realized_tv(path.values);
  return path;
}

namespace detail {

// Uniform draw from B(center, radius) by rejection from the bounding box.
inline Vec uniform_in_ball(const Vec& center, double radius, Rng& rng) {
  const std::size_t d = center.size();
  if (radius <= 0.0) return center;
  for (int attempt = 0; attempt < 100000; ++attempt) {
    Vec p(d);
    double n2 = 0.0;
    for (double& v : p) {
      v = rng.uniform(-radius, radius);
      n2 += v * v;
    }
    if (n2 <= radius * radius) {
      add_scaled(p, 1.0, center);
      return p;
    }
  }
  throw ContractError("uniform_in_ball: rejection sampling failed");
}

// Center of the ball B(theta - (r / (4||theta||)) theta, r/4): shifted toward
// the origin so the draw stays inside B(0, 1/2) and within r/2 of theta.
inline Vec markov_center(const Vec& theta, double r) {
  const double n = norm2(theta);
  Vec c = theta;
  if (n > 0.0) add_scaled(c, -r / (4.0 * n), theta);
  return c;
}

}  // namespace detail

// Hard-instance generator for the strongly convex classes: a Markov process
// whose segments are uniform draws in shrinking balls. `boundaries` are the
// class boundaries N_1 < ... < N_J = N-1; `jumps` are the per-boundary jump
// budgets r_j in [0, 1]; gamma in [0, 1] scales the within-segment wobble,
// and c is the class's noise constant.
inline ParameterPath gen_hard_instance_sc(std::size_t N,
                                          std::span<const std::size_t> boundaries,
                                          std::span<const double> jumps, double gamma,
                                          double c, std::size_t d, std::size_t B,
                                          std::uint64_t seed) {
  if (boundaries.empty() || boundaries.back() != N - 1)
    throw ConfigError("gen_hard_instance_sc: boundaries must end at N-1");
  for (std::size_t j = 0; j + 1 < boundaries.size(); ++j)
    if (boundaries[j] >= boundaries[j + 1])
      throw ConfigError("gen_hard_instance_sc: boundaries must be strictly increasing");
  if (boundaries.size() != jumps.size())
    throw ConfigError("gen_hard_instance_sc: need one jump budget per boundary");
  for (double r : jumps)
    if (r < 0.0 || r > 1.0)
      throw ConfigError("gen_hard_instance_sc: jump budgets must lie in [0,1]");
  if (gamma < 0.0 || gamma > 1.0)
    throw ConfigError("gen_hard_instance_sc: gamma must lie in [0,1]");

  Rng rng(RngKey{seed, rng_tag::path, 0, 1});
  std::vector<std::size_t> bounds(boundaries.begin(), boundaries.end());
  std::vector<double> r(jumps.begin(), jumps.end());

  std::vector<Vec> vals(N);
  Vec prev = zeros(d);  // theta*_0
  std::size_t seg_start = 1;
  for (std::size_t j = 0; j <= bounds.size(); ++j) {
    const std::size_t seg_end = j < bounds.size() ? bounds[j] : N;  // N_{J+1} = N
    if (seg_end < seg_start) continue;
    const double rj = j == 0 ? 1.0 : r[j - 1];
    const Vec head = detail::uniform_in_ball(detail::markov_center(prev, rj), rj / 4.0, rng);
    vals[seg_start - 1] = head;
    const std::size_t len = seg_end - seg_start + 1;
    if (len >= 2) {
      const double budget = std::sqrt(8.0 * gamma * c * c * static_cast<double>(d) /
                                      (static_cast<double>(B) * static_cast<double>(len)));
      const double rp = std::min(budget, 1.0);
      const Vec center = detail::markov_center(head, rp);
      for (std::size_t n = seg_start + 1; n <= seg_end; ++n)
        vals[n - 1] = detail::uniform_in_ball(center, rp / 4.0, rng);
    }
    prev = vals[seg_end - 1];
    seg_start = seg_end + 1;
  }

  ParameterPath path;
  path.values = std::move(vals);
  path.total_variation = ParameterPath::realized_tv(path.values);
  std::vector<std::size_t> hint{0};
  hint.insert(hint.end(), bounds.begin(), bounds.end());
  path.segment_hint = std::move(hint);
  return path;
}

// Independent membership checker for the strongly convex class: re-derives the
// per-segment max pairwise distances, boundary jumps and the ambient ball from
// the raw values.
inline bool check_membership_sc(std::span<const Vec> path,
                                std::span<const std::size_t> boundaries,
                                std::span<const double> jumps, double c,
                                std::size_t d, std::size_t B, double tol = 1e-9) {
  const std::size_t N = path.size();
  if (boundaries.empty() || boundaries.back() != N - 1) return false;
  for (const Vec& v : path)
    if (norm2(v) > 0.5 + tol) return false;
  std::size_t prev = 0;
  for (std::size_t j = 0; j < boundaries.size(); ++j) {
    const std::size_t end = boundaries[j];
    const std::size_t len = end - prev;
    const double budget = std::sqrt(8.0 * c * c * static_cast<double>(d) /
                                    (static_cast<double>(B) * static_cast<double>(len)));
    for (std::size_t i = prev + 1; i <= end; ++i)
      for (std::size_t k = i + 1; k <= end; ++k)
        if (distance2(path[i - 1], path[k - 1]) > budget + tol) return false;
    // jump across the boundary: || theta*_{N_j + 1} - theta*_{N_j} || <= r_j
    if (end + 1 <= N && distance2(path[end - 1], path[end]) > jumps[j] + tol)
      return false;
    prev = end;
  }
  return true;
}

// Hard-instance generator for the Lipschitz classes: mu*-paths that are zero
// at segment heads and hold a signed level inside long segments. The level is
// sized so the within-segment l1/d variation meets the class budget exactly.
inline ParameterPath gen_hard_instance_lip(std::size_t N,
                                           std::span<const std::size_t> boundaries,
                                           std::span<const double> jumps,
                                           std::size_t d, std::size_t B,
                                           std::uint64_t seed) {
  if (boundaries.empty() || boundaries.back() != N - 1)
    throw ConfigError("gen_hard_instance_lip: boundaries must end at N-1");
  for (std::size_t j = 0; j + 1 < boundaries.size(); ++j)
    if (boundaries[j] >= boundaries[j + 1])
      throw ConfigError("gen_hard_instance_lip: boundaries must be strictly increasing");
  if (boundaries.size() != jumps.size())
    throw ConfigError("gen_hard_instance_lip: need one jump budget per boundary");

  Rng rng(RngKey{seed, rng_tag::path, 0, 2});
  std::vector<Vec> vals(N, zeros(d));
  std::size_t seg_start = 1;
  for (std::size_t j = 0; j <= boundaries.size(); ++j) {
    const std::size_t seg_end = j < boundaries.size() ? boundaries[j] : N;
    if (seg_end < seg_start) continue;
    const std::size_t len = seg_end - seg_start + 1;
    if (len >= 3) {
      // within-segment l1/d budget: sqrt(d / (B len)); entering and leaving the
      // level both cost (level), so size it at half the budget
      const double budget = std::sqrt(static_cast<double>(d) /
                                      (static_cast<double>(B) * static_cast<double>(len)));
      const double level = 0.5 * std::min(budget, 1.0);
      Vec nu(d);
      for (double& v : nu) v = rng.bernoulli(0.5) ? 1.0 : -1.0;
      for (std::size_t n = seg_start + 1; n + 1 <= seg_end; ++n)
        vals[n - 1] = scaled(nu, level);
    }
    seg_start = seg_end + 1;
  }
  // jump budgets: here heads are zero, so jumps are within-segment levels only
  (void)jumps;
  ParameterPath path;
  path.values = std::move(vals);
  path.total_variation = ParameterPath::realized_tv(path.values);
  std::vector<std::size_t> hint{0};
  hint.insert(hint.end(), boundaries.begin(), boundaries.end());
  path.segment_hint = std::move(hint);
  return path;
}

// Independent membership checker for the Lipschitz class (l1/d budgets).
inline bool check_membership_lip(std::span<const Vec> path,
                                 std::span<const std::size_t> boundaries,
                                 std::span<const double> jumps, std::size_t d,
                                 std::size_t B, double tol = 1e-9) {
  const std::size_t N = path.size();
  if (boundaries.empty() || boundaries.back() != N - 1) return false;
  for (const Vec& v : path)
    if (norm_inf(v) > 0.5 + tol) return false;
  const double dd = static_cast<double>(d);
  std::size_t prev = 0;
  for (std::size_t j = 0; j < boundaries.size(); ++j) {
    const std::size_t end = boundaries[j];
    const std::size_t len = end - prev;
    double within = 0.0;
    for (std::size_t n = prev + 1; n + 1 <= end; ++n)
      within += distance1(path[n - 1], path[n]) / dd;
    if (within > std::sqrt(dd / (static_cast<double>(B) * static_cast<double>(len))) + tol)
      return false;
    if (end + 1 <= N) {
      const double jump = distance1(path[end - 1], path[end]) / dd;
      if (jump > jumps[j] + tol) return false;
    }
    prev = end;
  }
  return true;
}

// CSV round trip for paths: header "n,x1[,x2,...]".
inline std::string path_to_csv(const ParameterPath& path) {
  std::string out = "n";
  const std::size_t d = path.values.empty() ? 0 : path.values[0].size();
  for (std::size_t i = 1; i <= d; ++i) out += ",x" + std::to_string(i);
  out += "\n";
  char buf[64];
  for (std::size_t n = 0; n < path.values.size(); ++n) {
    out += std::to_string(n + 1);
    for (double v : path.values[n]) {
      const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
      out += ',';
      out.append(buf, static_cast<std::size_t>(len));
    }
    out += "\n";
  }
  return out;
}

}  // namespace saws
