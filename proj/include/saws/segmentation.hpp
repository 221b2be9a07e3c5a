// Greedy construction of quasi-stationary segmentations, total-variation
// bounds on the number of segments, and the regret-bound certificate of the
// general theory.
#pragma once

#include <functional>
#include <span>

#include "saws/closeness.hpp"

namespace saws {

// Boundaries 0 = N_0 < N_1 < ... < N_J = N-1. Segment j covers periods
// (N_{j-1}, N_j]; its certificate is the realized max variability (largest
// pairwise distance inside the segment), which must sit below the
// length-dependent threshold.
struct Segmentation {
  std::vector<std::size_t> boundaries;   // N_0 .. N_J
  std::vector<double> certificates;      // per segment
  std::vector<double> thresholds;        // per segment, at the realized length

  std::size_t segments() const { return boundaries.size() - 1; }
  std::size_t length(std::size_t j) const {  // j in [1, J]
    return boundaries[j] - boundaries[j - 1];
  }
};

struct SegmentationConstants {
  double rho = 1.0;
  double sigma = 1.0;
  double M = 1.0;
  double r = 1.0;
  std::size_t d = 1;
  std::size_t B = 1;
};

// sqrt((2 M sigma / rho) max{sigma/(rho r), 1} d / (B len))
inline double segment_threshold_strongly_convex(const SegmentationConstants& c,
                                                std::size_t len) {
  const double lead = (2.0 * c.M * c.sigma / c.rho) *
                      std::max(c.sigma / (c.rho * c.r), 1.0);
  return std::sqrt(lead * static_cast<double>(c.d) /
                   (static_cast<double>(c.B) * static_cast<double>(len)));
}

// (sigma / 2) sqrt(d / (B len))
inline double segment_threshold_lipschitz(double sigma, std::size_t d, std::size_t B,
                                          std::size_t len) {
  return 0.5 * sigma *
         std::sqrt(static_cast<double>(d) /
                   (static_cast<double>(B) * static_cast<double>(len)));
}

namespace detail {

// Greedy maximal segmentation for a [0, N-1] boundary range under a pairwise
// distance oracle and a decreasing length threshold. Each segment is extended
// until its realized max variability would exceed the threshold at the longer
// length; the variability is non-decreasing and the threshold decreasing in
// the candidate length, so the admissible extents form a prefix.
inline Segmentation greedy_segment(
    std::size_t N, const std::function<double(std::size_t, std::size_t)>& dist,
    const std::function<double(std::size_t)>& threshold_at) {
  if (N < 2) throw ContractError("greedy_segment: need a path of length >= 2");
  Segmentation seg;
  seg.boundaries.push_back(0);
  std::size_t start = 1;  // first period of the open segment
  while (start <= N - 1) {
    double max_var = 0.0;
    std::size_t end = start;
    // try to extend the segment one period at a time
    while (end + 1 <= N - 1) {
      double cand_var = max_var;
      for (std::size_t i = start; i <= end; ++i)
        cand_var = std::max(cand_var, dist(i, end + 1));
      if (cand_var <= threshold_at(end + 1 - start + 1)) {
        max_var = cand_var;
        ++end;
      } else {
        break;
      }
    }
    seg.boundaries.push_back(end);
    seg.certificates.push_back(max_var);
    seg.thresholds.push_back(threshold_at(end - start + 1));
    start = end + 1;
  }
  return seg;
}

}  // namespace detail

// Segment a minimizer path theta*_1..theta*_N by realized max pairwise
// Euclidean variability against the strongly convex threshold. Only the first
// N-1 periods are segmented (N_J = N-1).
inline Segmentation segment_greedy_strongly_convex(std::span<const Vec> path,
                                                   const SegmentationConstants& c) {
  const std::size_t N = path.size();
  return detail::greedy_segment(
      N,
      [&](std::size_t i, std::size_t k) { return distance2(path[i - 1], path[k - 1]); },
      [&](std::size_t len) { return segment_threshold_strongly_convex(c, len); });
}

// Segment a sequence of population losses given their pairwise sup-norm
// distances (grid-estimated), against the Lipschitz threshold.
// dist[i][j] = ||F_{i+1} - F_{j+1}||_inf for 0-based i, j over N functions.
inline Segmentation segment_greedy_lipschitz(
    const std::vector<std::vector<double>>& dist, double sigma, std::size_t d,
    std::size_t B) {
  const std::size_t N = dist.size();
  for (const auto& row : dist)
    if (row.size() != N)
      throw ContractError("segment_greedy_lipschitz: distance matrix not square");
  return detail::greedy_segment(
      N, [&](std::size_t i, std::size_t k) { return dist[i - 1][k - 1]; },
      [&](std::size_t len) { return segment_threshold_lipschitz(sigma, d, B, len); });
}

inline std::vector<std::vector<double>> supnorm_distances(
    std::span<const GridFunction> fns) {
  const std::size_t N = fns.size();
  std::vector<std::vector<double>> dist(N, std::vector<double>(N, 0.0));
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j) {
      require_shared_grid(fns[i], fns[j]);
      double m = 0.0;
      for (std::size_t t = 0; t < fns[i].size(); ++t)
        m = std::max(m, std::abs(fns[i].value(t) - fns[j].value(t)));
      dist[i][j] = dist[j][i] = m;
    }
  return dist;
}

// Upper bound on the number of segments achievable under total variation V:
//   strongly convex: 1 + (rho / (M sigma max{sigma/(rho r), 1}))^{1/3} (BN/d)^{1/3} V^{2/3}
//   lipschitz:       1 + (2 / sigma^{2/3}) (BN/d)^{1/3} V^{2/3}
inline double tv_to_j_bound(Regime regime, double V, std::size_t N,
                            const SegmentationConstants& c) {
  if (V < 0.0) throw ContractError("tv_to_j_bound: V must be >= 0");
  const double BN_d = static_cast<double>(c.B) * static_cast<double>(N) /
                      static_cast<double>(c.d);
  if (regime == Regime::strongly_convex) {
    const double lead = c.rho / (c.M * c.sigma * std::max(c.sigma / (c.rho * c.r), 1.0));
    return 1.0 + std::cbrt(lead) * std::cbrt(BN_d) * std::pow(V, 2.0 / 3.0);
  }
  return 1.0 + (2.0 / std::pow(c.sigma, 2.0 / 3.0)) * std::cbrt(BN_d) *
                   std::pow(V, 2.0 / 3.0);
}

// Companion bound for the Lipschitz regime:
// sum_j sqrt(N_j - N_{j-1}) <= sqrt(N) + (sqrt(2)/sigma^{1/3}) (B/d)^{1/6} N^{2/3} V^{1/3}.
inline double tv_sqrt_length_bound(double V, std::size_t N, double sigma,
                                   std::size_t d, std::size_t B) {
  if (V < 0.0) throw ContractError("tv_sqrt_length_bound: V must be >= 0");
  const double B_d = static_cast<double>(B) / static_cast<double>(d);
  return std::sqrt(static_cast<double>(N)) +
         std::sqrt(2.0) / std::cbrt(sigma) * std::pow(B_d, 1.0 / 6.0) *
             std::pow(static_cast<double>(N), 2.0 / 3.0) * std::cbrt(V);
}

// Reference regret curves in terms of total variation (constants set to 1):
//   strongly convex: 1 + min{d/B, N} + N^{1/3} (V d / B)^{2/3} + V
//   lipschitz:       1 + sqrt(N d / B) + N^{2/3} (V d / B)^{1/3} + V
inline double tv_regret_reference(Regime regime, double V, std::size_t N,
                                  std::size_t d, std::size_t B) {
  if (V < 0.0) throw ContractError("tv_regret_reference: V must be >= 0");
  const double dB = static_cast<double>(d) / static_cast<double>(B);
  const double NN = static_cast<double>(N);
  if (regime == Regime::strongly_convex)
    return 1.0 + std::min(dB, NN) + std::cbrt(NN) * std::pow(V * dB, 2.0 / 3.0) + V;
  return 1.0 + std::sqrt(NN * dB) + std::pow(NN, 2.0 / 3.0) * std::cbrt(V * dB) + V;
}

// The general regret bound evaluated on concrete inputs:
//   initial_excess + 3 e^{3 eps} C^2 sum_j T(N_j - N_{j-1}) + e^eps sum_j delta_j
// with T(n) = sum_{i<=n} min{tau(i), U}.
struct BoundCertificate {
  double U = 0.0;
  std::vector<double> segment_T;
  double total = 0.0;
};

inline BoundCertificate regret_bound_certificate(
    double initial_excess, std::span<const std::size_t> segment_lengths,
    std::span<const double> deltas,
    const std::function<double(std::size_t)>& tau_at_horizon, double U, double eps,
    double C) {
  if (segment_lengths.size() != deltas.size())
    throw ContractError("regret_bound_certificate: lengths/deltas size mismatch");
  if (initial_excess < 0.0 || U < 0.0 || eps < 0.0 || C < 1.0)
    throw ContractError("regret_bound_certificate: invalid inputs");
  BoundCertificate cert;
  cert.U = U;
  double sum_T = 0.0, sum_delta = 0.0;
  for (std::size_t j = 0; j < segment_lengths.size(); ++j) {
    double T = 0.0;
    for (std::size_t i = 1; i <= segment_lengths[j]; ++i)
      T += std::min(tau_at_horizon(i), U);
    cert.segment_T.push_back(T);
    sum_T += T;
    if (deltas[j] < 0.0)
      throw ContractError("regret_bound_certificate: negative delta");
    sum_delta += deltas[j];
  }
  cert.total = initial_excess + 3.0 * std::exp(3.0 * eps) * C * C * sum_T +
               std::exp(eps) * sum_delta;
  return cert;
}

}  // namespace saws
