// Shared numeric primitives and error types.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace saws {

using Vec = std::vector<double>;

// Violated precondition or broken internal contract (dimension/grid mismatch,
// out-of-range window, ...). Programming errors, not user input problems.
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Look-back window outside the admissible range.
class WindowError : public ContractError {
 public:
  explicit WindowError(const std::string& what) : ContractError(what) {}
};

// Invalid user-supplied configuration (bad parameter range, missing seed,
// unknown key). Recoverable by fixing the input.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline bool all_finite(const Vec& x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ContractError("dot: dimension mismatch");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const Vec& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline double norm1(const Vec& a) {
  double s = 0.0;
  for (double v : a) s += std::abs(v);
  return s;
}

inline double distance2(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ContractError("distance2: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double distance1(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ContractError("distance1: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

// y += c * x
inline void add_scaled(Vec& y, double c, const Vec& x) {
  if (y.size() != x.size()) throw ContractError("add_scaled: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

inline Vec scaled(const Vec& x, double c) {
  Vec y(x);
  for (double& v : y) v *= c;
  return y;
}

inline Vec zeros(std::size_t d) { return Vec(d, 0.0); }

inline std::size_t ceil_log2(std::size_t v) {
  // smallest m with 2^m >= v; v >= 1
  std::size_t m = 0;
  std::size_t p = 1;
  while (p < v) {
    p <<= 1;
    ++m;
  }
  return m;
}

}  // namespace saws
