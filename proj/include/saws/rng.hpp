// Keyed random number generation. Every stream is addressed by a
// (seed, tag, replication, period) key so that batch generation is a pure
// function of the key: identical across runs, call orders and thread
// schedules.
#pragma once

#include <cstdint>
#include <random>

namespace saws {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

struct RngKey {
  std::uint64_t seed = 0;
  std::uint64_t tag = 0;   // stream purpose (batches, eval sample, path, ...)
  std::uint64_t rep = 0;   // replication index
  std::uint64_t period = 0;

  std::uint64_t mix() const {
    std::uint64_t s = seed;
    std::uint64_t h = detail::splitmix64(s);
    s ^= tag * 0xD1B54A32D192ED03ULL;
    h ^= detail::splitmix64(s);
    s ^= rep * 0x8CB92BA72F3D8DD7ULL;
    h ^= detail::splitmix64(s);
    s ^= period * 0xA24BAED4963EE407ULL;
    h ^= detail::splitmix64(s);
    return h;
  }
};

// Stream tags used across the artifact.
namespace rng_tag {
inline constexpr std::uint64_t batches = 1;
inline constexpr std::uint64_t eval_sample = 2;
inline constexpr std::uint64_t path = 3;
inline constexpr std::uint64_t test = 9;
}  // namespace rng_tag

class Rng {
 public:
  explicit Rng(RngKey key) : gen_(key.mix()) {}
  explicit Rng(std::uint64_t seed) : gen_(RngKey{seed}.mix()) {}

  double uniform() { return uni_(gen_); }                       // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(gen_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double laplace(double scale) {
    // inverse CDF
    const double u = uniform() - 0.5;
    return -scale * std::copysign(std::log(1.0 - 2.0 * std::abs(u)), u);
  }
  std::uint64_t integer(std::uint64_t n) {  // uniform in {0, ..., n-1}
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(gen_);
  }
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::uniform_real_distribution<double> uni_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace saws
