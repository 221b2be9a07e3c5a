#include <catch2/catch_amalgamated.hpp>

#include "saws/envgen.hpp"
#include "saws/rng.hpp"
#include "saws/segmentation.hpp"

using namespace saws;

namespace {

std::vector<Vec> scalar_path(const std::vector<double>& xs) {
  std::vector<Vec> out;
  for (double x : xs) out.push_back({x});
  return out;
}

// re-checks greedy maximality and the per-segment certificates from scratch
void check_greedy_sc(const Segmentation& seg, std::span<const Vec> path,
                     const SegmentationConstants& c) {
  REQUIRE(seg.boundaries.front() == 0);
  REQUIRE(seg.boundaries.back() == path.size() - 1);
  for (std::size_t j = 1; j < seg.boundaries.size(); ++j) {
    const std::size_t lo = seg.boundaries[j - 1] + 1, hi = seg.boundaries[j];
    REQUIRE(lo <= hi);
    double var = 0.0;
    for (std::size_t a = lo; a <= hi; ++a)
      for (std::size_t b = a + 1; b <= hi; ++b)
        var = std::max(var, distance2(path[a - 1], path[b - 1]));
    REQUIRE(var <= segment_threshold_strongly_convex(c, hi - lo + 1) + 1e-12);
    REQUIRE(var == Catch::Approx(seg.certificates[j - 1]).margin(1e-12));
    if (j < seg.boundaries.size() - 1) {
      // extending by one period must violate the threshold
      double ext = 0.0;
      for (std::size_t a = lo; a <= hi + 1; ++a)
        for (std::size_t b = a + 1; b <= hi + 1; ++b)
          ext = std::max(ext, distance2(path[a - 1], path[b - 1]));
      REQUIRE(ext > segment_threshold_strongly_convex(c, hi + 1 - lo + 1));
    }
  }
}

}  // namespace

TEST_CASE("greedy segmentation, strongly convex") {
  const SegmentationConstants ones{};  // all constants 1

  SECTION("constant path stays in one piece") {
    const auto path = scalar_path(std::vector<double>(12, 0.4));
    const Segmentation seg = segment_greedy_strongly_convex(path, ones);
    REQUIRE(seg.segments() == 1);
    REQUIRE(seg.boundaries == std::vector<std::size_t>{0, 11});
  }

  SECTION("single large jump splits into two pieces") {
    const auto path = scalar_path({0.0, 0.0, 0.0, 5.0, 5.0, 5.0});
    const Segmentation seg = segment_greedy_strongly_convex(path, ones);
    REQUIRE(seg.segments() == 2);
    REQUIRE(seg.boundaries == std::vector<std::size_t>{0, 3, 5});
  }

  SECTION("greedy maximality and TV bound on fuzzed paths") {
    Rng rng(RngKey{201, rng_tag::test, 0, 0});
    for (int trial = 0; trial < 60; ++trial) {
      std::vector<double> xs;
      double level = 0.0;
      const std::size_t N = 20 + rng.integer(180);
      for (std::size_t n = 0; n < N; ++n) {
        if (rng.uniform() < 0.07) level += rng.uniform(-1.0, 1.0);
        xs.push_back(level + 0.02 * rng.normal());
      }
      const auto path = scalar_path(xs);
      const Segmentation seg = segment_greedy_strongly_convex(path, ones);
      check_greedy_sc(seg, path, ones);
      const double V = ParameterPath::realized_tv(path);
      REQUIRE(static_cast<double>(seg.segments()) <=
              tv_to_j_bound(Regime::strongly_convex, V, N, ones) + 1e-9);
    }
  }
}

TEST_CASE("greedy segmentation, lipschitz") {
  auto grid = GridDomain::interval(-1.0, 1.0, 101);

  SECTION("constant function sequence") {
    const GridFunction f =
        GridFunction::sample(grid, [](const Vec& p) { return p[0] * p[0]; });
    const std::vector<GridFunction> fns(9, f);
    const Segmentation seg = segment_greedy_lipschitz(supnorm_distances(fns), 1.0, 1, 1);
    REQUIRE(seg.segments() == 1);
  }

  SECTION("a ten-sigma jump in the middle splits once") {
    const double sigma = 0.7;
    std::vector<GridFunction> fns;
    for (int i = 0; i < 12; ++i) {
      const double level = i < 6 ? 0.0 : 10.0 * sigma;
      fns.push_back(GridFunction::sample(
          grid, [&](const Vec& p) { return p[0] * p[0] + level; }));
    }
    const Segmentation seg =
        segment_greedy_lipschitz(supnorm_distances(fns), sigma, 1, 1);
    REQUIRE(seg.segments() == 2);
    REQUIRE(seg.boundaries == std::vector<std::size_t>{0, 6, 11});
  }

  SECTION("certificates re-verified and TV bound respected on fuzzed sequences") {
    Rng rng(RngKey{202, rng_tag::test, 0, 0});
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<GridFunction> fns;
      double center = 0.0;
      const std::size_t N = 8 + rng.integer(25);
      for (std::size_t i = 0; i < N; ++i) {
        if (rng.uniform() < 0.2) center = rng.uniform(-0.5, 0.5);
        const double c = center;
        fns.push_back(GridFunction::sample(
            grid, [c](const Vec& p) { return (p[0] - c) * (p[0] - c); }));
      }
      const auto dist = supnorm_distances(fns);
      const double sigma = rng.uniform(0.5, 2.0);
      const Segmentation seg = segment_greedy_lipschitz(dist, sigma, 1, 1);
      for (std::size_t j = 1; j < seg.boundaries.size(); ++j) {
        const std::size_t lo = seg.boundaries[j - 1] + 1, hi = seg.boundaries[j];
        double var = 0.0;
        for (std::size_t a = lo; a <= hi; ++a)
          for (std::size_t b = a + 1; b <= hi; ++b) var = std::max(var, dist[a - 1][b - 1]);
        REQUIRE(var <= segment_threshold_lipschitz(sigma, 1, 1, hi - lo + 1) + 1e-12);
      }
      double V = 0.0;
      for (std::size_t i = 0; i + 1 < N; ++i) V += dist[i][i + 1];
      SegmentationConstants c;
      c.sigma = sigma;
      REQUIRE(static_cast<double>(seg.segments()) <=
              tv_to_j_bound(Regime::lipschitz, V, N, c) + 1e-9);
    }
  }
}

TEST_CASE("TV-to-J bound values") {
  SegmentationConstants ones{};
  SECTION("direct arithmetic") {
    REQUIRE(tv_to_j_bound(Regime::strongly_convex, 10.0, 1000, ones) ==
            Catch::Approx(1.0 + std::cbrt(1000.0) * std::pow(10.0, 2.0 / 3.0))
                .epsilon(1e-12));
    REQUIRE(tv_to_j_bound(Regime::strongly_convex, 10.0, 1000, ones) ==
            Catch::Approx(47.416).margin(5e-4));
  }
  SECTION("zero variation") {
    REQUIRE(tv_to_j_bound(Regime::strongly_convex, 0.0, 1000, ones) == 1.0);
    REQUIRE(tv_to_j_bound(Regime::lipschitz, 0.0, 1000, ones) == 1.0);
  }
  SECTION("sqrt-length companion bound is finite and monotone") {
    REQUIRE(tv_sqrt_length_bound(0.0, 100, 1.0, 1, 1) == Catch::Approx(10.0));
    REQUIRE(tv_sqrt_length_bound(2.0, 100, 1.0, 1, 1) >
            tv_sqrt_length_bound(1.0, 100, 1.0, 1, 1));
  }
}

TEST_CASE("regret bound certificate") {
  SECTION("degenerate inputs give zero") {
    const std::vector<std::size_t> lens{5};
    const std::vector<double> deltas{0.0};
    const BoundCertificate cert = regret_bound_certificate(
        0.0, lens, deltas, [](std::size_t) { return 0.0; }, 1.0, 0.0, 2.0);
    REQUIRE(cert.total == 0.0);
  }

  SECTION("partial sums of capped thresholds") {
    const std::vector<std::size_t> lens{3};
    const std::vector<double> deltas{0.0};
    const BoundCertificate cert = regret_bound_certificate(
        0.0, lens, deltas, [](std::size_t i) { return 1.0 / static_cast<double>(i); },
        0.5, 0.0, 1.0);
    // min{1,.5} + min{.5,.5} + min{1/3,.5} = 4/3
    REQUIRE(cert.segment_T[0] == Catch::Approx(4.0 / 3.0).epsilon(1e-12));
    REQUIRE(cert.total == Catch::Approx(3.0 * 4.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("TV regret reference curves") {
  SECTION("direct arithmetic") {
    REQUIRE(tv_regret_reference(Regime::strongly_convex, 0.0, 100, 1, 1) ==
            Catch::Approx(2.0));
    REQUIRE(tv_regret_reference(Regime::lipschitz, 0.0, 100, 1, 1) ==
            Catch::Approx(11.0));
  }
  SECTION("non-decreasing in V") {
    for (Regime r : {Regime::strongly_convex, Regime::lipschitz}) {
      double prev = tv_regret_reference(r, 0.0, 256, 2, 1);
      for (double V : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        const double cur = tv_regret_reference(r, V, 256, 2, 1);
        REQUIRE(cur >= prev);
        prev = cur;
      }
    }
  }
}
