#include <catch2/catch_amalgamated.hpp>

#include "saws/closeness.hpp"
#include "saws/rng.hpp"

using namespace saws;

namespace {

std::shared_ptr<const GridDomain> tiny_grid(std::size_t n) {
  return GridDomain::interval(-1.0, 1.0, n);
}

GridFunction random_fn(const std::shared_ptr<const GridDomain>& g, Rng& rng,
                       double scale = 1.0) {
  std::vector<double> vals(g->size());
  for (double& v : vals) v = scale * rng.normal();
  return GridFunction(g, std::move(vals));
}

}  // namespace

TEST_CASE("min_delta basics") {
  auto grid = tiny_grid(101);
  Rng rng(RngKey{101, rng_tag::test, 0, 0});

  SECTION("reflexivity") {
    const GridFunction f = random_fn(grid, rng);
    REQUIRE(min_delta(f, f, 0.0) == 0.0);
    REQUIRE(min_delta(f, f, 0.7) == 0.0);
  }

  SECTION("symmetry is exact") {
    for (int t = 0; t < 50; ++t) {
      const GridFunction f = random_fn(grid, rng), g = random_fn(grid, rng);
      const double eps = rng.uniform(0.0, 1.0);
      REQUIRE(min_delta(f, g, eps) == min_delta(g, f, eps));
    }
  }

  SECTION("two kinked absolute values, fine grid") {
    auto fine = GridDomain::interval(-1.0, 1.0, 4001);
    const GridFunction f =
        GridFunction::sample(fine, [](const Vec& p) { return std::abs(p[0] - 0.3); });
    const GridFunction g = GridFunction::sample(
        fine, [](const Vec& p) { return 2.0 * std::abs(p[0] - 0.1); });
    const double dstar = min_delta(f, g, std::log(2.0));
    const double grid_tol = 3.0 * (2.0 / 4000.0);
    REQUIRE(dstar <= 0.2 + grid_tol);
    REQUIRE(dstar == Catch::Approx(0.2).margin(grid_tol));
  }

  SECTION("constant shifts cancel") {
    for (int t = 0; t < 50; ++t) {
      const GridFunction f = random_fn(grid, rng), g = random_fn(grid, rng);
      const double eps = rng.uniform(0.0, 1.5);
      const double base = min_delta(f, g, eps);
      REQUIRE(min_delta(f.shifted(7.0), g.shifted(-3.2), eps) ==
              Catch::Approx(base).margin(1e-12));
    }
  }

  SECTION("grid mismatch is a contract violation") {
    const GridFunction f = random_fn(grid, rng);
    const GridFunction g = random_fn(tiny_grid(55), rng);
    REQUIRE_THROWS_AS(min_delta(f, g, 0.0), ContractError);
  }
}

TEST_CASE("is_close properties") {
  auto grid = tiny_grid(81);
  Rng rng(RngKey{102, rng_tag::test, 0, 0});

  SECTION("reflexivity at (0,0)") {
    const GridFunction f = random_fn(grid, rng);
    REQUIRE(is_close(f, f, 0.0, 0.0));
  }

  SECTION("monotone in both parameters") {
    for (int t = 0; t < 100; ++t) {
      const GridFunction f = random_fn(grid, rng), g = random_fn(grid, rng);
      const double eps = rng.uniform(0.0, 1.0);
      const double delta = min_delta(f, g, eps);
      REQUIRE(is_close(f, g, eps, delta));
      REQUIRE(is_close(f, g, eps + rng.uniform(0.0, 1.0), delta + rng.uniform(0.0, 1.0)));
    }
  }

  SECTION("bounded ranges give a free certificate") {
    for (int t = 0; t < 100; ++t) {
      const GridFunction f = random_fn(grid, rng, rng.uniform(0.1, 3.0));
      const GridFunction g = random_fn(grid, rng, rng.uniform(0.1, 3.0));
      REQUIRE(is_close(f, g, 0.0, std::max(f.range(), g.range())));
    }
  }

  SECTION("transitivity composes additively") {
    for (int t = 0; t < 100; ++t) {
      const GridFunction f = random_fn(grid, rng), g = random_fn(grid, rng),
                         h = random_fn(grid, rng);
      const double e1 = rng.uniform(0.0, 0.8), e2 = rng.uniform(0.0, 0.8);
      const double d1 = min_delta(f, g, e1), d2 = min_delta(g, h, e2);
      REQUIRE(is_close(f, h, e1 + e2, d1 + d2 + 1e-12));
    }
  }

  SECTION("averaging against a common anchor") {
    for (int t = 0; t < 50; ++t) {
      const std::size_t m = 2 + static_cast<std::size_t>(rng.integer(4));
      const GridFunction g = random_fn(grid, rng);
      std::vector<GridFunction> fs;
      double delta = 0.0;
      const double eps = rng.uniform(0.0, 1.0);
      for (std::size_t j = 0; j < m; ++j) {
        fs.push_back(random_fn(grid, rng));
        delta = std::max(delta, min_delta(fs.back(), g, eps));
      }
      Vec w(m);
      double wsum = 0.0;
      for (double& v : w) {
        v = rng.uniform(0.01, 1.0);
        wsum += v;
      }
      std::vector<double> mix(grid->size(), 0.0);
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < mix.size(); ++i)
          mix[i] += (w[j] / wsum) * fs[j].value(i);
      const GridFunction avg(grid, std::move(mix));
      REQUIRE(is_close(avg, g, eps, (std::exp(eps) + 1.0) * delta + 1e-12));
    }
  }
}

TEST_CASE("sub-level sandwich") {
  SECTION("identity at zero parameters") {
    auto grid = tiny_grid(61);
    Rng rng(RngKey{103, rng_tag::test, 0, 0});
    const GridFunction f = random_fn(grid, rng);
    const auto ts = exhaustive_t_grid(f, f, 0.0, 0.0);
    REQUIRE(sublevel_inclusion_holds(f, f, 0.0, 0.0, ts));
  }

  SECTION("half-step displacement, hand-enumerated levels") {
    auto grid = GridDomain::interval(-1.0, 1.0, 401);
    const GridFunction f =
        GridFunction::sample(grid, [](const Vec& p) { return p[0] * p[0]; });
    const GridFunction g = GridFunction::sample(grid, [](const Vec& p) {
      return p[0] * p[0] + (p[0] > 0.0 ? 0.5 : 0.0);
    });
    const auto ts9 = exhaustive_t_grid(f, g, 0.0, 0.9);
    REQUIRE(sublevel_inclusion_holds(f, g, 0.0, 0.9, ts9));
    const auto ts4 = exhaustive_t_grid(f, g, 0.0, 0.4);
    REQUIRE_FALSE(sublevel_inclusion_holds(f, g, 0.0, 0.4, ts4));
  }

  SECTION("agrees with is_close at eps = 0 on exhaustive level grids") {
    auto grid = tiny_grid(41);
    Rng rng(RngKey{104, rng_tag::test, 0, 0});
    for (int t = 0; t < 100; ++t) {
      const GridFunction f = random_fn(grid, rng), g = random_fn(grid, rng);
      double u = rng.uniform(0.0, 2.0);
      if (std::abs(u - 1.0) < 1e-3) u = 1.01;  // stay clear of boundary ties
      const double delta = u * min_delta(f, g, 0.0);
      const auto ts = exhaustive_t_grid(f, g, 0.0, delta);
      REQUIRE(sublevel_inclusion_holds(f, g, 0.0, delta, ts) ==
              is_close(f, g, 0.0, delta));
    }
  }

  SECTION("sandwich implies closeness for positive eps") {
    auto grid = tiny_grid(41);
    Rng rng(RngKey{105, rng_tag::test, 0, 0});
    for (int t = 0; t < 200; ++t) {
      const GridFunction f = random_fn(grid, rng), g = random_fn(grid, rng);
      const double eps = rng.uniform(0.0, 1.0);
      const double delta = rng.uniform(0.0, 2.0) * min_delta(f, g, eps);
      const auto ts = exhaustive_t_grid(f, g, eps, delta);
      if (sublevel_inclusion_holds(f, g, eps, delta, ts))
        REQUIRE(is_close(f, g, eps, delta));
    }
  }
}

TEST_CASE("closeness certificates from sufficient conditions") {
  SECTION("vanishing sup distance") {
    const ClosenessParams p = closeness_sup_norm(0.0);
    REQUIRE(p.eps == 0.0);
    REQUIRE(p.delta == 0.0);
  }

  SECTION("gradient sup bound") {
    const ClosenessParams p = closeness_gradient_sup(2.0, 0.3);
    REQUIRE(p.eps == 0.0);
    REQUIRE(p.delta == Catch::Approx(1.2));
  }

  SECTION("minimizer distance formula") {
    const ClosenessParams p = closeness_minimizers(1.0, 1.0, 0.4);
    REQUIRE(p.eps == Catch::Approx(std::log(2.0)));
    REQUIRE(p.delta == Catch::Approx(0.08));
  }

  SECTION("invalid curvature is rejected") {
    REQUIRE_THROWS_AS(closeness_minimizers(0.0, 1.0, 0.1), ContractError);
    REQUIRE_THROWS_AS(closeness_minimizers(2.0, 1.0, 0.1), ContractError);
    REQUIRE_THROWS_AS(closeness_strongly_convex_gradient(-1.0, 1.0, 1.0, 1.0, 0.1),
                      ContractError);
  }

  SECTION("strongly convex gradient branch selection") {
    const ClosenessParams small = closeness_strongly_convex_gradient(1.0, 2.0, 1.0, 4.0, 0.5);
    REQUIRE(small.delta == Catch::Approx(3.0 * 2.0 * 0.25));  // 3 L D1^2 / rho^2
    const ClosenessParams big = closeness_strongly_convex_gradient(1.0, 2.0, 1.0, 4.0, 3.0);
    REQUIRE(big.delta == Catch::Approx(3.0 * 2.0 * 4.0 * 1.0 * 3.0));  // linear branch
  }

  SECTION("minimizer certificate verifies on quadratic grids") {
    Rng rng(RngKey{106, rng_tag::test, 0, 0});
    auto grid = GridDomain::interval(-2.0, 2.0, 801);
    for (int t = 0; t < 100; ++t) {
      const double rho = rng.uniform(0.3, 2.0);
      const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
      const GridFunction f = GridFunction::sample(
          grid, [&](const Vec& p) { return 0.5 * rho * (p[0] - a) * (p[0] - a); });
      const GridFunction g = GridFunction::sample(
          grid, [&](const Vec& p) { return 0.5 * rho * (p[0] - b) * (p[0] - b); });
      const ClosenessParams cert = closeness_minimizers(rho, rho, std::abs(a - b));
      // grid minima overestimate the true infima, so the grid delta* can
      // exceed the continuum certificate by O(rho h^2)
      const double h = 4.0 / 800.0;
      REQUIRE(min_delta(f, g, cert.eps) <= cert.delta + rho * h * h);
    }
  }

  SECTION("kind dispatch") {
    SufficientInputs in;
    in.D0 = 1.5;
    REQUIRE(closeness_from_sufficient(SufficientKind::sup_norm, in).delta ==
            Catch::Approx(3.0));
  }
}

TEST_CASE("quasi-stationarity delta") {
  auto grid = tiny_grid(61);
  Rng rng(RngKey{107, rng_tag::test, 0, 0});

  SECTION("constant sequence") {
    const GridFunction f = random_fn(grid, rng);
    const std::vector<GridFunction> seq{f, f, f};
    REQUIRE(quasi_stationarity_delta(seq, 0.3) == 0.0);
  }

  SECTION("a pair reduces to min_delta") {
    const GridFunction f = random_fn(grid, rng), g = random_fn(grid, rng);
    const std::vector<GridFunction> seq{f, g};
    REQUIRE(quasi_stationarity_delta(seq, 0.2) ==
            Catch::Approx(min_delta(f, g, 0.2)).margin(0.0));
  }

  SECTION("invariant under reordering") {
    std::vector<GridFunction> seq;
    for (int i = 0; i < 5; ++i) seq.push_back(random_fn(grid, rng));
    const double base = quasi_stationarity_delta(seq, 0.4);
    std::reverse(seq.begin(), seq.end());
    REQUIRE(quasi_stationarity_delta(seq, 0.4) == base);
  }
}

TEST_CASE("k_bar computation") {
  auto grid = tiny_grid(201);

  SECTION("identical sequence with zero tolerance") {
    const GridFunction f =
        GridFunction::sample(grid, [](const Vec& p) { return p[0] * p[0]; });
    const std::vector<GridFunction> past(7, f);
    REQUIRE(compute_kbar(past, 0.0, [](std::size_t) { return 0.0; }) == 7);
  }

  SECTION("an abrupt far shift truncates k_bar") {
    // F_{n-3} far from the last two: min_delta jumps above psi at k = 3
    std::vector<GridFunction> past;
    past.push_back(GridFunction::sample(
        grid, [](const Vec& p) { return (p[0] - 0.9) * (p[0] - 0.9); }));
    past.push_back(
        GridFunction::sample(grid, [](const Vec& p) { return p[0] * p[0]; }));
    past.push_back(
        GridFunction::sample(grid, [](const Vec& p) { return p[0] * p[0]; }));
    REQUIRE(compute_kbar(past, 0.0, [](std::size_t) { return 0.1; }) == 2);
  }

  SECTION("error-profile form matches the direct form") {
    const GridFunction f =
        GridFunction::sample(grid, [](const Vec& p) { return p[0] * p[0]; });
    const std::vector<GridFunction> past(5, f);
    ErrorProfile profile;
    profile.eps = 0.0;
    profile.psi = [](std::size_t n, std::size_t k) {
      return static_cast<double>(n) / (10.0 * static_cast<double>(k));
    };
    REQUIRE(compute_kbar(past, profile, 20) ==
            compute_kbar(past, 0.0, [](std::size_t k) {
              return 2.0 / static_cast<double>(k);
            }));
  }

  SECTION("monotone in a pointwise psi scaling") {
    Rng rng(RngKey{108, rng_tag::test, 0, 0});
    std::vector<GridFunction> past;
    for (int i = 0; i < 6; ++i) past.push_back(random_fn(grid, rng, 0.5));
    const auto psi_small = [](std::size_t k) { return 0.2 / static_cast<double>(k); };
    const auto psi_large = [](std::size_t k) { return 2.0 / static_cast<double>(k); };
    REQUIRE(compute_kbar(past, 0.1, psi_small) <= compute_kbar(past, 0.1, psi_large));
  }
}
