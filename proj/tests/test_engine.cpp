#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "saws/engine.hpp"
#include "saws/problems.hpp"

using namespace saws;

namespace {

// lightweight function-backed window loss for the pairwise-test examples
class FnWindowLoss final : public WindowLoss {
 public:
  explicit FnWindowLoss(std::function<double(double)> f) : f_(std::move(f)) {}
  std::size_t window() const override { return 1; }
  std::size_t points() const override { return 1; }
  std::size_t dimension() const override { return 1; }
  double value(const Vec& theta) const override { return f_(theta[0]); }
  Vec subgradient(const Vec&) const override { return {0.0}; }

 private:
  std::function<double(double)> f_;
};

SampleBatch const_batch(std::size_t period, const Vec& z, std::size_t B = 1) {
  SampleBatch b;
  b.period = period;
  b.samples.assign(B, z);
  return b;
}

std::vector<SampleBatch> gaussian_stream(const std::vector<double>& means,
                                         double sigma0, std::size_t B,
                                         std::uint64_t seed) {
  std::vector<SampleBatch> out;
  for (std::size_t n = 1; n <= means.size(); ++n) {
    Rng rng(RngKey{seed, rng_tag::batches, 0, n});
    SampleBatch b;
    b.period = n;
    for (std::size_t i = 0; i < B; ++i) b.samples.push_back({means[n - 1] + sigma0 * rng.normal()});
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

TEST_CASE("threshold schedule formulas") {
  SECTION("strongly convex value") {
    const ThresholdSchedule s{Regime::strongly_convex, 1.0, 1.0, 2, 1};
    // direct arithmetic: (2/4) ln(1 + 2 + 1 + 10)
    REQUIRE(s.threshold(10, 4) == Catch::Approx(0.5 * std::log(14.0)).epsilon(1e-12));
    REQUIRE(s.threshold(10, 4) == Catch::Approx(1.31949).margin(5e-5));
  }
  SECTION("lipschitz value") {
    const ThresholdSchedule s{Regime::lipschitz, 1.0, 1.0, 1, 1};
    // direct arithmetic: sqrt(0.25 ln 12)
    REQUIRE(s.threshold(10, 4) ==
            Catch::Approx(std::sqrt(0.25 * std::log(12.0))).epsilon(1e-12));
    REQUIRE(s.threshold(10, 4) == Catch::Approx(0.78821).margin(5e-4));
  }
  SECTION("monotonicity") {
    const ThresholdSchedule s{Regime::strongly_convex, 0.7, 0.05, 3, 2};
    REQUIRE(s.threshold(50, 8) < s.threshold(50, 4));
    REQUIRE(s.threshold(60, 8) > s.threshold(50, 8));
    const ThresholdSchedule l{Regime::lipschitz, 0.7, 0.05, 3, 2};
    REQUIRE(l.threshold(50, 8) < l.threshold(50, 4));
    REQUIRE(l.threshold(60, 8) > l.threshold(50, 8));
  }
  SECTION("regularity ratio up to k = 2^20") {
    const std::size_t n = (std::size_t{1} << 21) + 7;
    const ThresholdSchedule sc{Regime::strongly_convex, 1.3, 0.05, 2, 3};
    const ThresholdSchedule lip{Regime::lipschitz, 1.3, 0.05, 2, 3};
    for (std::size_t k = 1; k <= (std::size_t{1} << 20); k *= 2) {
      REQUIRE(sc.threshold(n, k) / sc.threshold(n, 2 * k) <= 2.0 + 1e-12);
      REQUIRE(lip.threshold(n, k) / lip.threshold(n, 2 * k) <=
              std::sqrt(2.0) + 1e-12);
    }
  }
  SECTION("range checks") {
    const ThresholdSchedule s{Regime::strongly_convex, 1.0, 0.05, 1, 1};
    REQUIRE_THROWS_AS(s.threshold(5, 0), WindowError);
    REQUIRE_THROWS_AS(s.threshold(5, 5), WindowError);
  }
}

TEST_CASE("pairwise stability test") {
  SECTION("identical minimizers always pass") {
    FnWindowLoss f([](double t) { return t * t; });
    REQUIRE(pairwise_test(f, {0.3}, {0.3}, 0.0));
  }
  SECTION("quadratic gap against the level") {
    FnWindowLoss f([](double t) { return t * t; });
    // gap = 0.5^2 - 0 = 0.25
    REQUIRE_FALSE(pairwise_test(f, {0.0}, {0.5}, 0.2));
    REQUIRE(pairwise_test(f, {0.0}, {0.5}, 0.3));
  }
}

TEST_CASE("dyadic candidate windows") {
  REQUIRE(candidate_windows(0) == std::vector<std::size_t>{1});
  REQUIRE(candidate_windows(5) == std::vector<std::size_t>{1, 2, 4, 6});
  REQUIRE(candidate_windows(3) == std::vector<std::size_t>{1, 2, 4});
  for (std::size_t K = 0; K <= 300; ++K) {
    const auto ks = candidate_windows(K);
    REQUIRE(ks.front() == 1);
    REQUIRE(ks.back() == K + 1);
    for (std::size_t i = 1; i < ks.size(); ++i) {
      REQUIRE(ks[i] > ks[i - 1]);
      REQUIRE(ks[i] <= 2 * ks[i - 1]);
    }
  }
}

TEST_CASE("offline window selection") {
  auto model = std::make_shared<GaussianMeanModel>(1, 1.0, 4.0);
  const FeasibleSet omega = model->default_domain();
  const ThresholdSchedule schedule{Regime::strongly_convex, 0.1, 0.05, 1, 1};

  SECTION("single candidate is always selected") {
    auto batches = gaussian_stream({0.3}, 1.0, 1, 5);
    std::vector<const SampleBatch*> recent{&batches[0]};
    const WindowSelection sel =
        select_window_offline(*model, omega, recent, 2, {1}, schedule);
    REQUIRE(sel.selected_index == 0);
    REQUIRE(sel.selected_window == 1);
    REQUIRE(sel.decision[0] ==
            Catch::Approx(omega.project({batches[0].samples[0][0]})[0]).margin(1e-12));
  }

  SECTION("identical deterministic batches select the largest window") {
    std::vector<SampleBatch> batches;
    for (std::size_t p = 1; p <= 8; ++p) batches.push_back(const_batch(p, {0.4}));
    std::vector<const SampleBatch*> recent;
    for (const auto& b : batches) recent.push_back(&b);
    const WindowSelection sel =
        select_window_offline(*model, omega, recent, 9, {1, 2, 4, 8}, schedule);
    REQUIRE(sel.selected_window == 8);
    for (std::size_t s = 0; s < sel.tests.size(); ++s)
      for (bool pass : sel.tests[s]) REQUIRE(pass);
  }

  SECTION("empty candidate list is a contract violation") {
    auto batches = gaussian_stream({0.0, 0.0}, 1.0, 1, 6);
    std::vector<const SampleBatch*> recent{&batches[0], &batches[1]};
    REQUIRE_THROWS_AS(select_window_offline(*model, omega, recent, 3, {}, schedule),
                      ContractError);
  }

  SECTION("matches the from-definition oracle on the shifted stream") {
    // theta* = (0, 0, 0, 5): abrupt shift at the most recent period
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      auto batches = gaussian_stream({0.0, 0.0, 0.0, 5.0}, 1.0, 1, seed);
      std::vector<const SampleBatch*> recent;
      for (const auto& b : batches) recent.push_back(&b);
      const std::size_t n = 5;
      const std::vector<std::size_t> candidates{1, 2, 4};
      const WindowSelection sel =
          select_window_offline(*model, omega, recent, n, candidates, schedule);

      test_oracle::OracleInstance inst;
      inst.family = test_oracle::OracleFamily::gaussian;
      inst.d = 1;
      inst.ball_radius = 2.0;
      inst.batches = batches;
      inst.candidates = candidates;
      for (std::size_t k : candidates) inst.thresholds.push_back(schedule.threshold(n, k));
      const test_oracle::OracleSelection expect = test_oracle::select(inst);

      REQUIRE(sel.selected_index == expect.s_hat);
      REQUIRE(std::abs(sel.decision[0] - expect.decision[0]) <= 1e-10);
      REQUIRE(sel.tests[0][0]);  // the smallest candidate is always admissible
      for (bool pass : sel.tests[sel.selected_index]) REQUIRE(pass);
    }
  }
}

TEST_CASE("online loop") {
  auto model = std::make_shared<GaussianMeanModel>(1, 1.0, 4.0);
  const FeasibleSet omega = model->default_domain();
  const ThresholdSchedule schedule{Regime::strongly_convex, 1.0, 0.05, 1, 1};

  SECTION("horizon one returns only the initial decision") {
    auto stream = gaussian_stream({0.7}, 1.0, 1, 9);
    const auto run = run_online(model, omega, stream, schedule);
    REQUIRE(run.size() == 1);
    REQUIRE(run[0].window == 0);
    REQUIRE(run[0].decision == omega.project(zeros(1)));
  }

  SECTION("identical batches grow the window maximally") {
    std::vector<SampleBatch> stream;
    for (std::size_t p = 1; p <= 30; ++p) stream.push_back(const_batch(p, {0.25}));
    const auto run = run_online(model, omega, stream, schedule);
    for (std::size_t n = 1; n <= run.size(); ++n)
      REQUIRE(run[n - 1].window == n - 1);
  }

  SECTION("memory law on noisy streams") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      std::vector<double> means;
      Rng rng(RngKey{seed, rng_tag::test, 0, 7});
      double level = 0.0;
      for (int n = 0; n < 60; ++n) {
        if (rng.uniform() < 0.1) level = rng.uniform(-1.0, 1.0);
        means.push_back(level);
      }
      auto stream = gaussian_stream(means, 1.0, 1, seed + 1000);
      const auto run = run_online(model, omega, stream, schedule);
      std::size_t prevK = 0;
      for (std::size_t n = 1; n <= run.size(); ++n) {
        const std::size_t K = run[n - 1].window;
        if (n == 1) {
          REQUIRE(K == 0);
        } else {
          REQUIRE(K >= 1);
          REQUIRE(K <= prevK + 1);  // left endpoints non-decreasing
        }
        prevK = K;
      }
    }
  }

  SECTION("noiseless segments keep the window at least half the segment age") {
    std::vector<SampleBatch> stream;
    const std::size_t N1 = 17;  // jump after period 17
    for (std::size_t p = 1; p <= 40; ++p)
      stream.push_back(const_batch(p, {p <= N1 ? 0.2 : 1.8}));
    const auto run = run_online(model, omega, stream, schedule);
    for (std::size_t n = 2; n <= run.size(); ++n) {
      // the decision at period n has observed f_1..f_{n-1}, so the bandwidth
      // bound reads K_n >= (n - N_{j-1}) / 2 in this indexing
      const std::size_t seg_start = n <= N1 ? 0 : N1;
      REQUIRE(2 * run[n - 1].window >= n - seg_start);
    }
  }

  SECTION("independent-mode candidate solves match in parallel") {
    auto stream = gaussian_stream(std::vector<double>(25, 0.1), 1.0, 2, 31);
    EngineOptions seq;
    seq.warm_start = false;
    EngineOptions par;
    par.warm_start = false;
    par.parallel_candidates = true;
    const auto a = run_online(model, omega, stream, schedule, seq);
    const auto b = run_online(model, omega, stream, schedule, par);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      REQUIRE(a[i].window == b[i].window);
      REQUIRE(a[i].decision == b[i].decision);
    }
  }
}

TEST_CASE("rolling cross-validation") {
  auto model = std::make_shared<GaussianMeanModel>(1, 1.0, 4.0);
  const FeasibleSet omega = model->default_domain();
  auto stream = gaussian_stream(std::vector<double>(40, 0.5), 1.0, 1, 77);

  SECTION("singleton grid") {
    const std::vector<ThresholdSchedule> one{{Regime::strongly_convex, 1.0, 0.05, 1, 1}};
    REQUIRE(select_hyperparameter_cv(model, omega, stream, one) == 0);
  }

  SECTION("exact ties resolve to the first candidate") {
    const std::vector<ThresholdSchedule> two{{Regime::strongly_convex, 1.0, 0.05, 1, 1},
                                             {Regime::strongly_convex, 1.0, 0.05, 1, 1}};
    REQUIRE(select_hyperparameter_cv(model, omega, stream, two) == 0);
  }

  SECTION("chosen index minimizes an independently recomputed objective") {
    const std::vector<ThresholdSchedule> grid{
        {Regime::strongly_convex, 0.01, 0.05, 1, 1},
        {Regime::strongly_convex, 100.0, 0.05, 1, 1}};
    const std::size_t h = select_hyperparameter_cv(model, omega, stream, grid);

    // independent pass: rerun each schedule and accumulate own-batch losses
    std::vector<double> scores;
    for (const ThresholdSchedule& s : grid) {
      const auto run = run_online(model, omega, stream, s);
      double score = 0.0;
      for (std::size_t n = 1; n <= stream.size(); ++n) {
        double batch_loss = 0.0;
        for (const Vec& z : stream[n - 1].samples) {
          const double diff = run[n - 1].decision[0] - z[0];
          batch_loss += 0.5 * diff * diff;
        }
        score += batch_loss / static_cast<double>(stream[n - 1].samples.size());
      }
      scores.push_back(score);
    }
    const std::size_t expect = scores[0] <= scores[1] ? 0 : 1;
    REQUIRE(h == expect);
  }
}
