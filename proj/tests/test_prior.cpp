#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "rotamix/prior.hpp"
#include "rotamix/stats.hpp"

using namespace rotamix;
using Catch::Approx;

TEST_CASE("moving-average and seasonal lag sets") {
  const LagStructure ma = LagStructure::build(5, 1, 0, 1);
  CHECK(ma.lags(0) == std::vector<int>{0});
  CHECK(ma.lags(2) == std::vector<int>{1, 2});
  CHECK(ma.inverse(2) == std::vector<int>{2, 3});
  CHECK(ma.inverse(4) == std::vector<int>{4});
  CHECK(ma.contains(3, 2));
  CHECK_FALSE(ma.contains(3, 1));

  const LagStructure seasonal = LagStructure::build(8, 0, 2, 3);
  CHECK(seasonal.lags(7) == std::vector<int>{1, 4, 7});
  CHECK(seasonal.lags(4) == std::vector<int>{1, 4});
  CHECK(seasonal.inverse(1) == std::vector<int>{1, 4, 7});

  const LagStructure both = LagStructure::build(8, 1, 1, 4);
  CHECK(both.lags(5) == std::vector<int>{1, 4, 5});
  CHECK(both.lags(4) == std::vector<int>{0, 3, 4});

  const LagStructure none = LagStructure::build(4, 0, 0, 1);
  for (int t = 0; t < 4; ++t) CHECK(none.lags(t) == std::vector<int>{t});

  CHECK_THROWS(LagStructure::from_sets({{0}, {0}}));
  CHECK_THROWS(LagStructure::from_sets({{0}, {1, 2}}));
  CHECK_THROWS(LagStructure::build(0, 1, 0, 1));
  CHECK(both.truncated(5).lags(4) == both.lags(4));
}

TEST_CASE("prior configuration and the masked base measure") {
  PriorConfig cfg = PriorConfig::standard(2, 5, 10);
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.base_measure() == std::vector<double>{0.25, 0.25, 0.25, 0.25});
  cfg.a0 = 2.0;
  cfg.mask = {true, false, true, false};
  const auto base = cfg.base_measure();
  CHECK(base[0] == Approx(1.0));
  CHECK(base[1] == 0.0);
  CHECK(base[2] == Approx(1.0));
  CHECK(cfg.active_components() == std::vector<int>{0, 2});
  cfg.mask = {false, false, false, false};
  CHECK_THROWS(cfg.validate());
  PriorConfig bad = PriorConfig::standard(2, 3, 1);
  bad.p = {0.5, 0.5, 0.5, 0.5};
  CHECK_THROWS(bad.validate());
  bad = PriorConfig::standard(2, 3, 1);
  bad.a[1] = -1;
  CHECK_THROWS(bad.validate());
  CHECK(PriorConfig::standard(3, 4, 2).truncated(2).horizon() == 2);
}

TEST_CASE("closed-form correlation of the weights") {
  PriorConfig cfg = PriorConfig::standard(2, 5, 10);
  const LagStructure lags = LagStructure::build(5, 1, 0, 1);
  CHECK(theoretical_correlation(2, 3, cfg, lags) == Approx(410.0 / 441.0).epsilon(1e-14));
  CHECK(theoretical_correlation(3, 2, cfg, lags) == Approx(410.0 / 441.0).epsilon(1e-14));
  // disjoint lag sets still correlate through omega: A_t A_r / ((a0 + A_t)(a0 + A_r))
  CHECK(theoretical_correlation(0, 4, cfg, lags) == Approx(10.0 * 20.0 / (11.0 * 21.0)).epsilon(1e-14));
  cfg.a.assign(5, 0);
  CHECK(theoretical_correlation(1, 2, cfg, lags) == 0.0);
  CHECK_THROWS_AS(theoretical_correlation(1, 1, cfg, lags), std::domain_error);
}

TEST_CASE("forward simulation keeps the Dirichlet marginal and the lagged correlation") {
  PriorConfig cfg = PriorConfig::standard(2, 4, 6);
  cfg.p = {0.1, 0.2, 0.3, 0.4};
  cfg.a0 = 2.0;
  const LagStructure lags = LagStructure::build(4, 1, 0, 1);
  Rng rng(3);
  const int reps = 20000;
  std::vector<double> x(reps), y(reps);
  for (int r = 0; r < reps; ++r) {
    const LatentState s = sample_prior_path(cfg, lags, rng);
    for (int t = 0; t < 4; ++t) {
      const auto eta = s.eta_at(t);
      REQUIRE(std::accumulate(eta.begin(), eta.end(), 0) == 6);
      const auto pi = s.pi_at(t);
      REQUIRE(std::accumulate(pi.begin(), pi.end(), 0.0) == Approx(1.0).margin(1e-12));
    }
    x[static_cast<std::size_t>(r)] = s.pi_at(1)[3];
    y[static_cast<std::size_t>(r)] = s.pi_at(2)[3];
  }
  const double p = 0.4;
  const double var = p * (1 - p) / (cfg.a0 + 1);
  CHECK(mean(x) == Approx(p).margin(4 * std::sqrt(var / reps)));
  CHECK(sample_variance(x) == Approx(var).epsilon(0.05));
  const double mx = mean(x), my = mean(y);
  double cov = 0.0;
  for (int r = 0; r < reps; ++r) cov += (x[static_cast<std::size_t>(r)] - mx) * (y[static_cast<std::size_t>(r)] - my);
  cov /= reps - 1;
  const double corr = cov / std::sqrt(sample_variance(x) * sample_variance(y));
  CHECK(corr == Approx(theoretical_correlation(1, 2, cfg, lags)).margin(0.02));
}

TEST_CASE("masked rotations carry no weight in forward simulation") {
  PriorConfig cfg = PriorConfig::standard(2, 3, 5);
  cfg.mask = {false, true, true, false};
  Rng rng(8);
  const LatentState s = sample_prior_path(cfg, LagStructure::build(3, 1, 0, 1), rng);
  for (int t = 0; t < 3; ++t) {
    CHECK(s.pi_at(t)[0] == 0.0);
    CHECK(s.pi_at(t)[3] == 0.0);
    CHECK(s.eta_at(t)[0] == 0);
    CHECK(s.eta_at(t)[1] + s.eta_at(t)[2] == 5);
  }
}
