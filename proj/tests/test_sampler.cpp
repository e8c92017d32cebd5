#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "rotamix/mixture.hpp"
#include "rotamix/sampler.hpp"
#include "rotamix/stats.hpp"

using namespace rotamix;
using Catch::Approx;

namespace {

PanelData empty_panel(int m, int horizon) { return {m, std::vector<PointSet>(static_cast<std::size_t>(horizon), PointSet(m))}; }

PanelData single_rotation_panel(unsigned code, double theta, std::size_t n, int horizon, std::uint64_t seed) {
  Rng rng(seed);
  PanelData out{2, {}};
  for (int t = 0; t < horizon; ++t) out.slices.push_back(sample_rotated(RotationIndex(2, code), ClaytonTheta(theta), n, rng));
  return out;
}

McmcConfig short_run(int iterations, int burn_in, std::uint64_t seed = 1) {
  McmcConfig c;
  c.iterations = iterations;
  c.burn_in = burn_in;
  c.seed = seed;
  return c;
}

// All ways to place `total` items in `parts` ordered cells.
std::vector<std::vector<int>> compositions(int total, int parts) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(parts), 0);
  auto rec = [&](auto&& self, int idx, int left) -> void {
    if (idx == parts - 1) {
      cur[static_cast<std::size_t>(idx)] = left;
      out.push_back(cur);
      return;
    }
    for (int x = 0; x <= left; ++x) {
      cur[static_cast<std::size_t>(idx)] = x;
      self(self, idx + 1, left - x);
    }
  };
  rec(rec, 0, total);
  return out;
}

double log_dirichlet(const std::vector<double>& alpha, std::span<const double> x) {
  double lp = 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    lp += (alpha[j] - 1.0) * std::log(x[j]) - std::lgamma(alpha[j]);
    sum += alpha[j];
  }
  return lp + std::lgamma(sum);
}

double log_multinomial(const std::vector<int>& eta, std::span<const double> omega) {
  int n = 0;
  double lp = 0.0;
  for (std::size_t j = 0; j < eta.size(); ++j) {
    n += eta[j];
    lp += eta[j] * std::log(omega[j]) - std::lgamma(eta[j] + 1.0);
  }
  return lp + std::lgamma(n + 1.0);
}

// log p(eta_1..eta_T | omega, pi) up to a constant, from the full joint density of the prior.
double joint_eta_log_density(const std::vector<std::vector<int>>& etas, const LatentState& s, const PriorConfig& cfg,
                             const LagStructure& lags) {
  const auto base = cfg.base_measure();
  double lp = 0.0;
  for (int t = 0; t < s.horizon; ++t) lp += log_multinomial(etas[static_cast<std::size_t>(t)], s.omega);
  for (int k = 0; k < s.horizon; ++k) {
    std::vector<double> alpha = base;
    for (int l : lags.lags(k)) {
      for (std::size_t j = 0; j < alpha.size(); ++j) alpha[j] += etas[static_cast<std::size_t>(l)][j];
    }
    lp += log_dirichlet(alpha, s.pi_at(k));
  }
  return lp;
}

void randomize_latent(GibbsSampler& g, Rng& rng) {
  auto& lat = g.state().latent;
  const std::vector<double> ones(static_cast<std::size_t>(lat.components), 1.5);
  sample_dirichlet(ones, lat.omega, rng);
  for (int t = 0; t < lat.horizon; ++t) sample_dirichlet(ones, lat.pi_at(t), rng);
}

}  // namespace

TEST_CASE("kappa adaptation rule") {
  McmcConfig c;
  CHECK(adapt_kappa(2.0, 0.2, 4, c) == Approx(2.0 * 1.01 * 1.01).epsilon(1e-15));
  CHECK(adapt_kappa(2.0, 0.35, 9, c) == 2.0);
  CHECK(adapt_kappa(2.0, 0.5, 1, c) == Approx(2.0 / 1.01).epsilon(1e-15));
  CHECK(adapt_kappa(2.0, 0.3, 9, c) == 2.0);
  CHECK(adapt_kappa(2.0, 0.4, 9, c) == 2.0);
}

TEST_CASE("MCMC configuration validation") {
  McmcConfig c;
  CHECK_NOTHROW(c.validate());
  c.burn_in = c.iterations;
  CHECK_THROWS(c.validate());
  c = McmcConfig{};
  c.ar_low = 0.5;
  CHECK_THROWS(c.validate());
  c = McmcConfig{};
  c.kappa_init = 0.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("allocation probabilities") {
  const std::vector<double> w{0.5, 0.5, 0.0, 0.0};
  const std::vector<double> ld{std::log(2.0), 0.0, 0.0, 0.0};
  const auto p = allocation_probabilities(w, ld);
  CHECK(p[0] == Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(p[1] == Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(p[2] == 0.0);
  CHECK(p[3] == 0.0);
  const std::vector<double> eq{0.25, 0.25, 0.25, 0.25};
  for (double v : allocation_probabilities(eq, std::vector<double>(4, -3.0))) CHECK(v == Approx(0.25));
  const double ninf = -std::numeric_limits<double>::infinity();
  const auto fallback = allocation_probabilities(eq, std::vector<double>(4, ninf));
  for (double v : fallback) CHECK(v == Approx(0.25));
}

TEST_CASE("allocations follow a degenerate weight vector") {
  const PanelData data = single_rotation_panel(0, 2.0, 50, 1, 4);
  GibbsSampler g(data, PriorConfig::standard(2, 1, 0), LagStructure::build(1, 0, 0, 1), short_run(10, 0));
  auto pi = g.state().latent.pi_at(0);
  std::fill(pi.begin(), pi.end(), 0.0);
  pi[2] = 1.0;
  g.update_allocations();
  for (int z : g.state().z[0]) CHECK(z == 2);
  CHECK(g.allocation_counts(0)[2] == 50);
}

TEST_CASE("weight full-conditional parameters") {
  // slice 1 (0-based) pools counts from times 0 and 1
  Rng rng(1);
  PanelData data{2, {PointSet(2), sample_rotated(RotationIndex(2, 0), ClaytonTheta(1.0), 20, rng)}};
  GibbsSampler g(data, PriorConfig::standard(2, 2, 2), LagStructure::build(2, 1, 0, 1), short_run(10, 0));
  auto& s = g.state();
  const std::array<int, 4> eta0{1, 1, 0, 0}, eta1{1, 0, 0, 1};
  std::copy(eta0.begin(), eta0.end(), s.latent.eta_at(0).begin());
  std::copy(eta1.begin(), eta1.end(), s.latent.eta_at(1).begin());
  const std::array<int, 4> counts{10, 5, 3, 2};
  std::size_t i = 0;
  for (int j = 0; j < 4; ++j) {
    for (int c = 0; c < counts[static_cast<std::size_t>(j)]; ++c) s.z[1][i++] = j;
  }
  const auto alpha = g.weight_posterior_parameters(1);
  CHECK(alpha == std::vector<double>{12.25, 6.25, 3.25, 3.25});
  // a time with no data and a_t = 0 keeps the base measure
  GibbsSampler prior_only(empty_panel(2, 1), PriorConfig::standard(2, 1, 0), LagStructure::build(1, 0, 0, 1),
                          short_run(10, 0));
  CHECK(prior_only.weight_posterior_parameters(0) == std::vector<double>{0.25, 0.25, 0.25, 0.25});
}

TEST_CASE("omega and beta full-conditional parameters") {
  GibbsSampler g(empty_panel(2, 1), PriorConfig::standard(2, 1, 4), LagStructure::build(1, 0, 0, 1), short_run(10, 0));
  const std::array<int, 4> eta{4, 0, 0, 0};
  std::copy(eta.begin(), eta.end(), g.state().latent.eta_at(0).begin());
  CHECK(g.omega_posterior_parameters() == std::vector<double>{4.25, 0.25, 0.25, 0.25});

  GibbsSampler h(empty_panel(2, 20), PriorConfig::standard(2, 20, 0), LagStructure::build(20, 0, 0, 1),
                 short_run(10, 0));
  std::fill(h.state().thetas.begin(), h.state().thetas.end(), 2.5);
  const auto [shape, rate] = h.beta_posterior_parameters(0);
  CHECK(shape == 21.0);
  CHECK(rate == Approx(51.0).epsilon(1e-14));
}

TEST_CASE("count conditional equals brute-force enumeration of the joint") {
  const int horizon = 3;
  PriorConfig cfg = PriorConfig::standard(2, horizon, 3);
  cfg.a = {3, 2, 3};
  cfg.p = {0.1, 0.2, 0.3, 0.4};
  cfg.a0 = 1.5;
  const LagStructure lags = LagStructure::build(horizon, 1, 0, 1);
  GibbsSampler g(empty_panel(2, horizon), cfg, lags, short_run(10, 0));
  Rng rng(77);
  randomize_latent(g, rng);
  auto& lat = g.state().latent;
  const auto etas_of = [&] {
    std::vector<std::vector<int>> out;
    for (int t = 0; t < horizon; ++t) out.emplace_back(lat.eta_at(t).begin(), lat.eta_at(t).end());
    return out;
  };
  for (int t = 0; t < horizon; ++t) {
    CHECK_THROWS(g.count_conditional_log_mass(t, 0));
    for (int j = 1; j < 4; ++j) {
      const auto lm = g.count_conditional_log_mass(t, j);
      const std::vector<int> current(lat.eta_at(t).begin(), lat.eta_at(t).end());
      const int total = current[static_cast<std::size_t>(j)] + current[0];
      REQUIRE(lm.size() == static_cast<std::size_t>(total) + 1);
      std::vector<double> oracle;
      for (int x = 0; x <= total; ++x) {
        auto etas = etas_of();
        etas[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] = x;
        etas[static_cast<std::size_t>(t)][0] = total - x;
        oracle.push_back(joint_eta_log_density(etas, lat, cfg, lags));
      }
      const double zl = log_sum_exp(lm);
      const double zo = log_sum_exp(oracle);
      for (std::size_t x = 0; x < lm.size(); ++x) CHECK(lm[x] - zl == Approx(oracle[x] - zo).margin(1e-10));
    }
  }
}

TEST_CASE("count sweeps reproduce the enumerated joint distribution") {
  const int horizon = 2;
  PriorConfig cfg = PriorConfig::standard(2, horizon, 2);
  cfg.a = {2, 3};
  const LagStructure lags = LagStructure::build(horizon, 1, 0, 1);
  GibbsSampler g(empty_panel(2, horizon), cfg, lags, short_run(10, 0));
  Rng rng(5);
  randomize_latent(g, rng);
  auto& lat = g.state().latent;

  // exact per-time marginals of eta_t given (omega, pi)
  const auto c0 = compositions(2, 4);
  const auto c1 = compositions(3, 4);
  std::vector<std::map<std::vector<int>, double>> exact(2);
  std::vector<double> logs;
  std::vector<std::pair<std::vector<int>, std::vector<int>>> configs;
  for (const auto& a : c0) {
    for (const auto& b : c1) {
      configs.emplace_back(a, b);
      logs.push_back(joint_eta_log_density({a, b}, lat, cfg, lags));
    }
  }
  const double z = log_sum_exp(logs);
  for (std::size_t k = 0; k < configs.size(); ++k) {
    exact[0][configs[k].first] += std::exp(logs[k] - z);
    exact[1][configs[k].second] += std::exp(logs[k] - z);
  }
  const int sweeps = 40000;
  std::vector<std::map<std::vector<int>, double>> seen(2);
  for (int s = 0; s < sweeps; ++s) {
    g.update_counts();
    for (int t = 0; t < horizon; ++t) {
      const auto eta = lat.eta_at(t);
      REQUIRE(std::accumulate(eta.begin(), eta.end(), 0) == cfg.a[static_cast<std::size_t>(t)]);
      seen[static_cast<std::size_t>(t)][std::vector<int>(eta.begin(), eta.end())] += 1.0 / sweeps;
    }
  }
  for (int t = 0; t < horizon; ++t) {
    double tv = 0.0;
    for (const auto& [k, p] : exact[static_cast<std::size_t>(t)]) {
      const auto it = seen[static_cast<std::size_t>(t)].find(k);
      tv += std::abs(p - (it == seen[static_cast<std::size_t>(t)].end() ? 0.0 : it->second));
    }
    CHECK(0.5 * tv < 0.02);
  }
}

TEST_CASE("zero latent counts are left at zero") {
  PriorConfig cfg = PriorConfig::standard(2, 2, 0);
  GibbsSampler g(empty_panel(2, 2), cfg, LagStructure::build(2, 1, 0, 1), short_run(10, 0));
  g.update_counts();
  for (int v : g.state().latent.eta) CHECK(v == 0);
}

TEST_CASE("theta updates without allocated data recover the gamma prior") {
  PriorConfig cfg = PriorConfig::standard(2, 1, 0);
  std::fill(cfg.d.begin(), cfg.d.end(), 3.0);
  GibbsSampler g(empty_panel(2, 1), cfg, LagStructure::build(1, 0, 0, 1), short_run(10, 0, 17));
  std::fill(g.state().betas.begin(), g.state().betas.end(), 1.5);
  g.state().kappa = 2.5;
  std::vector<double> draws;
  for (int it = 0; it < 60000; ++it) {
    g.update_thetas();
    draws.push_back(g.state().theta_at(0)[1]);
  }
  const double se = batch_means_standard_error(draws, 50);
  CHECK(mean(draws) == Approx(2.0).margin(4 * se));
  CHECK(sample_variance(draws) == Approx(3.0 / 2.25).epsilon(0.1));
}

TEST_CASE("single-rotation data at theta = 2 concentrates the posterior near 2") {
  const PanelData data = single_rotation_panel(0, 2.0, 500, 1, 123);
  PriorConfig cfg = PriorConfig::standard(2, 1, 0);
  cfg.mask = {true, false, false, false};
  const PosteriorDraws draws = run_chain(data, cfg, LagStructure::build(1, 0, 0, 1), short_run(2000, 1000, 9));
  std::vector<double> theta;
  for (std::size_t r = 0; r < draws.size(); ++r) {
    theta.push_back(draws.theta(r, 0)[0]);
    CHECK(draws.pi(r, 0)[0] == 1.0);
  }
  CHECK(std::abs(mean(theta) - 2.0) < 0.2);
}

TEST_CASE("without data the chain samples the weight prior") {
  PriorConfig cfg = PriorConfig::standard(2, 3, 5);
  const PosteriorDraws draws = run_chain(empty_panel(2, 3), cfg, LagStructure::build(3, 1, 0, 1), short_run(20000, 1000, 4));
  std::vector<double> x;
  for (std::size_t r = 0; r < draws.size(); ++r) x.push_back(draws.pi(r, 2)[1]);
  const double se = batch_means_standard_error(x, 50);
  CHECK(mean(x) == Approx(0.25).margin(4 * se));
  // Dir(a0 p) marginal variance p(1 - p) / (a0 + 1); the chain is strongly
  // autocorrelated here, so judge the second moment by its own batch-means error
  std::vector<double> sq;
  for (double v : x) sq.push_back((v - 0.25) * (v - 0.25));
  CHECK(mean(sq) == Approx(0.25 * 0.75 / 2.0).margin(4 * batch_means_standard_error(sq, 50)));
}

TEST_CASE("stored draws satisfy the state invariants and record diagnostics") {
  const PanelData data = single_rotation_panel(3, 3.0, 60, 4, 2);
  PriorConfig cfg = PriorConfig::standard(2, 4, 5);
  McmcConfig mc = short_run(400, 100, 3);
  const PosteriorDraws draws = run_chain(data, cfg, LagStructure::build(4, 2, 0, 1), mc);
  REQUIRE(draws.size() == 300);
  CHECK(draws.iteration.front() == 101);
  CHECK(draws.diagnostics.size() == 8);
  for (std::size_t r = 0; r < draws.size(); ++r) {
    for (int t = 0; t < 4; ++t) {
      const auto pi = draws.pi(r, t);
      CHECK(std::abs(std::accumulate(pi.begin(), pi.end(), 0.0) - 1.0) < 1e-12);
      const auto eta = draws.eta_at(r, t);
      CHECK(std::accumulate(eta.begin(), eta.end(), 0) == 5);
      for (double th : draws.theta(r, t)) CHECK(mc.theta_bounds.contains(th));
    }
  }
  for (const auto& d : draws.diagnostics) {
    CHECK(d.kappa > 0.0);
    CHECK(d.acceptance_rate >= 0.0);
    CHECK(d.acceptance_rate <= 1.0);
  }
}

TEST_CASE("masked rotations keep zero weight") {
  const PanelData data = single_rotation_panel(0, 2.0, 40, 2, 6);
  PriorConfig cfg = PriorConfig::standard(2, 2, 3);
  cfg.mask = {true, false, true, false};
  const PosteriorDraws draws = run_chain(data, cfg, LagStructure::build(2, 1, 0, 1), short_run(200, 50));
  for (std::size_t r = 0; r < draws.size(); ++r) {
    for (int t = 0; t < 2; ++t) {
      CHECK(draws.pi(r, t)[1] == 0.0);
      CHECK(draws.pi(r, t)[3] == 0.0);
      CHECK(draws.eta_at(r, t)[1] == 0);
    }
  }
}

TEST_CASE("fixed seeds give identical draws and chains are independent streams") {
  const PanelData data = single_rotation_panel(1, 2.0, 30, 3, 8);
  const PriorConfig cfg = PriorConfig::standard(2, 3, 4);
  const LagStructure lags = LagStructure::build(3, 1, 0, 1);
  McmcConfig mc = short_run(150, 50, 42);
  const PosteriorDraws a = run_chain(data, cfg, lags, mc);
  const PosteriorDraws b = run_chain(data, cfg, lags, mc);
  CHECK(a.pis == b.pis);
  CHECK(a.thetas == b.thetas);
  CHECK(a.eta == b.eta);
  CHECK(a.betas == b.betas);
  mc.seed = 43;
  CHECK(run_chain(data, cfg, lags, mc).thetas != a.thetas);

  mc.seed = 42;
  mc.chains = 2;
  const PosteriorDraws both = run_chains(data, cfg, lags, mc);
  REQUIRE(both.size() == 2 * a.size());
  const PosteriorDraws second = run_chain(data, cfg, lags, mc, 1);
  CHECK(std::equal(a.thetas.begin(), a.thetas.end(), both.thetas.begin()));
  CHECK(std::equal(second.thetas.begin(), second.thetas.end(), both.thetas.begin() + static_cast<long>(a.thetas.size())));
  CHECK(both.chain.back() == 1);
}

TEST_CASE("invalid inputs are rejected with the offending time") {
  PanelData data = single_rotation_panel(0, 2.0, 5, 2, 1);
  data.slices[1].row(3)[0] = 1.0;
  try {
    GibbsSampler g(data, PriorConfig::standard(2, 2, 0), LagStructure::build(2, 0, 0, 1), short_run(10, 0));
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("observation 4") != std::string::npos);
    CHECK(msg.find("time 2") != std::string::npos);
  }
  CHECK_THROWS(GibbsSampler(single_rotation_panel(0, 2.0, 5, 2, 1), PriorConfig::standard(2, 3, 0),
                            LagStructure::build(3, 0, 0, 1), short_run(10, 0)));
}
