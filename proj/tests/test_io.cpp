#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rotamix/io.hpp"

using namespace rotamix;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

RawPanel parse(const std::string& text) {
  std::istringstream in(text);
  return read_raw_panel(in, "test.csv");
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rotamix_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class Fn>
std::string error_of(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("rank transform with average ranks") {
  const RawPanel raw = parse("t,id,x1,x2\n1,a,10,4\n1,b,5,4\n1,c,7,9\n");
  const PanelData u = rank_transform(raw);
  REQUIRE(u.horizon() == 1);
  CHECK(u.slices[0].column(0) == std::vector<double>{0.75, 0.25, 0.5});
  CHECK(u.slices[0].column(1) == std::vector<double>{0.375, 0.375, 0.75});
}

TEST_CASE("rank transform scopes, bounds and invariance") {
  const RawPanel raw = parse("t,id,x1,x2\n1,a,1,8\n1,b,2,3\n2,a,30,5\n2,b,40,1\n2,c,50,2\n");
  const PanelData global = rank_transform(raw, RankScope::global);
  CHECK(global.slices[1].column(0) == std::vector<double>{3.0 / 6, 4.0 / 6, 5.0 / 6});
  const PanelData local = rank_transform(raw, RankScope::per_time);
  CHECK(local.slices[0].column(0) == std::vector<double>{1.0 / 3, 2.0 / 3});
  CHECK(local.slices[1].column(1) == std::vector<double>{0.75, 0.25, 0.5});
  for (const auto& s : global.slices) {
    for (double v : s.values()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
  RawPanel monotone = raw;
  for (std::size_t r = 0; r < monotone.rows(); ++r) {
    monotone.values[r * 2] = std::exp(monotone.values[r * 2] / 10.0) - 7.0;
    monotone.values[r * 2 + 1] = std::pow(monotone.values[r * 2 + 1], 3.0);
  }
  CHECK(rank_transform(monotone) == global);
  CHECK(parse_rank_scope("per-time") == RankScope::per_time);
  CHECK_THROWS(parse_rank_scope("weekly"));
}

TEST_CASE("constant variables are rejected by name") {
  const RawPanel raw = parse("t,id,x1,x2\n1,a,1,3\n1,b,2,3\n");
  CHECK(error_of([&] { rank_transform(raw); }).find("x2") != std::string::npos);
}

TEST_CASE("malformed panels produce row-level diagnostics") {
  CHECK(error_of([] { parse("t,id,x1,x3\n1,a,0.1,0.2\n"); }).find("missing column x2") != std::string::npos);
  CHECK(error_of([] { parse("t,id,u1,u2\n1,a,0.1,0.2\n1,b,0.3\n"); }).find("test.csv:3") != std::string::npos);
  CHECK(error_of([] { parse("t,id,u1,u2\n1,a,0.1,abc\n"); }).find("u2") != std::string::npos);
  CHECK(error_of([] { parse("t,id,u1,u2\nx,a,0.1,0.2\n"); }).find("time") != std::string::npos);
  CHECK(error_of([] { parse("time,id,u1\n"); }).find("header") != std::string::npos);
  CHECK(error_of([] { parse(""); }).find("empty") != std::string::npos);
  CHECK(error_of([] { panel_from_raw(parse("t,id,u1,u2\n1,a,0.1,1.2\n")); }).find("observation 1") != std::string::npos);
}

TEST_CASE("time labels are reindexed to consecutive times") {
  const PanelData p = panel_from_raw(parse("t,id,u1,u2\n2003,a,0.1,0.2\n2001,b,0.3,0.4\n2003,c,0.5,0.6\n"));
  REQUIRE(p.horizon() == 2);
  CHECK(p.slices[0].size() == 1);
  CHECK(p.slices[1].size() == 2);
  CHECK(p.slices[1].row(1)[0] == 0.5);
}

TEST_CASE("panels survive a write and read cycle bit for bit") {
  const SimulatedPanel sim = simulate_panel(simulation_study_truth(4), 25, 99);
  const fs::path dir = scratch("roundtrip");
  write_panel_csv(sim.data, dir / "panel.csv");
  CHECK(read_panel_csv(dir / "panel.csv") == sim.data);
}

TEST_CASE("reference simulation design") {
  const auto truth = simulation_study_truth(20);
  CHECK(truth[0].weights == std::vector<double>{0.4, 0.25, 0.25, 0.1});
  CHECK(truth[1].weights[0] == Approx(0.38).epsilon(1e-14));
  CHECK(truth[1].weights[1] == Approx(0.2625).epsilon(1e-14));
  CHECK(truth[1].weights[2] == Approx(0.2575).epsilon(1e-14));
  CHECK(truth[1].weights[3] == Approx(0.1).epsilon(1e-14));
  for (const auto& p : truth) {
    CHECK(p.weights[2] == Approx(1.0 - p.weights[0] - p.weights[1] - p.weights[3]).epsilon(1e-14));
    CHECK(p.thetas == std::vector<double>{5.0, 3.0, 4.0, 3.0});
    CHECK_NOTHROW(p.validate());
  }
  const SimulatedPanel a = simulate_panel(truth, 30, 5);
  const SimulatedPanel b = simulate_panel(truth, 30, 5);
  CHECK(a.data == b.data);
  CHECK_FALSE(simulate_panel(truth, 30, 6).data == a.data);
  CHECK(a.data.total_observations() == 600);

  auto broken = truth;
  broken[2].weights[0] = 0.9;
  CHECK(error_of([&] { simulate_panel(broken, 5, 1); }).find("time 3") != std::string::npos);
}

TEST_CASE("run configuration JSON, overrides and derived objects") {
  RunConfig c;
  c.at = 30;
  c.q = 7;
  c.mask = {"00"};
  c.seed = 12345678901234ull;
  const RunConfig back = from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(config_hash(back) == config_hash(c));

  const auto partial = nlohmann::json::parse(R"({"prior": {"at": 5}, "mcmc": {"iterations": 100, "burn_in": 10}, "unknown": 1})");
  const RunConfig over = from_json(partial, c);
  CHECK(over.at == 5);
  CHECK(over.q == 7);
  CHECK(over.iterations == 100);
  CHECK(config_hash(over) != config_hash(c));
  CHECK(over.model_label() == "M_{5,7,0}");

  const PriorConfig prior = over.prior(6);
  CHECK(prior.horizon() == 6);
  CHECK(prior.a == std::vector<int>(6, 5));
  CHECK(prior.active_components() == std::vector<int>{0});
  CHECK(over.lags(6).lags(5).size() == 6);
  CHECK(over.mcmc().burn_in == 10);

  RunConfig bad = c;
  bad.mask = {"0"};
  CHECK_THROWS(bad.prior(3));

  const fs::path dir = scratch("manifest");
  write_manifest(over, "fit", dir / "manifest.json");
  const RunConfig restored = read_manifest(dir / "manifest.json");
  CHECK(to_json(restored) == to_json(over));
  const auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(j.at("version") == kVersion);
  CHECK(j.at("command") == "fit");
}

TEST_CASE("draw tables round-trip") {
  const SimulatedPanel sim = simulate_panel(simulation_study_truth(3), 20, 1);
  McmcConfig mc;
  mc.iterations = 120;
  mc.burn_in = 20;
  mc.chains = 2;
  const PosteriorDraws draws = run_chains(sim.data, PriorConfig::standard(2, 3, 4), LagStructure::build(3, 1, 0, 1), mc);
  const fs::path dir = scratch("draws");
  write_draws(draws, dir);
  const PosteriorDraws back = read_draws(dir);
  CHECK(back.m == 2);
  CHECK(back.horizon == 3);
  CHECK(back.iteration == draws.iteration);
  CHECK(back.chain == draws.chain);
  CHECK(back.pis == draws.pis);
  CHECK(back.thetas == draws.thetas);
  CHECK(back.eta == draws.eta);
  CHECK(back.betas == draws.betas);
  CHECK(back.omega == draws.omega);
  CHECK(fs::exists(dir / "diagnostics.csv"));
  CHECK(fs::exists(dir / "diagnostics.chain1.csv"));
  const std::string head = slurp(dir / "draws.csv").substr(0, 36);
  CHECK(head == "iteration,chain,t,component,pi,theta");
}

TEST_CASE("goodness-of-fit report JSON") {
  const GofReport r{"M_{10,3,0}", 12.5, -25.0, {{2, -1.5}, {3, -2.0}}, 0.07};
  const auto j = to_json(r);
  CHECK(j.at("model") == "M_{10,3,0}");
  CHECK(j.at("lpml") == 12.5);
  CHECK(j.at("lps").size() == 2);
  CHECK(j.at("lps")[1].at("t") == 3);
  CHECK(j.at("mse") == 0.07);
  CHECK(to_json(GofReport{"M", 0, 0, {}, std::nullopt}).at("mse").is_null());
}
