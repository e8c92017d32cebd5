// rotamix: simulate, fit, assess and predict with the dynamic rotated-Clayton mixture.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rotamix/rotamix.hpp"

namespace fs = std::filesystem;
using namespace rotamix;

namespace {

struct Overrides {
  std::string config;
  std::optional<int> m, T, at, q, p, s, iters, burnin, batch_size, chains, n, train_per_time, lps_start, thin;
  std::optional<double> a0, d, e, g, theta_min, theta_max;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> input, out, rank_scope;
  std::optional<std::vector<std::string>> mask;
  bool rank_transform = false;
  int grid = 0;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run configuration; flags override its values");
  cmd->add_option("--m", o.m, "Dimension");
  cmd->add_option("--T", o.T, "Number of times");
  cmd->add_option("--a0", o.a0, "Total mass of the base measure");
  cmd->add_option("--at", o.at, "Latent count a_t (same for every t)");
  cmd->add_option("--q", o.q, "Moving-average lag order");
  cmd->add_option("--p", o.p, "Seasonal lag order");
  cmd->add_option("--s", o.s, "Seasonal period");
  cmd->add_option("--d", o.d, "Gamma shape of the dependence parameters");
  cmd->add_option("--e", o.e, "Gamma shape of the rate hyperprior");
  cmd->add_option("--g", o.g, "Gamma rate of the rate hyperprior");
  cmd->add_option("--iters", o.iters, "MCMC iterations");
  cmd->add_option("--burnin", o.burnin, "Burn-in iterations");
  cmd->add_option("--batch-size", o.batch_size, "Adaptation batch length");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--theta-min", o.theta_min, "Lower bound of the dependence parameter");
  cmd->add_option("--theta-max", o.theta_max, "Upper bound of the dependence parameter");
  cmd->add_option("--chains", o.chains, "Number of parallel chains");
  cmd->add_option("--mask", o.mask, "Active rotations as bit strings (e.g. --mask 00)")->delimiter(',');
  cmd->add_option("--input", o.input, "Input panel CSV (t,id,x1.. or t,id,u1..)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_flag("--rank-transform", o.rank_transform, "Convert raw measurements to pseudo-observations");
  cmd->add_option("--rank-scope", o.rank_scope, "global or per-time");
  cmd->add_option("--n", o.n, "Observations per time (simulate)");
  cmd->add_option("--train-per-time", o.train_per_time, "Training observations per time (predict)");
  cmd->add_option("--lps-start", o.lps_start, "First time scored by LPS (assess); 0 disables");
  cmd->add_option("--thin", o.thin, "Maximum number of draws used for prediction");
  cmd->add_option("--grid", o.grid, "Density grid resolution written by fit (0 disables)");
}

template <class T>
void apply(const std::optional<T>& v, T& field) {
  if (v) field = *v;
}

RunConfig resolve(const Overrides& o) {
  RunConfig c;
  if (!o.config.empty()) c = read_run_config(o.config);
  apply(o.m, c.m);
  apply(o.T, c.T);
  apply(o.a0, c.a0);
  apply(o.at, c.at);
  apply(o.q, c.q);
  apply(o.p, c.p);
  apply(o.s, c.s);
  apply(o.d, c.d);
  apply(o.e, c.e);
  apply(o.g, c.g);
  apply(o.iters, c.iterations);
  apply(o.burnin, c.burn_in);
  apply(o.batch_size, c.batch_size);
  apply(o.seed, c.seed);
  apply(o.theta_min, c.theta_min);
  apply(o.theta_max, c.theta_max);
  apply(o.chains, c.chains);
  apply(o.mask, c.mask);
  apply(o.input, c.input);
  apply(o.out, c.output);
  apply(o.rank_scope, c.rank_scope);
  apply(o.n, c.n);
  apply(o.train_per_time, c.train_per_time);
  apply(o.lps_start, c.lps_start);
  apply(o.thin, c.thin);
  if (o.rank_transform) c.rank_transform = true;
  return c;
}

PanelData load_panel(const RunConfig& c) {
  if (c.input.empty()) throw std::invalid_argument("--input is required");
  const RawPanel raw = read_raw_panel(fs::path(c.input));
  if (raw.m != c.m) {
    throw std::invalid_argument("input has " + std::to_string(raw.m) + " measurement columns but m = " +
                                std::to_string(c.m));
  }
  PanelData panel = c.rank_transform ? rank_transform(raw, parse_rank_scope(c.rank_scope)) : panel_from_raw(raw);
  if (c.T > 0 && panel.horizon() != c.T) {
    throw std::invalid_argument("input has " + std::to_string(panel.horizon()) + " times but T = " +
                                std::to_string(c.T));
  }
  return panel;
}

PosteriorDraws fit_panel(const RunConfig& c, const PanelData& panel) {
  const int horizon = panel.horizon();
  PosteriorDraws draws = run_chains(panel, c.prior(horizon), c.lags(horizon), c.mcmc());
  draws.provenance.config_hash = config_hash(c);
  return draws;
}

int cmd_simulate(const RunConfig& c) {
  const int horizon = c.T > 0 ? c.T : 20;
  if (c.m != 2) throw std::invalid_argument("simulate: the built-in design is bivariate (m = 2)");
  if (c.n < 0) throw std::invalid_argument("simulate: --n must be nonnegative");
  const SimulatedPanel sim = simulate_panel(simulation_study_truth(horizon), static_cast<std::size_t>(c.n), c.seed);
  const fs::path out(c.output);
  write_panel_csv(sim.data, out / "panel.csv");
  write_truth_csv(sim.truth, out / "truth.csv");
  write_manifest(c, "simulate", out / "manifest.json");
  std::cout << "wrote " << sim.data.total_observations() << " observations over " << horizon << " times to "
            << (out / "panel.csv").string() << '\n';
  return 0;
}

int cmd_fit(const RunConfig& c, int grid) {
  const PanelData panel = load_panel(c);
  const fs::path out(c.output);
  write_manifest(c, "fit", out / "manifest.json");
  const PosteriorDraws draws = fit_panel(c, panel);
  write_draws(draws, out);
  write_summary_csv(summarize(draws), out / "summary.csv");
  const LogLikelihoodMatrix ll = pointwise_log_likelihood(draws, panel);
  GofReport report{c.model_label(), lpml(ll), waic(ll), {}, std::nullopt};
  write_gof_json(report, out / "gof.json");
  if (grid > 0) {
    std::vector<DensityGrid> grids;
    for (int t = 0; t < draws.horizon; ++t) {
      for (int a = 0; a < c.m; ++a) {
        for (int b = a + 1; b < c.m; ++b) grids.push_back(density_grid(draws, t, {a, b}, grid, c.thin));
      }
    }
    write_density_grids_csv(grids, out / "density.csv");
  }
  std::cout << report.model << "  draws=" << draws.size() << "  LPML=" << report.lpml << "  WAIC=" << report.waic
            << '\n';
  return 0;
}

int cmd_assess(const RunConfig& c) {
  const PanelData panel = load_panel(c);
  const fs::path out(c.output);
  write_manifest(c, "assess", out / "manifest.json");
  const PosteriorDraws draws = fs::exists(out / "draws.csv") ? read_draws(out) : fit_panel(c, panel);
  if (draws.horizon != panel.horizon() || draws.m != panel.m) {
    throw std::invalid_argument("stored draws in " + out.string() + " do not match the input panel");
  }
  const LogLikelihoodMatrix ll = pointwise_log_likelihood(draws, panel);
  GofReport report{c.model_label(), lpml(ll), waic(ll), {}, std::nullopt};
  if (c.lps_start > 0) {
    if (c.lps_start < 2 || c.lps_start > panel.horizon()) {
      throw std::invalid_argument("--lps-start must lie in [2, T]");
    }
    const PriorConfig prior = c.prior(panel.horizon());
    const LagStructure lags = c.lags(panel.horizon());
    Rng rng(c.seed ^ 0x5bd1e995ull);
    for (int t = c.lps_start - 1; t < panel.horizon(); ++t) {
      const PanelData window = panel.truncated(t);
      const PosteriorDraws past = run_chains(window, prior.truncated(t), lags.truncated(t), c.mcmc());
      const double value = lps(t, panel, past, prior, lags, c.mcmc().theta_bounds, rng);
      report.lps.push_back({t + 1, value});
      std::cout << "LPS(" << t + 1 << ") = " << value << '\n';
    }
  }
  write_gof_json(report, out / "gof.json");
  std::cout << report.model << "  LPML=" << report.lpml << "  WAIC=" << report.waic << '\n';
  return 0;
}

int cmd_predict(const RunConfig& c) {
  if (c.m != 2) throw std::invalid_argument("predict: bivariate data required");
  if (c.train_per_time < 1) throw std::invalid_argument("predict: --train-per-time must be >= 1");
  const PanelData panel = load_panel(c);
  PanelData train{panel.m, {}};
  PanelData test{panel.m, {}};
  for (const auto& slice : panel.slices) {
    PointSet tr(panel.m);
    PointSet te(panel.m);
    for (std::size_t i = 0; i < slice.size(); ++i) {
      (static_cast<int>(i) < c.train_per_time ? tr : te).push_back(slice.row(i));
    }
    train.slices.push_back(std::move(tr));
    test.slices.push_back(std::move(te));
  }
  const fs::path out(c.output);
  write_manifest(c, "predict", out / "manifest.json");
  const PosteriorDraws draws = fit_panel(c, train);
  write_draws(draws, out);
  const PredictiveError mse = predictive_mse(draws, test, static_cast<std::size_t>(std::max(c.thin, 0)));
  for (int t : mse.empty_slices) std::cerr << "warning: no test observations at time " << t << '\n';
  const LogLikelihoodMatrix ll = pointwise_log_likelihood(draws, train);
  GofReport report{c.model_label(), lpml(ll), waic(ll), {}, mse.value};
  write_gof_json(report, out / "gof.json");
  std::cout << report.model << "  MSE=" << mse.value << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic mixtures of rotated Clayton copulas"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Overrides o;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic panel from the reference design");
  auto* fit = app.add_subcommand("fit", "Fit the model and write draws, summaries and LPML/WAIC");
  auto* assess = app.add_subcommand("assess", "LPML/WAIC of a fit, plus rolling LPS with --lps-start");
  auto* predict = app.add_subcommand("predict", "Train/test split per time and conditional-mean MSE");
  for (auto* cmd : {simulate, fit, assess, predict}) add_common(cmd, o);
  CLI11_PARSE(app, argc, argv);
  try {
    const RunConfig c = resolve(o);
    if (*simulate) return cmd_simulate(c);
    if (*fit) return cmd_fit(c, o.grid);
    if (*assess) return cmd_assess(c);
    if (*predict) return cmd_predict(c);
  } catch (const std::exception& e) {
    std::cerr << "rotamix: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
