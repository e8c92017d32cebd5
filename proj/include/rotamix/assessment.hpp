#pragma once

// Goodness of fit and predictive scoring over stored posterior draws.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rotamix/mixture.hpp"
#include "rotamix/parallel.hpp"
#include "rotamix/point_set.hpp"
#include "rotamix/prior.hpp"
#include "rotamix/random.hpp"
#include "rotamix/rotation.hpp"
#include "rotamix/sampler.hpp"
#include "rotamix/stats.hpp"

namespace rotamix {

/// log f(u_{t,i} | pi_t^(r), theta_t^(r)) laid out observation-major: the R
/// values of observation o occupy [o R, (o + 1) R). Observations are ordered
/// by time, then by index within the slice.
struct LogLikelihoodMatrix {
  std::size_t draws = 0;
  std::size_t observations = 0;
  std::vector<double> values;

  std::span<const double> observation(std::size_t o) const { return {values.data() + o * draws, draws}; }
};

inline LogLikelihoodMatrix pointwise_log_likelihood(const PosteriorDraws& draws, const PanelData& data) {
  if (draws.horizon != data.horizon() || draws.m != data.m) {
    throw std::invalid_argument("pointwise_log_likelihood: draws and data shapes differ");
  }
  LogLikelihoodMatrix out;
  out.draws = draws.size();
  out.observations = data.total_observations();
  out.values.assign(out.draws * out.observations, 0.0);
  std::vector<std::pair<int, std::size_t>> index;
  index.reserve(out.observations);
  for (int t = 0; t < data.horizon(); ++t) {
    for (std::size_t i = 0; i < data.slices[static_cast<std::size_t>(t)].size(); ++i) index.emplace_back(t, i);
  }
  parallel_for(index.size(), [&](std::size_t o) {
    const auto [t, i] = index[o];
    const auto u = data.slices[static_cast<std::size_t>(t)].row(i);
    for (std::size_t r = 0; r < out.draws; ++r) {
      const double v = mixture_log_density(u, draws.params(r, t));
      if (!std::isfinite(v)) {
        throw std::runtime_error("non-finite log-likelihood for observation " + std::to_string(i + 1) +
                                 " at time " + std::to_string(t + 1));
      }
      out.values[o * out.draws + r] = v;
    }
  });
  return out;
}

/// sum_o log CPO_o with CPO_o the harmonic mean of the draw likelihoods.
inline double lpml(const LogLikelihoodMatrix& ll) {
  if (ll.draws < 2) throw std::invalid_argument("lpml: need at least two draws");
  double total = 0.0;
  std::vector<double> neg(ll.draws);
  for (std::size_t o = 0; o < ll.observations; ++o) {
    const auto row = ll.observation(o);
    std::transform(row.begin(), row.end(), neg.begin(), [](double v) { return -v; });
    total -= log_mean_exp(neg);
  }
  return total;
}

/// -2 sum_o [log mean_r f_o^(r) - Var_r log f_o^(r)].
inline double waic(const LogLikelihoodMatrix& ll) {
  if (ll.draws < 2) throw std::invalid_argument("waic: need at least two draws");
  double total = 0.0;
  for (std::size_t o = 0; o < ll.observations; ++o) {
    const auto row = ll.observation(o);
    total += log_mean_exp(row) - sample_variance(row);
  }
  return -2.0 * total;
}

inline double lpml(const PosteriorDraws& draws, const PanelData& data) {
  return lpml(pointwise_log_likelihood(draws, data));
}

inline double waic(const PosteriorDraws& draws, const PanelData& data) {
  return waic(pointwise_log_likelihood(draws, data));
}

/// sum_i log[(1/R) sum_r f(u_i | params_r)].
inline double log_predictive_score(const PointSet& slice, const std::vector<MixtureParams>& params) {
  if (params.empty()) throw std::invalid_argument("log_predictive_score: no parameter draws");
  std::vector<double> per_obs(slice.size(), 0.0);
  parallel_for(slice.size(), [&](std::size_t i) {
    std::vector<double> lv(params.size());
    for (std::size_t r = 0; r < params.size(); ++r) lv[r] = mixture_log_density(slice.row(i), params[r]);
    per_obs[i] = log_mean_exp(lv);
  });
  double total = 0.0;
  for (double v : per_obs) total += v;
  return total;
}

/// One draw of (pi_t, theta_t) from the one-step prior transition given draw r
/// of a fit on times before t: eta_t ~ Mult(a_t, omega), pi_t ~ Dir(a0 p + sum
/// of earlier lagged counts + eta_t), theta_{t,j} ~ Ga(d_j, beta_j) clamped to
/// the compact range.
template <class URBG>
MixtureParams forward_predictive_params(int t, const PosteriorDraws& draws, std::size_t r, const PriorConfig& prior,
                                        const LagStructure& lags, const ThetaBounds& bounds, URBG& rng) {
  if (t < 1) throw std::invalid_argument("forward_predictive_params: time 1 has no history");
  if (draws.horizon < t) throw std::invalid_argument("forward_predictive_params: draws do not cover times before t");
  if (lags.horizon() <= t || prior.horizon() <= t) {
    throw std::invalid_argument("forward_predictive_params: prior horizon does not reach t");
  }
  const int k = draws.components;
  const std::vector<double> base = prior.base_measure();
  std::vector<int> eta_t(static_cast<std::size_t>(k), 0);
  sample_multinomial(prior.a[static_cast<std::size_t>(t)], draws.omega_at(r), eta_t, rng);
  std::vector<double> alpha(static_cast<std::size_t>(k), 0.0);
  for (int j = 0; j < k; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (base[ju] <= 0.0) continue;
    alpha[ju] = base[ju] + eta_t[ju];
    for (int l : lags.lags(t)) {
      if (l < t) alpha[ju] += draws.eta_at(r, l)[ju];
    }
  }
  MixtureParams out{draws.m, std::vector<double>(static_cast<std::size_t>(k), 0.0),
                    std::vector<double>(static_cast<std::size_t>(k), 1.0)};
  sample_dirichlet(alpha, out.weights, rng);
  const auto beta = draws.beta(r);
  for (int j = 0; j < k; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (base[ju] <= 0.0) continue;
    out.thetas[ju] = bounds.clamp(sample_gamma(prior.d[ju], beta[ju], rng));
  }
  return out;
}

/// LPS(t) for 0-based time t >= 1, using draws fitted on times 0..t-1.
template <class URBG>
double lps(int t, const PanelData& data, const PosteriorDraws& draws, const PriorConfig& prior,
           const LagStructure& lags, const ThetaBounds& bounds, URBG& rng) {
  if (t < 1) throw std::invalid_argument("lps: the first time has no history to predict from");
  if (t >= data.horizon()) throw std::invalid_argument("lps: time outside the data horizon");
  if (draws.size() == 0) throw std::invalid_argument("lps: no draws");
  std::vector<MixtureParams> params;
  params.reserve(draws.size());
  for (std::size_t r = 0; r < draws.size(); ++r) {
    params.push_back(forward_predictive_params(t, draws, r, prior, lags, bounds, rng));
  }
  return log_predictive_score(data.slices[static_cast<std::size_t>(t)], params);
}

struct PredictiveError {
  double value = 0.0;
  std::vector<int> empty_slices;  // 1-based times skipped for lack of test points
};

/// Observation-weighted MSE of E(U_2 | u_1), averaged over (up to max_draws
/// evenly spaced) posterior draws, against held-out bivariate points.
inline PredictiveError predictive_mse(const PosteriorDraws& draws, const PanelData& test, std::size_t max_draws = 200) {
  if (draws.m != 2 || test.m != 2) throw std::invalid_argument("predictive_mse: bivariate data required");
  if (test.horizon() != draws.horizon) throw std::invalid_argument("predictive_mse: test horizon differs from fit");
  if (draws.size() == 0) throw std::invalid_argument("predictive_mse: no draws");
  const std::vector<std::size_t> picked = select_draws(draws.size(), max_draws);
  PredictiveError out;
  double sse = 0.0;
  std::size_t count = 0;
  for (int t = 0; t < test.horizon(); ++t) {
    const auto& slice = test.slices[static_cast<std::size_t>(t)];
    if (slice.empty()) {
      out.empty_slices.push_back(t + 1);
      continue;
    }
    std::vector<MixtureParams> params;
    params.reserve(picked.size());
    for (std::size_t r : picked) params.push_back(draws.params(r, t));
    std::vector<double> err(slice.size());
    parallel_for(slice.size(), [&](std::size_t i) {
      const auto u = slice.row(i);
      double pred = 0.0;
      for (const auto& p : params) pred += predictive_mean(u[0], p);
      pred /= static_cast<double>(params.size());
      err[i] = (u[1] - pred) * (u[1] - pred);
    });
    for (double e : err) sse += e;
    count += slice.size();
  }
  if (count == 0) throw std::invalid_argument("predictive_mse: every test slice is empty");
  out.value = sse / static_cast<double>(count);
  return out;
}

struct SummaryRow {
  int t = 0;  // 1-based
  std::string component;
  std::string statistic;  // pi, theta, lambda or tau
  double mean = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

inline SummaryRow summarize_series(int t, std::string component, std::string statistic, std::vector<double> values) {
  SummaryRow row{t, std::move(component), std::move(statistic), rotamix::mean(values), 0.0, 0.0};
  std::sort(values.begin(), values.end());
  row.q025 = quantile_sorted(values, 0.025);
  row.q975 = quantile_sorted(values, 0.975);
  return row;
}

/// Posterior mean and equal-tailed 95% interval of pi_{t,j}, theta_{t,j},
/// the corner tail coefficients lambda_{t,k} and the pairwise tau_t.
inline std::vector<SummaryRow> summarize(const PosteriorDraws& draws) {
  if (draws.size() == 0) throw std::invalid_argument("summarize: no draws");
  const std::size_t n = draws.size();
  const auto k = static_cast<std::size_t>(draws.components);
  std::vector<SummaryRow> rows;
  std::vector<double> pi(n), theta(n), tau(n);
  std::vector<std::vector<double>> lambda(k, std::vector<double>(n));
  for (int t = 0; t < draws.horizon; ++t) {
    for (std::size_t r = 0; r < n; ++r) {
      const MixtureParams p = draws.params(r, t);
      const std::vector<double> tails = mixture_tail_coefficients(p);
      for (std::size_t c = 0; c < k; ++c) lambda[c][r] = tails[c];
      tau[r] = mixture_kendall_tau(p);
    }
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t r = 0; r < n; ++r) {
        pi[r] = draws.pi(r, t)[j];
        theta[r] = draws.theta(r, t)[j];
      }
      const std::string label = RotationIndex(draws.m, static_cast<unsigned>(j)).to_string();
      rows.push_back(summarize_series(t + 1, label, "pi", pi));
      rows.push_back(summarize_series(t + 1, label, "theta", theta));
      rows.push_back(summarize_series(t + 1, label, "lambda", lambda[j]));
    }
    rows.push_back(summarize_series(t + 1, "mixture", "tau", tau));
  }
  return rows;
}

struct DensityGrid {
  int t = 0;  // 1-based
  int first = 0;
  int second = 1;
  int grid_n = 0;
  std::vector<double> coords;  // midpoints
  std::vector<double> values;  // row-major, first coordinate outer

  double at(int ix, int iy) const { return values[static_cast<std::size_t>(ix * grid_n + iy)]; }
};

/// Posterior-mean density of the (first, second) coordinate pair at grid
/// midpoints. Each rotation's pair margin is the bivariate rotated Clayton
/// with the same theta.
inline DensityGrid density_grid(const PosteriorDraws& draws, int t, std::pair<int, int> pair, int grid_n,
                                std::size_t max_draws = 0) {
  if (grid_n < 1) throw std::invalid_argument("density_grid: grid_n must be >= 1");
  if (t < 0 || t >= draws.horizon) throw std::invalid_argument("density_grid: time out of range");
  const auto [a, b] = pair;
  if (a < 0 || b < 0 || a >= draws.m || b >= draws.m || a == b) {
    throw std::invalid_argument("density_grid: invalid coordinate pair");
  }
  if (draws.size() == 0) throw std::invalid_argument("density_grid: no draws");
  DensityGrid out{t + 1, a, b, grid_n, {}, {}};
  out.coords.resize(static_cast<std::size_t>(grid_n));
  for (int q = 0; q < grid_n; ++q) out.coords[static_cast<std::size_t>(q)] = (q + 0.5) / grid_n;
  out.values.assign(static_cast<std::size_t>(grid_n) * static_cast<std::size_t>(grid_n), 0.0);

  const std::vector<std::size_t> picked = select_draws(draws.size(), max_draws);
  std::vector<RotationIndex> margins;
  for (int j = 0; j < draws.components; ++j) {
    const RotationIndex full(draws.m, static_cast<unsigned>(j));
    margins.emplace_back(2, (full.bit(a) ? 1u : 0u) | (full.bit(b) ? 2u : 0u));
  }
  parallel_for(static_cast<std::size_t>(grid_n), [&](std::size_t ix) {
    for (int iy = 0; iy < grid_n; ++iy) {
      const double u[2] = {out.coords[ix], out.coords[static_cast<std::size_t>(iy)]};
      double total = 0.0;
      for (std::size_t r : picked) {
        const auto w = draws.pi(r, t);
        const auto th = draws.theta(r, t);
        for (std::size_t j = 0; j < margins.size(); ++j) {
          if (w[j] <= 0.0) continue;
          total += w[j] * rotated_density(margins[j], std::span<const double>(u, 2), ClaytonTheta(th[j]));
        }
      }
      out.values[ix * static_cast<std::size_t>(grid_n) + static_cast<std::size_t>(iy)] =
          total / static_cast<double>(picked.size());
    }
  });
  return out;
}

struct LpsEntry {
  int t = 0;  // 1-based
  double value = 0.0;
};

struct GofReport {
  std::string model;
  double lpml = 0.0;
  double waic = 0.0;
  std::vector<LpsEntry> lps;
  std::optional<double> mse;
};

/// "M_{a,q,p}" label of a fit configuration.
inline std::string model_label(int at, int q, int p) {
  return "M_{" + std::to_string(at) + "," + std::to_string(q) + "," + std::to_string(p) + "}";
}

}  // namespace rotamix
