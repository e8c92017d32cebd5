#pragma once

// Gibbs sampler for the dynamic rotated-Clayton mixture.
//
// One systematic scan updates, in order: allocations Z, weights pi_t, counts
// eta_t (componentwise on the simplex slack), omega, the dependence
// parameters theta_{t,j} (gamma random-walk Metropolis-Hastings with a
// batch-adapted concentration kappa), and the gamma rates beta_j.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rotamix/mixture.hpp"
#include "rotamix/point_set.hpp"
#include "rotamix/prior.hpp"
#include "rotamix/random.hpp"
#include "rotamix/rotation.hpp"

namespace rotamix {

struct McmcConfig {
  int iterations = 7000;
  int burn_in = 3000;
  int batch_size = 50;
  double ar_low = 0.3;
  double ar_high = 0.4;
  double kappa_init = 1.0;
  ThetaBounds theta_bounds;
  std::uint64_t seed = 1;
  int chains = 1;

  void validate() const {
    if (iterations < 1) throw std::invalid_argument("McmcConfig: iterations must be >= 1");
    if (burn_in < 0 || burn_in >= iterations) throw std::invalid_argument("McmcConfig: need 0 <= burn_in < iterations");
    if (batch_size < 1) throw std::invalid_argument("McmcConfig: batch_size must be >= 1");
    if (!(ar_low > 0.0 && ar_low < ar_high && ar_high < 1.0)) {
      throw std::invalid_argument("McmcConfig: need 0 < ar_low < ar_high < 1");
    }
    if (!(kappa_init > 0.0)) throw std::invalid_argument("McmcConfig: kappa_init must be positive");
    if (chains < 1) throw std::invalid_argument("McmcConfig: chains must be >= 1");
    theta_bounds.validate();
  }
};

/// Acceptance record of one adaptation batch; `kappa` is the value in force
/// during the batch.
struct BatchDiagnostic {
  int chain = 0;
  int batch = 0;
  double kappa = 0.0;
  double acceptance_rate = 0.0;
};

struct Provenance {
  std::uint64_t seed = 0;
  int iterations = 0;
  int burn_in = 0;
  std::string config_hash;
};

/// Stored post-burn-in draws, one record per (chain, iteration). Per-time
/// arrays are laid out draw-major then time then rotation.
struct PosteriorDraws {
  int m = 2;
  int horizon = 0;
  int components = 0;
  std::vector<int> iteration;
  std::vector<int> chain;
  std::vector<double> pis;
  std::vector<double> thetas;
  std::vector<int> eta;
  std::vector<double> omega;
  std::vector<double> betas;
  std::vector<BatchDiagnostic> diagnostics;
  Provenance provenance;

  std::size_t size() const { return iteration.size(); }

  std::size_t slot(std::size_t r, int t) const {
    return (r * static_cast<std::size_t>(horizon) + static_cast<std::size_t>(t)) * static_cast<std::size_t>(components);
  }
  std::span<const double> pi(std::size_t r, int t) const {
    return {pis.data() + slot(r, t), static_cast<std::size_t>(components)};
  }
  std::span<const double> theta(std::size_t r, int t) const {
    return {thetas.data() + slot(r, t), static_cast<std::size_t>(components)};
  }
  std::span<const int> eta_at(std::size_t r, int t) const {
    return {eta.data() + slot(r, t), static_cast<std::size_t>(components)};
  }
  std::span<const double> omega_at(std::size_t r) const {
    return {omega.data() + r * static_cast<std::size_t>(components), static_cast<std::size_t>(components)};
  }
  std::span<const double> beta(std::size_t r) const {
    return {betas.data() + r * static_cast<std::size_t>(components), static_cast<std::size_t>(components)};
  }

  MixtureParams params(std::size_t r, int t) const {
    const auto w = pi(r, t);
    const auto th = theta(r, t);
    return {m, std::vector<double>(w.begin(), w.end()), std::vector<double>(th.begin(), th.end())};
  }

  /// Appends another chain's draws (same model shape).
  void append(const PosteriorDraws& other) {
    if (size() == 0 && diagnostics.empty()) {
      const Provenance keep = provenance;
      *this = other;
      if (!keep.config_hash.empty()) provenance = keep;
      return;
    }
    if (other.m != m || other.horizon != horizon || other.components != components) {
      throw std::invalid_argument("PosteriorDraws: cannot merge draws of different shapes");
    }
    auto cat = [](auto& dst, const auto& src) { dst.insert(dst.end(), src.begin(), src.end()); };
    cat(iteration, other.iteration);
    cat(chain, other.chain);
    cat(pis, other.pis);
    cat(thetas, other.thetas);
    cat(eta, other.eta);
    cat(omega, other.omega);
    cat(betas, other.betas);
    cat(diagnostics, other.diagnostics);
  }
};

/// Evenly spaced subset of draw indices, at most `max_draws` of them (all when 0).
inline std::vector<std::size_t> select_draws(std::size_t total, std::size_t max_draws) {
  std::vector<std::size_t> out;
  if (max_draws == 0 || max_draws >= total) {
    out.resize(total);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  out.reserve(max_draws);
  for (std::size_t k = 0; k < max_draws; ++k) out.push_back((k * total) / max_draws);
  return out;
}

/// Batch rule for the proposal concentration: multiply by 1.01^sqrt(h) when
/// the batch acceptance rate is below ar_low, divide when above ar_high.
inline double adapt_kappa(double kappa, double acceptance_rate, int batch, const McmcConfig& cfg) {
  const double factor = std::pow(1.01, std::sqrt(static_cast<double>(batch)));
  if (acceptance_rate < cfg.ar_low) return kappa * factor;
  if (acceptance_rate > cfg.ar_high) return kappa / factor;
  return kappa;
}

/// Normalised allocation probabilities pi*_j proportional to pi_j f_j, from
/// weights and log component densities. Falls back to the weights when every
/// product underflows.
inline std::vector<double> allocation_probabilities(std::span<const double> weights,
                                                    std::span<const double> log_densities) {
  if (weights.size() != log_densities.size()) throw std::invalid_argument("allocation_probabilities: size mismatch");
  std::vector<double> lw(weights.size(), -std::numeric_limits<double>::infinity());
  double max_v = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] > 0.0) lw[j] = std::log(weights[j]) + log_densities[j];
    max_v = std::max(max_v, lw[j]);
  }
  std::vector<double> out(weights.size(), 0.0);
  if (!std::isfinite(max_v)) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = weights[j] / total;
    return out;
  }
  double total = 0.0;
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = std::exp(lw[j] - max_v);
    total += out[j];
  }
  for (double& v : out) v /= total;
  return out;
}

struct ChainState {
  LatentState latent;
  std::vector<std::vector<int>> z;  // component label per (t, i)
  std::vector<double> thetas;       // T x K
  std::vector<double> betas;        // K
  double kappa = 1.0;
  long batch_accepts = 0;
  long batch_proposals = 0;
  int iteration = 0;

  std::span<double> theta_at(int t) {
    return {thetas.data() + static_cast<std::size_t>(t * latent.components), static_cast<std::size_t>(latent.components)};
  }
  std::span<const double> theta_at(int t) const {
    return {thetas.data() + static_cast<std::size_t>(t * latent.components), static_cast<std::size_t>(latent.components)};
  }
};

inline Rng make_chain_rng(std::uint64_t seed, int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x9e3779b9u};
  return Rng(seq);
}

class GibbsSampler {
 public:
  GibbsSampler(PanelData data, PriorConfig prior, LagStructure lags, McmcConfig mcmc, int chain_id = 0)
      : data_(std::move(data)),
        prior_(std::move(prior)),
        lags_(std::move(lags)),
        mcmc_(mcmc),
        chain_id_(chain_id),
        rng_(make_chain_rng(mcmc.seed, chain_id)) {
    prior_.validate();
    mcmc_.validate();
    data_.validate();
    if (data_.m != prior_.m) throw std::invalid_argument("GibbsSampler: data and prior dimensions differ");
    if (data_.horizon() != prior_.horizon() || lags_.horizon() != prior_.horizon()) {
      throw std::invalid_argument("GibbsSampler: data, prior and lag horizons differ");
    }
    if (data_.horizon() < 1) throw std::invalid_argument("GibbsSampler: empty horizon");
    k_ = prior_.components();
    active_ = prior_.active_components();
    base_ = prior_.base_measure();
    rotations_ = all_rotations(prior_.m);
    initialize();
  }

  const PanelData& data() const { return data_; }
  const PriorConfig& prior() const { return prior_; }
  const LagStructure& lags() const { return lags_; }
  const McmcConfig& mcmc() const { return mcmc_; }
  ChainState& state() { return state_; }
  const ChainState& state() const { return state_; }
  Rng& rng() { return rng_; }
  const std::vector<BatchDiagnostic>& diagnostics() const { return diagnostics_; }
  std::size_t allocation_fallbacks() const { return allocation_fallbacks_; }

  /// Recomputes cached component log-densities after external edits to thetas.
  void refresh_likelihood_cache() {
    for (int t = 0; t < horizon(); ++t) {
      for (int j : active_) refresh_column(t, j);
    }
  }

  /// Number of observations at time t allocated to each rotation.
  std::vector<int> allocation_counts(int t) const {
    std::vector<int> out(static_cast<std::size_t>(k_), 0);
    for (int label : state_.z[static_cast<std::size_t>(t)]) ++out[static_cast<std::size_t>(label)];
    return out;
  }

  // (a) Z_{t,i} ~ Mult(1, pi*_t).
  void update_allocations() {
    std::vector<double> lw(static_cast<std::size_t>(k_));
    for (int t = 0; t < horizon(); ++t) {
      const auto pi = state_.latent.pi_at(t);
      const auto& cache = log_f_[static_cast<std::size_t>(t)];
      auto& z = state_.z[static_cast<std::size_t>(t)];
      for (std::size_t i = 0; i < z.size(); ++i) {
        std::fill(lw.begin(), lw.end(), -std::numeric_limits<double>::infinity());
        for (int j : active_) {
          const auto ju = static_cast<std::size_t>(j);
          if (pi[ju] > 0.0) lw[ju] = std::log(pi[ju]) + cache[i * static_cast<std::size_t>(k_) + ju];
        }
        int label = sample_categorical_log(lw, rng_);
        if (label < 0) {
          ++allocation_fallbacks_;
          label = sample_categorical(std::span<const double>(pi.data(), pi.size()), rng_);
        }
        z[i] = label;
      }
    }
  }

  /// Dirichlet parameters of the pi_t full conditional:
  /// a0 p + sum_{k in lags(t)} eta_k + sum_i z_{t,i}.
  std::vector<double> weight_posterior_parameters(int t) const {
    const std::vector<int> pooled = pooled_counts(state_.latent, lags_, t);
    const std::vector<int> counts = allocation_counts(t);
    std::vector<double> alpha(static_cast<std::size_t>(k_), 0.0);
    for (int j : active_) {
      const auto ju = static_cast<std::size_t>(j);
      alpha[ju] = base_[ju] + pooled[ju] + counts[ju];
    }
    return alpha;
  }

  // (b)
  void update_weights() {
    for (int t = 0; t < horizon(); ++t) {
      const std::vector<double> alpha = weight_posterior_parameters(t);
      sample_dirichlet(alpha, state_.latent.pi_at(t), rng_);
    }
  }

  /// Unnormalised log-masses of eta_{t,j} = 0..R, where R is eta_{t,j} plus the
  /// slack held by the first active rotation (which absorbs the remainder).
  std::vector<double> count_conditional_log_mass(int t, int j) const {
    const int slack = active_.front();
    if (j == slack || !prior_.active(j)) throw std::invalid_argument("count_conditional_log_mass: bad rotation");
    const auto eta = state_.latent.eta_at(t);
    const int total = eta[static_cast<std::size_t>(j)] + eta[static_cast<std::size_t>(slack)];
    const double lw_j = count_log_weight(t, j);
    const double lw_s = count_log_weight(t, slack);
    const auto& inverse = lags_.inverse(t);
    std::vector<double> base_j(inverse.size());
    std::vector<double> base_s(inverse.size());
    for (std::size_t q = 0; q < inverse.size(); ++q) {
      const std::vector<int> pooled = pooled_counts(state_.latent, lags_, inverse[q], t);
      base_j[q] = base_[static_cast<std::size_t>(j)] + pooled[static_cast<std::size_t>(j)];
      base_s[q] = base_[static_cast<std::size_t>(slack)] + pooled[static_cast<std::size_t>(slack)];
    }
    std::vector<double> out(static_cast<std::size_t>(total) + 1);
    for (int x = 0; x <= total; ++x) {
      const int rest = total - x;
      double lm = -std::lgamma(x + 1.0) - std::lgamma(rest + 1.0);
      lm += x == 0 ? 0.0 : x * lw_j;
      lm += rest == 0 ? 0.0 : rest * lw_s;
      for (std::size_t q = 0; q < inverse.size(); ++q) {
        lm -= std::lgamma(base_j[q] + x) + std::lgamma(base_s[q] + rest);
      }
      if (std::isnan(lm)) {
        throw std::runtime_error("update_counts: log-mass evaluation failed at time " + std::to_string(t + 1));
      }
      out[static_cast<std::size_t>(x)] = lm;
    }
    return out;
  }

  // (c) componentwise sweep over the active rotations except the slack one.
  void update_counts() {
    if (active_.size() < 2) {
      for (int t = 0; t < horizon(); ++t) {
        state_.latent.eta_at(t)[static_cast<std::size_t>(active_.front())] = prior_.a[static_cast<std::size_t>(t)];
      }
      return;
    }
    const int slack = active_.front();
    for (int t = 0; t < horizon(); ++t) {
      if (prior_.a[static_cast<std::size_t>(t)] == 0) continue;
      auto eta = state_.latent.eta_at(t);
      for (int j : active_) {
        if (j == slack) continue;
        const std::vector<double> lm = count_conditional_log_mass(t, j);
        const int total = eta[static_cast<std::size_t>(j)] + eta[static_cast<std::size_t>(slack)];
        const int x = sample_categorical_log(lm, rng_);
        if (x < 0) throw std::runtime_error("update_counts: empty support at time " + std::to_string(t + 1));
        eta[static_cast<std::size_t>(j)] = x;
        eta[static_cast<std::size_t>(slack)] = total - x;
      }
    }
  }

  std::vector<double> omega_posterior_parameters() const {
    std::vector<double> alpha(static_cast<std::size_t>(k_), 0.0);
    for (int j : active_) alpha[static_cast<std::size_t>(j)] = base_[static_cast<std::size_t>(j)];
    for (int t = 0; t < horizon(); ++t) {
      const auto eta = state_.latent.eta_at(t);
      for (int j : active_) alpha[static_cast<std::size_t>(j)] += eta[static_cast<std::size_t>(j)];
    }
    return alpha;
  }

  // (d)
  void update_omega() { sample_dirichlet(omega_posterior_parameters(), state_.latent.omega, rng_); }

  /// log f(theta | rest) up to a constant: gamma prior plus the log-likelihood
  /// of the observations allocated to (t, j).
  double theta_log_target(int t, int j, double theta) const {
    const auto ju = static_cast<std::size_t>(j);
    double lp = (prior_.d[ju] - 1.0) * std::log(theta) - state_.betas[ju] * theta;
    const auto& z = state_.z[static_cast<std::size_t>(t)];
    const auto& slice = data_.slices[static_cast<std::size_t>(t)];
    const ClaytonTheta th(theta);
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (z[i] == j) lp += rotated_log_density(rotations_[ju], slice.row(i), th);
    }
    return lp;
  }

  // (e) gamma random walk: theta* ~ Ga(kappa, kappa/theta), out-of-range proposals rejected.
  void update_thetas() {
    const double kappa = state_.kappa;
    std::vector<std::size_t> members;
    for (int t = 0; t < horizon(); ++t) {
      const auto& z = state_.z[static_cast<std::size_t>(t)];
      const auto& slice = data_.slices[static_cast<std::size_t>(t)];
      auto& cache = log_f_[static_cast<std::size_t>(t)];
      for (int j : active_) {
        const auto ju = static_cast<std::size_t>(j);
        members.clear();
        for (std::size_t i = 0; i < z.size(); ++i) {
          if (z[i] == j) members.push_back(i);
        }
        double& theta = state_.theta_at(t)[ju];
        const double proposal = sample_gamma(kappa, kappa / theta, rng_);
        ++state_.batch_proposals;
        if (!mcmc_.theta_bounds.contains(proposal)) continue;

        double ll_current = 0.0;
        double ll_proposal = 0.0;
        bool finite = true;
        const ClaytonTheta th_new(proposal);
        for (std::size_t i : members) {
          ll_current += cache[i * static_cast<std::size_t>(k_) + ju];
          try {
            ll_proposal += rotated_log_density(rotations_[ju], slice.row(i), th_new);
          } catch (const BoundaryError&) {
            finite = false;
            break;
          }
        }
        if (!finite) continue;
        const double log_prior_ratio =
            (prior_.d[ju] - 1.0) * (std::log(proposal) - std::log(theta)) - state_.betas[ju] * (proposal - theta);
        const double log_q_ratio =
            log_gamma_density(theta, kappa, kappa / proposal) - log_gamma_density(proposal, kappa, kappa / theta);
        const double log_alpha = ll_proposal - ll_current + log_prior_ratio + log_q_ratio;
        if (std::log(uniform_open(rng_)) < log_alpha) {
          theta = proposal;
          ++state_.batch_accepts;
          refresh_column(t, j);
        }
      }
    }
  }

  /// (shape, rate) of the beta_j full conditional: Ga(e_j + T d_j, g_j + sum_t theta_{t,j}).
  std::pair<double, double> beta_posterior_parameters(int j) const {
    const auto ju = static_cast<std::size_t>(j);
    double sum_theta = 0.0;
    for (int t = 0; t < horizon(); ++t) sum_theta += state_.theta_at(t)[ju];
    return {prior_.e[ju] + horizon() * prior_.d[ju], prior_.g[ju] + sum_theta};
  }

  // (f)
  void update_betas() {
    for (int j : active_) {
      const auto [shape, rate] = beta_posterior_parameters(j);
      state_.betas[static_cast<std::size_t>(j)] = sample_gamma(shape, rate, rng_);
    }
  }

  /// One systematic scan, followed by kappa adaptation at batch boundaries.
  void step() {
    update_allocations();
    update_weights();
    update_counts();
    update_omega();
    update_thetas();
    update_betas();
    ++state_.iteration;
    if (state_.iteration % mcmc_.batch_size == 0) {
      const int batch = state_.iteration / mcmc_.batch_size;
      const double rate = state_.batch_proposals > 0
                              ? static_cast<double>(state_.batch_accepts) / static_cast<double>(state_.batch_proposals)
                              : 0.0;
      diagnostics_.push_back({chain_id_, batch, state_.kappa, rate});
      state_.kappa = adapt_kappa(state_.kappa, rate, batch, mcmc_);
      state_.batch_accepts = 0;
      state_.batch_proposals = 0;
    }
  }

  /// Runs the configured number of iterations and returns post-burn-in draws.
  PosteriorDraws run() {
    PosteriorDraws draws;
    draws.m = prior_.m;
    draws.horizon = horizon();
    draws.components = k_;
    const auto kept = static_cast<std::size_t>(mcmc_.iterations - mcmc_.burn_in);
    const std::size_t per_time = static_cast<std::size_t>(horizon() * k_);
    draws.iteration.reserve(kept);
    draws.chain.reserve(kept);
    draws.pis.reserve(kept * per_time);
    draws.thetas.reserve(kept * per_time);
    draws.eta.reserve(kept * per_time);
    draws.omega.reserve(kept * static_cast<std::size_t>(k_));
    draws.betas.reserve(kept * static_cast<std::size_t>(k_));
    while (state_.iteration < mcmc_.iterations) {
      step();
      if (state_.iteration > mcmc_.burn_in) {
        draws.iteration.push_back(state_.iteration);
        draws.chain.push_back(chain_id_);
        const auto& lat = state_.latent;
        draws.pis.insert(draws.pis.end(), lat.pis.begin(), lat.pis.end());
        draws.thetas.insert(draws.thetas.end(), state_.thetas.begin(), state_.thetas.end());
        draws.eta.insert(draws.eta.end(), lat.eta.begin(), lat.eta.end());
        draws.omega.insert(draws.omega.end(), lat.omega.begin(), lat.omega.end());
        draws.betas.insert(draws.betas.end(), state_.betas.begin(), state_.betas.end());
      }
    }
    draws.diagnostics = diagnostics_;
    draws.provenance.seed = mcmc_.seed;
    draws.provenance.iterations = mcmc_.iterations;
    draws.provenance.burn_in = mcmc_.burn_in;
    return draws;
  }

 private:
  int horizon() const { return data_.horizon(); }

  double count_log_weight(int t, int j) const {
    const auto ju = static_cast<std::size_t>(j);
    double lw = std::log(state_.latent.omega[ju]);
    for (int l : lags_.inverse(t)) lw += std::log(state_.latent.pi_at(l)[ju]);
    return lw;
  }

  void refresh_column(int t, int j) {
    const auto ju = static_cast<std::size_t>(j);
    const auto& slice = data_.slices[static_cast<std::size_t>(t)];
    auto& cache = log_f_[static_cast<std::size_t>(t)];
    const ClaytonTheta th(state_.theta_at(t)[ju]);
    for (std::size_t i = 0; i < slice.size(); ++i) {
      double v = 0.0;
      try {
        v = rotated_log_density(rotations_[ju], slice.row(i), th);
      } catch (const BoundaryError&) {
        v = std::numeric_limits<double>::quiet_NaN();
      }
      if (!std::isfinite(v)) {
        throw std::runtime_error("non-finite log-likelihood for observation " + std::to_string(i + 1) +
                                 " at time " + std::to_string(t + 1) + " under rotation " +
                                 rotations_[ju].to_string());
      }
      cache[i * static_cast<std::size_t>(k_) + ju] = v;
    }
  }

  void initialize() {
    const int horizon = this->horizon();
    state_.latent = LatentState(horizon, k_);
    state_.thetas.assign(static_cast<std::size_t>(horizon * k_), mcmc_.theta_bounds.clamp(1.0));
    state_.betas.assign(static_cast<std::size_t>(k_), 0.0);
    for (int j = 0; j < k_; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      state_.betas[ju] = prior_.e[ju] / prior_.g[ju];
    }
    state_.kappa = mcmc_.kappa_init;

    const double a0 = prior_.a0;
    for (int j : active_) {
      const auto ju = static_cast<std::size_t>(j);
      state_.latent.omega[ju] = base_[ju] / a0;
    }
    const double uniform = 1.0 / static_cast<double>(active_.size());
    for (int t = 0; t < horizon; ++t) {
      auto pi = state_.latent.pi_at(t);
      for (int j : active_) pi[static_cast<std::size_t>(j)] = uniform;
      initial_counts(t);
    }

    log_f_.assign(static_cast<std::size_t>(horizon), {});
    state_.z.assign(static_cast<std::size_t>(horizon), {});
    for (int t = 0; t < horizon; ++t) {
      const auto n = data_.slices[static_cast<std::size_t>(t)].size();
      log_f_[static_cast<std::size_t>(t)].assign(n * static_cast<std::size_t>(k_),
                                                 -std::numeric_limits<double>::infinity());
      state_.z[static_cast<std::size_t>(t)].assign(n, active_.front());
    }
    refresh_likelihood_cache();
    update_allocations();
  }

  // eta_t = a_t omega rounded by largest remainders so it sums to a_t exactly.
  void initial_counts(int t) {
    const int at = prior_.a[static_cast<std::size_t>(t)];
    auto eta = state_.latent.eta_at(t);
    std::vector<std::pair<double, int>> remainders;
    int assigned = 0;
    for (int j : active_) {
      const double target = at * state_.latent.omega[static_cast<std::size_t>(j)];
      const int whole = static_cast<int>(std::floor(target));
      eta[static_cast<std::size_t>(j)] = whole;
      assigned += whole;
      remainders.emplace_back(target - whole, j);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (std::size_t q = 0; assigned < at; ++q, ++assigned) {
      ++eta[static_cast<std::size_t>(remainders[q % remainders.size()].second)];
    }
  }

  PanelData data_;
  PriorConfig prior_;
  LagStructure lags_;
  McmcConfig mcmc_;
  int chain_id_ = 0;
  Rng rng_;
  int k_ = 0;
  std::vector<int> active_;
  std::vector<double> base_;
  std::vector<RotationIndex> rotations_;
  ChainState state_;
  std::vector<std::vector<double>> log_f_;  // per t: n_t x K component log-densities
  std::vector<BatchDiagnostic> diagnostics_;
  std::size_t allocation_fallbacks_ = 0;
};

inline PosteriorDraws run_chain(const PanelData& data, const PriorConfig& prior, const LagStructure& lags,
                                const McmcConfig& mcmc, int chain_id = 0) {
  GibbsSampler sampler(data, prior, lags, mcmc, chain_id);
  return sampler.run();
}

/// Runs mcmc.chains independent chains concurrently (one worker each, streams
/// seeded by (seed, chain)) and concatenates their draws in chain order.
inline PosteriorDraws run_chains(const PanelData& data, const PriorConfig& prior, const LagStructure& lags,
                                 const McmcConfig& mcmc) {
  mcmc.validate();
  const auto n = static_cast<std::size_t>(mcmc.chains);
  if (n == 1) return run_chain(data, prior, lags, mcmc, 0);
  std::vector<PosteriorDraws> results(n);
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> workers;
    workers.reserve(n);
    for (std::size_t c = 0; c < n; ++c) {
      workers.emplace_back([&, c] {
        try {
          results[c] = run_chain(data, prior, lags, mcmc, static_cast<int>(c));
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  PosteriorDraws merged;
  for (const auto& r : results) merged.append(r);
  return merged;
}

}  // namespace rotamix
