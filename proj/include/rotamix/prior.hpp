#pragma once

// Dependent Dirichlet prior on the time-indexed mixture weights:
//   omega ~ Dir(a0 p),  eta_t | omega ~ Mult(a_t, omega),
//   pi_t | eta ~ Dir(a0 p + sum_{k in lags(t)} eta_k).
// Times are 0-based internally; files and the CLI use 1-based times.

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rotamix/random.hpp"
#include "rotamix/rotation.hpp"

namespace rotamix {

/// Lag sets lags(t) (always containing t, never reaching past the first time)
/// and their inverses inverse(l) = {t : l in lags(t)}.
class LagStructure {
 public:
  LagStructure() = default;

  /// Union of the moving-average set {t, t-1, ..., t-q} and the seasonal set
  /// {t, t-s, ..., t-p s}, truncated at the first time.
  static LagStructure build(int horizon, int ma_order, int seasonal_order, int period) {
    if (horizon < 1) throw std::invalid_argument("LagStructure: horizon must be >= 1");
    if (ma_order < 0 || seasonal_order < 0) throw std::invalid_argument("LagStructure: orders must be >= 0");
    if (period < 1) throw std::invalid_argument("LagStructure: period must be >= 1");
    std::vector<std::vector<int>> sets(static_cast<std::size_t>(horizon));
    for (int t = 0; t < horizon; ++t) {
      auto& set = sets[static_cast<std::size_t>(t)];
      for (int k = 0; k <= ma_order && t - k >= 0; ++k) set.push_back(t - k);
      for (int k = 1; k <= seasonal_order && t - k * period >= 0; ++k) set.push_back(t - k * period);
    }
    LagStructure out = from_sets(std::move(sets));
    out.ma_order_ = ma_order;
    out.seasonal_order_ = seasonal_order;
    out.period_ = period;
    return out;
  }

  /// Arbitrary lag sets; each must contain its own time and only earlier times.
  static LagStructure from_sets(std::vector<std::vector<int>> sets) {
    LagStructure out;
    const int horizon = static_cast<int>(sets.size());
    out.lags_ = std::move(sets);
    out.inverse_.assign(out.lags_.size(), {});
    for (int t = 0; t < horizon; ++t) {
      auto& set = out.lags_[static_cast<std::size_t>(t)];
      std::sort(set.begin(), set.end());
      set.erase(std::unique(set.begin(), set.end()), set.end());
      if (!std::binary_search(set.begin(), set.end(), t)) {
        throw std::invalid_argument("LagStructure: lag set of time " + std::to_string(t + 1) +
                                    " does not contain that time");
      }
      if (set.front() < 0 || set.back() > t) {
        throw std::invalid_argument("LagStructure: lag set of time " + std::to_string(t + 1) +
                                    " reaches outside [1, t]");
      }
      for (int l : set) out.inverse_[static_cast<std::size_t>(l)].push_back(t);
    }
    return out;
  }

  int horizon() const { return static_cast<int>(lags_.size()); }
  const std::vector<int>& lags(int t) const { return lags_.at(static_cast<std::size_t>(t)); }
  const std::vector<int>& inverse(int t) const { return inverse_.at(static_cast<std::size_t>(t)); }
  bool contains(int t, int l) const {
    const auto& set = lags(t);
    return std::binary_search(set.begin(), set.end(), l);
  }
  int ma_order() const { return ma_order_; }
  int seasonal_order() const { return seasonal_order_; }
  int period() const { return period_; }

  /// The same lag rule restricted to the first `horizon` times.
  LagStructure truncated(int horizon) const {
    if (horizon < 1 || horizon > this->horizon()) throw std::invalid_argument("LagStructure: bad truncation");
    LagStructure out = from_sets(std::vector<std::vector<int>>(lags_.begin(), lags_.begin() + horizon));
    out.ma_order_ = ma_order_;
    out.seasonal_order_ = seasonal_order_;
    out.period_ = period_;
    return out;
  }

 private:
  std::vector<std::vector<int>> lags_;
  std::vector<std::vector<int>> inverse_;
  int ma_order_ = 0;
  int seasonal_order_ = 0;
  int period_ = 1;
};

inline LagStructure build_lag_sets(int horizon, int ma_order, int seasonal_order, int period) {
  return LagStructure::build(horizon, ma_order, seasonal_order, period);
}

/// Hyperparameters of the weight prior and of the hierarchical gamma prior on
/// the dependence parameters (theta_{t,j} ~ Ga(d_j, beta_j), beta_j ~ Ga(e_j, g_j)).
///
/// `mask` optionally restricts the mixture to a subset of rotations; masked-out
/// rotations have weight zero everywhere and the base measure is renormalised
/// over the remaining ones. A single active rotation is the plain time-varying
/// copula with weight fixed at one.
struct PriorConfig {
  int m = 2;
  double a0 = 1.0;
  std::vector<double> p;
  std::vector<int> a;
  std::vector<double> d;
  std::vector<double> e;
  std::vector<double> g;
  std::vector<bool> mask;

  /// a0 = 1, uniform p, constant a_t, d = e = g = 1.
  static PriorConfig standard(int m, int horizon, int at) {
    const auto k = static_cast<std::size_t>(component_count(m));
    PriorConfig cfg;
    cfg.m = m;
    cfg.a0 = 1.0;
    cfg.p.assign(k, 1.0 / static_cast<double>(k));
    cfg.a.assign(static_cast<std::size_t>(horizon), at);
    cfg.d.assign(k, 1.0);
    cfg.e.assign(k, 1.0);
    cfg.g.assign(k, 1.0);
    return cfg;
  }

  int components() const { return component_count(m); }
  int horizon() const { return static_cast<int>(a.size()); }

  bool active(int j) const { return mask.empty() || mask.at(static_cast<std::size_t>(j)); }

  std::vector<int> active_components() const {
    std::vector<int> out;
    for (int j = 0; j < components(); ++j) {
      if (active(j)) out.push_back(j);
    }
    return out;
  }

  /// a0 p restricted to the active rotations (zero elsewhere).
  std::vector<double> base_measure() const {
    std::vector<double> out(static_cast<std::size_t>(components()), 0.0);
    double total = 0.0;
    for (int j : active_components()) total += p[static_cast<std::size_t>(j)];
    for (int j : active_components()) {
      out[static_cast<std::size_t>(j)] = a0 * p[static_cast<std::size_t>(j)] / total;
    }
    return out;
  }

  /// Same prior over a shorter horizon (for fits on an initial window).
  PriorConfig truncated(int horizon) const {
    if (horizon < 1 || horizon > this->horizon()) throw std::invalid_argument("PriorConfig: bad truncation");
    PriorConfig out = *this;
    out.a.resize(static_cast<std::size_t>(horizon));
    return out;
  }

  void validate() const {
    if (m < 2 || m > kMaxDimension) throw std::invalid_argument("PriorConfig: bad dimension");
    const auto k = static_cast<std::size_t>(components());
    if (!(a0 > 0.0) || !std::isfinite(a0)) throw std::invalid_argument("PriorConfig: a0 must be positive");
    if (p.size() != k || d.size() != k || e.size() != k || g.size() != k) {
      throw std::invalid_argument("PriorConfig: p, d, e, g need " + std::to_string(k) + " entries");
    }
    if (!mask.empty() && mask.size() != k) throw std::invalid_argument("PriorConfig: mask size mismatch");
    if (active_components().empty()) throw std::invalid_argument("PriorConfig: mask removes every rotation");
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (!(p[j] > 0.0)) throw std::invalid_argument("PriorConfig: base measure entries must be positive");
      if (!(d[j] > 0.0) || !(e[j] > 0.0) || !(g[j] > 0.0)) {
        throw std::invalid_argument("PriorConfig: gamma hyperparameters must be positive");
      }
      total += p[j];
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("PriorConfig: p must sum to one");
    for (int at : a) {
      if (at < 0) throw std::invalid_argument("PriorConfig: a_t must be nonnegative");
    }
  }
};

/// omega, the per-time counts eta_t and the weights pi_t (row-major T x K).
struct LatentState {
  int horizon = 0;
  int components = 0;
  std::vector<double> omega;
  std::vector<int> eta;
  std::vector<double> pis;

  LatentState() = default;
  LatentState(int horizon_, int components_)
      : horizon(horizon_),
        components(components_),
        omega(static_cast<std::size_t>(components_), 0.0),
        eta(static_cast<std::size_t>(horizon_ * components_), 0),
        pis(static_cast<std::size_t>(horizon_ * components_), 0.0) {}

  std::span<int> eta_at(int t) {
    return {eta.data() + static_cast<std::size_t>(t * components), static_cast<std::size_t>(components)};
  }
  std::span<const int> eta_at(int t) const {
    return {eta.data() + static_cast<std::size_t>(t * components), static_cast<std::size_t>(components)};
  }
  std::span<double> pi_at(int t) {
    return {pis.data() + static_cast<std::size_t>(t * components), static_cast<std::size_t>(components)};
  }
  std::span<const double> pi_at(int t) const {
    return {pis.data() + static_cast<std::size_t>(t * components), static_cast<std::size_t>(components)};
  }
};

/// sum_{k in lags(t)} eta_k, excluding time `skip` when it is >= 0.
inline std::vector<int> pooled_counts(const LatentState& state, const LagStructure& lags, int t, int skip = -1) {
  std::vector<int> out(static_cast<std::size_t>(state.components), 0);
  for (int k : lags.lags(t)) {
    if (k == skip) continue;
    const auto eta = state.eta_at(k);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += eta[j];
  }
  return out;
}

/// Forward simulation of (omega, eta, pi) from the prior.
template <class URBG>
LatentState sample_prior_path(const PriorConfig& cfg, const LagStructure& lags, URBG& rng) {
  cfg.validate();
  if (lags.horizon() != cfg.horizon()) throw std::invalid_argument("sample_prior_path: horizon mismatch");
  const int horizon = cfg.horizon();
  const int k = cfg.components();
  const std::vector<double> base = cfg.base_measure();
  LatentState state(horizon, k);
  sample_dirichlet(base, state.omega, rng);
  for (int t = 0; t < horizon; ++t) {
    sample_multinomial(cfg.a[static_cast<std::size_t>(t)], state.omega, state.eta_at(t), rng);
  }
  std::vector<double> alpha(static_cast<std::size_t>(k));
  for (int t = 0; t < horizon; ++t) {
    const std::vector<int> pooled = pooled_counts(state, lags, t);
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      alpha[j] = base[j] > 0.0 ? base[j] + pooled[j] : 0.0;
    }
    sample_dirichlet(alpha, state.pi_at(t), rng);
  }
  return state;
}

/// Closed-form Corr(pi_{t,j}, pi_{r,j}), identical for every j:
/// {a0 A_{t&r} + A_t A_r} / {(a0 + A_t)(a0 + A_r)}, with A_S the sum of a_k over S.
inline double theoretical_correlation(int t, int r, const PriorConfig& cfg, const LagStructure& lags) {
  if (t == r) throw std::domain_error("theoretical_correlation: t and r must differ");
  if (t < 0 || r < 0 || t >= lags.horizon() || r >= lags.horizon() || lags.horizon() != cfg.horizon()) {
    throw std::invalid_argument("theoretical_correlation: time out of range");
  }
  auto total = [&](const std::vector<int>& set) {
    double s = 0.0;
    for (int k : set) s += cfg.a[static_cast<std::size_t>(k)];
    return s;
  };
  const auto& lt = lags.lags(t);
  const auto& lr = lags.lags(r);
  std::vector<int> shared;
  std::set_intersection(lt.begin(), lt.end(), lr.begin(), lr.end(), std::back_inserter(shared));
  const double at = total(lt);
  const double ar = total(lr);
  return (cfg.a0 * total(shared) + at * ar) / ((cfg.a0 + at) * (cfg.a0 + ar));
}

}  // namespace rotamix
