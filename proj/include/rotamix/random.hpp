#pragma once

// Random variate helpers shared by the copula samplers, the prior and the
// Gibbs sampler. Every function takes the random stream explicitly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace rotamix {

using Rng = std::mt19937_64;

/// Uniform draw on the open interval (0,1).
template <class URBG>
double uniform_open(URBG& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  while (u <= 0.0) u = unif(rng);
  return u;
}

/// log of a Gamma(shape, rate 1) variate. Small shapes use the
/// G(a) = G(a+1) U^{1/a} identity so the draw never underflows to zero.
template <class URBG>
double sample_log_gamma(double shape, URBG& rng) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw std::invalid_argument("sample_log_gamma: shape must be positive and finite");
  }
  if (shape >= 1.0) {
    std::gamma_distribution<double> g(shape, 1.0);
    double x = g(rng);
    while (x <= 0.0) x = g(rng);
    return std::log(x);
  }
  std::gamma_distribution<double> g(shape + 1.0, 1.0);
  double x = g(rng);
  while (x <= 0.0) x = g(rng);
  return std::log(x) + std::log(uniform_open(rng)) / shape;
}

/// Gamma variate parameterised by shape and rate (mean shape/rate).
template <class URBG>
double sample_gamma(double shape, double rate, URBG& rng) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw std::invalid_argument("sample_gamma: rate must be positive and finite");
  }
  return std::exp(sample_log_gamma(shape, rng)) / rate;
}

/// log Ga(x | shape, rate).
inline double log_gamma_density(double x, double shape, double rate) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

/// Dirichlet draw. Entries with alpha <= 0 are structurally absent and get 0.
/// The result sums to one up to rounding of the final renormalisation.
template <class URBG>
void sample_dirichlet(std::span<const double> alpha, std::span<double> out, URBG& rng) {
  if (alpha.size() != out.size()) throw std::invalid_argument("sample_dirichlet: size mismatch");
  double max_log = -std::numeric_limits<double>::infinity();
  std::vector<double> logs(alpha.size(), -std::numeric_limits<double>::infinity());
  bool any = false;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    if (alpha[j] > 0.0) {
      logs[j] = sample_log_gamma(alpha[j], rng);
      max_log = std::max(max_log, logs[j]);
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("sample_dirichlet: no positive parameter");
  double total = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    out[j] = alpha[j] > 0.0 ? std::exp(logs[j] - max_log) : 0.0;
    total += out[j];
  }
  for (double& v : out) v /= total;
}

/// Multinomial(n, probs) via sequential conditional binomials.
template <class URBG>
void sample_multinomial(int n, std::span<const double> probs, std::span<int> out, URBG& rng) {
  if (probs.size() != out.size()) throw std::invalid_argument("sample_multinomial: size mismatch");
  if (n < 0) throw std::invalid_argument("sample_multinomial: negative trial count");
  double remaining_mass = std::accumulate(probs.begin(), probs.end(), 0.0);
  int remaining = n;
  std::size_t last = probs.size();
  for (std::size_t j = probs.size(); j-- > 0;) {
    if (probs[j] > 0.0) {
      last = j;
      break;
    }
  }
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (remaining == 0 || probs[j] <= 0.0) {
      out[j] = 0;
      continue;
    }
    if (j == last) {
      out[j] = remaining;
      remaining = 0;
      continue;
    }
    const double p = std::clamp(probs[j] / remaining_mass, 0.0, 1.0);
    std::binomial_distribution<int> b(remaining, p);
    out[j] = b(rng);
    remaining -= out[j];
    remaining_mass -= probs[j];
  }
}

/// Index drawn with probability proportional to exp(log_weights). Entries at
/// -inf are never chosen; returns -1 when every entry is -inf.
template <class URBG>
int sample_categorical_log(std::span<const double> log_weights, URBG& rng) {
  double max_log = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) max_log = std::max(max_log, lw);
  if (!std::isfinite(max_log)) return -1;
  double total = 0.0;
  for (double lw : log_weights) total += std::exp(lw - max_log);
  double target = uniform_open(rng) * total;
  int chosen = -1;
  for (std::size_t j = 0; j < log_weights.size(); ++j) {
    if (!(log_weights[j] > -std::numeric_limits<double>::infinity())) continue;
    chosen = static_cast<int>(j);
    target -= std::exp(log_weights[j] - max_log);
    if (target <= 0.0) break;
  }
  return chosen;
}

/// Index drawn with probability proportional to nonnegative weights.
template <class URBG>
int sample_categorical(std::span<const double> weights, URBG& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) return -1;
  double target = uniform_open(rng) * total;
  int chosen = -1;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] <= 0.0) continue;
    chosen = static_cast<int>(j);
    target -= weights[j];
    if (target <= 0.0) break;
  }
  return chosen;
}

}  // namespace rotamix
