#pragma once

// Time-slice mixture of all 2^m Clayton rotations, its dependence summaries,
// ancestral sampling and the bivariate conditional used for prediction.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rotamix/point_set.hpp"
#include "rotamix/random.hpp"
#include "rotamix/rotation.hpp"

namespace rotamix {

inline constexpr double kSimplexTolerance = 1e-12;

/// Weights and dependence parameters of one time slice, indexed by the
/// canonical rotation code.
struct MixtureParams {
  int m = 2;
  std::vector<double> weights;
  std::vector<double> thetas;

  int components() const { return component_count(m); }

  static MixtureParams uniform(int m, double theta) {
    const auto k = static_cast<std::size_t>(component_count(m));
    return {m, std::vector<double>(k, 1.0 / static_cast<double>(k)), std::vector<double>(k, theta)};
  }

  /// All weight on one rotation.
  static MixtureParams single(int m, unsigned code, double theta) {
    const auto k = static_cast<std::size_t>(component_count(m));
    MixtureParams p{m, std::vector<double>(k, 0.0), std::vector<double>(k, theta)};
    p.weights.at(code) = 1.0;
    return p;
  }

  void validate(const ThetaBounds* bounds = nullptr) const {
    if (m < 2 || m > kMaxDimension) throw std::invalid_argument("MixtureParams: bad dimension");
    const auto k = static_cast<std::size_t>(components());
    if (weights.size() != k || thetas.size() != k) {
      throw std::invalid_argument("MixtureParams: expected " + std::to_string(k) + " weights and thetas");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (!(weights[j] >= 0.0) || !std::isfinite(weights[j])) {
        throw std::invalid_argument("MixtureParams: weight " + std::to_string(j) + " is negative or non-finite");
      }
      total += weights[j];
      if (!std::isfinite(thetas[j]) || thetas[j] < 0.0) {
        throw std::invalid_argument("MixtureParams: theta " + std::to_string(j) + " is invalid");
      }
      if (bounds != nullptr && !bounds->contains(thetas[j])) {
        throw std::invalid_argument("MixtureParams: theta " + std::to_string(j) + " outside the compact range");
      }
    }
    if (std::abs(total - 1.0) > kSimplexTolerance) {
      throw std::invalid_argument("MixtureParams: weights sum to " + std::to_string(total));
    }
  }
};

namespace detail {

inline void check_mixture_dim(std::span<const double> u, const MixtureParams& params) {
  if (static_cast<int>(u.size()) != params.m) {
    throw std::invalid_argument("point dimension " + std::to_string(u.size()) +
                                " does not match mixture dimension " + std::to_string(params.m));
  }
}

}  // namespace detail

inline double mixture_cdf(std::span<const double> u, const MixtureParams& params) {
  detail::check_mixture_dim(u, params);
  double total = 0.0;
  for (int j = 0; j < params.components(); ++j) {
    const double w = params.weights[static_cast<std::size_t>(j)];
    if (w == 0.0) continue;
    total += w * rotated_cdf(RotationIndex(params.m, static_cast<unsigned>(j)), u,
                             ClaytonTheta(params.thetas[static_cast<std::size_t>(j)]));
  }
  return std::clamp(total, 0.0, 1.0);
}

/// log sum_j pi_j f_j(u | theta_j), accumulated with a running log-sum-exp.
inline double mixture_log_density(std::span<const double> u, const MixtureParams& params) {
  detail::check_mixture_dim(u, params);
  double max_v = -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (int j = 0; j < params.components(); ++j) {
    const double w = params.weights[static_cast<std::size_t>(j)];
    if (w <= 0.0) continue;
    const double v = std::log(w) + rotated_log_density(RotationIndex(params.m, static_cast<unsigned>(j)), u,
                                                       ClaytonTheta(params.thetas[static_cast<std::size_t>(j)]));
    if (v > max_v) {
      acc = acc * std::exp(max_v - v) + 1.0;
      max_v = v;
    } else {
      acc += std::exp(v - max_v);
    }
  }
  return max_v + std::log(acc);
}

inline double mixture_density(std::span<const double> u, const MixtureParams& params) {
  return std::exp(mixture_log_density(u, params));
}

/// Pairwise Kendall's tau: sum_j (-1)^{|j|} pi_j theta_j / (2 + theta_j).
inline double mixture_kendall_tau(const MixtureParams& params) {
  double tau = 0.0;
  for (int j = 0; j < params.components(); ++j) {
    tau += params.weights[static_cast<std::size_t>(j)] *
           kendall_tau_component(RotationIndex(params.m, static_cast<unsigned>(j)),
                                 ClaytonTheta(params.thetas[static_cast<std::size_t>(j)]));
  }
  return tau;
}

/// Corner tail coefficients lambda_k = pi_k (m/(m-1))^{-1/theta_k}; only the
/// matching rotation contributes for Clayton.
inline std::vector<double> mixture_tail_coefficients(const MixtureParams& params) {
  std::vector<double> out(static_cast<std::size_t>(params.components()), 0.0);
  for (int k = 0; k < params.components(); ++k) {
    const RotationIndex corner(params.m, static_cast<unsigned>(k));
    double lambda = 0.0;
    for (int j = 0; j < params.components(); ++j) {
      const double w = params.weights[static_cast<std::size_t>(j)];
      if (w == 0.0) continue;
      lambda += w * tail_coefficient(corner, RotationIndex(params.m, static_cast<unsigned>(j)),
                                     ClaytonTheta(params.thetas[static_cast<std::size_t>(j)]), params.m);
    }
    out[static_cast<std::size_t>(k)] = lambda;
  }
  return out;
}

struct MixtureSample {
  PointSet points;
  std::vector<int> labels;
};

/// Ancestral sampling: label ~ pi, then a draw from that rotation.
template <class URBG>
MixtureSample sample_mixture(const MixtureParams& params, std::size_t n, URBG& rng) {
  params.validate();
  MixtureSample out{PointSet(params.m), std::vector<int>(n)};
  out.points.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = sample_categorical(params.weights, rng);
    out.labels[i] = label;
    const RotationIndex j(params.m, static_cast<unsigned>(label));
    auto row = out.points.row(i);
    Clayton::sample(ClaytonTheta(params.thetas[static_cast<std::size_t>(label)]), row, rng);
    for (int l = 0; l < params.m; ++l) {
      double& x = row[static_cast<std::size_t>(l)];
      if (j.bit(l)) x = 1.0 - x;
      x = detail::clamp_unit(x);
    }
  }
  return out;
}

/// Which coordinate of a bivariate mixture is conditioned on.
enum class Given { first, second };

/// P(U_target <= u_target | U_given = u_given) = sum_j pi_j dC_j/du_given,
/// from the closed-form Clayton h-function with flip adjustments.
inline double conditional_cdf(double u_target, double u_given, const MixtureParams& params,
                              Given given = Given::first) {
  if (params.m != 2) throw std::invalid_argument("conditional_cdf: only bivariate mixtures are supported");
  if (!(u_target >= 0.0 && u_target <= 1.0) || !(u_given >= 0.0 && u_given <= 1.0)) {
    throw std::invalid_argument("conditional_cdf: arguments must lie in [0,1]");
  }
  double total = 0.0;
  for (int j = 0; j < 4; ++j) {
    const double w = params.weights[static_cast<std::size_t>(j)];
    if (w == 0.0) continue;
    // C_{j1 j2}(u1, u2) = C_{j2 j1}(u2, u1) for an exchangeable base copula.
    const bool first_bit = (j & 1) != 0;
    const bool second_bit = (j & 2) != 0;
    const bool given_flip = given == Given::first ? first_bit : second_bit;
    const bool target_flip = given == Given::first ? second_bit : first_bit;
    const double a = given_flip ? 1.0 - u_given : u_given;
    const double b = target_flip ? 1.0 - u_target : u_target;
    const double h = Clayton::h_function(b, a, ClaytonTheta(params.thetas[static_cast<std::size_t>(j)]));
    total += w * (target_flip ? 1.0 - h : h);
  }
  return std::clamp(total, 0.0, 1.0);
}

/// Inverse of conditional_cdf in the target argument, by bisection.
inline double conditional_quantile(double prob, double u_given, const MixtureParams& params,
                                   Given given = Given::first) {
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("conditional_quantile: prob outside [0,1]");
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (conditional_cdf(mid, u_given, params, given) < prob) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline constexpr int kPredictiveNodes = 512;

/// E(U_target | u_given) = int_0^1 {1 - F(v | u_given)} dv by the midpoint rule.
inline double predictive_mean(double u_given, const MixtureParams& params, Given given = Given::first,
                              int nodes = kPredictiveNodes) {
  if (nodes < 1) throw std::invalid_argument("predictive_mean: need at least one node");
  double total = 0.0;
  const double step = 1.0 / static_cast<double>(nodes);
  for (int k = 0; k < nodes; ++k) {
    const double v = (static_cast<double>(k) + 0.5) * step;
    total += 1.0 - conditional_cdf(v, u_given, params, given);
  }
  return total * step;
}

}  // namespace rotamix
