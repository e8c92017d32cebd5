#pragma once

// Clayton copula mathematics in m dimensions and its 2^m corner rotations.
//
// A rotation j in {0,1}^m flips coordinate l (u_l -> 1 - u_l) wherever
// j_l = 1, moving the dependence of the base copula to corner j. Rotated
// CDFs are built by inclusion-exclusion over the flipped coordinates using
// lower-dimensional margins of the base family; rotated densities are the
// base density at the flipped point.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rotamix/point_set.hpp"
#include "rotamix/random.hpp"

namespace rotamix {

/// Below this value the Clayton parameter is treated as the independence limit.
inline constexpr double kIndependenceThreshold = 1e-6;
/// Coordinates are clamped to [eps, 1 - eps] before density evaluation.
inline constexpr double kBoundaryEpsilon = 1e-10;
inline constexpr int kMaxDimension = 16;

/// Raised when a log-density is not finite at a boundary point.
class BoundaryError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Compact support for the dependence parameter.
struct ThetaBounds {
  double lo = 1e-4;
  double hi = 50.0;

  bool contains(double theta) const { return theta >= lo && theta <= hi; }
  double clamp(double theta) const { return std::clamp(theta, lo, hi); }
  void validate() const {
    if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi)) {
      throw std::invalid_argument("ThetaBounds: require 0 < lo < hi < inf");
    }
  }
};

/// Corner / rotation identifier j in {0,1}^m. Bit l of `code` is j_{l+1}, so
/// codes 0, 1, ..., 2^m - 1 enumerate 00..0, 10..0, 01..0, ..., 11..1.
class RotationIndex {
 public:
  RotationIndex(int m, unsigned code) : m_(m), code_(code) {
    if (m < 2 || m > kMaxDimension) {
      throw std::invalid_argument("RotationIndex: dimension must be in [2, " +
                                  std::to_string(kMaxDimension) + "]");
    }
    if (code >= (1u << m)) throw std::invalid_argument("RotationIndex: code out of range");
  }

  /// Parses a bit string such as "101" (first character is coordinate 1).
  static RotationIndex parse(const std::string& bits) {
    unsigned code = 0;
    for (std::size_t l = 0; l < bits.size(); ++l) {
      if (bits[l] == '1') {
        code |= 1u << l;
      } else if (bits[l] != '0') {
        throw std::invalid_argument("RotationIndex: invalid bit string '" + bits + "'");
      }
    }
    return RotationIndex(static_cast<int>(bits.size()), code);
  }

  int dim() const { return m_; }
  unsigned code() const { return code_; }
  bool bit(int l) const { return ((code_ >> l) & 1u) != 0; }
  int ones() const { return std::popcount(code_); }
  int parity() const { return ones() % 2; }

  std::string to_string() const {
    std::string s(static_cast<std::size_t>(m_), '0');
    for (int l = 0; l < m_; ++l) {
      if (bit(l)) s[static_cast<std::size_t>(l)] = '1';
    }
    return s;
  }

  friend bool operator==(const RotationIndex&, const RotationIndex&) = default;

 private:
  int m_;
  unsigned code_;
};

inline int component_count(int m) { return 1 << m; }

/// The full index set in canonical (binary counting) order.
inline std::vector<RotationIndex> all_rotations(int m) {
  std::vector<RotationIndex> out;
  out.reserve(static_cast<std::size_t>(component_count(m)));
  for (unsigned c = 0; c < (1u << m); ++c) out.emplace_back(m, c);
  return out;
}

/// Rotations with exactly k ones.
inline std::vector<RotationIndex> rotations_with_ones(int m, int k) {
  std::vector<RotationIndex> out;
  for (unsigned c = 0; c < (1u << m); ++c) {
    if (std::popcount(c) == k) out.emplace_back(m, c);
  }
  return out;
}

/// Clayton dependence parameter. Nonnegative and finite; values below the
/// independence threshold select the product copula.
class ClaytonTheta {
 public:
  explicit ClaytonTheta(double value) : value_(value) {
    if (!std::isfinite(value) || value < 0.0) {
      throw std::invalid_argument("ClaytonTheta: value must be finite and nonnegative, got " +
                                  std::to_string(value));
    }
  }
  double value() const { return value_; }
  bool independent() const { return value_ < kIndependenceThreshold; }

 private:
  double value_;
};

namespace detail {

inline void check_unit_point(std::span<const double> u) {
  if (u.empty()) throw std::invalid_argument("unit point has no coordinates");
  for (double x : u) {
    if (!std::isfinite(x)) throw std::invalid_argument("unit point has a non-finite coordinate");
    if (x < 0.0 || x > 1.0) {
      throw std::invalid_argument("unit point coordinate " + std::to_string(x) + " outside [0,1]");
    }
  }
}

inline double clamp_unit(double x) { return std::clamp(x, kBoundaryEpsilon, 1.0 - kBoundaryEpsilon); }

/// log(1 + sum_l (exp(x_l) - 1)) for x_l >= 0, stable for both tiny and huge x.
inline double log_clayton_sum(std::span<const double> x) {
  double max_x = 0.0;
  for (double v : x) max_x = std::max(max_x, v);
  if (max_x < 30.0) {
    double s = 0.0;
    for (double v : x) s += std::expm1(v);
    return std::log1p(s);
  }
  double s = -static_cast<double>(x.size() - 1) * std::exp(-max_x);
  for (double v : x) s += std::exp(v - max_x);
  return max_x + std::log(s);
}

inline double softplus(double y) { return y > 0.0 ? y + std::log1p(std::exp(-y)) : std::log1p(std::exp(y)); }

}  // namespace detail

/// Clayton family descriptor. The rotation layer is written against this
/// interface so other Archimedean families can provide the same members.
struct Clayton {
  using Parameter = ClaytonTheta;

  /// {sum_l (u_l^-theta - 1) + 1}^(-1/theta); the product in the independence limit.
  static double cdf(std::span<const double> u, Parameter theta) {
    detail::check_unit_point(u);
    if (u.size() == 1) return u[0];
    if (theta.independent()) {
      double p = 1.0;
      for (double x : u) p *= x;
      return p;
    }
    const double th = theta.value();
    double s = 0.0;
    for (double x : u) {
      if (x == 0.0) return 0.0;
      s += std::expm1(-th * std::log(x));
    }
    if (!std::isfinite(s)) return 0.0;
    return std::exp(-std::log1p(s) / th);
  }

  /// Log density; coordinates are clamped to [eps, 1 - eps].
  static double log_density(std::span<const double> u, Parameter theta) {
    detail::check_unit_point(u);
    if (theta.independent() || u.size() == 1) return 0.0;
    const double th = theta.value();
    const auto m = u.size();
    if (m > static_cast<std::size_t>(kMaxDimension)) throw std::invalid_argument("dimension exceeds limit");
    std::array<double, kMaxDimension> x{};
    double neg_log_sum = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
      const double nl = -std::log(detail::clamp_unit(u[l]));
      neg_log_sum += nl;
      x[l] = th * nl;
    }
    const double log_s = detail::log_clayton_sum(std::span<const double>(x.data(), m));
    double log_f = -(1.0 / th + static_cast<double>(m)) * log_s + (th + 1.0) * neg_log_sum;
    for (std::size_t i = 1; i < m; ++i) log_f += std::log1p(static_cast<double>(i) * th);
    if (!std::isfinite(log_f)) {
      throw BoundaryError("Clayton log-density is not finite at theta=" + std::to_string(th));
    }
    return log_f;
  }

  static double kendall_tau(Parameter theta) { return theta.value() / (2.0 + theta.value()); }

  /// Corner tail coefficient of the unrotated copula at its own corner:
  /// (m/(m-1))^(-1/theta).
  static double tail_dependence(int m, Parameter theta) {
    if (!(theta.value() > 0.0)) {
      throw std::domain_error("tail coefficient is undefined for theta <= 0");
    }
    const double md = static_cast<double>(m);
    return std::pow(md / (md - 1.0), -1.0 / theta.value());
  }

  /// h(v | u) = dC(u, v)/du for the bivariate copula.
  static double h_function(double v, double u, Parameter theta) {
    if (v <= 0.0) return 0.0;
    if (v >= 1.0) return 1.0;
    if (theta.independent()) return v;
    const double th = theta.value();
    const double nlu = -std::log(detail::clamp_unit(u));
    const double nlv = -std::log(v);
    const std::array<double, 2> x{th * nlu, th * nlv};
    const double log_s = detail::log_clayton_sum(x);
    const double log_h = (th + 1.0) * nlu - (1.0 / th + 1.0) * log_s;
    return std::clamp(std::exp(log_h), 0.0, 1.0);
  }

  /// Marshall-Olkin frailty draw: V ~ Gamma(1/theta, 1), E_l ~ Exp(1),
  /// U_l = (1 + E_l / V)^(-1/theta), computed on the log scale.
  template <class URBG>
  static void sample(Parameter theta, std::span<double> out, URBG& rng) {
    if (theta.independent()) {
      for (double& x : out) x = uniform_open(rng);
      return;
    }
    const double th = theta.value();
    const double log_v = sample_log_gamma(1.0 / th, rng);
    std::exponential_distribution<double> expo(1.0);
    for (double& x : out) {
      const double e = expo(rng);
      const double y = std::log(e) - log_v;
      x = std::exp(-detail::softplus(y) / th);
    }
  }
};

/// Flipped point: u_l -> 1 - u_l where j_l = 1.
inline std::vector<double> flip_point(const RotationIndex& j, std::span<const double> u) {
  if (static_cast<int>(u.size()) != j.dim()) {
    throw std::invalid_argument("rotation dimension " + std::to_string(j.dim()) +
                                " does not match point dimension " + std::to_string(u.size()));
  }
  std::vector<double> out(u.begin(), u.end());
  for (int l = 0; l < j.dim(); ++l) {
    if (j.bit(l)) out[static_cast<std::size_t>(l)] = 1.0 - out[static_cast<std::size_t>(l)];
  }
  return out;
}

/// CDF of the rotation j of the base family: inclusion-exclusion over the
/// subsets A of flipped coordinates, using the margin on (unflipped + A)
/// evaluated at the flipped point.
template <class Family = Clayton>
double rotated_cdf(const RotationIndex& j, std::span<const double> u, typename Family::Parameter theta) {
  detail::check_unit_point(u);
  const std::vector<double> flipped = flip_point(j, u);
  const int m = j.dim();
  std::vector<int> flips;
  for (int l = 0; l < m; ++l) {
    if (j.bit(l)) flips.push_back(l);
  }
  const unsigned subsets = 1u << flips.size();
  std::vector<double> margin;
  margin.reserve(static_cast<std::size_t>(m));
  double total = 0.0;
  for (unsigned a = 0; a < subsets; ++a) {
    margin.clear();
    std::size_t f = 0;
    for (int l = 0; l < m; ++l) {
      if (f < flips.size() && flips[f] == l) {
        if ((a >> f) & 1u) margin.push_back(flipped[static_cast<std::size_t>(l)]);
        ++f;
      } else {
        margin.push_back(flipped[static_cast<std::size_t>(l)]);
      }
    }
    const int kept_flips = std::popcount(a);
    const double c = margin.empty() ? 1.0 : Family::cdf(margin, theta);
    total += (kept_flips % 2 == 0) ? c : -c;
  }
  return std::clamp(total, 0.0, 1.0);
}

template <class Family = Clayton>
double rotated_log_density(const RotationIndex& j, std::span<const double> u,
                           typename Family::Parameter theta) {
  const auto m = static_cast<std::size_t>(j.dim());
  if (u.size() != m) {
    throw std::invalid_argument("rotation dimension " + std::to_string(m) +
                                " does not match point dimension " + std::to_string(u.size()));
  }
  std::array<double, kMaxDimension> flipped{};
  for (std::size_t l = 0; l < m; ++l) flipped[l] = j.bit(static_cast<int>(l)) ? 1.0 - u[l] : u[l];
  return Family::log_density(std::span<const double>(flipped.data(), m), theta);
}

template <class Family = Clayton>
double rotated_density(const RotationIndex& j, std::span<const double> u, typename Family::Parameter theta) {
  return std::exp(rotated_log_density<Family>(j, u, theta));
}

/// Tail coefficient of rotation `rotation` at corner `corner`: nonzero only
/// where they coincide.
template <class Family = Clayton>
double tail_coefficient(const RotationIndex& corner, const RotationIndex& rotation,
                        typename Family::Parameter theta, int m) {
  if (corner.dim() != m || rotation.dim() != m) {
    throw std::invalid_argument("tail_coefficient: dimension mismatch");
  }
  if (!(theta.value() > 0.0)) throw std::domain_error("tail coefficient is undefined for theta <= 0");
  if (corner != rotation) return 0.0;
  return Family::tail_dependence(m, theta);
}

template <class Family = Clayton>
double kendall_tau_component(const RotationIndex& j, typename Family::Parameter theta) {
  const double tau = Family::kendall_tau(theta);
  return j.parity() == 0 ? tau : -tau;
}

/// n draws from the rotation j, clamped to [eps, 1 - eps].
template <class Family = Clayton, class URBG>
PointSet sample_rotated(const RotationIndex& j, typename Family::Parameter theta, std::size_t n, URBG& rng) {
  const int m = j.dim();
  PointSet out(m);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.row(i);
    Family::sample(theta, row, rng);
    for (int l = 0; l < m; ++l) {
      double& x = row[static_cast<std::size_t>(l)];
      if (j.bit(l)) x = 1.0 - x;
      x = detail::clamp_unit(x);
    }
  }
  return out;
}

/// Probability of the box prod_l [lower_l, upper_l] under a CDF, by
/// inclusion-exclusion over the 2^m vertices.
template <class Cdf>
double box_probability(const Cdf& cdf, std::span<const double> lower, std::span<const double> upper) {
  const std::size_t m = lower.size();
  if (upper.size() != m) throw std::invalid_argument("box_probability: bound size mismatch");
  std::vector<double> vertex(m);
  double total = 0.0;
  for (unsigned v = 0; v < (1u << m); ++v) {
    bool zero = false;
    for (std::size_t l = 0; l < m; ++l) {
      vertex[l] = ((v >> l) & 1u) ? lower[l] : upper[l];
      if (vertex[l] <= 0.0) zero = true;
    }
    if (zero) continue;
    const double c = cdf(std::span<const double>(vertex));
    total += (std::popcount(v) % 2 == 0) ? c : -c;
  }
  return total;
}

/// The finite-nu conditional probability whose nu -> 0 limit defines the
/// corner tail coefficient: P(U_l in B_{j_l}(nu) | U_k in B_{j_k}(nu), k != l)
/// under rotation `rotation`, with B_0 = [0, nu] and B_1 = (1 - nu, 1].
template <class Family = Clayton>
double corner_tail_ratio(const RotationIndex& corner, const RotationIndex& rotation,
                         typename Family::Parameter theta, double nu, int l = 0) {
  const int m = corner.dim();
  if (rotation.dim() != m) throw std::invalid_argument("corner_tail_ratio: dimension mismatch");
  if (!(nu > 0.0 && nu < 0.5)) throw std::invalid_argument("corner_tail_ratio: nu must be in (0, 0.5)");
  std::vector<double> lower(static_cast<std::size_t>(m));
  std::vector<double> upper(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    lower[static_cast<std::size_t>(k)] = corner.bit(k) ? 1.0 - nu : 0.0;
    upper[static_cast<std::size_t>(k)] = corner.bit(k) ? 1.0 : nu;
  }
  auto cdf = [&](std::span<const double> v) { return rotated_cdf<Family>(rotation, v, theta); };
  const double joint = box_probability(cdf, lower, upper);
  lower[static_cast<std::size_t>(l)] = 0.0;
  upper[static_cast<std::size_t>(l)] = 1.0;
  const double given = box_probability(cdf, lower, upper);
  return joint / given;
}

// Named entry points for the Clayton family.

inline double clayton_cdf(std::span<const double> u, ClaytonTheta theta) { return Clayton::cdf(u, theta); }

inline double clayton_log_density(std::span<const double> u, ClaytonTheta theta) {
  return Clayton::log_density(u, theta);
}

inline double clayton_density(std::span<const double> u, ClaytonTheta theta) {
  return std::exp(Clayton::log_density(u, theta));
}

}  // namespace rotamix
