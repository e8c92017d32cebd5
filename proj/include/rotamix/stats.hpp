#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace rotamix {

inline double log_sum_exp(std::span<const double> values) {
  double max_v = -std::numeric_limits<double>::infinity();
  for (double v : values) max_v = std::max(max_v, v);
  if (!std::isfinite(max_v)) return max_v;
  double total = 0.0;
  for (double v : values) total += std::exp(v - max_v);
  return max_v + std::log(total);
}

inline double log_mean_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_mean_exp: empty input");
  return log_sum_exp(values) - std::log(static_cast<double>(values.size()));
}

inline double mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean: empty input");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

/// Unbiased sample variance (n - 1 denominator); 0 for a single value.
inline double sample_variance(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return ss / static_cast<double>(values.size() - 1);
}

/// Empirical quantile with linear interpolation between order statistics
/// (the "type 7" rule). `sorted` must be ascending.
inline double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty input");
  if (prob < 0.0 || prob > 1.0) throw std::invalid_argument("quantile: probability outside [0,1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> values, double prob) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, prob);
}

/// Standard error of the mean of a correlated series by non-overlapping batch means.
inline double batch_means_standard_error(std::span<const double> series, int batches = 50) {
  if (batches < 2 || series.size() < static_cast<std::size_t>(batches)) {
    throw std::invalid_argument("batch_means_standard_error: too few values for the batch count");
  }
  const std::size_t len = series.size() / static_cast<std::size_t>(batches);
  std::vector<double> means(static_cast<std::size_t>(batches));
  for (std::size_t b = 0; b < means.size(); ++b) {
    means[b] = mean(series.subspan(b * len, len));
  }
  return std::sqrt(sample_variance(means) / static_cast<double>(batches));
}

struct KendallEstimate {
  double tau = 0.0;
  double standard_error = 0.0;
};

/// Kendall's tau-a for continuous data in O(n log n), with the asymptotic
/// U-statistic standard error 2 sd(W) / sqrt(n), where W_i is the mean
/// concordance sign of point i against all others.
inline KendallEstimate kendall_tau(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (y.size() != n) throw std::invalid_argument("kendall_tau: size mismatch");
  if (n < 2) throw std::invalid_argument("kendall_tau: need at least two points");

  std::vector<std::size_t> by_y(n);
  std::iota(by_y.begin(), by_y.end(), 0);
  std::sort(by_y.begin(), by_y.end(), [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
  std::vector<std::size_t> y_rank(n);
  for (std::size_t r = 0; r < n; ++r) y_rank[by_y[r]] = r;

  std::vector<std::size_t> by_x(n);
  std::iota(by_x.begin(), by_x.end(), 0);
  std::sort(by_x.begin(), by_x.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

  // Fenwick tree over y ranks.
  std::vector<long long> tree(n + 1, 0);
  auto add = [&](std::size_t pos) {
    for (std::size_t i = pos + 1; i <= n; i += i & (~i + 1)) ++tree[i];
  };
  auto prefix = [&](std::size_t pos) {  // count of ranks < pos
    long long s = 0;
    for (std::size_t i = pos; i > 0; i -= i & (~i + 1)) s += tree[i];
    return s;
  };

  std::vector<long long> concordant(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = by_x[k];
    concordant[i] += prefix(y_rank[i]);
    add(y_rank[i]);
  }
  std::fill(tree.begin(), tree.end(), 0);
  for (std::size_t k = n; k-- > 0;) {
    const std::size_t i = by_x[k];
    const long long seen = static_cast<long long>(n - 1 - k);
    concordant[i] += seen - prefix(y_rank[i] + 1);
    add(y_rank[i]);
  }

  std::vector<double> w(n);
  const double others = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = static_cast<double>(concordant[i]);
    w[i] = (2.0 * c - others) / others;
  }
  KendallEstimate est;
  est.tau = mean(w);
  est.standard_error = 2.0 * std::sqrt(sample_variance(w) / static_cast<double>(n));
  return est;
}

}  // namespace rotamix
