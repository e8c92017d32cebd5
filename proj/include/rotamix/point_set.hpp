#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rotamix {

/// Row-major collection of points in the unit hypercube, one row per point.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(int dim) : dim_(dim) {
    if (dim < 1) throw std::invalid_argument("PointSet: dimension must be >= 1");
  }
  PointSet(int dim, std::vector<double> values) : dim_(dim), values_(std::move(values)) {
    if (dim < 1) throw std::invalid_argument("PointSet: dimension must be >= 1");
    if (values_.size() % static_cast<std::size_t>(dim) != 0) {
      throw std::invalid_argument("PointSet: value count " + std::to_string(values_.size()) +
                                  " is not a multiple of dimension " + std::to_string(dim));
    }
  }

  int dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : values_.size() / static_cast<std::size_t>(dim_); }
  bool empty() const { return values_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  std::span<double> row(std::size_t i) {
    return {values_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }

  void push_back(std::span<const double> point) {
    if (static_cast<int>(point.size()) != dim_) {
      throw std::invalid_argument("PointSet: point has dimension " + std::to_string(point.size()) +
                                  ", expected " + std::to_string(dim_));
    }
    values_.insert(values_.end(), point.begin(), point.end());
  }
  void reserve(std::size_t n) { values_.reserve(n * static_cast<std::size_t>(dim_)); }
  void resize(std::size_t n) { values_.resize(n * static_cast<std::size_t>(dim_)); }

  /// Column l as a copy.
  std::vector<double> column(int l) const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = row(i)[static_cast<std::size_t>(l)];
    return out;
  }

  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  int dim_ = 0;
  std::vector<double> values_;
};

/// Observations grouped by time slice: slices[t] holds the n_t points of time
/// t + 1 (n_t may vary and may be zero).
struct PanelData {
  int m = 2;
  std::vector<PointSet> slices;

  int horizon() const { return static_cast<int>(slices.size()); }

  std::size_t total_observations() const {
    std::size_t n = 0;
    for (const auto& s : slices) n += s.size();
    return n;
  }

  /// The first `horizon` slices.
  PanelData truncated(int horizon) const {
    if (horizon < 0 || horizon > this->horizon()) throw std::invalid_argument("PanelData: bad truncation");
    return {m, std::vector<PointSet>(slices.begin(), slices.begin() + horizon)};
  }

  /// Every slice has dimension m and every coordinate lies strictly inside (0,1).
  void validate() const {
    if (m < 1) throw std::invalid_argument("PanelData: dimension must be >= 1");
    for (std::size_t t = 0; t < slices.size(); ++t) {
      const auto& s = slices[t];
      if (!s.empty() && s.dim() != m) {
        throw std::invalid_argument("PanelData: slice " + std::to_string(t + 1) + " has dimension " +
                                    std::to_string(s.dim()) + ", expected " + std::to_string(m));
      }
      for (std::size_t i = 0; i < s.size(); ++i) {
        for (double x : s.row(i)) {
          if (!(x > 0.0 && x < 1.0)) {
            throw std::invalid_argument("PanelData: observation " + std::to_string(i + 1) + " at time " +
                                        std::to_string(t + 1) + " is not interior to the unit cube");
          }
        }
      }
    }
  }

  friend bool operator==(const PanelData&, const PanelData&) = default;
};

}  // namespace rotamix
