#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tsdiff {

// Row-major table: one row per grid point, one column per arm.
class GridTable {
 public:
  GridTable() = default;
  GridTable(std::int64_t points, int columns, double fill = 0.0)
      : points_(points), columns_(columns),
        data_(static_cast<std::size_t>(points) * static_cast<std::size_t>(columns), fill) {}

  double& operator()(std::int64_t j, int k) { return data_[index(j, k)]; }
  double operator()(std::int64_t j, int k) const { return data_[index(j, k)]; }

  std::span<double> row(std::int64_t j) {
    return {data_.data() + index(j, 0), static_cast<std::size_t>(columns_)};
  }
  std::span<const double> row(std::int64_t j) const {
    return {data_.data() + index(j, 0), static_cast<std::size_t>(columns_)};
  }

  std::vector<double> column(int k) const {
    std::vector<double> out(static_cast<std::size_t>(points_));
    for (std::int64_t j = 0; j < points_; ++j) out[static_cast<std::size_t>(j)] = (*this)(j, k);
    return out;
  }

  std::int64_t points() const { return points_; }
  int columns() const { return columns_; }
  bool empty() const { return data_.empty(); }

 private:
  std::size_t index(std::int64_t j, int k) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(columns_) + static_cast<std::size_t>(k);
  }

  std::int64_t points_ = 0;
  int columns_ = 0;
  std::vector<double> data_;
};

// Scalar path sampled on a grid. Treated as right-continuous and piecewise
// constant between grid times.
struct GridPath {
  std::vector<double> times;
  std::vector<double> values;

  std::size_t size() const { return times.size(); }
};

inline GridPath grid_path(std::span<const double> times, std::span<const double> values) {
  return GridPath{{times.begin(), times.end()}, {values.begin(), values.end()}};
}

}  // namespace tsdiff
