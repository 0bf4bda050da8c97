#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace gvr {

// Dense row-major rows x cols cost grid.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static CostMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Assignment {
  // (row, col) pairs sorted by row.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;
};

// Minimum-cost one-to-one matching of size min(rows, cols), O(n^2 m).
// Empty matrices and matrices with non-finite entries yield an empty
// Assignment; callers treat the latter as a failed matching.
Assignment hungarian(const CostMatrix& cost);

}  // namespace gvr
