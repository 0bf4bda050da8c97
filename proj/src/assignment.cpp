#include "gvr/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gvr {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("CostMatrix: value count does not match shape");
  }
}

CostMatrix CostMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.front().size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw std::invalid_argument("CostMatrix: ragged rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return CostMatrix(r, c, std::move(values));
}

bool CostMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

namespace {

// Shortest augmenting path with row/column potentials; requires n <= m.
// at(i, j) gives the cost of row i, column j. Returns the column of each row.
template <typename At>
std::vector<std::size_t> solve_rows_le_cols(std::size_t n, std::size_t m,
                                            At at) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<double> minv(m + 1);
  std::vector<char> used(m + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> col_of_row(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) col_of_row[p[j] - 1] = j - 1;
  }
  return col_of_row;
}

}  // namespace

Assignment hungarian(const CostMatrix& cost) {
  Assignment out;
  if (cost.empty() || !cost.all_finite()) return out;

  const std::size_t rows = cost.rows();
  const std::size_t cols = cost.cols();
  if (rows <= cols) {
    const auto col_of_row = solve_rows_le_cols(
        rows, cols, [&](std::size_t i, std::size_t j) { return cost(i, j); });
    for (std::size_t r = 0; r < rows; ++r) out.pairs.emplace_back(r, col_of_row[r]);
  } else {
    const auto row_of_col = solve_rows_le_cols(
        cols, rows, [&](std::size_t i, std::size_t j) { return cost(j, i); });
    for (std::size_t c = 0; c < cols; ++c) out.pairs.emplace_back(row_of_col[c], c);
    std::sort(out.pairs.begin(), out.pairs.end());
  }
  for (const auto& [r, c] : out.pairs) out.total_cost += cost(r, c);
  return out;
}

}  // namespace gvr
