#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mgccn/errors.hpp"

namespace mgccn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = std::size_t;

// Compressed sparse row matrix. Column indices are sorted within each row and
// unique, which fixes the reduction order of every kernel below.
class CsrMatrix {
 public:
  CsrMatrix() = default;

  CsrMatrix(Index rows, Index cols, std::vector<Index> row_ptr, std::vector<Index> col_idx,
            std::vector<double> values)
      : rows_(rows),
        cols_(cols),
        row_ptr_(std::move(row_ptr)),
        col_idx_(std::move(col_idx)),
        values_(std::move(values)) {
    if (row_ptr_.size() != rows_ + 1 || col_idx_.size() != values_.size() ||
        row_ptr_.back() != col_idx_.size()) {
      throw ShapeError("CsrMatrix: inconsistent compressed-row arrays");
    }
    for (Index r = 0; r < rows_; ++r) {
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        if (col_idx_[k] >= cols_) throw ShapeError("CsrMatrix: column index out of range");
        if (k > row_ptr_[r] && col_idx_[k] <= col_idx_[k - 1]) {
          throw ShapeError("CsrMatrix: column indices must be strictly increasing per row");
        }
      }
    }
  }

  // Builds from (row, col, value) triplets; duplicates are summed.
  static CsrMatrix from_triplets(Index rows, Index cols,
                                 std::vector<std::tuple<Index, Index, double>> triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    std::vector<Index> row_ptr(rows + 1, 0);
    std::vector<Index> cols_out;
    std::vector<double> vals;
    cols_out.reserve(triplets.size());
    vals.reserve(triplets.size());
    Index last_r = static_cast<Index>(-1), last_c = static_cast<Index>(-1);
    for (const auto& [r, c, v] : triplets) {
      if (r >= rows || c >= cols) throw ShapeError("CsrMatrix: triplet index out of range");
      if (r == last_r && c == last_c) {
        vals.back() += v;
        continue;
      }
      cols_out.push_back(c);
      vals.push_back(v);
      ++row_ptr[r + 1];
      last_r = r;
      last_c = c;
    }
    for (Index r = 0; r < rows; ++r) row_ptr[r + 1] += row_ptr[r];
    return CsrMatrix(rows, cols, std::move(row_ptr), std::move(cols_out), std::move(vals));
  }

  static CsrMatrix identity(Index n) {
    std::vector<Index> row_ptr(n + 1), cols(n);
    for (Index i = 0; i < n; ++i) {
      row_ptr[i + 1] = i + 1;
      cols[i] = i;
    }
    return CsrMatrix(n, n, std::move(row_ptr), std::move(cols), std::vector<double>(n, 1.0));
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nnz() const { return col_idx_.size(); }

  const std::vector<Index>& row_ptr() const { return row_ptr_; }
  const std::vector<Index>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }

  std::span<const Index> row_cols(Index r) const {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(Index r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  // Stored value at (r, c), or 0 when the entry is structurally absent.
  double at(Index r, Index c) const {
    auto cols = row_cols(r);
    auto it = std::lower_bound(cols.begin(), cols.end(), c);
    if (it == cols.end() || *it != c) return 0.0;
    return values_[row_ptr_[r] + static_cast<Index>(it - cols.begin())];
  }

  bool is_symmetric() const {
    if (rows_ != cols_) return false;
    for (Index r = 0; r < rows_; ++r) {
      auto cols = row_cols(r);
      auto vals = row_values(r);
      for (Index k = 0; k < cols.size(); ++k) {
        if (at(cols[k], r) != vals[k]) return false;
      }
    }
    return true;
  }

  Matrix to_dense() const {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
    for (Index r = 0; r < rows_; ++r) {
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col_idx_[k])) = values_[k];
      }
    }
    return out;
  }

  // this * dense, rows accumulated in stored column order.
  Matrix multiply(const Matrix& dense) const {
    if (static_cast<Index>(dense.rows()) != cols_) {
      throw ShapeError("CsrMatrix::multiply: inner dimensions differ");
    }
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows_), dense.cols());
    for (Index r = 0; r < rows_; ++r) {
      auto row = out.row(static_cast<Eigen::Index>(r));
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        row.noalias() += values_[k] * dense.row(static_cast<Eigen::Index>(col_idx_[k]));
      }
    }
    return out;
  }

  // transpose(this) * dense, scattered row by row.
  Matrix transpose_multiply(const Matrix& dense) const {
    if (static_cast<Index>(dense.rows()) != rows_) {
      throw ShapeError("CsrMatrix::transpose_multiply: inner dimensions differ");
    }
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(cols_), dense.cols());
    for (Index r = 0; r < rows_; ++r) {
      auto src = dense.row(static_cast<Eigen::Index>(r));
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        out.row(static_cast<Eigen::Index>(col_idx_[k])).noalias() += values_[k] * src;
      }
    }
    return out;
  }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> row_ptr_{0};
  std::vector<Index> col_idx_;
  std::vector<double> values_;
};

}  // namespace mgccn
