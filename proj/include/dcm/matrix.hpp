#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "dcm/common.hpp"

namespace dcm {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<int>(rows.size()), rows.size() ? static_cast<int>(rows.begin()->size()) : 0);
    int i = 0;
    for (const auto& r : rows) {
      require(static_cast<int>(r.size()) == m.cols_, "Matrix::from_rows: ragged rows");
      int j = 0;
      for (double v : r) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

  double* row(int i) { return data_.data() + static_cast<std::size_t>(i) * cols_; }
  const double* row(int i) const { return data_.data() + static_cast<std::size_t>(i) * cols_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Vector row_vec(int i) const { return Vector(row(i), row(i) + cols_); }

  void set_row(int i, const Vector& v) {
    require(static_cast<int>(v.size()) == cols_, "Matrix::set_row: size mismatch");
    std::copy(v.begin(), v.end(), row(i));
  }

  /// Copy of columns [c0, c0+width).
  Matrix cols_slice(int c0, int width) const {
    require(c0 >= 0 && width >= 0 && c0 + width <= cols_, "Matrix::cols_slice: out of range");
    Matrix out(rows_, width);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < width; ++j) out(i, j) = (*this)(i, c0 + j);
    return out;
  }

  /// Copy of selected columns, in the given order.
  Matrix select_cols(const std::vector<int>& idx) const {
    Matrix out(rows_, static_cast<int>(idx.size()));
    for (int i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) out(i, static_cast<int>(j)) = (*this)(i, idx[j]);
    return out;
  }

  Matrix select_rows(const std::vector<int>& idx) const {
    Matrix out(static_cast<int>(idx.size()), cols_);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < cols_; ++j) out(static_cast<int>(i), j) = (*this)(idx[i], j);
    return out;
  }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// Horizontal concatenation; all blocks must share a row count.
inline Matrix hcat(const std::vector<const Matrix*>& blocks) {
  int rows = -1, cols = 0;
  for (const Matrix* b : blocks) {
    if (b->cols() == 0) continue;
    if (rows < 0) rows = b->rows();
    require(b->rows() == rows, "hcat: row count mismatch");
    cols += b->cols();
  }
  if (rows < 0) rows = 0;
  Matrix out(rows, cols);
  int c0 = 0;
  for (const Matrix* b : blocks) {
    if (b->cols() == 0) continue;
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < b->cols(); ++j) out(i, c0 + j) = (*b)(i, j);
    c0 += b->cols();
  }
  return out;
}

inline Matrix hcat(const Matrix& a, const Matrix& b) { return hcat({&a, &b}); }

}  // namespace dcm
