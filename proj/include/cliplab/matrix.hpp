#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace cliplab {

// Dense row-major matrix of doubles. Vectors are 1×n (row) or n×1 (column).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix scalar(double v) { return Matrix(1, 1, v); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  // Value of a 1×1 matrix.
  double item() const;

  bool all_finite() const noexcept;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Throws InputError naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);

// Throws DimensionError unless a and b have identical shapes.
void require_same_shape(const Matrix& a, const Matrix& b, std::string_view what);

Matrix matmul(const Matrix& a, const Matrix& b);     // a·b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a·bᵀ
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // aᵀ·b
Matrix transpose(const Matrix& a);
Matrix relu(const Matrix& a);

// Per-row log Σ_j exp(a_ij) with max subtraction; returns rows×1.
Matrix logsumexp_rows(const Matrix& a);

// Per-row Euclidean norm; returns rows×1.
Matrix row_norms(const Matrix& a);

// Rows `indices` of `a`, in that order.
Matrix gather_rows(const Matrix& a, std::span<const std::size_t> indices);

// Rows of `a` followed by rows of `b`.
Matrix vstack(const Matrix& a, const Matrix& b);

// Columns [begin, end) of `a`.
Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t end);

double sum(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace cliplab
