#include "cliplab/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cliplab/errors.hpp"

namespace cliplab {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

double Matrix::item() const {
  if (rows_ != 1 || cols_ != 1) throw DimensionError("item() on " + shape_str(*this) + " matrix");
  return data_[0];
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_finite(const Matrix& m, std::string_view what) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) {
        throw InputError(std::string(what) + ": non-finite value at row " + std::to_string(r) + ", column " +
                         std::to_string(c));
      }
    }
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, std::string_view what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: " + shape_str(a) + " x " + shape_str(b));
  Matrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionError("matmul_nt: " + shape_str(a) + " x " + shape_str(b) + "^T");
  Matrix out(a.rows(), b.rows());
  const std::size_t inner = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.row(j).data();
      double acc = 0.0;
      for (std::size_t k = 0; k < inner; ++k) acc += arow[k] * brow[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("matmul_tn: " + shape_str(a) + "^T x " + shape_str(b));
  Matrix out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* brow = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ari = a(r, i);
      if (ari == 0.0) continue;
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += ari * brow[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix relu(const Matrix& a) {
  Matrix out = a;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Matrix logsumexp_rows(const Matrix& a) {
  if (a.cols() == 0) throw ContractError("logsumexp_rows: matrix has no columns");
  Matrix out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    const double m = *std::max_element(r.begin(), r.end());
    if (!std::isfinite(m)) {
      out(i, 0) = m;
      continue;
    }
    double acc = 0.0;
    for (double v : r) acc += std::exp(v - m);
    out(i, 0) = m + std::log(acc);
  }
  return out;
}

Matrix row_norms(const Matrix& a) {
  Matrix out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (double v : a.row(i)) acc += v * v;
    out(i, 0) = std::sqrt(acc);
  }
  return out;
}

Matrix gather_rows(const Matrix& a, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), a.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= a.rows()) throw ContractError("gather_rows: index out of range");
    std::copy_n(a.row(indices[i]).data(), a.cols(), out.row(i).data());
  }
  return out;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  if (a.cols() != b.cols()) throw DimensionError("vstack: " + shape_str(a) + " over " + shape_str(b));
  std::vector<double> data(a.storage());
  data.insert(data.end(), b.storage().begin(), b.storage().end());
  return Matrix(a.rows() + b.rows(), a.cols(), std::move(data));
}

Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols()) throw ContractError("slice_cols: bad column range");
  Matrix out(a.rows(), end - begin);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = a(i, j);
  return out;
}

double sum(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return acc;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

}  // namespace cliplab
