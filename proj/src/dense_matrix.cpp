#include "fedgeo/dense_matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedgeo {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("DenseMatrix: data length " + std::to_string(data_.size()) +
                                " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

bool DenseMatrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + ") * (" + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()) + ")");
  }
  DenseMatrix out(a.rows(), b.cols());
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

DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("matmul_at_b: row count mismatch");
  }
  DenseMatrix out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* brow = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += aki * brow[j];
    }
  }
  return out;
}

DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_a_bt: column count mismatch");
  }
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.row(j).data();
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      out(i, j) = acc;
    }
  }
  return out;
}

DenseMatrix gather_rows(const DenseMatrix& m, std::span<const std::size_t> rows) {
  DenseMatrix out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m.rows()) throw std::out_of_range("gather_rows: index out of range");
    auto src = m.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace fedgeo
