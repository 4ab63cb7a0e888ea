#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedgeo {

// Row-major 2-D array of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = a * b; throws std::invalid_argument on inner-dimension mismatch.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

// out = a^T * b (a is [k x m], b is [k x n], out is [m x n]).
DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b);

// out = a * b^T (a is [m x k], b is [n x k], out is [m x n]).
DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b);

// Copies the listed rows, in order, into a new matrix.
DenseMatrix gather_rows(const DenseMatrix& m, std::span<const std::size_t> rows);

}  // namespace fedgeo
