#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace latformer {

// Dense row-major matrix of doubles. The storage layout is part of the
// contract: flattened grids index cells row-major, matching the lattice
// vectorization.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(static_cast<size_t>(rows) * cols, fill) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return v_.size(); }

  double& operator()(int r, int c) {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return v_[static_cast<size_t>(r) * cols_ + c];
  }
  double operator()(int r, int c) const {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return v_[static_cast<size_t>(r) * cols_ + c];
  }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::vector<double>& raw() { return v_; }
  const std::vector<double>& raw() const { return v_; }

  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> v_;
};

// a * b, Eigen-backed.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transposed(const Matrix& m);

bool all_finite(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace latformer
