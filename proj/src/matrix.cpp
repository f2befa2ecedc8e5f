#include "latformer/matrix.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace latformer {

using EigenMap = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstEigenMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                                     Eigen::Dynamic,
                                                     Eigen::RowMajor>>;

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  ConstEigenMap ma(a.data(), a.rows(), a.cols());
  ConstEigenMap mb(b.data(), b.rows(), b.cols());
  EigenMap mo(out.data(), out.rows(), out.cols());
  mo.noalias() = ma * mb;
  return out;
}

Matrix transposed(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
  return out;
}

bool all_finite(const Matrix& m) {
  for (double x : m.raw())
    if (!std::isfinite(x)) return false;
  return true;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return std::numeric_limits<double>::infinity();
  double d = 0.0;
  for (size_t i = 0; i < a.raw().size(); ++i)
    d = std::max(d, std::fabs(a.raw()[i] - b.raw()[i]));
  return d;
}

}  // namespace latformer
