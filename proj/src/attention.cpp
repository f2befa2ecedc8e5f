#include "latformer/attention.hpp"

#include <cmath>

#include "latformer/errors.hpp"

namespace latformer {

Matrix softmax_rows(const Matrix& m) {
  if (!all_finite(m)) throw NonFinite("softmax_rows: non-finite input");
  Matrix out(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r) {
    double mx = m(r, 0);
    for (int c = 1; c < m.cols(); ++c) mx = std::max(mx, m(r, c));
    double sum = 0.0;
    for (int c = 0; c < m.cols(); ++c) {
      double e = std::exp(m(r, c) - mx);
      out(r, c) = e;
      sum += e;
    }
    for (int c = 0; c < m.cols(); ++c) out(r, c) /= sum;
  }
  return out;
}

Matrix masked_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                        const Matrix& mask) {
  if (q.cols() != k.cols())
    throw InvalidShape("masked_attention: q/k feature dims differ");
  if (k.rows() != v.rows())
    throw InvalidShape("masked_attention: k/v row counts differ");
  if (mask.rows() != q.rows() || mask.cols() != k.rows())
    throw InvalidShape("masked_attention: mask must be n_Q x n_K");
  if (!all_finite(q) || !all_finite(k) || !all_finite(v) || !all_finite(mask))
    throw NonFinite("masked_attention: non-finite input");

  Matrix scores = matmul(q, transposed(k));
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  for (double& s : scores.raw()) s *= scale;

  Matrix a = softmax_rows(scores);
  for (size_t i = 0; i < a.raw().size(); ++i) a.raw()[i] *= mask.raw()[i];

  for (int r = 0; r < a.rows(); ++r) {
    double sum = 0.0;
    for (int c = 0; c < a.cols(); ++c) sum += a(r, c);
    if (sum < kDegenerateRowThreshold)
      throw DegenerateRow("masked_attention: masked row " + std::to_string(r) +
                          " has zero weight");
    for (int c = 0; c < a.cols(); ++c) a(r, c) /= sum;
  }
  return matmul(a, v);
}

Matrix masked_self_attention(const Matrix& x, const Matrix& mask) {
  return masked_attention(x, x, x, mask);
}

}  // namespace latformer
