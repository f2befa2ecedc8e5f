#pragma once

#include "latformer/matrix.hpp"

namespace latformer {

inline constexpr double kDegenerateRowThreshold = 1e-12;

// Row-wise softmax with max-subtraction.
Matrix softmax_rows(const Matrix& m);

// softmax(q k^T / sqrt(d)) ⊙ mask, rescaled so every row sums to 1 again,
// times v. The mask multiplies after the softmax; a row whose masked weights
// sum below 1e-12 raises DegenerateRow.
Matrix masked_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                        const Matrix& mask);

Matrix masked_self_attention(const Matrix& x, const Matrix& mask);

}  // namespace latformer
