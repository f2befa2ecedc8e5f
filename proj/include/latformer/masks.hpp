#pragma once

#include <vector>

#include "latformer/lattice.hpp"
#include "latformer/matrix.hpp"

namespace latformer {

// Per-row relative offsets o(g): row k of the action's mask carries its
// single 1 at column ((k + o_k - 1) mod n) + 1, all 1-based. Stored 0-based
// (entry for row k at index k-1) with raw, un-reduced offset values.
using ShiftVector = std::vector<int>;

inline constexpr int kDefaultMaskSizeLimit = 4096;

// Offsets for a primitive (non-compose) action. The shape must be 1-D,
// except rotation which acts on a square 2-D lattice.
// Offset table per family:
//   identity      o_k = 0
//   translate(d)  o_k = -d
//   reflect       o_1 = n-1, o_k = o_{k-1} - 2
//   rotate90      o_k = k*(l_1 - 1) - floor((k-1)/l_1), iterated per turn
//   scale up(h)   o_k = floor((k-1)/h) - (k-1)           (row k -> ceil(k/h))
//   scale down(h) o_k = min(h*(k-1)+1, n) - k            (clamped subsample)
std::vector<int> shift_vector(const LatticeAction& action,
                              const LatticeShape& shape);

// Binary n x n mask with exactly one 1 per row, placed by the offsets.
Matrix mask_from_shift(const std::vector<int>& offsets, int n);

// Same mask computed through the column-wise DFT of the identity and the
// phase factor exp(-(2*pi*j/n) * o_k * r), inverted, real parts rounded at
// 0.5. Throws NumericalInstability if any pre-round entry falls within 0.1
// of the threshold.
Matrix mask_via_fourier(const std::vector<int>& offsets, int n);

// Kronecker product of two square masks; preserves one-1-per-row.
Matrix kronecker_mask(const Matrix& a, const Matrix& b,
                      int max_size = kDefaultMaskSizeLimit);

// Matrix product a * b; the mask of the composed action for exact masks.
Matrix compose_masks(const Matrix& a, const Matrix& b);

// Frozen per-column circular-convolution kernels: column i, convolved with
// column i of I_n, reproduces column i of the action's mask. Computed as the
// inverse DFT of the per-column phase spectrum implied by the offsets.
Matrix conv_kernels(const std::vector<int>& offsets, int n);
Matrix conv_kernels(const LatticeAction& action, const LatticeShape& shape);

// Translation kernel for one expert layer: a cyclic impulse at 2^level
// (every column identical).
Matrix conv_kernel_translation_level(int level, int n);

// Column-wise circular convolution of the identity with the kernels.
Matrix mask_from_kernels(const Matrix& kernels);

// Mask for any supported action on any supported shape. Primitive 1-D masks
// are lifted by Kronecker products (higher dimensions), diagonal reflection
// composes rotation with a flip, and compositions multiply left-to-right.
Matrix action_mask(const LatticeAction& action, const LatticeShape& shape,
                   int max_size = kDefaultMaskSizeLimit);

// True if every entry is 0/1 and every row has exactly one 1.
bool is_one_hot_per_row(const Matrix& m);

}  // namespace latformer
