#include "latformer/masks.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace latformer {

namespace {

int mod_floor(long long a, int m) {
  int r = static_cast<int>(a % m);
  return r < 0 ? r + m : r;
}

// 1-based attended column for 1-based row k.
int attended_column(const std::vector<int>& offsets, int n, int k) {
  return mod_floor(static_cast<long long>(k) + offsets[k - 1] - 1, n) + 1;
}

std::vector<int> rotate90_offsets(const LatticeShape& shape, int turns) {
  const int l1 = shape.dims()[0];
  const int n = shape.size();
  std::vector<int> once(n);
  for (int k = 1; k <= n; ++k)
    once[k - 1] = k * (l1 - 1) - (k - 1) / l1;
  if (turns == 1) return once;
  // Higher turns compose the row -> column map of the single turn.
  std::vector<int> out(n);
  for (int k = 1; k <= n; ++k) {
    int col = k;
    for (int t = 0; t < turns; ++t) col = attended_column(once, n, col);
    out[k - 1] = col - k;
  }
  return out;
}

}  // namespace

std::vector<int> shift_vector(const LatticeAction& action,
                              const LatticeShape& shape) {
  action.validate(shape);
  if (!action.is_primitive())
    throw InvalidShape("shift_vector requires a primitive action");
  const int n = shape.size();

  switch (action.kind()) {
    case LatticeAction::Kind::Identity:
      return std::vector<int>(n, 0);

    case LatticeAction::Kind::Translate: {
      if (shape.ndims() != 1)
        throw InvalidShape("shift_vector: translation offsets are 1-D");
      return std::vector<int>(n, -action.delta()[0]);
    }

    case LatticeAction::Kind::Reflect: {
      if (shape.ndims() != 1 || action.diagonal())
        throw InvalidShape("shift_vector: reflection offsets are 1-D");
      std::vector<int> o(n);
      for (int k = 1; k <= n; ++k) o[k - 1] = n + 1 - 2 * k;
      return o;
    }

    case LatticeAction::Kind::Rotate90:
      return rotate90_offsets(shape, action.quarter_turns());

    case LatticeAction::Kind::Scale: {
      if (shape.ndims() != 1)
        throw InvalidShape("shift_vector: scaling offsets are 1-D");
      const int h = action.factors()[0];
      std::vector<int> o(n);
      if (action.direction() == ScaleDirection::Up) {
        for (int k = 1; k <= n; ++k) o[k - 1] = (k - 1) / h - (k - 1);
      } else {
        for (int k = 1; k <= n; ++k)
          o[k - 1] = std::min(h * (k - 1) + 1, n) - k;
      }
      return o;
    }

    case LatticeAction::Kind::Compose:
      break;
  }
  throw InvalidShape("shift_vector: unsupported action");
}

Matrix mask_from_shift(const std::vector<int>& offsets, int n) {
  if (static_cast<int>(offsets.size()) != n)
    throw InvalidShape("mask_from_shift: offsets length must equal n");
  Matrix m(n, n);
  for (int k = 1; k <= n; ++k) m(k - 1, attended_column(offsets, n, k) - 1) = 1.0;
  return m;
}

Matrix mask_via_fourier(const std::vector<int>& offsets, int n) {
  if (static_cast<int>(offsets.size()) != n)
    throw InvalidShape("mask_via_fourier: offsets length must equal n");
  using cd = std::complex<double>;
  const double tau = 2.0 * std::numbers::pi;

  // Column-wise DFT of the identity is the DFT matrix itself; the transform
  // is realized as a direct O(n^2) table, n <= 4096 by construction.
  std::vector<cd> w(static_cast<size_t>(n) * n);   // forward, exp(-j...)
  std::vector<cd> wi(static_cast<size_t>(n) * n);  // inverse, exp(+j...)/n
  for (int a = 1; a <= n; ++a)
    for (int b = 1; b <= n; ++b) {
      double ang = tau * static_cast<double>(a) * b / n;
      w[(a - 1) * static_cast<size_t>(n) + (b - 1)] = cd(std::cos(ang), -std::sin(ang));
      wi[(a - 1) * static_cast<size_t>(n) + (b - 1)] =
          cd(std::cos(ang) / n, std::sin(ang) / n);
    }

  // Hadamard with the phase factor exp(-(tau j / n) * o_k * r), r = 1..n.
  std::vector<cd> g(static_cast<size_t>(n) * n);
  for (int k = 1; k <= n; ++k)
    for (int b = 1; b <= n; ++b) {
      double ang = tau * static_cast<double>(offsets[k - 1]) * b / n;
      g[(k - 1) * static_cast<size_t>(n) + (b - 1)] =
          w[(k - 1) * static_cast<size_t>(n) + (b - 1)] *
          cd(std::cos(ang), -std::sin(ang));
    }

  Matrix out(n, n);
  for (int k = 0; k < n; ++k)
    for (int c = 0; c < n; ++c) {
      cd acc = 0.0;
      for (int b = 0; b < n; ++b)
        acc += g[k * static_cast<size_t>(n) + b] * wi[b * static_cast<size_t>(n) + c];
      double re = acc.real();
      if (std::fabs(re - 0.5) < 0.1)
        throw NumericalInstability(
            "mask_via_fourier: entry within guard band of rounding threshold");
      out(k, c) = re > 0.5 ? 1.0 : 0.0;
    }
  return out;
}

Matrix kronecker_mask(const Matrix& a, const Matrix& b, int max_size) {
  const long long n = static_cast<long long>(a.rows()) * b.rows();
  const long long m = static_cast<long long>(a.cols()) * b.cols();
  if (n > max_size || m > max_size)
    throw SizeOverflow("kronecker_mask: product exceeds size limit");
  Matrix out(static_cast<int>(n), static_cast<int>(m));
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      if (aij == 0.0) continue;
      for (int k = 0; k < b.rows(); ++k)
        for (int l = 0; l < b.cols(); ++l)
          out(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
    }
  return out;
}

Matrix compose_masks(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw InvalidShape("compose_masks: shape mismatch");
  return matmul(a, b);
}

Matrix conv_kernels(const std::vector<int>& offsets, int n) {
  using cd = std::complex<double>;
  const double tau = 2.0 * std::numbers::pi;

  // Rows attending each column (possibly none or several, e.g. scaling).
  std::vector<std::vector<int>> rows_of(n + 1);
  for (int k = 1; k <= n; ++k)
    rows_of[attended_column(offsets, n, k)].push_back(k);

  Matrix kernels(n, n);
  std::vector<cd> spectrum(n);
  for (int i = 1; i <= n; ++i) {
    // Per-column phase spectrum: one shift term exp(-tau j (k-i) f / n) for
    // every row k the column feeds; the kernel is its inverse DFT.
    for (int f = 1; f <= n; ++f) {
      cd acc = 0.0;
      for (int k : rows_of[i]) {
        double ang = tau * static_cast<double>(k - i) * f / n;
        acc += cd(std::cos(ang), -std::sin(ang));
      }
      spectrum[f - 1] = acc;
    }
    for (int t = 0; t < n; ++t) {
      cd acc = 0.0;
      for (int f = 1; f <= n; ++f) {
        double ang = tau * static_cast<double>(t) * f / n;
        acc += spectrum[f - 1] * cd(std::cos(ang) / n, std::sin(ang) / n);
      }
      double re = acc.real();
      kernels(t, i - 1) = std::fabs(re) < 1e-6 ? 0.0 : std::round(re);
    }
  }
  return kernels;
}

Matrix conv_kernels(const LatticeAction& action, const LatticeShape& shape) {
  return conv_kernels(shift_vector(action, shape), shape.size());
}

Matrix conv_kernel_translation_level(int level, int n) {
  return conv_kernels(
      shift_vector(LatticeAction::translate({1 << level}), LatticeShape({n})),
      n);
}

Matrix mask_from_kernels(const Matrix& kernels) {
  const int n = kernels.rows();
  Matrix out(n, n);
  // Column i of the identity is the impulse e_i; convolve it with column i
  // of the kernel matrix.
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double acc = 0.0;
      for (int t = 0; t < n; ++t) {
        int idx = k - t;
        if (idx < 0) idx += n;
        acc += kernels(t, i) * (idx == i ? 1.0 : 0.0);
      }
      out(k, i) = acc;
    }
  return out;
}

namespace {

Matrix primitive_1d_mask(const LatticeAction& action, int len) {
  LatticeShape line({len});
  return mask_from_shift(shift_vector(action, line), len);
}

}  // namespace

Matrix action_mask(const LatticeAction& action, const LatticeShape& shape,
                   int max_size) {
  action.validate(shape);
  const int n = shape.size();
  if (n > max_size) throw SizeOverflow("action_mask: lattice exceeds limit");

  switch (action.kind()) {
    case LatticeAction::Kind::Identity:
      return Matrix::identity(n);

    case LatticeAction::Kind::Translate: {
      Matrix m = primitive_1d_mask(LatticeAction::translate({action.delta()[0]}),
                                   shape.dims()[0]);
      for (int d = 1; d < shape.ndims(); ++d)
        m = kronecker_mask(
            m,
            primitive_1d_mask(LatticeAction::translate({action.delta()[d]}),
                              shape.dims()[d]),
            max_size);
      return m;
    }

    case LatticeAction::Kind::Rotate90:
      return mask_from_shift(shift_vector(action, shape), n);

    case LatticeAction::Kind::Reflect: {
      if (action.diagonal()) {
        // transpose = rotate90 applied to the left-right flip
        Matrix rot = action_mask(LatticeAction::rotate90(1), shape, max_size);
        Matrix flip =
            action_mask(LatticeAction::reflect({false, true}), shape, max_size);
        return compose_masks(rot, flip);
      }
      const auto& axes = action.axes();
      auto dim_mask = [&](int d) {
        bool on = d < static_cast<int>(axes.size()) && axes[d];
        return on ? primitive_1d_mask(LatticeAction::reflect({true}),
                                      shape.dims()[d])
                  : Matrix::identity(shape.dims()[d]);
      };
      Matrix m = dim_mask(0);
      for (int d = 1; d < shape.ndims(); ++d)
        m = kronecker_mask(m, dim_mask(d), max_size);
      return m;
    }

    case LatticeAction::Kind::Scale: {
      auto dim_mask = [&](int d) {
        return primitive_1d_mask(
            LatticeAction::scale({action.factors()[d]}, action.direction()),
            shape.dims()[d]);
      };
      Matrix m = dim_mask(0);
      for (int d = 1; d < shape.ndims(); ++d)
        m = kronecker_mask(m, dim_mask(d), max_size);
      return m;
    }

    case LatticeAction::Kind::Compose: {
      Matrix m = Matrix::identity(n);
      for (const auto& child : action.children())
        m = compose_masks(m, action_mask(child, shape, max_size));
      return m;
    }
  }
  throw InvalidShape("action_mask: unsupported action");
}

bool is_one_hot_per_row(const Matrix& m) {
  for (int r = 0; r < m.rows(); ++r) {
    int ones = 0;
    for (int c = 0; c < m.cols(); ++c) {
      double v = m(r, c);
      if (v == 1.0)
        ++ones;
      else if (v != 0.0)
        return false;
    }
    if (ones != 1) return false;
  }
  return true;
}

}  // namespace latformer
