#include "latformer/experts.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "latformer/errors.hpp"

namespace latformer {

ExpertFamily expert_family_from_string(const std::string& s) {
  if (s == "translate") return ExpertFamily::Translate;
  if (s == "rotate") return ExpertFamily::Rotate;
  if (s == "reflect") return ExpertFamily::Reflect;
  if (s == "scale") return ExpertFamily::Scale;
  throw ConfigError("unknown expert family '" + s + "'");
}

std::string to_string(ExpertFamily f) {
  switch (f) {
    case ExpertFamily::Translate: return "translate";
    case ExpertFamily::Rotate: return "rotate";
    case ExpertFamily::Reflect: return "reflect";
    case ExpertFamily::Scale: return "scale";
  }
  return "?";
}

int expert_gate_count(const ExpertConfig& cfg, const LatticeShape& shape) {
  switch (cfg.family) {
    case ExpertFamily::Translate:
      return cfg.layers_per_dim * shape.ndims();
    case ExpertFamily::Rotate:
      return 3;
    case ExpertFamily::Reflect:
      return shape.ndims();
    case ExpertFamily::Scale:
      return (cfg.max_factor - 1) * shape.ndims() + 1;
  }
  return 0;
}

std::vector<int> scale_factor_support(int max_factor) {
  std::set<int> products = {1};
  for (int h = 2; h <= max_factor; ++h) {
    std::set<int> next = products;
    for (int f : products) next.insert(f * h);
    products = std::move(next);
  }
  return {products.begin(), products.end()};
}

namespace {

// Circulant with coefficient c_delta on cyclic diagonal delta:
// M[k,i] = c[(k - i) mod n], so c = e_delta is the translate-by-delta mask.
Matrix circulant(const std::vector<double>& c) {
  const int n = static_cast<int>(c.size());
  Matrix m(n, n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) m(k, i) = c[(k - i + n) % n];
  return m;
}

std::vector<double> rolled(const std::vector<double>& c, int s) {
  const int n = static_cast<int>(c.size());
  std::vector<double> out(n);
  for (int t = 0; t < n; ++t) out[t] = c[((t - s) % n + n) % n];
  return out;
}

void lerp_into(std::vector<double>& base, const std::vector<double>& shifted,
               double alpha) {
  for (size_t i = 0; i < base.size(); ++i)
    base[i] = alpha * shifted[i] + (1.0 - alpha) * base[i];
}

Matrix translate_dim_mask(int len, int layers, const double* gates) {
  std::vector<double> c(len, 0.0);
  c[0] = 1.0;
  for (int l = 0; l < layers; ++l)
    lerp_into(c, rolled(c, (1 << l) % len), gates[l]);
  return circulant(c);
}

Matrix weighted_sum(const std::vector<double>& w,
                    const std::vector<Matrix>& mats) {
  Matrix out(mats[0].rows(), mats[0].cols());
  for (size_t i = 0; i < w.size(); ++i)
    for (size_t e = 0; e < out.raw().size(); ++e)
      out.raw()[e] += w[i] * mats[i].raw()[e];
  return out;
}

Matrix scale_dim_mask(int len, int max_factor, const double* gates,
                      ScaleDirection dir) {
  auto support = scale_factor_support(max_factor);
  std::vector<double> p(support.size(), 0.0);
  p[0] = 1.0;  // factor 1 = identity
  auto index_of = [&](int f) {
    return static_cast<size_t>(
        std::lower_bound(support.begin(), support.end(), f) - support.begin());
  };
  for (int h = 2; h <= max_factor; ++h) {
    std::vector<double> shifted(p.size(), 0.0);
    for (size_t i = 0; i < p.size(); ++i)
      shifted[index_of(support[i] * h)] += p[i];
    lerp_into(p, shifted, gates[h - 2]);
  }
  std::vector<Matrix> mats;
  mats.reserve(support.size());
  for (int f : support) {
    if (f == 1)
      mats.push_back(Matrix::identity(len));
    else
      mats.push_back(mask_from_shift(
          shift_vector(LatticeAction::scale({f}, dir), LatticeShape({len})),
          len));
  }
  return weighted_sum(p, mats);
}

}  // namespace

Matrix expert_forward(const ExpertConfig& cfg, const std::vector<double>& gates,
                      const LatticeShape& shape) {
  if (static_cast<int>(gates.size()) != expert_gate_count(cfg, shape))
    throw InvalidShape("expert_forward: gate count mismatch");

  switch (cfg.family) {
    case ExpertFamily::Translate: {
      Matrix m = translate_dim_mask(shape.dims()[0], cfg.layers_per_dim,
                                    gates.data());
      for (int d = 1; d < shape.ndims(); ++d)
        m = kronecker_mask(m,
                           translate_dim_mask(shape.dims()[d],
                                              cfg.layers_per_dim,
                                              gates.data() + d * cfg.layers_per_dim),
                           shape.size());
      return m;
    }

    case ExpertFamily::Rotate: {
      if (!shape.is_square_2d())
        throw InvalidShape("rotation expert requires a square 2-D lattice");
      // Distribution over C_4 from three chained quarter-turn layers.
      std::vector<double> p = {1.0, 0.0, 0.0, 0.0};
      for (int l = 0; l < 3; ++l) {
        std::vector<double> shifted = {p[3], p[0], p[1], p[2]};
        lerp_into(p, shifted, gates[l]);
      }
      std::vector<Matrix> mats = {Matrix::identity(shape.size())};
      for (int r = 1; r <= 3; ++r)
        mats.push_back(action_mask(LatticeAction::rotate90(r), shape));
      return weighted_sum(p, mats);
    }

    case ExpertFamily::Reflect: {
      auto dim_mix = [&](int d) {
        const int len = shape.dims()[d];
        Matrix f = mask_from_shift(
            shift_vector(LatticeAction::reflect({true}), LatticeShape({len})),
            len);
        Matrix m = Matrix::identity(len);
        const double a = gates[d];
        for (size_t e = 0; e < m.raw().size(); ++e)
          m.raw()[e] = (1.0 - a) * m.raw()[e] + a * f.raw()[e];
        return m;
      };
      Matrix m = dim_mix(0);
      for (int d = 1; d < shape.ndims(); ++d)
        m = kronecker_mask(m, dim_mix(d), shape.size());
      return m;
    }

    case ExpertFamily::Scale: {
      const int per_dim = cfg.max_factor - 1;
      auto build = [&](ScaleDirection dir) {
        Matrix m = scale_dim_mask(shape.dims()[0], cfg.max_factor, gates.data(),
                                  dir);
        for (int d = 1; d < shape.ndims(); ++d)
          m = kronecker_mask(
              m,
              scale_dim_mask(shape.dims()[d], cfg.max_factor,
                             gates.data() + d * per_dim, dir),
              shape.size());
        return m;
      };
      Matrix up = build(ScaleDirection::Up);
      Matrix down = build(ScaleDirection::Down);
      const double t = gates.back();  // high = down-scaling
      for (size_t e = 0; e < up.raw().size(); ++e)
        up.raw()[e] = (1.0 - t) * up.raw()[e] + t * down.raw()[e];
      return up;
    }
  }
  throw InvalidShape("expert_forward: unsupported family");
}

std::vector<double> discretize_gates(const std::vector<double>& gates) {
  std::vector<double> out(gates.size());
  for (size_t i = 0; i < gates.size(); ++i) out[i] = gates[i] >= 0.5 ? 1.0 : 0.0;
  return out;
}

Matrix product_of_experts(const std::vector<Matrix>& masks) {
  if (masks.empty()) throw InvalidShape("product_of_experts: empty list");
  Matrix out = masks[0];
  for (size_t i = 1; i < masks.size(); ++i) {
    if (out.cols() != masks[i].rows())
      throw InvalidShape("product_of_experts: shape mismatch");
    out = matmul(out, masks[i]);
  }
  for (double& v : out.raw()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

std::vector<double> gate_network(const std::vector<double>& features,
                                 const GateNet& net) {
  const int d = static_cast<int>(features.size());
  if (net.w1.rows() != d)
    throw InvalidShape("gate_network: feature size mismatch");
  const int hidden = net.w1.cols();
  const int gates = net.w2.cols();
  std::vector<double> h(hidden);
  for (int j = 0; j < hidden; ++j) {
    double acc = net.b1(0, j);
    for (int i = 0; i < d; ++i) acc += features[i] * net.w1(i, j);
    h[j] = std::tanh(acc);
  }
  std::vector<double> out(gates);
  for (int g = 0; g < gates; ++g) {
    double acc = net.b2(0, g);
    for (int j = 0; j < hidden; ++j) acc += h[j] * net.w2(j, g);
    out[g] = 1.0 / (1.0 + std::exp(-acc));
  }
  return out;
}

}  // namespace latformer
