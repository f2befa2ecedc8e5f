#include "latformer/smoothing.hpp"

#include <cmath>

#include "latformer/errors.hpp"

namespace latformer {

GroupGraph group_graph_translation(const LatticeShape& shape) {
  GroupGraph g;
  const int n = shape.size();
  g.labels.resize(n);
  g.neighbors.resize(n);
  for (int k = 0; k < n; ++k) {
    auto idx = shape.unflatten(k);
    std::string lab = "t";
    for (size_t d = 0; d < idx.size(); ++d)
      lab += (d ? "," : ":") + std::to_string(idx[d]);
    g.labels[k] = lab;
    for (size_t d = 0; d < idx.size(); ++d) {
      const int l = shape.dims()[d];
      if (l < 2) continue;
      for (int step : {1, -1}) {
        if (l == 2 && step == -1) continue;  // +1 and -1 coincide mod 2
        auto nb = idx;
        nb[d] = ((idx[d] + step) % l + l) % l;
        g.neighbors[k].push_back(shape.flatten(nb));
      }
    }
  }
  return g;
}

GroupGraph group_graph_rotation() {
  GroupGraph g;
  g.labels = {"rot:0", "rot:90", "rot:180", "rot:270"};
  g.neighbors = {{1, 3}, {2, 0}, {3, 1}, {0, 2}};
  return g;
}

GroupGraph group_graph_reflection(int ndims) {
  GroupGraph g;
  const int n = 1 << ndims;
  g.labels.resize(n);
  g.neighbors.resize(n);
  for (int b = 0; b < n; ++b) {
    std::string lab = "flip:";
    for (int d = 0; d < ndims; ++d) lab += (b >> d) & 1 ? '1' : '0';
    g.labels[b] = lab;
    for (int d = 0; d < ndims; ++d) g.neighbors[b].push_back(b ^ (1 << d));
  }
  return g;
}

GroupGraph group_graph_scale(const std::vector<int>& factors) {
  GroupGraph g;
  const int n = static_cast<int>(factors.size());
  g.labels.resize(n);
  g.neighbors.resize(n);
  for (int i = 0; i < n; ++i) {
    g.labels[i] = "scale:" + std::to_string(factors[i]);
    if (i > 0) g.neighbors[i].push_back(i - 1);
    if (i + 1 < n) g.neighbors[i].push_back(i + 1);
  }
  return g;
}

GroupGraph group_graph(ExpertFamily family, const LatticeShape& shape,
                       int max_factor) {
  switch (family) {
    case ExpertFamily::Translate:
      return group_graph_translation(shape);
    case ExpertFamily::Rotate:
      return group_graph_rotation();
    case ExpertFamily::Reflect:
      return group_graph_reflection(shape.ndims());
    case ExpertFamily::Scale:
      return group_graph_scale(scale_factor_support(max_factor));
  }
  throw InvalidShape("group_graph: unsupported family");
}

std::vector<double> heat_step(const GroupGraph& g, const std::vector<double>& w,
                              double lambda) {
  std::vector<double> out(w.size());
  for (size_t j = 0; j < w.size(); ++j) {
    const int deg = g.degree(static_cast<int>(j));
    if (deg == 0) {
      out[j] += w[j];  // isolated node keeps all its mass
      continue;
    }
    out[j] += (1.0 - lambda) * w[j];
    const double share = lambda * w[j] / deg;
    for (int nb : g.neighbors[j]) out[nb] += share;
  }
  return out;
}

std::vector<double> heat_step_transpose(const GroupGraph& g,
                                        const std::vector<double>& w,
                                        double lambda) {
  std::vector<double> out(w.size());
  for (size_t i = 0; i < w.size(); ++i) {
    const int deg = g.degree(static_cast<int>(i));
    if (deg == 0) {
      out[i] = w[i];
      continue;
    }
    double acc = 0.0;
    for (int nb : g.neighbors[i]) acc += w[nb];
    out[i] = (1.0 - lambda) * w[i] + lambda * acc / deg;
  }
  return out;
}

std::vector<double> heat_smooth(const GroupGraph& g, std::vector<double> w,
                                int steps, double lambda) {
  if (static_cast<int>(w.size()) != g.size())
    throw InvalidShape("heat_smooth: weight count must match graph size");
  for (int t = 0; t < steps; ++t) w = heat_step(g, w, lambda);
  return w;
}

double cross_entropy_mean(const Matrix& logits, const std::vector<int>& targets) {
  if (static_cast<size_t>(logits.rows()) != targets.size())
    throw InvalidShape("cross_entropy_mean: one target per row required");
  double total = 0.0;
  for (int r = 0; r < logits.rows(); ++r) {
    double mx = logits(r, 0);
    for (int c = 1; c < logits.cols(); ++c) mx = std::max(mx, logits(r, c));
    double lse = 0.0;
    for (int c = 0; c < logits.cols(); ++c) lse += std::exp(logits(r, c) - mx);
    total += std::log(lse) + mx - logits(r, targets[r]);
  }
  return total / logits.rows();
}

double dual_loss(const Matrix& logits_plain, const Matrix& logits_smooth,
                 const std::vector<int>& targets) {
  if (!logits_plain.same_shape(logits_smooth))
    throw InvalidShape("dual_loss: logit shapes differ");
  return cross_entropy_mean(logits_plain, targets) +
         cross_entropy_mean(logits_smooth, targets);
}

}  // namespace latformer
