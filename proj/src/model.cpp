#include "latformer/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "latformer/errors.hpp"
#include "latformer/masks.hpp"
#include "latformer/rng.hpp"

namespace latformer {

using nlohmann::json;

struct Model::ExpertState {
  ExpertConfig cfg;
  int gate_count = 0;

  ad::OffsetTable offsets;
  GroupGraph translate_graph;

  std::vector<Matrix> rotation_mats;
  GroupGraph rotation_graph;

  std::vector<Matrix> reflection_mats;
  GroupGraph reflection_graph;

  std::vector<int> support;
  std::vector<std::vector<int>> scale_maps;       // per layer h = 2..max
  std::vector<std::vector<Matrix>> scale_up;      // per dim, per factor
  std::vector<std::vector<Matrix>> scale_down;
  GroupGraph scale_graph;

  ExpertState(const ExpertConfig& c, const LatticeShape& shape) : cfg(c) {
    gate_count = expert_gate_count(c, shape);
    const int nd = shape.ndims();
    switch (c.family) {
      case ExpertFamily::Translate: {
        const int l1 = shape.dims()[0];
        const int l2 = nd == 2 ? shape.dims()[1] : 1;
        offsets = ad::OffsetTable::build(l1, l2);
        translate_graph = group_graph_translation(shape);
        break;
      }
      case ExpertFamily::Rotate: {
        if (!shape.is_square_2d())
          throw InvalidShape("rotation expert requires a square 2-D lattice");
        rotation_mats.push_back(Matrix::identity(shape.size()));
        for (int k = 1; k <= 3; ++k)
          rotation_mats.push_back(
              action_mask(LatticeAction::rotate90(k), shape, shape.size()));
        rotation_graph = group_graph_rotation();
        break;
      }
      case ExpertFamily::Reflect: {
        auto flip = [&](int d) {
          const int len = shape.dims()[d];
          return mask_from_shift(
              shift_vector(LatticeAction::reflect({true}), LatticeShape({len})),
              len);
        };
        if (nd == 1) {
          reflection_mats = {Matrix::identity(shape.size()), flip(0)};
        } else {
          Matrix i0 = Matrix::identity(shape.dims()[0]);
          Matrix i1 = Matrix::identity(shape.dims()[1]);
          Matrix f0 = flip(0), f1 = flip(1);
          // index b0*2 + b1 (b_d = 1 means dimension d flipped)
          reflection_mats = {kronecker_mask(i0, i1, shape.size()),
                             kronecker_mask(i0, f1, shape.size()),
                             kronecker_mask(f0, i1, shape.size()),
                             kronecker_mask(f0, f1, shape.size())};
        }
        reflection_graph = group_graph_reflection(nd);
        break;
      }
      case ExpertFamily::Scale: {
        support = scale_factor_support(c.max_factor);
        const int k = static_cast<int>(support.size());
        auto index_of = [&](int f) {
          auto it = std::lower_bound(support.begin(), support.end(), f);
          if (it == support.end() || *it != f) return -1;
          return static_cast<int>(it - support.begin());
        };
        for (int h = 2; h <= c.max_factor; ++h) {
          std::vector<int> to(k);
          for (int i = 0; i < k; ++i) {
            int j = index_of(support[i] * h);
            to[i] = j < 0 ? i : j;  // unreachable products carry zero mass
          }
          scale_maps.push_back(std::move(to));
        }
        scale_up.resize(nd);
        scale_down.resize(nd);
        for (int d = 0; d < nd; ++d) {
          const int len = shape.dims()[d];
          LatticeShape line({len});
          for (int f : support) {
            if (f == 1) {
              scale_up[d].push_back(Matrix::identity(len));
              scale_down[d].push_back(Matrix::identity(len));
            } else {
              scale_up[d].push_back(mask_from_shift(
                  shift_vector(LatticeAction::scale({f}, ScaleDirection::Up),
                               line),
                  len));
              scale_down[d].push_back(mask_from_shift(
                  shift_vector(LatticeAction::scale({f}, ScaleDirection::Down),
                               line),
                  len));
            }
          }
        }
        scale_graph = group_graph_scale(support);
        break;
      }
    }
  }
};

Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

Model::Model(ModelConfig cfg, LatticeShape shape, uint64_t seed)
    : cfg_(std::move(cfg)), shape_(std::move(shape)) {
  if (shape_.ndims() < 1 || shape_.ndims() > 2)
    throw InvalidShape("model supports 1-D and 2-D lattices");
  if (cfg_.use_mask_expert)
    for (const auto& e : cfg_.experts)
      experts_.push_back(std::make_unique<ExpertState>(e, shape_));
  init_params(seed);
}

void Model::init_params(uint64_t seed) {
  SplitMix64 rng(seed);
  auto gaussian = [&](int r, int c, double scale) {
    Matrix m(r, c);
    for (double& x : m.raw()) x = rng.next_gaussian() * scale;
    return m;
  };
  auto push = [&](const std::string& name, Matrix value, bool gate_group) {
    Param p;
    p.name = name;
    p.grad = Matrix(value.rows(), value.cols());
    p.adam_m = Matrix(value.rows(), value.cols());
    p.adam_v = Matrix(value.rows(), value.cols());
    p.value = std::move(value);
    p.gate_group = gate_group;
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
  };

  const int d = cfg_.embed_dim;
  // Orthonormal embedding rows: the tied readout then scores the true color
  // strictly highest, so the untrained network starts as the identity map.
  Matrix w = gaussian(cfg_.n_colors, d, 1.0);
  for (int r = 0; r < w.rows(); ++r) {
    for (int p = 0; p < r; ++p) {
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += w(r, c) * w(p, c);
      for (int c = 0; c < d; ++c) w(r, c) -= dot * w(p, c);
    }
    double norm = 0.0;
    for (int c = 0; c < d; ++c) norm += w(r, c) * w(r, c);
    norm = std::sqrt(norm);
    for (int c = 0; c < d; ++c) w(r, c) /= norm;
  }
  p_w_ = push("embedding", std::move(w), false);

  p_pos_ = -1;
  if (cfg_.positional)
    p_pos_ = push("positional", gaussian(shape_.size(), d, 0.02), false);

  p_f1_ = push("ffn_w1", gaussian(d, cfg_.ffn_hidden, 1.0 / std::sqrt(d)), false);
  p_f1b_ = push("ffn_b1", Matrix(1, cfg_.ffn_hidden), false);
  p_f2_ = push("ffn_w2", gaussian(cfg_.ffn_hidden, cfg_.n_colors, 0.01), false);
  p_f2b_ = push("ffn_b2", Matrix(1, cfg_.n_colors), false);

  for (size_t e = 0; e < experts_.size(); ++e) {
    const std::string base = "gate_" + to_string(experts_[e]->cfg.family) +
                             std::to_string(e);
    std::array<int, 4> idx{};
    idx[0] = push(base + "_w1", gaussian(d, cfg_.gate_hidden, 1.0 / std::sqrt(d)),
                  true);
    idx[1] = push(base + "_b1", Matrix(1, cfg_.gate_hidden), true);
    // zero output layer: every gate starts exactly at sigmoid(0) = 1/2
    idx[2] = push(base + "_w2", Matrix(cfg_.gate_hidden, experts_[e]->gate_count),
                  true);
    idx[3] = push(base + "_b2", Matrix(1, experts_[e]->gate_count), true);
    p_gate_.push_back(idx);
  }
}

namespace {

int argmax_row(const Matrix& m, int r) {
  int best = 0;
  for (int c = 1; c < m.cols(); ++c)
    if (m(r, c) > m(r, best)) best = c;
  return best;
}

}  // namespace

Model::ForwardStats Model::run_forward(const Example& ex, bool with_grad,
                                       double grad_scale) {
  const int n = shape_.size();
  if (static_cast<int>(ex.input.size()) != n ||
      static_cast<int>(ex.target.size()) != n)
    throw InvalidShape("forward: example size does not match lattice");

  ad::Tape& t = tape_;
  t.clear();
  std::vector<std::pair<int, ad::Var>> bound;
  auto bind = [&](int param_idx) {
    ad::Var v = t.leaf(params_[param_idx].value);
    bound.emplace_back(param_idx, v);
    return v;
  };

  ad::Var W = bind(p_w_);
  ad::Var F1 = bind(p_f1_), F1b = bind(p_f1b_);
  ad::Var F2 = bind(p_f2_), F2b = bind(p_f2b_);

  ad::Var X = t.noisy_embed(W, ex.input, cfg_.noise_level);
  ad::Var Xqk = X;
  if (cfg_.positional) Xqk = t.add(X, bind(p_pos_));

  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.embed_dim));
  ad::Var A = t.softmax_rows(t.matmul(Xqk, t.transpose(Xqk), scale));

  const bool smoothing = cfg_.use_mask_expert && cfg_.smoothing.enabled &&
                         !experts_.empty();
  ad::Var mask_p, mask_s;
  if (cfg_.use_mask_expert && !experts_.empty()) {
    ad::Var feat = t.mean_rows(X);
    std::vector<ad::Var> plain, smooth;
    for (size_t e = 0; e < experts_.size(); ++e) {
      ad::Var g1 = bind(p_gate_[e][0]), g1b = bind(p_gate_[e][1]);
      ad::Var g2 = bind(p_gate_[e][2]), g2b = bind(p_gate_[e][3]);
      ad::Var hid = t.tanh_(t.add_row_broadcast(t.matmul(feat, g1), g1b));
      ad::Var gates = t.sigmoid(t.add_row_broadcast(t.matmul(hid, g2), g2b));
      plain.push_back(expert_tape(t, static_cast<int>(e), gates, false));
      if (smoothing)
        smooth.push_back(expert_tape(t, static_cast<int>(e), gates, true));
    }
    auto product = [&](const std::vector<ad::Var>& ms) {
      ad::Var acc = ms[0];
      for (size_t i = 1; i < ms.size(); ++i) acc = t.matmul(acc, ms[i]);
      return t.clamp01(acc);
    };
    mask_p = product(plain);
    if (smoothing) mask_s = product(smooth);
  } else {
    mask_p = t.constant(Matrix(n, n, 1.0));
  }

  auto head = [&](ad::Var mask) {
    ad::Var an = t.row_normalize(t.hadamard(A, mask));
    ad::Var h = t.matmul(an, X);
    ad::Var hid = t.tanh_(t.add_row_broadcast(t.matmul(h, F1), F1b));
    ad::Var ffn = t.add_row_broadcast(t.matmul(hid, F2), F2b);
    return t.add(t.matmul(h, t.transpose(W)), ffn);
  };

  ad::Var logits_p = head(mask_p);
  ad::Var loss_p = t.ce_mean(logits_p, ex.target);

  ForwardStats st;
  st.loss_plain = t.val(loss_p)(0, 0);
  ad::Var total = loss_p;
  if (smoothing) {
    ad::Var loss_s = t.ce_mean(head(mask_s), ex.target);
    st.loss_smooth = t.val(loss_s)(0, 0);
    total = t.add(loss_p, loss_s);
  }

  const Matrix& lp = t.val(logits_p);
  st.argmax.resize(n);
  for (int r = 0; r < n; ++r) st.argmax[r] = argmax_row(lp, r);

  if (with_grad) {
    t.backward(total);
    for (auto& [idx, var] : bound) {
      const Matrix& g = t.grad(var);
      auto& dst = params_[idx].grad.raw();
      for (size_t i = 0; i < dst.size(); ++i)
        dst[i] += grad_scale * g.raw()[i];
    }
  }
  t.clear();
  return st;
}

ad::Var Model::expert_tape(ad::Tape& t, int e, ad::Var gates, bool smoothed) {
  ExpertState& st = *experts_[e];
  const int nd = shape_.ndims();
  const auto& smooth_cfg = cfg_.smoothing;

  switch (st.cfg.family) {
    case ExpertFamily::Translate: {
      std::vector<ad::Var> coeffs;
      for (int d = 0; d < nd; ++d) {
        const int len = shape_.dims()[d];
        Matrix e0(1, len);
        e0(0, 0) = 1.0;
        ad::Var c = t.constant(std::move(e0));
        for (int l = 0; l < st.cfg.layers_per_dim; ++l)
          c = t.lerp_gate(t.roll_row(c, (1 << l) % len), c, gates,
                          d * st.cfg.layers_per_dim + l);
        coeffs.push_back(c);
      }
      ad::Var w = nd == 2 ? t.kron(coeffs[0], coeffs[1]) : coeffs[0];
      if (smoothed)
        w = t.graph_heat(w, &st.translate_graph, smooth_cfg.steps,
                         smooth_cfg.lambda);
      return t.offset_mask(w, st.offsets);
    }

    case ExpertFamily::Rotate: {
      Matrix e0(1, 4);
      e0(0, 0) = 1.0;
      ad::Var p = t.constant(std::move(e0));
      for (int l = 0; l < 3; ++l)
        p = t.lerp_gate(t.roll_row(p, 1), p, gates, l);
      if (smoothed)
        p = t.graph_heat(p, &st.rotation_graph, smooth_cfg.steps,
                         smooth_cfg.lambda);
      return t.weighted_mask_sum(p, &st.rotation_mats);
    }

    case ExpertFamily::Reflect: {
      std::vector<ad::Var> qs;
      for (int d = 0; d < nd; ++d) {
        Matrix e0(1, 2);
        e0(0, 0) = 1.0;
        ad::Var q = t.constant(std::move(e0));
        q = t.lerp_gate(t.roll_row(q, 1), q, gates, d);
        qs.push_back(q);
      }
      ad::Var w = nd == 2 ? t.kron(qs[0], qs[1]) : qs[0];
      if (smoothed)
        w = t.graph_heat(w, &st.reflection_graph, smooth_cfg.steps,
                         smooth_cfg.lambda);
      return t.weighted_mask_sum(w, &st.reflection_mats);
    }

    case ExpertFamily::Scale: {
      const int per_dim = st.cfg.max_factor - 1;
      const int k = static_cast<int>(st.support.size());
      std::vector<ad::Var> up, down;
      for (int d = 0; d < nd; ++d) {
        Matrix e0(1, k);
        e0(0, 0) = 1.0;  // support[0] == 1, the identity factor
        ad::Var p = t.constant(std::move(e0));
        for (int h = 2; h <= st.cfg.max_factor; ++h)
          p = t.lerp_gate(t.scatter_mix(p, st.scale_maps[h - 2], k), p, gates,
                          d * per_dim + (h - 2));
        if (smoothed)
          p = t.graph_heat(p, &st.scale_graph, smooth_cfg.steps,
                           smooth_cfg.lambda);
        up.push_back(t.weighted_mask_sum(p, &st.scale_up[d]));
        down.push_back(t.weighted_mask_sum(p, &st.scale_down[d]));
      }
      ad::Var u = nd == 2 ? t.kron(up[0], up[1]) : up[0];
      ad::Var v = nd == 2 ? t.kron(down[0], down[1]) : down[0];
      // transpose gate: high means down-scaling
      return t.lerp_gate(v, u, gates, st.gate_count - 1);
    }
  }
  throw InvalidShape("expert_tape: unsupported family");
}

std::pair<Matrix, Matrix> Model::training_masks(const std::vector<int>& cells) {
  const int n = shape_.size();
  if (!cfg_.use_mask_expert || experts_.empty())
    return {Matrix(n, n, 1.0), Matrix()};
  ad::Tape& t = tape_;
  t.clear();
  ad::Var W = t.leaf(params_[p_w_].value);
  ad::Var X = t.noisy_embed(W, cells, cfg_.noise_level);
  ad::Var feat = t.mean_rows(X);
  std::vector<ad::Var> plain, smooth;
  for (size_t e = 0; e < experts_.size(); ++e) {
    ad::Var g1 = t.leaf(params_[p_gate_[e][0]].value);
    ad::Var g1b = t.leaf(params_[p_gate_[e][1]].value);
    ad::Var g2 = t.leaf(params_[p_gate_[e][2]].value);
    ad::Var g2b = t.leaf(params_[p_gate_[e][3]].value);
    ad::Var hid = t.tanh_(t.add_row_broadcast(t.matmul(feat, g1), g1b));
    ad::Var gates = t.sigmoid(t.add_row_broadcast(t.matmul(hid, g2), g2b));
    plain.push_back(expert_tape(t, static_cast<int>(e), gates, false));
    if (cfg_.smoothing.enabled)
      smooth.push_back(expert_tape(t, static_cast<int>(e), gates, true));
  }
  auto product = [&](const std::vector<ad::Var>& ms) {
    ad::Var acc = ms[0];
    for (size_t i = 1; i < ms.size(); ++i) acc = t.matmul(acc, ms[i]);
    return t.clamp01(acc);
  };
  Matrix mp = t.val(product(plain));
  Matrix ms;
  if (cfg_.smoothing.enabled) ms = t.val(product(smooth));
  t.clear();
  return {std::move(mp), std::move(ms)};
}

Model::ForwardStats Model::forward_backward(const Example& ex,
                                            double grad_scale) {
  return run_forward(ex, true, grad_scale);
}

Model::ForwardStats Model::forward_loss(const Example& ex) {
  return run_forward(ex, false, 0.0);
}

Matrix Model::embed_plain(const std::vector<int>& cells) const {
  const Matrix& w = params_[p_w_].value;
  const double noise = cfg_.noise_level;
  const int d = w.cols();
  std::vector<double> colsum(d, 0.0);
  for (int r = 0; r < w.rows(); ++r)
    for (int c = 0; c < d; ++c) colsum[c] += w(r, c);
  Matrix x(static_cast<int>(cells.size()), d);
  for (size_t i = 0; i < cells.size(); ++i)
    for (int c = 0; c < d; ++c)
      x(static_cast<int>(i), c) =
          (1.0 - noise) * w(cells[i], c) + noise * colsum[c];
  return x;
}

std::vector<std::vector<double>> Model::soft_gates(
    const std::vector<int>& cells) const {
  Matrix x = embed_plain(cells);
  std::vector<double> feat(x.cols(), 0.0);
  for (int r = 0; r < x.rows(); ++r)
    for (int c = 0; c < x.cols(); ++c) feat[c] += x(r, c);
  for (double& f : feat) f /= x.rows();

  std::vector<std::vector<double>> out;
  for (size_t e = 0; e < experts_.size(); ++e) {
    GateNet net{params_[p_gate_[e][0]].value, params_[p_gate_[e][1]].value,
                params_[p_gate_[e][2]].value, params_[p_gate_[e][3]].value};
    out.push_back(gate_network(feat, net));
  }
  return out;
}

Matrix Model::inference_mask(const std::vector<int>& cells) const {
  const int n = shape_.size();
  if (!cfg_.use_mask_expert || experts_.empty()) return Matrix(n, n, 1.0);
  auto gates = soft_gates(cells);
  std::vector<Matrix> masks;
  for (size_t e = 0; e < experts_.size(); ++e)
    masks.push_back(expert_forward(experts_[e]->cfg,
                                   discretize_gates(gates[e]), shape_));
  return product_of_experts(masks);
}

std::vector<int> Model::predict(const std::vector<int>& cells) const {
  const int n = shape_.size();
  if (static_cast<int>(cells.size()) != n)
    throw InvalidShape("predict: cell count does not match lattice");
  Matrix x = embed_plain(cells);
  Matrix xqk = x;
  if (cfg_.positional) {
    const Matrix& pos = params_[p_pos_].value;
    for (size_t i = 0; i < xqk.raw().size(); ++i)
      xqk.raw()[i] += pos.raw()[i];
  }
  Matrix mask = inference_mask(cells);
  Matrix h = masked_attention(xqk, xqk, x, mask);

  const Matrix& f1 = params_[p_f1_].value;
  const Matrix& f1b = params_[p_f1b_].value;
  const Matrix& f2 = params_[p_f2_].value;
  const Matrix& f2b = params_[p_f2b_].value;
  Matrix hid = matmul(h, f1);
  for (int r = 0; r < hid.rows(); ++r)
    for (int c = 0; c < hid.cols(); ++c)
      hid(r, c) = std::tanh(hid(r, c) + f1b(0, c));
  Matrix logits = matmul(h, transposed(params_[p_w_].value));
  Matrix ffn = matmul(hid, f2);
  for (int r = 0; r < logits.rows(); ++r)
    for (int c = 0; c < logits.cols(); ++c)
      logits(r, c) += ffn(r, c) + f2b(0, c);

  std::vector<int> out(n);
  for (int r = 0; r < n; ++r) out[r] = argmax_row(logits, r);
  return out;
}

void Model::zero_grads() {
  for (auto& p : params_)
    std::fill(p.grad.raw().begin(), p.grad.raw().end(), 0.0);
}

void Model::adam_step(const TrainConfig& cfg) {
  ++adam_t_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_t_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_t_));
  for (auto& p : params_) {
    const double lr = p.gate_group ? cfg.gate_lr : cfg.lr;
    auto& val = p.value.raw();
    auto& g = p.grad.raw();
    auto& m = p.adam_m.raw();
    auto& v = p.adam_v.raw();
    for (size_t i = 0; i < val.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      val[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
      if (!std::isfinite(val[i]))
        throw NonFinite("adam_step: parameter " + p.name + " became non-finite");
    }
  }
}

int64_t Model::parameter_count(bool include_gates) const {
  int64_t total = 0;
  for (const auto& p : params_)
    if (include_gates || !p.gate_group)
      total += static_cast<int64_t>(p.value.size());
  return total;
}

void Model::set_ffn_identity() {
  std::fill(params_[p_f2_].value.raw().begin(),
            params_[p_f2_].value.raw().end(), 0.0);
  std::fill(params_[p_f2b_].value.raw().begin(),
            params_[p_f2b_].value.raw().end(), 0.0);
}

void Model::freeze_gates(int expert_index, const std::vector<double>& gates) {
  auto& idx = p_gate_[expert_index];
  for (int j : {0, 1, 2})
    std::fill(params_[idx[j]].value.raw().begin(),
              params_[idx[j]].value.raw().end(), 0.0);
  Matrix& b2 = params_[idx[3]].value;
  if (static_cast<int>(gates.size()) != b2.cols())
    throw InvalidShape("freeze_gates: gate count mismatch");
  for (int g = 0; g < b2.cols(); ++g) b2(0, g) = gates[g] >= 0.5 ? 20.0 : -20.0;
}

void Model::save_checkpoint(const std::string& path) const {
  json j;
  j["version"] = 1;
  j["lattice"] = shape_.dims();
  json tensors = json::object();
  for (const auto& p : params_) {
    tensors[p.name] = {{"shape", {p.value.rows(), p.value.cols()}},
                       {"data", p.value.raw()}};
  }
  j["params"] = std::move(tensors);
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << j.dump() << "\n";
}

void Model::load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw ValidationError(path + ": unsupported checkpoint version");
  const auto& tensors = j.at("params");
  for (auto& p : params_) {
    if (!tensors.contains(p.name))
      throw ValidationError(path + ": missing tensor " + p.name);
    const auto& tj = tensors[p.name];
    auto shape = tj.at("shape").get<std::vector<int>>();
    if (shape.size() != 2 || shape[0] != p.value.rows() ||
        shape[1] != p.value.cols())
      throw ValidationError(path + ": shape mismatch for " + p.name);
    auto data = tj.at("data").get<std::vector<double>>();
    if (data.size() != p.value.size())
      throw ValidationError(path + ": data size mismatch for " + p.name);
    p.value.raw() = std::move(data);
  }
}

TrainResult train_model(Model& model, const Task& task, const TrainConfig& cfg) {
  if (task.train.empty())
    throw InvalidShape("train: task needs at least one train pair");
  TrainResult result;
  SplitMix64 rng(cfg.seed);

  std::vector<Example> examples;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    examples.clear();
    const int n_perms = std::max(1, cfg.augment);
    for (int a = 0; a < n_perms; ++a) {
      const auto perm =
          a == 0 ? identity_color_permutation() : random_color_permutation(rng);
      for (const auto& pair : task.train)
        examples.push_back(Example{grid_cells(color_permute(pair.input, perm)),
                                   grid_cells(color_permute(pair.output, perm))});
    }
    rng.shuffle(examples);

    double loss_p = 0.0, loss_s = 0.0;
    int exact = 0;
    bool aborted = false;
    for (size_t start = 0; start < examples.size();
         start += cfg.batch_size) {
      const size_t stop = std::min(examples.size(),
                                   start + static_cast<size_t>(cfg.batch_size));
      model.zero_grads();
      try {
        for (size_t i = start; i < stop; ++i) {
          auto st = model.forward_backward(examples[i],
                                           1.0 / static_cast<double>(stop - start));
          if (!std::isfinite(st.loss_plain) || !std::isfinite(st.loss_smooth))
            throw NonFinite("train: loss became non-finite");
          loss_p += st.loss_plain;
          loss_s += st.loss_smooth;
          if (st.argmax == examples[i].target) ++exact;
        }
        model.adam_step(cfg);
      } catch (const NonFinite&) {
        result.diverged = true;
        aborted = true;
        break;
      }
    }
    if (aborted) break;
    HistoryRow row;
    row.epoch = epoch;
    row.loss_plain = loss_p / static_cast<double>(examples.size());
    row.loss_smooth = loss_s / static_cast<double>(examples.size());
    row.train_acc = static_cast<double>(exact) / static_cast<double>(examples.size());
    result.history.push_back(row);
  }
  return result;
}

double evaluate_accuracy(const Model& model, const std::vector<GridPair>& pairs) {
  if (pairs.empty()) return 0.0;
  int correct = 0;
  for (const auto& p : pairs) {
    auto pred = model.predict(grid_cells(p.input));
    if (pred == grid_cells(p.output)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

void save_history_csv(const std::vector<HistoryRow>& history,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << "epoch,loss_plain,loss_smooth,train_acc\n";
  char buf[160];
  for (const auto& row : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", row.epoch,
                  row.loss_plain, row.loss_smooth, row.train_acc);
    out << buf;
  }
}

}  // namespace latformer
