#include "latformer/autodiff.hpp"

#include <cmath>

#include "latformer/attention.hpp"
#include "latformer/errors.hpp"

namespace latformer::ad {

OffsetTable OffsetTable::build(int l1, int l2) {
  OffsetTable t;
  t.l1 = l1;
  t.l2 = l2;
  const int n = l1 * l2;
  t.idx.resize(static_cast<size_t>(n) * n);
  for (int k = 0; k < n; ++k) {
    const int k1 = k / l2, k2 = k % l2;
    for (int i = 0; i < n; ++i) {
      const int i1 = i / l2, i2 = i % l2;
      const int d1 = ((k1 - i1) % l1 + l1) % l1;
      const int d2 = ((k2 - i2) % l2 + l2) % l2;
      t.idx[static_cast<size_t>(k) * n + i] = d1 * l2 + d2;
    }
  }
  return t;
}

Var Tape::add(Var a, Var b) {
  Matrix out = v(a.id);
  const Matrix& mb = v(b.id);
  if (!out.same_shape(mb)) throw InvalidShape("tape add: shape mismatch");
  for (size_t i = 0; i < out.raw().size(); ++i) out.raw()[i] += mb.raw()[i];
  return push(std::move(out), [a, b, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& go = t.g(self);
    Matrix& ga = t.g(a.id);
    Matrix& gb = t.g(b.id);
    for (size_t i = 0; i < go.raw().size(); ++i) {
      ga.raw()[i] += go.raw()[i];
      gb.raw()[i] += go.raw()[i];
    }
  });
}

Var Tape::matmul(Var a, Var b, double scale) {
  Matrix out = latformer::matmul(v(a.id), v(b.id));
  if (scale != 1.0)
    for (double& x : out.raw()) x *= scale;
  return push(std::move(out),
              [a, b, scale, self = static_cast<int>(nodes_.size())](Tape& t) {
                Matrix go = t.g(self);
                if (scale != 1.0)
                  for (double& x : go.raw()) x *= scale;
                Matrix da = latformer::matmul(go, transposed(t.v(b.id)));
                Matrix db = latformer::matmul(transposed(t.v(a.id)), go);
                Matrix& ga = t.g(a.id);
                Matrix& gb = t.g(b.id);
                for (size_t i = 0; i < da.raw().size(); ++i)
                  ga.raw()[i] += da.raw()[i];
                for (size_t i = 0; i < db.raw().size(); ++i)
                  gb.raw()[i] += db.raw()[i];
              });
}

Var Tape::transpose(Var a) {
  return push(transposed(v(a.id)),
              [a, self = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& go = t.g(self);
                Matrix& ga = t.g(a.id);
                for (int r = 0; r < go.rows(); ++r)
                  for (int c = 0; c < go.cols(); ++c) ga(c, r) += go(r, c);
              });
}

Var Tape::hadamard(Var a, Var b) {
  Matrix out = v(a.id);
  const Matrix& mb = v(b.id);
  if (!out.same_shape(mb)) throw InvalidShape("tape hadamard: shape mismatch");
  for (size_t i = 0; i < out.raw().size(); ++i) out.raw()[i] *= mb.raw()[i];
  return push(std::move(out), [a, b, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& go = t.g(self);
    const Matrix& va = t.v(a.id);
    const Matrix& vb = t.v(b.id);
    Matrix& ga = t.g(a.id);
    Matrix& gb = t.g(b.id);
    for (size_t i = 0; i < go.raw().size(); ++i) {
      ga.raw()[i] += go.raw()[i] * vb.raw()[i];
      gb.raw()[i] += go.raw()[i] * va.raw()[i];
    }
  });
}

Var Tape::tanh_(Var a) {
  Matrix out = v(a.id);
  for (double& x : out.raw()) x = std::tanh(x);
  return push(std::move(out), [a, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& go = t.g(self);
    const Matrix& y = t.v(self);
    Matrix& ga = t.g(a.id);
    for (size_t i = 0; i < go.raw().size(); ++i)
      ga.raw()[i] += go.raw()[i] * (1.0 - y.raw()[i] * y.raw()[i]);
  });
}

Var Tape::sigmoid(Var a) {
  Matrix out = v(a.id);
  for (double& x : out.raw()) x = 1.0 / (1.0 + std::exp(-x));
  return push(std::move(out), [a, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& go = t.g(self);
    const Matrix& y = t.v(self);
    Matrix& ga = t.g(a.id);
    for (size_t i = 0; i < go.raw().size(); ++i)
      ga.raw()[i] += go.raw()[i] * y.raw()[i] * (1.0 - y.raw()[i]);
  });
}

Var Tape::softmax_rows(Var a) {
  const Matrix& m = v(a.id);
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
  return push(std::move(out), [a, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& go = t.g(self);
    const Matrix& y = t.v(self);
    Matrix& ga = t.g(a.id);
    for (int r = 0; r < go.rows(); ++r) {
      double dot = 0.0;
      for (int c = 0; c < go.cols(); ++c) dot += go(r, c) * y(r, c);
      for (int c = 0; c < go.cols(); ++c)
        ga(r, c) += y(r, c) * (go(r, c) - dot);
    }
  });
}

Var Tape::row_normalize(Var a) {
  const Matrix& m = v(a.id);
  Matrix out(m.rows(), m.cols());
  std::vector<double> sums(m.rows());
  for (int r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (int c = 0; c < m.cols(); ++c) s += m(r, c);
    if (s < latformer::kDegenerateRowThreshold)
      throw DegenerateRow("row_normalize: masked row " + std::to_string(r) +
                          " has zero weight");
    sums[r] = s;
    for (int c = 0; c < m.cols(); ++c) out(r, c) = m(r, c) / s;
  }
  return push(std::move(out),
              [a, sums = std::move(sums),
               self = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& go = t.g(self);
                const Matrix& y = t.v(self);
                Matrix& ga = t.g(a.id);
                for (int r = 0; r < go.rows(); ++r) {
                  double dot = 0.0;
                  for (int c = 0; c < go.cols(); ++c) dot += go(r, c) * y(r, c);
                  for (int c = 0; c < go.cols(); ++c)
                    ga(r, c) += (go(r, c) - dot) / sums[r];
                }
              });
}

Var Tape::mean_rows(Var a) {
  const Matrix& m = v(a.id);
  Matrix out(1, m.cols());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) out(0, c) += m(r, c);
  for (double& x : out.raw()) x /= m.rows();
  return push(std::move(out), [a, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& go = t.g(self);
    Matrix& ga = t.g(a.id);
    const double inv = 1.0 / ga.rows();
    for (int r = 0; r < ga.rows(); ++r)
      for (int c = 0; c < ga.cols(); ++c) ga(r, c) += go(0, c) * inv;
  });
}

Var Tape::add_row_broadcast(Var x, Var b) {
  Matrix out = v(x.id);
  const Matrix& mb = v(b.id);
  if (mb.rows() != 1 || mb.cols() != out.cols())
    throw InvalidShape("add_row_broadcast: bias must be 1 x cols");
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c) out(r, c) += mb(0, c);
  return push(std::move(out), [x, b, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& go = t.g(self);
    Matrix& gx = t.g(x.id);
    Matrix& gb = t.g(b.id);
    for (int r = 0; r < go.rows(); ++r)
      for (int c = 0; c < go.cols(); ++c) {
        gx(r, c) += go(r, c);
        gb(0, c) += go(r, c);
      }
  });
}

Var Tape::noisy_embed(Var w_table, const std::vector<int>& cells, double noise) {
  const Matrix& w = v(w_table.id);
  const int d = w.cols();
  Matrix colsum(1, d);
  for (int r = 0; r < w.rows(); ++r)
    for (int c = 0; c < d; ++c) colsum(0, c) += w(r, c);
  Matrix out(static_cast<int>(cells.size()), d);
  for (size_t i = 0; i < cells.size(); ++i)
    for (int c = 0; c < d; ++c)
      out(static_cast<int>(i), c) =
          (1.0 - noise) * w(cells[i], c) + noise * colsum(0, c);
  return push(std::move(out),
              [w_table, cells, noise,
               self = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& go = t.g(self);
                Matrix& gw = t.g(w_table.id);
                const int d = go.cols();
                std::vector<double> gsum(d, 0.0);
                for (int i = 0; i < go.rows(); ++i)
                  for (int c = 0; c < d; ++c) {
                    gw(cells[i], c) += (1.0 - noise) * go(i, c);
                    gsum[c] += go(i, c);
                  }
                if (noise != 0.0)
                  for (int r = 0; r < gw.rows(); ++r)
                    for (int c = 0; c < d; ++c) gw(r, c) += noise * gsum[c];
              });
}

Var Tape::roll_row(Var a, int shift) {
  const Matrix& m = v(a.id);
  const int n = m.cols();
  const int s = ((shift % n) + n) % n;
  Matrix out(1, n);
  for (int t = 0; t < n; ++t) out(0, t) = m(0, (t - s + n) % n);
  return push(std::move(out),
              [a, s, n, self = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& go = t.g(self);
                Matrix& ga = t.g(a.id);
                for (int u = 0; u < n; ++u) ga(0, u) += go(0, (u + s) % n);
              });
}

Var Tape::lerp_gate(Var a, Var b, Var gates, int index) {
  const double alpha = v(gates.id)(0, index);
  Matrix out = v(a.id);
  const Matrix& mb = v(b.id);
  if (!out.same_shape(mb)) throw InvalidShape("lerp_gate: shape mismatch");
  for (size_t i = 0; i < out.raw().size(); ++i)
    out.raw()[i] = alpha * out.raw()[i] + (1.0 - alpha) * mb.raw()[i];
  return push(std::move(out),
              [a, b, gates, index, alpha,
               self = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& go = t.g(self);
                const Matrix& va = t.v(a.id);
                const Matrix& vb = t.v(b.id);
                Matrix& ga = t.g(a.id);
                Matrix& gb = t.g(b.id);
                double dalpha = 0.0;
                for (size_t i = 0; i < go.raw().size(); ++i) {
                  ga.raw()[i] += alpha * go.raw()[i];
                  gb.raw()[i] += (1.0 - alpha) * go.raw()[i];
                  dalpha += go.raw()[i] * (va.raw()[i] - vb.raw()[i]);
                }
                t.g(gates.id)(0, index) += dalpha;
              });
}

Var Tape::scatter_mix(Var a, const std::vector<int>& to, int out_size) {
  const Matrix& m = v(a.id);
  Matrix out(1, out_size);
  for (int i = 0; i < m.cols(); ++i) out(0, to[i]) += m(0, i);
  return push(std::move(out),
              [a, to, self = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& go = t.g(self);
                Matrix& ga = t.g(a.id);
                for (int i = 0; i < ga.cols(); ++i) ga(0, i) += go(0, to[i]);
              });
}

Var Tape::kron(Var a, Var b) {
  const Matrix& ma = v(a.id);
  const Matrix& mb = v(b.id);
  Matrix out(ma.rows() * mb.rows(), ma.cols() * mb.cols());
  for (int i = 0; i < ma.rows(); ++i)
    for (int j = 0; j < ma.cols(); ++j) {
      const double aij = ma(i, j);
      for (int k = 0; k < mb.rows(); ++k)
        for (int l = 0; l < mb.cols(); ++l)
          out(i * mb.rows() + k, j * mb.cols() + l) = aij * mb(k, l);
    }
  return push(std::move(out), [a, b, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& go = t.g(self);
    const Matrix& va = t.v(a.id);
    const Matrix& vb = t.v(b.id);
    Matrix& ga = t.g(a.id);
    Matrix& gb = t.g(b.id);
    for (int i = 0; i < va.rows(); ++i)
      for (int j = 0; j < va.cols(); ++j) {
        double acc = 0.0;
        for (int k = 0; k < vb.rows(); ++k)
          for (int l = 0; l < vb.cols(); ++l) {
            const double g = go(i * vb.rows() + k, j * vb.cols() + l);
            acc += g * vb(k, l);
            gb(k, l) += g * va(i, j);
          }
        ga(i, j) += acc;
      }
  });
}

Var Tape::offset_mask(Var w, const OffsetTable& table) {
  const Matrix& mw = v(w.id);
  const int n = table.l1 * table.l2;
  if (mw.rows() != 1 || mw.cols() != n)
    throw InvalidShape("offset_mask: weights must be 1 x (l1*l2)");
  Matrix out(n, n);
  for (size_t e = 0; e < out.raw().size(); ++e)
    out.raw()[e] = mw.raw()[table.idx[e]];
  return push(std::move(out),
              [w, &table, self = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& go = t.g(self);
                Matrix& gw = t.g(w.id);
                for (size_t e = 0; e < go.raw().size(); ++e)
                  gw.raw()[table.idx[e]] += go.raw()[e];
              });
}

Var Tape::circulant(Var c) {
  const Matrix& mc = v(c.id);
  const int n = mc.cols();
  Matrix out(n, n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) out(k, i) = mc(0, (k - i + n) % n);
  return push(std::move(out),
              [c, n, self = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& go = t.g(self);
                Matrix& gc = t.g(c.id);
                for (int k = 0; k < n; ++k)
                  for (int i = 0; i < n; ++i)
                    gc(0, (k - i + n) % n) += go(k, i);
              });
}

Var Tape::weighted_mask_sum(Var p, const std::vector<Matrix>* mats) {
  const Matrix& mp = v(p.id);
  if (mp.rows() != 1 || mp.cols() != static_cast<int>(mats->size()))
    throw InvalidShape("weighted_mask_sum: one weight per matrix required");
  Matrix out((*mats)[0].rows(), (*mats)[0].cols());
  for (size_t i = 0; i < mats->size(); ++i) {
    const double pi = mp(0, static_cast<int>(i));
    if (pi == 0.0) continue;
    const auto& src = (*mats)[i].raw();
    for (size_t e = 0; e < src.size(); ++e) out.raw()[e] += pi * src[e];
  }
  return push(std::move(out),
              [p, mats, self = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& go = t.g(self);
                Matrix& gp = t.g(p.id);
                for (size_t i = 0; i < mats->size(); ++i) {
                  const auto& src = (*mats)[i].raw();
                  double acc = 0.0;
                  for (size_t e = 0; e < src.size(); ++e)
                    acc += go.raw()[e] * src[e];
                  gp(0, static_cast<int>(i)) += acc;
                }
              });
}

Var Tape::graph_heat(Var w, const GroupGraph* graph, int steps, double lambda) {
  std::vector<double> cur = v(w.id).raw();
  for (int t = 0; t < steps; ++t) cur = heat_step(*graph, cur, lambda);
  Matrix out(1, static_cast<int>(cur.size()));
  out.raw() = std::move(cur);
  return push(std::move(out),
              [w, graph, steps, lambda,
               self = static_cast<int>(nodes_.size())](Tape& t) {
                std::vector<double> acc = t.g(self).raw();
                for (int s = 0; s < steps; ++s)
                  acc = heat_step_transpose(*graph, acc, lambda);
                Matrix& gw = t.g(w.id);
                for (size_t i = 0; i < acc.size(); ++i) gw.raw()[i] += acc[i];
              });
}

Var Tape::clamp01(Var a) {
  Matrix out = v(a.id);
  for (double& x : out.raw()) x = std::clamp(x, 0.0, 1.0);
  return push(std::move(out), [a, self = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& go = t.g(self);
    const Matrix& va = t.v(a.id);
    Matrix& ga = t.g(a.id);
    for (size_t i = 0; i < go.raw().size(); ++i)
      if (va.raw()[i] > 0.0 && va.raw()[i] < 1.0) ga.raw()[i] += go.raw()[i];
  });
}

Var Tape::ce_mean(Var logits, const std::vector<int>& targets) {
  const Matrix& m = v(logits.id);
  if (static_cast<size_t>(m.rows()) != targets.size())
    throw InvalidShape("ce_mean: one target per row required");
  Matrix probs(m.rows(), m.cols());
  double total = 0.0;
  for (int r = 0; r < m.rows(); ++r) {
    double mx = m(r, 0);
    for (int c = 1; c < m.cols(); ++c) mx = std::max(mx, m(r, c));
    double sum = 0.0;
    for (int c = 0; c < m.cols(); ++c) {
      double e = std::exp(m(r, c) - mx);
      probs(r, c) = e;
      sum += e;
    }
    for (int c = 0; c < m.cols(); ++c) probs(r, c) /= sum;
    total += std::log(sum) + mx - m(r, targets[r]);
  }
  Matrix out(1, 1);
  out(0, 0) = total / m.rows();
  return push(std::move(out),
              [logits, targets, probs = std::move(probs),
               self = static_cast<int>(nodes_.size())](Tape& t) {
                const double go = t.g(self)(0, 0) / probs.rows();
                Matrix& gl = t.g(logits.id);
                for (int r = 0; r < probs.rows(); ++r)
                  for (int c = 0; c < probs.cols(); ++c) {
                    double delta = probs(r, c) - (targets[r] == c ? 1.0 : 0.0);
                    gl(r, c) += go * delta;
                  }
              });
}

void Tape::backward(Var loss) {
  if (v(loss.id).rows() != 1 || v(loss.id).cols() != 1)
    throw InvalidShape("backward: loss must be a 1 x 1 scalar node");
  g(loss.id)(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this);
}

}  // namespace latformer::ad
