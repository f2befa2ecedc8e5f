#pragma once

#include <functional>
#include <vector>

#include "latformer/matrix.hpp"
#include "latformer/smoothing.hpp"

namespace latformer::ad {

// Handle into a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Precomputed row/column offset table mapping a flattened translation-weight
// vector onto an n x n mask: mask[k,i] = w[table[k*n+i]].
struct OffsetTable {
  int l1 = 0, l2 = 0;
  std::vector<int> idx;
  static OffsetTable build(int l1, int l2);
};

// Reverse-mode tape over dense matrices. One tape records one forward pass;
// backward() walks the recorded nodes in reverse. Not thread-safe; use one
// tape per training thread.
class Tape {
 public:
  Var constant(Matrix m) { return push(std::move(m), {}); }
  Var leaf(const Matrix& m) { return push(m, {}); }

  const Matrix& val(Var v) const { return nodes_[v.id].val; }
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }

  Var add(Var a, Var b);
  Var matmul(Var a, Var b, double scale = 1.0);
  Var transpose(Var a);
  Var hadamard(Var a, Var b);
  Var tanh_(Var a);
  Var sigmoid(Var a);
  Var softmax_rows(Var a);
  // Divides every row by its sum; throws DegenerateRow below 1e-12.
  Var row_normalize(Var a);
  Var mean_rows(Var a);
  // x: n x d plus broadcast row b: 1 x d.
  Var add_row_broadcast(Var x, Var b);
  // out_i = (1-w) * W[cells[i],:] + w * columnwise_sum(W).
  Var noisy_embed(Var w_table, const std::vector<int>& cells, double noise);
  // Cyclic roll of a 1 x n coefficient row: out[t] = in[(t - shift) mod n].
  Var roll_row(Var a, int shift);
  // alpha * a + (1 - alpha) * b with alpha = gates[0, index].
  Var lerp_gate(Var a, Var b, Var gates, int index);
  // out[to[i]] += in[i]; in and out are 1 x k rows.
  Var scatter_mix(Var a, const std::vector<int>& to, int out_size);
  Var kron(Var a, Var b);
  // 1 x (l1*l2) translation weights -> n x n mask through the offset table.
  Var offset_mask(Var w, const OffsetTable& table);
  // 1 x n coefficients -> n x n circulant (1-D translation weights).
  Var circulant(Var c);
  // sum_i p[0,i] * mats[i]; mats must outlive the tape.
  Var weighted_mask_sum(Var p, const std::vector<Matrix>* mats);
  // `steps` heat diffusion steps over the group graph (must outlive tape).
  Var graph_heat(Var w, const GroupGraph* graph, int steps, double lambda);
  Var clamp01(Var a);
  // Mean cross-entropy over rows; returns a 1 x 1 scalar node.
  Var ce_mean(Var logits, const std::vector<int>& targets);

  void backward(Var loss);
  void clear() { nodes_.clear(); }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix val;
    Matrix grad;
    std::function<void(Tape&)> back;
  };

  Var push(Matrix val, std::function<void(Tape&)> back) {
    Node n;
    n.grad = Matrix(val.rows(), val.cols());
    n.val = std::move(val);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  Matrix& g(int id) { return nodes_[id].grad; }
  const Matrix& v(int id) const { return nodes_[id].val; }

  std::vector<Node> nodes_;
};

}  // namespace latformer::ad
