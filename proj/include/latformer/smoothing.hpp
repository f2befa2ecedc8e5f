#pragma once

#include <string>
#include <vector>

#include "latformer/experts.hpp"
#include "latformer/lattice.hpp"
#include "latformer/matrix.hpp"

namespace latformer {

// Graph over the elements of one action family: neighbors differ by one
// primitive action. Translation offsets form a torus, rotations a 4-cycle,
// reflections a flip hypercube (4-cycle in 2-D), scaling factors a path.
struct GroupGraph {
  std::vector<std::string> labels;
  std::vector<std::vector<int>> neighbors;
  int size() const { return static_cast<int>(labels.size()); }
  int degree(int i) const { return static_cast<int>(neighbors[i].size()); }
};

GroupGraph group_graph_translation(const LatticeShape& shape);
GroupGraph group_graph_rotation();
GroupGraph group_graph_reflection(int ndims);
GroupGraph group_graph_scale(const std::vector<int>& factors);

GroupGraph group_graph(ExpertFamily family, const LatticeShape& shape,
                       int max_factor = 5);

// One diffusion step: each node keeps (1-lambda) of its mass and spreads
// lambda equally over its neighbors. Equals neighborhood averaging on
// regular graphs and conserves total mass on any graph.
std::vector<double> heat_step(const GroupGraph& g, const std::vector<double>& w,
                              double lambda);
// Adjoint of heat_step (needed by reverse-mode gradients).
std::vector<double> heat_step_transpose(const GroupGraph& g,
                                        const std::vector<double>& w,
                                        double lambda);

// steps applications of heat_step.
std::vector<double> heat_smooth(const GroupGraph& g, std::vector<double> w,
                                int steps, double lambda = 0.5);

// Mean cross-entropy of per-cell color logits against categorical targets.
double cross_entropy_mean(const Matrix& logits, const std::vector<int>& targets);

// Sum of the plain-mask and smoothed-mask cross-entropies.
double dual_loss(const Matrix& logits_plain, const Matrix& logits_smooth,
                 const std::vector<int>& targets);

}  // namespace latformer
