#pragma once

#include <vector>

#include "latformer/lattice.hpp"
#include "latformer/masks.hpp"
#include "latformer/matrix.hpp"

namespace latformer {

enum class ExpertFamily { Translate, Rotate, Reflect, Scale };

ExpertFamily expert_family_from_string(const std::string& s);
std::string to_string(ExpertFamily f);

// A gated stack of frozen convolutions of the identity. Kernels never learn;
// the gates (sigmoid outputs of a small FFN) select which layers fire.
struct ExpertConfig {
  ExpertFamily family = ExpertFamily::Translate;
  // Translation: gated layers per dimension; layer l shifts by 2^l, so L
  // layers reach any displacement up to 2^L - 1 per dimension.
  int layers_per_dim = 5;
  // Scaling: one gated layer per factor h in {2..max_factor} per dimension,
  // plus one final transpose gate that swaps up-scaling for down-scaling.
  int max_factor = 5;
};

// Number of gates the expert consumes on the given shape.
// Gate layout:
//   translate: [dim0: l=0..L-1][dim1: l=0..L-1]...
//   rotate:    three 90-degree layers
//   reflect:   one flip gate per dimension
//   scale:     [dim0: h=2..max][dim1: h=2..max]..., then the transpose gate
int expert_gate_count(const ExpertConfig& cfg, const LatticeShape& shape);

// Soft mask for explicit gate values in [0,1]. All gates 0 yield the
// identity; binary gates yield an exact action mask.
Matrix expert_forward(const ExpertConfig& cfg, const std::vector<double>& gates,
                      const LatticeShape& shape);

// Threshold at 0.5; the tie discretizes to 1.
std::vector<double> discretize_gates(const std::vector<double>& gates);

// Left-to-right matrix product, clamped to [0,1] entrywise.
Matrix product_of_experts(const std::vector<Matrix>& masks);

// Reachable scaling factors (sorted products of subsets of {2..max_factor},
// including the empty product 1).
std::vector<int> scale_factor_support(int max_factor);

// One feed-forward layer (tanh hidden) followed by a sigmoid per gate.
struct GateNet {
  Matrix w1, b1;  // d x hidden, 1 x hidden
  Matrix w2, b2;  // hidden x gates, 1 x gates
};

std::vector<double> gate_network(const std::vector<double>& features,
                                 const GateNet& net);

}  // namespace latformer
