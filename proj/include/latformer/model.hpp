#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "latformer/attention.hpp"
#include "latformer/autodiff.hpp"
#include "latformer/experts.hpp"
#include "latformer/smoothing.hpp"
#include "latformer/taskgen.hpp"

namespace latformer {

struct SmoothingConfig {
  bool enabled = true;
  double lambda = 0.5;
  int steps = 2;
};

struct ModelConfig {
  int n_colors = kNumColors;
  int embed_dim = 32;
  int ffn_hidden = 128;
  int gate_hidden = 64;
  // Learned absolute positional embeddings feed the query/key path only, so
  // binary masks still select raw cell embeddings. Both model variants carry
  // them, which keeps parameter counts identical (gate nets aside).
  bool positional = true;
  // false gives the unmasked baseline: the same code path with an all-ones
  // mask and no gate networks.
  bool use_mask_expert = true;
  std::vector<ExpertConfig> experts = {{ExpertFamily::Translate, 5, 5}};
  SmoothingConfig smoothing;
  double noise_level = 0.0;  // w in the noisy one-hot embedding
};

struct Param {
  std::string name;
  Matrix value, grad, adam_m, adam_v;
  bool gate_group = false;
};

struct TrainConfig {
  int epochs = 40;
  int batch_size = 8;
  double lr = 1e-3;
  double gate_lr = 2e-2;  // gate networks step faster out of saturation
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // Color permutations per epoch; the first is the identity, the rest are
  // resampled every epoch and shared across all pairs of the task.
  int augment = 10;
  uint64_t seed = 0;
};

struct HistoryRow {
  int epoch = 0;
  double loss_plain = 0.0;
  double loss_smooth = 0.0;
  double train_acc = 0.0;  // exact-match fraction under the training forward
};

struct TrainResult {
  std::vector<HistoryRow> history;
  bool diverged = false;  // NonFinite aborted the run; history is partial
};

// One grid pair flattened to cell indices.
struct Example {
  std::vector<int> input;
  std::vector<int> target;
};

// A LatFormer layer bound to one lattice shape: noisy color embedding,
// masked self-attention with the expert-generated mask (plain + smoothed),
// and a tied-readout FFN head producing per-cell color logits.
class Model {
 public:
  Model(ModelConfig cfg, LatticeShape shape, uint64_t seed);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;

  const ModelConfig& config() const { return cfg_; }
  const LatticeShape& shape() const { return shape_; }

  struct ForwardStats {
    double loss_plain = 0.0;
    double loss_smooth = 0.0;
    std::vector<int> argmax;  // plain-head prediction per cell
  };

  // Training path: records the tape, backpropagates, accumulates
  // grad_scale * gradients into the parameter buffers.
  ForwardStats forward_backward(const Example& ex, double grad_scale);
  // Same forward without gradients (finite-difference checks).
  ForwardStats forward_loss(const Example& ex);

  // Inference path: plain arithmetic, discretized gates.
  std::vector<int> predict(const std::vector<int>& cells) const;
  // The soft product-of-experts masks the training forward would use
  // (plain, smoothed); the smoothed mask is empty when smoothing is off.
  std::pair<Matrix, Matrix> training_masks(const std::vector<int>& cells);
  // Soft gate values per expert for an input (inference path).
  std::vector<std::vector<double>> soft_gates(const std::vector<int>& cells) const;
  // The discretized product-of-experts mask used by predict.
  Matrix inference_mask(const std::vector<int>& cells) const;

  void zero_grads();
  void adam_step(const TrainConfig& cfg);

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  int64_t parameter_count(bool include_gates) const;

  // Sets the output FFN layer to zero so logits reduce to the tied readout
  // H W^T; with an orthogonal embedding the untrained network is exactly the
  // identity function.
  void set_ffn_identity();
  // Pins one expert's gate network to emit the given constant gates.
  void freeze_gates(int expert_index, const std::vector<double>& gates);

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

 private:
  struct ExpertState;

  void init_params(uint64_t seed);
  ad::Var expert_tape(ad::Tape& t, int e, ad::Var gates, bool smoothed);
  ForwardStats run_forward(const Example& ex, bool with_grad, double grad_scale);
  Matrix embed_plain(const std::vector<int>& cells) const;

  ModelConfig cfg_;
  LatticeShape shape_;
  std::vector<Param> params_;
  int p_w_, p_pos_, p_f1_, p_f1b_, p_f2_, p_f2b_;
  std::vector<std::array<int, 4>> p_gate_;  // per-expert G1, b1, G2, b2

  std::vector<std::unique_ptr<ExpertState>> experts_;
  ad::Tape tape_;
  int64_t adam_t_ = 0;
};

// Runs Adam over the task's train pairs with per-epoch color augmentation.
TrainResult train_model(Model& model, const Task& task, const TrainConfig& cfg);

// Exact-match accuracy of predict() over the pairs.
double evaluate_accuracy(const Model& model, const std::vector<GridPair>& pairs);

void save_history_csv(const std::vector<HistoryRow>& history,
                      const std::string& path);

}  // namespace latformer
