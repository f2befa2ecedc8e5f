#pragma once

#include <map>
#include <string>
#include <vector>

#include "latformer/model.hpp"
#include "latformer/taskgen.hpp"

namespace latformer {

enum class Variant { LatFormer, LatFormerNoSmooth, AttentionBaseline };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct ExperimentConfig {
  uint64_t suite_seed = 7;
  std::vector<int> train_sizes = {2, 8, 32, 128, 512, 2048};
  int epochs = 30;
  int batch_size = 8;
  double lr = 1e-3;
  double gate_lr = 2e-2;
  int augment = 10;
  SmoothingConfig smoothing;
  std::vector<double> noise_levels = {0.2, 0.4, 0.6};
  int noise_train_pairs = 32;  // train-set size for the noise sweep
  int embed_dim = 32;
  int ffn_hidden = 128;
  int gate_hidden = 64;
  int translate_layers = 5;
  int max_scale_factor = 5;
  int pad_to = kMaxGridSide;
  int n_train_pairs = 2048;
  int n_test_pairs = 100;
  std::vector<std::string> categories;  // empty = all
  std::string out_dir = "results";
  int jobs = 2;
  bool save_checkpoints = false;

  void validate() const;  // throws ConfigError
};

ExperimentConfig load_experiment_config(const std::string& path);
std::string experiment_config_json(const ExperimentConfig& cfg);
uint64_t experiment_config_hash(const ExperimentConfig& cfg);

struct ResultRow {
  std::string task;
  std::string category;
  std::string variant;
  int train_size = 0;
  double noise = 0.0;
  double accuracy = 0.0;
  bool solved = false;
  double wall_seconds = 0.0;
};

// Expert stack per task category, in the fixed product order
// translate * rotate * reflect * scale.
std::vector<ExpertConfig> experts_for_category(const std::string& category,
                                               const ExperimentConfig& cfg);

// Model + train configuration for one benchmark cell. The cell seed is a
// pure function of (suite seed, task, size, variant, noise), so any row of
// the CSV can be re-derived in isolation.
uint64_t cell_seed(const ExperimentConfig& cfg, const std::string& task_name,
                   int train_size, Variant variant, double noise);

// Trains one cell and evaluates exact-match accuracy over the test pairs.
ResultRow run_cell(const Task& task, int train_size, Variant variant,
                   double noise, const ExperimentConfig& cfg,
                   const std::string& history_dir = "",
                   const std::string& checkpoint_dir = "");

// Subcommand bodies (the CLI wraps these and maps exceptions onto exit
// codes). Paths are created under cfg.out_dir.
void cmd_gen(const ExperimentConfig& cfg);
void cmd_train_eval(const ExperimentConfig& cfg, Variant variant);
void cmd_noise(const ExperimentConfig& cfg, Variant variant);
void cmd_mask(const std::string& action_text, const std::string& shape_text,
              const std::string& out_path);
void cmd_report(const ExperimentConfig& cfg);

// results.csv helpers (append-only; header written when the file is new).
void append_results_csv(const std::string& path,
                        const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::string& path);

// Per-(category, variant, size/noise) mean and standard deviation.
struct SummaryRow {
  std::string category, variant;
  int train_size = 0;
  double noise = 0.0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  int tasks = 0;
};
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

LatticeShape parse_shape(const std::string& text);  // "8x8" or "16"

}  // namespace latformer
