// Command-line entry point: synthetic task generation, training/evaluation
// sweeps, mask dumps and result reports.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "latformer/errors.hpp"
#include "latformer/harness.hpp"

using namespace latformer;

namespace {

ExperimentConfig make_config(const std::string& config_path, uint64_t* seed,
                             std::string* out_dir, int* jobs) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = load_experiment_config(config_path);
  if (seed) cfg.suite_seed = *seed;
  if (out_dir && !out_dir->empty()) cfg.out_dir = *out_dir;
  if (jobs && *jobs > 0) cfg.jobs = *jobs;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lattice-symmetry attention masks: tasks, training, reports"};
  app.require_subcommand(1);

  std::string config_path, out_dir, variant_name = "latformer";
  uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
  app.add_option("--config", config_path, "experiment config (JSON)");
  app.add_option("--seed", seed, "override the suite seed")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_option("--out", out_dir, "override the output directory");
  app.add_option("--jobs", jobs, "worker threads for sweeps");

  auto* gen = app.add_subcommand("gen", "generate the synthetic task suite");

  auto* train_eval = app.add_subcommand(
      "train-eval", "train and evaluate a variant over all (task, size) cells");
  train_eval->add_option("--variant", variant_name,
                         "latformer | latformer_nosmooth | attention_baseline");

  auto* noise = app.add_subcommand(
      "noise", "noise-robustness sweep over the configured noise levels");
  noise->add_option("--variant", variant_name, "model variant");

  auto* mask = app.add_subcommand("mask", "write the exact mask of an action");
  std::string action_text = "identity", shape_text = "8x8",
              mask_out = "mask.pgm";
  mask->add_option("--action", action_text,
                   "e.g. translate:1,1 rotate90:2 reflect:diag scale:up:2,2");
  mask->add_option("--shape", shape_text, "lattice shape, e.g. 8x8 or 16");
  mask->add_option("--out", mask_out, "output path (.pgm or .json)");

  auto* report = app.add_subcommand("report", "summarize recorded results");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg =
        make_config(config_path, seed_set ? &seed : nullptr, &out_dir, &jobs);
    if (gen->parsed()) {
      cmd_gen(cfg);
    } else if (train_eval->parsed()) {
      cmd_train_eval(cfg, variant_from_string(variant_name));
    } else if (noise->parsed()) {
      cmd_noise(cfg, variant_from_string(variant_name));
    } else if (mask->parsed()) {
      cmd_mask(action_text, shape_text, mask_out);
    } else if (report->parsed()) {
      cmd_report(cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
