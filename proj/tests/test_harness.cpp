#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "latformer/errors.hpp"
#include "latformer/harness.hpp"
#include "latformer/io.hpp"
#include "latformer/masks.hpp"

using namespace latformer;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.suite_seed = 5;
  cfg.train_sizes = {2, 4};
  cfg.epochs = 2;
  cfg.batch_size = 2;
  cfg.augment = 1;
  cfg.pad_to = 4;
  cfg.n_train_pairs = 6;
  cfg.n_test_pairs = 2;
  cfg.embed_dim = 8;
  cfg.ffn_hidden = 16;
  cfg.gate_hidden = 8;
  cfg.translate_layers = 2;
  cfg.categories = {"rotate"};
  cfg.out_dir = out_dir;
  cfg.jobs = 2;
  return cfg;
}

}  // namespace

TEST_CASE("experiment config validation") {
  ExperimentConfig cfg;
  cfg.validate();
  SUBCASE("ladder must increase strictly") {
    cfg.train_sizes = {8, 8};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("sizes are capped at 2048") {
    cfg.train_sizes = {2, 4096};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("config json round-trips through the loader") {
    const auto path =
        (fs::temp_directory_path() / "latformer_cfg.json").string();
    std::ofstream out(path);
    out << experiment_config_json(cfg);
    out.close();
    ExperimentConfig back = load_experiment_config(path);
    CHECK(experiment_config_json(back) == experiment_config_json(cfg));
    CHECK(experiment_config_hash(back) == experiment_config_hash(cfg));
  }
  SUBCASE("unparseable config throws ConfigError") {
    const auto path =
        (fs::temp_directory_path() / "latformer_bad_cfg.json").string();
    std::ofstream out(path);
    out << "{nope";
    out.close();
    CHECK_THROWS_AS(load_experiment_config(path), ConfigError);
  }
}

TEST_CASE("expert stacks follow the fixed product order") {
  ExperimentConfig cfg;
  auto reflect = experts_for_category("reflect", cfg);
  REQUIRE(reflect.size() == 2);
  CHECK(reflect[0].family == ExpertFamily::Rotate);
  CHECK(reflect[1].family == ExpertFamily::Reflect);
  CHECK(experts_for_category("translate", cfg).size() == 1);
  CHECK_THROWS_AS(experts_for_category("spin", cfg), ConfigError);
}

TEST_CASE("gen, train-eval and report work end to end at toy scale") {
  const auto out =
      (fs::temp_directory_path() / "latformer_harness_test").string();
  fs::remove_all(out);
  ExperimentConfig cfg = tiny_config(out);

  cmd_gen(cfg);
  CHECK(fs::exists(fs::path(out) / "tasks" / "manifest.json"));
  int task_files = 0;
  for (auto& entry : fs::directory_iterator(fs::path(out) / "tasks"))
    if (entry.path().filename() != "manifest.json") ++task_files;
  CHECK(task_files == 3);  // rotate category only

  SUBCASE("regenerating with the same seed is byte-identical") {
    auto read_all = [](const fs::path& p) {
      std::ifstream in(p);
      return std::string((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
    };
    std::string before =
        read_all(fs::path(out) / "tasks" / "rotate_90.json");
    cmd_gen(cfg);
    CHECK(read_all(fs::path(out) / "tasks" / "rotate_90.json") == before);
  }

  SUBCASE("train-eval writes rows and a rerun reproduces each cell") {
    cmd_train_eval(cfg, Variant::LatFormer);
    auto rows = read_results_csv((fs::path(out) / "results.csv").string());
    CHECK(rows.size() == 6);  // 3 tasks x 2 sizes
    for (const auto& r : rows) {
      CHECK(r.category == "rotate");
      CHECK(r.accuracy >= 0.0);
      CHECK(r.accuracy <= 1.0);

      Task task = load_task_json(
          (fs::path(out) / "tasks" / (r.task + ".json")).string());
      ResultRow again =
          run_cell(task, r.train_size, Variant::LatFormer, 0.0, cfg);
      CHECK(again.accuracy == r.accuracy);
    }
    auto summary = summarize(rows);
    CHECK(summary.size() == 2);  // one per train size
    for (const auto& s : summary) CHECK(s.tasks == 3);
  }

  SUBCASE("missing manifest is a config error") {
    ExperimentConfig empty = cfg;
    empty.out_dir = (fs::path(out) / "nowhere").string();
    CHECK_THROWS_AS(cmd_train_eval(empty, Variant::LatFormer), ConfigError);
  }
}

TEST_CASE("mask dumps") {
  const auto dir = fs::temp_directory_path() / "latformer_maskdump";
  fs::create_directories(dir);
  SUBCASE("pgm is the documented P2 format") {
    const auto path = (dir / "t.pgm").string();
    cmd_mask("translate:1", "3", path);
    std::ifstream in(path);
    std::string magic;
    int w, h, maxval;
    in >> magic >> w >> h >> maxval;
    CHECK(magic == "P2");
    CHECK(w == 3);
    CHECK(h == 3);
    CHECK(maxval == 255);
    std::vector<int> pix(9);
    for (int& p : pix) in >> p;
    Matrix want = action_mask(LatticeAction::translate({1}), LatticeShape({3}));
    for (int i = 0; i < 9; ++i)
      CHECK(pix[i] == static_cast<int>(want.raw()[i] * 255));
  }
  SUBCASE("json dump holds the nested arrays") {
    const auto path = (dir / "t.json").string();
    cmd_mask("reflect:0", "4", path);
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find("[[0.0,0.0,0.0,1.0]") != std::string::npos);
  }
  SUBCASE("unknown extension is a config error") {
    CHECK_THROWS_AS(cmd_mask("identity", "4", (dir / "t.bmp").string()),
                    ConfigError);
  }
  SUBCASE("invalid shape for the action surfaces InvalidShape") {
    CHECK_THROWS_AS(cmd_mask("rotate90", "3x4", (dir / "r.pgm").string()),
                    InvalidShape);
  }
}

TEST_CASE("cell seeds are pure functions of their coordinates") {
  ExperimentConfig cfg;
  uint64_t a = cell_seed(cfg, "taskA", 32, Variant::LatFormer, 0.0);
  CHECK(a == cell_seed(cfg, "taskA", 32, Variant::LatFormer, 0.0));
  CHECK(a != cell_seed(cfg, "taskA", 64, Variant::LatFormer, 0.0));
  CHECK(a != cell_seed(cfg, "taskA", 32, Variant::AttentionBaseline, 0.0));
  CHECK(a != cell_seed(cfg, "taskA", 32, Variant::LatFormer, 0.2));
}
