#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "latformer/errors.hpp"
#include "latformer/masks.hpp"
#include "latformer/model.hpp"
#include "latformer/rng.hpp"

using namespace latformer;

namespace {

Task tiny_task(const std::string& category, const LatticeAction& action,
               int n_train, int n_test, int side, uint64_t seed) {
  SplitMix64 rng(seed);
  auto pool = procedural_grid_pool(n_train + n_test, side, side, rng);
  Task t = generate_task(category, action, n_train, n_test, seed, pool, side);
  t.name = category + "_tiny";
  return t;
}

ModelConfig small_config(std::vector<ExpertConfig> experts) {
  ModelConfig cfg;
  cfg.embed_dim = 16;
  cfg.ffn_hidden = 32;
  cfg.gate_hidden = 16;
  cfg.experts = std::move(experts);
  return cfg;
}

std::vector<double> logits_of(const std::vector<double>& gates) {
  std::vector<double> out(gates.size());
  for (size_t i = 0; i < gates.size(); ++i)
    out[i] = std::log(gates[i] / (1.0 - gates[i]));
  return out;
}

// Pins a model's gate network so that its soft gates equal `gates` exactly
// modulo one sigmoid/logit round trip.
void pin_soft_gates(Model& model, int expert, const std::vector<double>& gates) {
  auto& params = model.params();
  int base = -1;
  for (size_t i = 0; i < params.size(); ++i)
    if (params[i].gate_group) {
      base = static_cast<int>(i);
      break;
    }
  REQUIRE(base >= 0);
  base += expert * 4;
  for (int j = 0; j < 3; ++j)
    std::fill(params[base + j].value.raw().begin(),
              params[base + j].value.raw().end(), 0.0);
  auto logits = logits_of(gates);
  Matrix& b2 = params[base + 3].value;
  REQUIRE(b2.cols() == static_cast<int>(logits.size()));
  for (int c = 0; c < b2.cols(); ++c) b2(0, c) = logits[c];
}

}  // namespace

TEST_CASE("training-path masks equal the reference expert forward") {
  LatticeShape shape({4, 4});
  SplitMix64 rng(20);

  auto check_family = [&](std::vector<ExpertConfig> experts) {
    ModelConfig cfg = small_config(experts);
    Model model(cfg, shape, 5);
    std::vector<int> cells(16);
    for (auto& c : cells) c = static_cast<int>(rng.next_below(10));

    // pin random soft gates on every expert
    std::vector<std::vector<double>> all_gates;
    for (size_t e = 0; e < experts.size(); ++e) {
      int count = expert_gate_count(experts[e], shape);
      std::vector<double> g(count);
      for (double& x : g) x = 0.1 + 0.8 * rng.next_double();
      pin_soft_gates(model, static_cast<int>(e), g);
      all_gates.push_back(std::move(g));
    }

    auto [tape_mask, smooth_mask] = model.training_masks(cells);
    std::vector<Matrix> reference;
    auto soft = model.soft_gates(cells);
    for (size_t e = 0; e < experts.size(); ++e) {
      for (size_t i = 0; i < soft[e].size(); ++i)
        CHECK(soft[e][i] == doctest::Approx(all_gates[e][i]).epsilon(1e-9));
      reference.push_back(expert_forward(experts[e], soft[e], shape));
    }
    Matrix want = product_of_experts(reference);
    CHECK(max_abs_diff(tape_mask, want) < 1e-12);

    // soft masks keep row sums in (0, 1]
    for (int r = 0; r < tape_mask.rows(); ++r) {
      double sum = 0.0;
      for (int c = 0; c < tape_mask.cols(); ++c) sum += tape_mask(r, c);
      CHECK(sum > 0.0);
      CHECK(sum <= 1.0 + 1e-12);
    }
    // smoothed rows still sum to one for one-1-per-row constituents
    if (smooth_mask.rows() > 0) {
      for (int r = 0; r < smooth_mask.rows(); ++r) {
        double sum = 0.0;
        for (int c = 0; c < smooth_mask.cols(); ++c) sum += smooth_mask(r, c);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  };

  check_family({{ExpertFamily::Translate, 2, 5}});
  check_family({{ExpertFamily::Rotate, 0, 0}});
  check_family({{ExpertFamily::Rotate, 0, 0}, {ExpertFamily::Reflect, 0, 0}});
  check_family({{ExpertFamily::Scale, 0, 3}});
}

TEST_CASE("full-model gradients match central differences") {
  Task task = tiny_task("translate", LatticeAction::translate({2, 1}), 3, 1, 4,
                        99);
  ModelConfig cfg = small_config({{ExpertFamily::Translate, 2, 5}});
  cfg.noise_level = 0.1;
  Model model(cfg, LatticeShape({4, 4}), 3);

  Example ex{grid_cells(task.train[0].input), grid_cells(task.train[0].output)};
  model.zero_grads();
  auto stats = model.forward_backward(ex, 1.0);
  CHECK(std::isfinite(stats.loss_plain));

  auto loss_at = [&]() {
    auto st = model.forward_loss(ex);
    return st.loss_plain + st.loss_smooth;
  };

  const double h = 1e-5;
  SplitMix64 rng(12);
  int probes = 0;
  for (auto& p : model.params()) {
    for (int rep = 0; rep < 4; ++rep) {
      size_t e = rng.next_below(p.value.size());
      double saved = p.value.raw()[e];
      p.value.raw()[e] = saved + h;
      double up = loss_at();
      p.value.raw()[e] = saved - h;
      double down = loss_at();
      p.value.raw()[e] = saved;
      double fd = (up - down) / (2 * h);
      double got = p.grad.raw()[e];
      double denom = std::max(1e-8, std::fabs(fd));
      CHECK(std::fabs(got - fd) / denom < 1e-4);
      ++probes;
    }
  }
  CHECK(probes >= 30);
}

TEST_CASE("gradient of a duplicated example equals the single example") {
  Task task = tiny_task("rotate", LatticeAction::rotate90(1), 2, 1, 3, 5);
  ModelConfig cfg = small_config({{ExpertFamily::Rotate, 0, 0}});
  Model model(cfg, LatticeShape({3, 3}), 1);
  Example ex{grid_cells(task.train[0].input), grid_cells(task.train[0].output)};

  model.zero_grads();
  model.forward_backward(ex, 1.0);
  std::vector<Matrix> single;
  for (auto& p : model.params()) single.push_back(p.grad);

  model.zero_grads();
  model.forward_backward(ex, 0.5);
  model.forward_backward(ex, 0.5);
  for (size_t i = 0; i < model.params().size(); ++i)
    CHECK(max_abs_diff(single[i], model.params()[i].grad) < 1e-12);
}

TEST_CASE("exactness with frozen gates and an identity ffn") {
  SUBCASE("identity configuration returns the input grid") {
    ModelConfig cfg = small_config({{ExpertFamily::Translate, 3, 5}});
    Model model(cfg, LatticeShape({5, 5}), 7);
    model.freeze_gates(0, std::vector<double>(6, 0.0));
    model.set_ffn_identity();
    SplitMix64 rng(3);
    std::vector<int> cells(25);
    for (auto& c : cells) c = static_cast<int>(rng.next_below(10));
    CHECK(model.predict(cells) == cells);
  }
  SUBCASE("translation gates reproduce the oracle exactly") {
    ModelConfig cfg = small_config({{ExpertFamily::Translate, 2, 5}});
    Model model(cfg, LatticeShape({5, 5}), 7);
    // gates per dim (l=0,l=1): dim0 = 2 -> (0,1); dim1 = 0 -> (0,0)
    model.freeze_gates(0, {0.0, 1.0, 0.0, 0.0});
    model.set_ffn_identity();
    LatticeShape shape({5, 5});
    SplitMix64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<int> cells(25);
      for (auto& c : cells) c = static_cast<int>(rng.next_below(10));
      std::vector<double> as_real(cells.begin(), cells.end());
      auto oracle =
          apply_action(LatticeAction::translate({2, 0}), shape, as_real);
      std::vector<int> want(oracle.begin(), oracle.end());
      CHECK(model.predict(cells) == want);
    }
  }
  SUBCASE("rotation gates reproduce the oracle exactly") {
    ModelConfig cfg = small_config({{ExpertFamily::Rotate, 0, 0}});
    Model model(cfg, LatticeShape({4, 4}), 2);
    model.freeze_gates(0, {1.0, 1.0, 0.0});  // two quarter turns
    model.set_ffn_identity();
    LatticeShape shape({4, 4});
    SplitMix64 rng(21);
    std::vector<int> cells(16);
    for (auto& c : cells) c = static_cast<int>(rng.next_below(10));
    std::vector<double> as_real(cells.begin(), cells.end());
    auto oracle = apply_action(LatticeAction::rotate90(2), shape, as_real);
    std::vector<int> want(oracle.begin(), oracle.end());
    CHECK(model.predict(cells) == want);
  }
}

TEST_CASE("training is deterministic and improves a degenerate task") {
  Task task = tiny_task("translate", LatticeAction::translate({1, 0}), 6, 2, 4,
                        41);
  ModelConfig cfg = small_config({{ExpertFamily::Translate, 2, 5}});
  TrainConfig tc;
  tc.epochs = 6;
  tc.batch_size = 3;
  tc.augment = 2;
  tc.seed = 11;

  Model a(cfg, LatticeShape({4, 4}), 11);
  Model b(cfg, LatticeShape({4, 4}), 11);
  auto ra = train_model(a, task, tc);
  auto rb = train_model(b, task, tc);
  REQUIRE(ra.history.size() == rb.history.size());
  for (size_t i = 0; i < ra.history.size(); ++i) {
    CHECK(ra.history[i].loss_plain == rb.history[i].loss_plain);
    CHECK(ra.history[i].loss_smooth == rb.history[i].loss_smooth);
    CHECK(ra.history[i].train_acc == rb.history[i].train_acc);
  }
  CHECK(ra.history.back().loss_plain < ra.history.front().loss_plain);

  SUBCASE("zero epochs leave parameters untouched") {
    Model before(cfg, LatticeShape({4, 4}), 11);
    Model after(cfg, LatticeShape({4, 4}), 11);
    TrainConfig none = tc;
    none.epochs = 0;
    train_model(after, task, none);
    for (size_t i = 0; i < before.params().size(); ++i)
      CHECK(max_abs_diff(before.params()[i].value, after.params()[i].value) ==
            0.0);
  }
}

TEST_CASE("loss decreases on an all-one-color identity task") {
  Task task;
  task.category = "translate";
  task.action = LatticeAction::identity();
  task.pad_to = 4;
  Grid g;
  g.height = g.width = 4;
  g.cells.assign(16, 3);
  task.train.push_back({g, g});
  task.name = "degenerate";

  ModelConfig cfg = small_config({{ExpertFamily::Translate, 2, 5}});
  Model model(cfg, LatticeShape({4, 4}), 13);
  TrainConfig tc;
  tc.epochs = 10;
  tc.batch_size = 1;
  tc.augment = 1;
  tc.seed = 1;
  auto r = train_model(model, task, tc);
  REQUIRE(r.history.size() == 10);
  for (size_t i = 1; i < r.history.size(); ++i)
    CHECK(r.history[i].loss_plain <= r.history[i - 1].loss_plain + 1e-12);
}

TEST_CASE("noise embedding limits") {
  ModelConfig cfg = small_config({{ExpertFamily::Translate, 1, 5}});
  SUBCASE("w=1 embeds every cell identically") {
    cfg.noise_level = 1.0;
    Model model(cfg, LatticeShape({3}), 3);
    Example ex{{0, 4, 7}, {0, 4, 7}};
    auto st = model.forward_loss(ex);
    CHECK(std::isfinite(st.loss_plain));
    auto [mask, smooth] = model.training_masks({0, 4, 7});
    auto [mask2, smooth2] = model.training_masks({2, 2, 2});
    CHECK(max_abs_diff(mask, mask2) == 0.0);  // gates see identical features
  }
  SUBCASE("w=0 is a plain table lookup") {
    cfg.noise_level = 0.0;
    Model model(cfg, LatticeShape({3}), 3);
    // orthonormal embedding rows at init: identical colors embed identically
    auto pred = model.predict({5, 5, 5});
    CHECK(pred == std::vector<int>{5, 5, 5});
  }
}

TEST_CASE("baseline variant and parameter parity") {
  ModelConfig lat = small_config({{ExpertFamily::Translate, 3, 5}});
  ModelConfig base = lat;
  base.use_mask_expert = false;
  base.smoothing.enabled = false;
  Model a(lat, LatticeShape({4, 4}), 5);
  Model b(base, LatticeShape({4, 4}), 5);
  CHECK(a.parameter_count(false) == b.parameter_count(false));
  CHECK(a.parameter_count(true) > b.parameter_count(true));

  Example ex{std::vector<int>(16, 1), std::vector<int>(16, 1)};
  auto st = b.forward_backward(ex, 1.0);
  CHECK(std::isfinite(st.loss_plain));
  CHECK(st.loss_smooth == 0.0);
}

TEST_CASE("checkpoints round-trip through json") {
  ModelConfig cfg = small_config({{ExpertFamily::Reflect, 0, 0}});
  Model model(cfg, LatticeShape({3, 3}), 17);
  const auto path =
      (std::filesystem::temp_directory_path() / "latformer_ckpt.json").string();
  model.save_checkpoint(path);

  Model other(cfg, LatticeShape({3, 3}), 18);  // different init
  std::vector<int> cells = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  bool differs = other.predict(cells) != model.predict(cells);
  other.load_checkpoint(path);
  CHECK(other.predict(cells) == model.predict(cells));
  // at least the embedding must now match bitwise
  CHECK(max_abs_diff(other.params()[0].value, model.params()[0].value) == 0.0);
  (void)differs;
}

TEST_CASE("history csv is written with all columns") {
  std::vector<HistoryRow> h = {{0, 1.5, 1.25, 0.0}, {1, 0.75, 0.5, 0.5}};
  const auto path =
      (std::filesystem::temp_directory_path() / "latformer_hist.csv").string();
  save_history_csv(h, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,loss_plain,loss_smooth,train_acc");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
}
