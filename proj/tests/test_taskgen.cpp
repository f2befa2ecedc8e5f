#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "latformer/errors.hpp"
#include "latformer/taskgen.hpp"

using namespace latformer;

namespace {
const std::string kDataDir = TEST_DATA_DIR;
}

TEST_CASE("grid padding and color permutation") {
  Grid g;
  g.height = 2;
  g.width = 3;
  g.cells = {1, 2, 0, 3, 0, 4};
  SUBCASE("padding keeps content in the top-left corner") {
    Grid p = pad_grid(g, 4);
    CHECK(p.height == 4);
    CHECK(p.width == 4);
    CHECK(p.at(0, 0) == 1);
    CHECK(p.at(1, 2) == 4);
    CHECK(p.at(1, 3) == 0);
    CHECK(p.at(3, 3) == 0);
    CHECK(p.at(1, 0) == 3);
  }
  SUBCASE("identity permutation changes nothing") {
    CHECK(color_permute(g, identity_color_permutation()) == g);
  }
  SUBCASE("a permutation composed with its inverse is the identity") {
    SplitMix64 rng(5);
    auto perm = random_color_permutation(rng);
    std::array<uint8_t, kNumColors> inv{};
    for (int i = 0; i < kNumColors; ++i) inv[perm[i]] = static_cast<uint8_t>(i);
    CHECK(color_permute(color_permute(g, perm), inv) == g);
  }
}

TEST_CASE("generate_task applies the oracle to padded inputs") {
  SplitMix64 rng(40);
  auto pool = procedural_grid_pool(24, 6, 6, rng);
  auto action = LatticeAction::rotate90(1);
  Task task = generate_task("rotate", action, 10, 6, 123, pool, 6);

  CHECK(task.train.size() == 10);
  CHECK(task.test.size() == 6);
  for (const auto& p : task.train) {
    CHECK(p.input.height == 6);
    CHECK(apply_action_grid(action, p.input) == p.output);
  }
  for (const auto& p : task.test)
    CHECK(apply_action_grid(action, p.input) == p.output);

  SUBCASE("the same seed reproduces the task exactly") {
    Task again = generate_task("rotate", action, 10, 6, 123, pool, 6);
    CHECK(again.train == task.train);
    CHECK(again.test == task.test);
  }
  SUBCASE("train and test inputs are disjoint draws") {
    std::set<std::vector<uint8_t>> train_inputs;
    for (const auto& p : task.train) train_inputs.insert(p.input.cells);
    for (const auto& p : task.test)
      CHECK(train_inputs.count(p.input.cells) == 0);
  }
  SUBCASE("solvability survives color permutation") {
    SplitMix64 r2(77);
    auto perm = random_color_permutation(r2);
    for (const auto& p : task.train)
      CHECK(apply_action_grid(action, color_permute(p.input, perm)) ==
            color_permute(p.output, perm));
  }
  SUBCASE("a too-small pool is rejected") {
    CHECK_THROWS_AS(generate_task("rotate", action, 30, 30, 1, pool, 6),
                    EmptyPool);
    CHECK_THROWS_AS(generate_task("rotate", action, 1, 1, 1, {}, 6), EmptyPool);
  }
}

TEST_CASE("task suite composition") {
  SuiteOptions opt;
  opt.n_train = 6;
  opt.n_test = 3;
  opt.pad_to = 8;
  auto tasks = sample_task_suite(99, opt);
  CHECK(tasks.size() == 43);  // 5 + 3 + 3 + 32

  int translate = 0, rotate = 0, reflect = 0, scale = 0;
  for (const auto& t : tasks) {
    if (t.category == "translate") {
      ++translate;
      for (int d : t.action.delta()) {
        CHECK(d >= 1);
        CHECK(d <= opt.pad_to - 1);
      }
    } else if (t.category == "rotate") {
      ++rotate;
    } else if (t.category == "reflect") {
      ++reflect;
    } else if (t.category == "scale") {
      ++scale;
    }
    for (const auto& p : t.train)
      CHECK(apply_action_grid(t.action, p.input) == p.output);
  }
  CHECK(translate == 5);
  CHECK(rotate == 3);
  CHECK(reflect == 3);
  CHECK(scale == 32);

  SUBCASE("suites are reproducible") {
    auto again = sample_task_suite(99, opt);
    for (size_t i = 0; i < tasks.size(); ++i) {
      CHECK(again[i].name == tasks[i].name);
      CHECK(again[i].train == tasks[i].train);
    }
  }
}

TEST_CASE("task json round trip") {
  SplitMix64 rng(41);
  auto pool = procedural_grid_pool(8, 5, 5, rng);
  Task task = generate_task("translate", LatticeAction::translate({1, 2}), 4, 2,
                            7, pool, 5);
  task.name = "roundtrip";
  const auto path =
      (std::filesystem::temp_directory_path() / "latformer_task.json").string();
  save_task_json(task, path);
  Task back = load_task_json(path);
  CHECK(back.name == task.name);
  CHECK(back.category == task.category);
  CHECK(back.action.to_string() == task.action.to_string());
  CHECK(back.seed == task.seed);
  CHECK(back.train == task.train);
  CHECK(back.test == task.test);
}

TEST_CASE("arc ingestion") {
  SUBCASE("minimal single-pair file") {
    auto tasks = load_arc_json(kDataDir + "/arc/task01.json");
    REQUIRE(tasks.size() == 1);
    CHECK(tasks[0].train.size() == 1);
    CHECK(tasks[0].test.size() == 1);
    CHECK(tasks[0].train[0].input.at(0, 0) == 1);
  }
  SUBCASE("array files hold several tasks") {
    auto tasks = load_arc_json(kDataDir + "/arc/task12.json");
    CHECK(tasks.size() == 2);
  }
  SUBCASE("color 11 is a validation error") {
    CHECK_THROWS_AS(load_arc_json(kDataDir + "/arc/bad_color.json"),
                    ValidationError);
  }
  SUBCASE("ragged rows are a validation error naming the grid") {
    try {
      load_arc_json(kDataDir + "/arc/bad_ragged.json");
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("test[0].input") != std::string::npos);
    }
  }
  SUBCASE("malformed json is a parse error") {
    CHECK_THROWS_AS(load_arc_json(kDataDir + "/arc/bad_syntax.json"),
                    ParseError);
  }
  SUBCASE("byte-exact round trip over the hand-written corpus") {
    int checked = 0;
    for (int i = 1; i <= 12; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "/arc/task%02d.json", i);
      const std::string path = kDataDir + name;
      auto tasks = load_arc_json(path);

      std::ifstream in(path);
      std::string original((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
      while (!original.empty() &&
             (original.back() == '\n' || original.back() == ' '))
        original.pop_back();

      CHECK(arc_to_json_string(tasks) == original);
      auto reparsed = load_arc_json(path);
      CHECK(reparsed == tasks);
      ++checked;
    }
    CHECK(checked >= 10);
  }
}
