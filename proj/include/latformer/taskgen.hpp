#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "latformer/lattice.hpp"
#include "latformer/rng.hpp"

namespace latformer {

inline constexpr int kNumColors = 10;
inline constexpr int kMaxGridSide = 30;

// Rectangular grid of categorical cells in [0, 10); color 0 is background.
struct Grid {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> cells;  // row-major, height*width entries

  uint8_t at(int r, int c) const { return cells[r * width + c]; }
  uint8_t& at(int r, int c) { return cells[r * width + c]; }
  bool operator==(const Grid&) const = default;
};

struct GridPair {
  Grid input, output;
  bool operator==(const GridPair&) const = default;
};

// One synthetic task: a fixed transformation, train pairs to learn it from
// and test pairs scored by exact match.
struct Task {
  std::string name;
  std::string category;  // translate | rotate | reflect | scale
  LatticeAction action = LatticeAction::identity();
  std::vector<GridPair> train, test;
  uint64_t seed = 0;
  int pad_to = kMaxGridSide;
};

Grid pad_grid(const Grid& g, int size, uint8_t background = 0);
std::vector<int> grid_cells(const Grid& g);
Grid grid_from_cells(const std::vector<int>& cells, int height, int width);

// Cellwise relabeling; the permutation covers all 10 colors including
// background.
Grid color_permute(const Grid& g, const std::array<uint8_t, kNumColors>& perm);
std::array<uint8_t, kNumColors> random_color_permutation(SplitMix64& rng);
std::array<uint8_t, kNumColors> identity_color_permutation();

// The oracle transform on a padded grid (index permutation of cells).
Grid apply_action_grid(const LatticeAction& action, const Grid& padded);

// Random sprites, rectangles and noise patches over colors 1..9.
std::vector<Grid> procedural_grid_pool(int count, int max_height, int max_width,
                                       SplitMix64& rng);

// Samples distinct inputs from the pool, pads them and applies the oracle
// action for outputs. Train and test inputs are disjoint draws.
Task generate_task(const std::string& category, const LatticeAction& action,
                   int n_train, int n_test, uint64_t seed,
                   const std::vector<Grid>& pool, int pad_to = kMaxGridSide);

struct SuiteOptions {
  int n_train = 2048;
  int n_test = 100;
  int pad_to = kMaxGridSide;
};

// The synthetic benchmark: 5 sampled translations, the 3 non-identity
// 4-fold rotations, 3 reflections (up-down, left-right, diagonal) and all
// 32 up/down scalings by factors in [2,5] x [2,5].
std::vector<Task> sample_task_suite(uint64_t seed, const SuiteOptions& opt = {});

// Task file format: {"name","category","action","seed","pad_to",
// "train":[{"input":[[...]],"output":[[...]]}],"test":[...]}.
void save_task_json(const Task& task, const std::string& path);
Task load_task_json(const std::string& path);

// Public ARC task format: {"train":[{"input","output"}],"test":[...]}.
// A file may hold one task object or an array of them. Grids are validated
// (rectangular, colors 0-9, sides <= 30).
struct ArcPairSet {
  std::vector<GridPair> train, test;
  bool operator==(const ArcPairSet&) const = default;
};

std::vector<ArcPairSet> load_arc_json(const std::string& path);
std::string arc_to_json_string(const std::vector<ArcPairSet>& tasks);
void save_arc_json(const std::vector<ArcPairSet>& tasks,
                   const std::string& path);

}  // namespace latformer
