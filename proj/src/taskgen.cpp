#include "latformer/taskgen.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "latformer/errors.hpp"

namespace latformer {

using nlohmann::json;

Grid pad_grid(const Grid& g, int size, uint8_t background) {
  if (g.height > size || g.width > size)
    throw InvalidShape("pad_grid: grid larger than target size");
  Grid out;
  out.height = size;
  out.width = size;
  out.cells.assign(static_cast<size_t>(size) * size, background);
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) out.at(r, c) = g.at(r, c);
  return out;
}

std::vector<int> grid_cells(const Grid& g) {
  return {g.cells.begin(), g.cells.end()};
}

Grid grid_from_cells(const std::vector<int>& cells, int height, int width) {
  Grid g;
  g.height = height;
  g.width = width;
  g.cells.resize(cells.size());
  for (size_t i = 0; i < cells.size(); ++i)
    g.cells[i] = static_cast<uint8_t>(cells[i]);
  return g;
}

Grid color_permute(const Grid& g, const std::array<uint8_t, kNumColors>& perm) {
  Grid out = g;
  for (auto& c : out.cells) c = perm[c];
  return out;
}

std::array<uint8_t, kNumColors> identity_color_permutation() {
  std::array<uint8_t, kNumColors> p{};
  for (int i = 0; i < kNumColors; ++i) p[i] = static_cast<uint8_t>(i);
  return p;
}

std::array<uint8_t, kNumColors> random_color_permutation(SplitMix64& rng) {
  auto p = identity_color_permutation();
  for (int i = kNumColors; i > 1; --i)
    std::swap(p[i - 1], p[rng.next_below(i)]);
  return p;
}

Grid apply_action_grid(const LatticeAction& action, const Grid& padded) {
  LatticeShape shape({padded.height, padded.width});
  auto map = action_index_map(action, shape);
  Grid out = padded;
  for (size_t k = 0; k < map.size(); ++k) out.cells[k] = padded.cells[map[k]];
  return out;
}

std::vector<Grid> procedural_grid_pool(int count, int max_height, int max_width,
                                       SplitMix64& rng) {
  std::vector<Grid> pool;
  pool.reserve(count);
  for (int i = 0; i < count; ++i) {
    Grid g;
    g.height = 3 + static_cast<int>(rng.next_below(std::max(1, max_height - 2)));
    g.width = 3 + static_cast<int>(rng.next_below(std::max(1, max_width - 2)));
    g.height = std::min(g.height, max_height);
    g.width = std::min(g.width, max_width);
    g.cells.assign(static_cast<size_t>(g.height) * g.width, 0);

    const int kind = static_cast<int>(rng.next_below(3));
    if (kind == 0) {
      // filled rectangles
      const int rects = 2 + static_cast<int>(rng.next_below(4));
      for (int r = 0; r < rects; ++r) {
        const uint8_t color = static_cast<uint8_t>(1 + rng.next_below(9));
        int r0 = static_cast<int>(rng.next_below(g.height));
        int c0 = static_cast<int>(rng.next_below(g.width));
        int rh = 1 + static_cast<int>(rng.next_below(std::max(1, g.height / 2)));
        int rw = 1 + static_cast<int>(rng.next_below(std::max(1, g.width / 2)));
        for (int rr = r0; rr < std::min(g.height, r0 + rh); ++rr)
          for (int cc = c0; cc < std::min(g.width, c0 + rw); ++cc)
            g.at(rr, cc) = color;
      }
    } else if (kind == 1) {
      // random-walk sprites
      const int walks = 1 + static_cast<int>(rng.next_below(3));
      for (int wk = 0; wk < walks; ++wk) {
        const uint8_t color = static_cast<uint8_t>(1 + rng.next_below(9));
        int r = static_cast<int>(rng.next_below(g.height));
        int c = static_cast<int>(rng.next_below(g.width));
        const int steps = 4 + static_cast<int>(rng.next_below(
                                  static_cast<uint64_t>(g.height) * g.width / 2 + 1));
        for (int s = 0; s < steps; ++s) {
          g.at(r, c) = color;
          switch (rng.next_below(4)) {
            case 0: r = std::min(g.height - 1, r + 1); break;
            case 1: r = std::max(0, r - 1); break;
            case 2: c = std::min(g.width - 1, c + 1); break;
            default: c = std::max(0, c - 1); break;
          }
        }
      }
    } else {
      // colored noise patch
      for (auto& cell : g.cells)
        if (rng.next_double() < 0.45)
          cell = static_cast<uint8_t>(1 + rng.next_below(9));
    }

    // keep grids non-empty
    if (std::all_of(g.cells.begin(), g.cells.end(),
                    [](uint8_t c) { return c == 0; }))
      g.at(static_cast<int>(rng.next_below(g.height)),
           static_cast<int>(rng.next_below(g.width))) =
          static_cast<uint8_t>(1 + rng.next_below(9));
    pool.push_back(std::move(g));
  }
  return pool;
}

Task generate_task(const std::string& category, const LatticeAction& action,
                   int n_train, int n_test, uint64_t seed,
                   const std::vector<Grid>& pool, int pad_to) {
  if (pool.empty()) throw EmptyPool("generate_task: empty grid pool");
  if (static_cast<int>(pool.size()) < n_train + n_test)
    throw EmptyPool("generate_task: pool smaller than requested pair count");
  LatticeShape shape({pad_to, pad_to});
  action.validate(shape);

  SplitMix64 rng(seed);
  std::vector<int> indices(pool.size());
  std::iota(indices.begin(), indices.end(), 0);
  rng.shuffle(indices);

  Task task;
  task.category = category;
  task.action = action;
  task.seed = seed;
  task.pad_to = pad_to;
  auto make_pair = [&](int pool_idx) {
    GridPair p;
    p.input = pad_grid(pool[pool_idx], pad_to);
    p.output = apply_action_grid(action, p.input);
    return p;
  };
  for (int i = 0; i < n_train; ++i) task.train.push_back(make_pair(indices[i]));
  for (int i = 0; i < n_test; ++i)
    task.test.push_back(make_pair(indices[n_train + i]));
  return task;
}

std::vector<Task> sample_task_suite(uint64_t seed, const SuiteOptions& opt) {
  std::vector<Task> tasks;
  SplitMix64 root(seed);
  const int need = opt.n_train + opt.n_test;
  const int side = opt.pad_to;

  auto add_task = [&](const std::string& category, const std::string& name,
                      const LatticeAction& action, uint64_t task_tag) {
    SplitMix64 stream = SplitMix64(seed).fork(task_tag);
    auto pool = procedural_grid_pool(need, side, side, stream);
    Task t = generate_task(category, action, opt.n_train, opt.n_test,
                           stream.next(), pool, side);
    t.name = name;
    tasks.push_back(std::move(t));
  };

  // 5 sampled translations with per-axis displacement in [1, side-1]
  for (int i = 0; i < 5; ++i) {
    const int dr = 1 + static_cast<int>(root.next_below(side - 1));
    const int dc = 1 + static_cast<int>(root.next_below(side - 1));
    std::ostringstream name;
    name << "translate_" << dr << "_" << dc;
    add_task("translate", name.str(), LatticeAction::translate({dr, dc}),
             100 + i);
  }
  // all 4-fold rotations except the identity
  for (int k = 1; k <= 3; ++k)
    add_task("rotate", "rotate_" + std::to_string(90 * k),
             LatticeAction::rotate90(k), 200 + k);
  // up-down, left-right and main-diagonal reflections
  add_task("reflect", "reflect_ud", LatticeAction::reflect({true, false}), 301);
  add_task("reflect", "reflect_lr", LatticeAction::reflect({false, true}), 302);
  add_task("reflect", "reflect_diag", LatticeAction::reflect_diagonal(), 303);
  // all up/down scalings by factors in [2,5] x [2,5]
  for (int dir = 0; dir < 2; ++dir)
    for (int h1 = 2; h1 <= 5; ++h1)
      for (int h2 = 2; h2 <= 5; ++h2) {
        auto d = dir == 0 ? ScaleDirection::Up : ScaleDirection::Down;
        std::ostringstream name;
        name << "scale_" << (dir == 0 ? "up" : "down") << "_" << h1 << "x" << h2;
        add_task("scale", name.str(), LatticeAction::scale({h1, h2}, d),
                 400 + dir * 100 + h1 * 10 + h2);
      }
  return tasks;
}

namespace {

json grid_to_json(const Grid& g) {
  json rows = json::array();
  for (int r = 0; r < g.height; ++r) {
    json row = json::array();
    for (int c = 0; c < g.width; ++c) row.push_back(static_cast<int>(g.at(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Grid grid_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty())
    throw ValidationError(where + ": grid must be a non-empty array of rows");
  Grid g;
  g.height = static_cast<int>(j.size());
  if (!j[0].is_array() || j[0].empty())
    throw ValidationError(where + ": rows must be non-empty arrays");
  g.width = static_cast<int>(j[0].size());
  if (g.height > kMaxGridSide || g.width > kMaxGridSide)
    throw ValidationError(where + ": grid sides must be <= 30");
  g.cells.reserve(static_cast<size_t>(g.height) * g.width);
  for (const auto& row : j) {
    if (!row.is_array() || static_cast<int>(row.size()) != g.width)
      throw ValidationError(where + ": ragged grid rows");
    for (const auto& cell : row) {
      if (!cell.is_number_integer())
        throw ValidationError(where + ": cells must be integers");
      const int v = cell.get<int>();
      if (v < 0 || v >= kNumColors)
        throw ValidationError(where + ": color " + std::to_string(v) +
                              " outside [0, 10)");
      g.cells.push_back(static_cast<uint8_t>(v));
    }
  }
  return g;
}

std::vector<GridPair> pairs_from_json(const json& j, const std::string& where) {
  std::vector<GridPair> out;
  if (!j.is_array()) throw ValidationError(where + ": expected an array");
  int i = 0;
  for (const auto& item : j) {
    if (!item.contains("input") || !item.contains("output"))
      throw ValidationError(where + "[" + std::to_string(i) +
                            "]: needs input and output grids");
    GridPair p;
    p.input = grid_from_json(item["input"],
                             where + "[" + std::to_string(i) + "].input");
    p.output = grid_from_json(item["output"],
                              where + "[" + std::to_string(i) + "].output");
    out.push_back(std::move(p));
    ++i;
  }
  return out;
}

json pairs_to_json(const std::vector<GridPair>& pairs) {
  json arr = json::array();
  for (const auto& p : pairs)
    arr.push_back({{"input", grid_to_json(p.input)},
                   {"output", grid_to_json(p.output)}});
  return arr;
}

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace

void save_task_json(const Task& task, const std::string& path) {
  json j;
  j["name"] = task.name;
  j["category"] = task.category;
  j["action"] = task.action.to_string();
  j["seed"] = task.seed;
  j["pad_to"] = task.pad_to;
  j["train"] = pairs_to_json(task.train);
  j["test"] = pairs_to_json(task.test);
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << j.dump() << "\n";
}

Task load_task_json(const std::string& path) {
  json j = parse_file(path);
  Task t;
  try {
    t.name = j.at("name").get<std::string>();
    t.category = j.at("category").get<std::string>();
    t.action = LatticeAction::parse(j.at("action").get<std::string>());
    t.seed = j.at("seed").get<uint64_t>();
    t.pad_to = j.at("pad_to").get<int>();
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  t.train = pairs_from_json(j.at("train"), path + ":train");
  t.test = pairs_from_json(j.at("test"), path + ":test");
  return t;
}

std::vector<ArcPairSet> load_arc_json(const std::string& path) {
  json j = parse_file(path);
  std::vector<ArcPairSet> out;
  auto one = [&](const json& obj, const std::string& where) {
    if (!obj.is_object() || !obj.contains("train") || !obj.contains("test"))
      throw ValidationError(where + ": expected {train, test}");
    ArcPairSet s;
    s.train = pairs_from_json(obj["train"], where + ".train");
    s.test = pairs_from_json(obj["test"], where + ".test");
    return s;
  };
  if (j.is_array()) {
    int i = 0;
    for (const auto& item : j)
      out.push_back(one(item, path + "[" + std::to_string(i++) + "]"));
  } else {
    out.push_back(one(j, path));
  }
  return out;
}

std::string arc_to_json_string(const std::vector<ArcPairSet>& tasks) {
  auto encode = [](const ArcPairSet& s) {
    return json{{"test", pairs_to_json(s.test)},
                {"train", pairs_to_json(s.train)}};
  };
  if (tasks.size() == 1) return encode(tasks[0]).dump();
  json arr = json::array();
  for (const auto& t : tasks) arr.push_back(encode(t));
  return arr.dump();
}

void save_arc_json(const std::vector<ArcPairSet>& tasks,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << arc_to_json_string(tasks);
}

}  // namespace latformer
