#include "latformer/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "latformer/io.hpp"
#include "latformer/masks.hpp"

namespace latformer {

namespace fs = std::filesystem;
using nlohmann::json;

Variant variant_from_string(const std::string& s) {
  if (s == "latformer") return Variant::LatFormer;
  if (s == "latformer_nosmooth") return Variant::LatFormerNoSmooth;
  if (s == "attention_baseline") return Variant::AttentionBaseline;
  throw ConfigError("unknown variant '" + s + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::LatFormer: return "latformer";
    case Variant::LatFormerNoSmooth: return "latformer_nosmooth";
    case Variant::AttentionBaseline: return "attention_baseline";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  if (train_sizes.empty()) throw ConfigError("train_sizes must not be empty");
  for (size_t i = 0; i < train_sizes.size(); ++i) {
    if (train_sizes[i] < 1 || train_sizes[i] > 2048)
      throw ConfigError("train sizes must lie in [1, 2048]");
    if (i > 0 && train_sizes[i] <= train_sizes[i - 1])
      throw ConfigError("train_sizes must be strictly increasing");
  }
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (pad_to < 1 || pad_to > kMaxGridSide)
    throw ConfigError("pad_to must lie in [1, 30]");
  if (n_train_pairs < train_sizes.back())
    throw ConfigError("n_train_pairs must cover the largest train size");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  for (double w : noise_levels)
    if (w < 0.0 || w > 1.0) throw ConfigError("noise levels must lie in [0,1]");
}

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    read_if(j, "suite_seed", cfg.suite_seed);
    read_if(j, "train_sizes", cfg.train_sizes);
    read_if(j, "epochs", cfg.epochs);
    read_if(j, "batch_size", cfg.batch_size);
    read_if(j, "lr", cfg.lr);
    read_if(j, "gate_lr", cfg.gate_lr);
    read_if(j, "augment", cfg.augment);
    if (j.contains("smoothing")) {
      const auto& s = j["smoothing"];
      read_if(s, "enabled", cfg.smoothing.enabled);
      read_if(s, "lambda", cfg.smoothing.lambda);
      read_if(s, "steps", cfg.smoothing.steps);
    }
    read_if(j, "noise_levels", cfg.noise_levels);
    read_if(j, "noise_train_pairs", cfg.noise_train_pairs);
    read_if(j, "embed_dim", cfg.embed_dim);
    read_if(j, "ffn_hidden", cfg.ffn_hidden);
    read_if(j, "gate_hidden", cfg.gate_hidden);
    read_if(j, "translate_layers", cfg.translate_layers);
    read_if(j, "max_scale_factor", cfg.max_scale_factor);
    read_if(j, "pad_to", cfg.pad_to);
    read_if(j, "n_train_pairs", cfg.n_train_pairs);
    read_if(j, "n_test_pairs", cfg.n_test_pairs);
    read_if(j, "categories", cfg.categories);
    read_if(j, "out_dir", cfg.out_dir);
    read_if(j, "jobs", cfg.jobs);
    read_if(j, "save_checkpoints", cfg.save_checkpoints);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string experiment_config_json(const ExperimentConfig& cfg) {
  json j;
  j["suite_seed"] = cfg.suite_seed;
  j["train_sizes"] = cfg.train_sizes;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["gate_lr"] = cfg.gate_lr;
  j["augment"] = cfg.augment;
  j["smoothing"] = {{"enabled", cfg.smoothing.enabled},
                    {"lambda", cfg.smoothing.lambda},
                    {"steps", cfg.smoothing.steps}};
  j["noise_levels"] = cfg.noise_levels;
  j["noise_train_pairs"] = cfg.noise_train_pairs;
  j["embed_dim"] = cfg.embed_dim;
  j["ffn_hidden"] = cfg.ffn_hidden;
  j["gate_hidden"] = cfg.gate_hidden;
  j["translate_layers"] = cfg.translate_layers;
  j["max_scale_factor"] = cfg.max_scale_factor;
  j["pad_to"] = cfg.pad_to;
  j["n_train_pairs"] = cfg.n_train_pairs;
  j["n_test_pairs"] = cfg.n_test_pairs;
  j["categories"] = cfg.categories;
  j["out_dir"] = cfg.out_dir;
  j["jobs"] = cfg.jobs;
  j["save_checkpoints"] = cfg.save_checkpoints;
  return j.dump();
}

namespace {

uint64_t fnv1a(const std::string& s, uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

uint64_t experiment_config_hash(const ExperimentConfig& cfg) {
  return fnv1a(experiment_config_json(cfg));
}

std::vector<ExpertConfig> experts_for_category(const std::string& category,
                                               const ExperimentConfig& cfg) {
  ExpertConfig translate{ExpertFamily::Translate, cfg.translate_layers,
                         cfg.max_scale_factor};
  ExpertConfig rotate{ExpertFamily::Rotate, 0, 0};
  ExpertConfig reflect{ExpertFamily::Reflect, 0, 0};
  ExpertConfig scale{ExpertFamily::Scale, 0, cfg.max_scale_factor};
  if (category == "translate") return {translate};
  if (category == "rotate") return {rotate};
  // diagonal reflection needs the 90-degree turn supplied by the rotation
  // expert; product order stays translate * rotate * reflect * scale
  if (category == "reflect") return {rotate, reflect};
  if (category == "scale") return {scale};
  throw ConfigError("unknown task category '" + category + "'");
}

uint64_t cell_seed(const ExperimentConfig& cfg, const std::string& task_name,
                   int train_size, Variant variant, double noise) {
  std::ostringstream key;
  key << cfg.suite_seed << "|" << task_name << "|" << train_size << "|"
      << to_string(variant) << "|" << noise;
  return fnv1a(key.str());
}

ResultRow run_cell(const Task& task, int train_size, Variant variant,
                   double noise, const ExperimentConfig& cfg,
                   const std::string& history_dir,
                   const std::string& checkpoint_dir) {
  if (train_size > static_cast<int>(task.train.size()))
    throw ConfigError("train size exceeds generated pairs for " + task.name);

  const auto t0 = std::chrono::steady_clock::now();
  const uint64_t seed = cell_seed(cfg, task.name, train_size, variant, noise);

  ModelConfig mc;
  mc.embed_dim = cfg.embed_dim;
  mc.ffn_hidden = cfg.ffn_hidden;
  mc.gate_hidden = cfg.gate_hidden;
  mc.noise_level = noise;
  mc.smoothing = cfg.smoothing;
  switch (variant) {
    case Variant::LatFormer:
      mc.experts = experts_for_category(task.category, cfg);
      break;
    case Variant::LatFormerNoSmooth:
      mc.experts = experts_for_category(task.category, cfg);
      mc.smoothing.enabled = false;
      break;
    case Variant::AttentionBaseline:
      mc.use_mask_expert = false;
      mc.smoothing.enabled = false;
      break;
  }

  LatticeShape shape({task.pad_to, task.pad_to});
  Model model(mc, shape, seed);

  Task cell = task;
  cell.train.resize(train_size);

  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.lr = cfg.lr;
  tc.gate_lr = cfg.gate_lr;
  tc.augment = cfg.augment;
  tc.seed = seed;
  auto trained = train_model(model, cell, tc);

  ResultRow row;
  row.task = task.name;
  row.category = task.category;
  row.variant = to_string(variant);
  row.train_size = train_size;
  row.noise = noise;
  row.accuracy = evaluate_accuracy(model, task.test);
  row.solved = row.accuracy == 1.0;
  row.wall_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t0)
                         .count();

  if (!history_dir.empty()) {
    std::ostringstream name;
    name << task.name << "_" << train_size << "_" << to_string(variant);
    if (noise > 0.0) name << "_w" << noise;
    save_history_csv(trained.history,
                     (fs::path(history_dir) / (name.str() + ".csv")).string());
  }
  if (!checkpoint_dir.empty()) {
    std::ostringstream name;
    name << task.name << "_" << train_size << "_" << to_string(variant)
         << ".json";
    model.save_checkpoint((fs::path(checkpoint_dir) / name.str()).string());
  }
  return row;
}

namespace {

std::vector<Task> load_suite_tasks(const ExperimentConfig& cfg) {
  const fs::path dir = fs::path(cfg.out_dir) / "tasks";
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest))
    throw ConfigError("no task manifest at " + manifest.string() +
                      "; run `gen` first");
  std::ifstream in(manifest);
  json j = json::parse(in);
  std::vector<Task> tasks;
  for (const auto& name : j.at("tasks")) {
    Task t = load_task_json((dir / (name.get<std::string>() + ".json")).string());
    if (!cfg.categories.empty() &&
        std::find(cfg.categories.begin(), cfg.categories.end(), t.category) ==
            cfg.categories.end())
      continue;
    tasks.push_back(std::move(t));
  }
  return tasks;
}

struct Cell {
  int task_index;
  int train_size;
  double noise;
};

std::vector<ResultRow> run_cells(const std::vector<Task>& tasks,
                                 const std::vector<Cell>& cells,
                                 Variant variant, const ExperimentConfig& cfg,
                                 const std::string& history_dir,
                                 const std::string& checkpoint_dir) {
  std::vector<ResultRow> rows;
  std::vector<std::string> errors;
  std::mutex mu;
  size_t next = 0;

  auto worker = [&]() {
    for (;;) {
      size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= cells.size()) return;
        i = next++;
      }
      const Cell& c = cells[i];
      try {
        ResultRow row = run_cell(tasks[c.task_index], c.train_size, variant,
                                 c.noise, cfg, history_dir, checkpoint_dir);
        std::lock_guard<std::mutex> lock(mu);
        std::cerr << "  " << row.task << " size=" << row.train_size
                  << (c.noise > 0 ? " w=" + std::to_string(c.noise) : "")
                  << " acc=" << row.accuracy << " (" << row.wall_seconds
                  << "s)\n";
        rows.push_back(std::move(row));
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        errors.push_back(tasks[c.task_index].name + ": " + e.what());
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(cfg.jobs,
                                                  static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  if (!errors.empty()) {
    std::ofstream err(fs::path(cfg.out_dir) / "errors.log", std::ios::app);
    for (const auto& e : errors) {
      err << e << "\n";
      std::cerr << "error: " << e << "\n";
    }
  }
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.category, a.task, a.train_size, a.noise, a.variant) <
           std::tie(b.category, b.task, b.train_size, b.noise, b.variant);
  });
  return rows;
}

void write_manifest(const ExperimentConfig& cfg, const fs::path& path,
                    const std::vector<std::string>& task_names) {
  json j;
  j["version"] = 1;
  j["suite_seed"] = cfg.suite_seed;
  j["config_hash"] = experiment_config_hash(cfg);
  j["config"] = json::parse(experiment_config_json(cfg));
  j["tasks"] = task_names;
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace

void cmd_gen(const ExperimentConfig& cfg) {
  const fs::path dir = fs::path(cfg.out_dir) / "tasks";
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ParseError("cannot create " + dir.string() + ": " + ec.message());

  SuiteOptions opt;
  opt.n_train = cfg.n_train_pairs;
  opt.n_test = cfg.n_test_pairs;
  opt.pad_to = cfg.pad_to;
  auto tasks = sample_task_suite(cfg.suite_seed, opt);

  std::vector<std::string> names;
  for (const auto& t : tasks) {
    if (!cfg.categories.empty() &&
        std::find(cfg.categories.begin(), cfg.categories.end(), t.category) ==
            cfg.categories.end())
      continue;
    save_task_json(t, (dir / (t.name + ".json")).string());
    names.push_back(t.name);
  }
  write_manifest(cfg, dir / "manifest.json", names);
  std::cout << "wrote " << names.size() << " task files to " << dir.string()
            << "\n";
}

void cmd_train_eval(const ExperimentConfig& cfg, Variant variant) {
  auto tasks = load_suite_tasks(cfg);
  const fs::path out(cfg.out_dir);
  const fs::path history = out / "history";
  fs::create_directories(history);
  fs::path checkpoints;
  if (cfg.save_checkpoints) {
    checkpoints = out / "checkpoints";
    fs::create_directories(checkpoints);
  }

  std::vector<Cell> cells;
  for (size_t i = 0; i < tasks.size(); ++i)
    for (int size : cfg.train_sizes)
      cells.push_back({static_cast<int>(i), size, 0.0});

  auto rows = run_cells(tasks, cells, variant, cfg, history.string(),
                        checkpoints.string());
  append_results_csv((out / "results.csv").string(), rows);

  auto summary = summarize(rows);
  std::ofstream sum(out / "summary.csv", std::ios::app);
  for (const auto& s : summary) {
    sum << s.category << "," << s.variant << "," << s.train_size << ","
        << s.noise << "," << s.mean_accuracy << "," << s.std_accuracy << ","
        << s.tasks << "\n";
    std::cout << s.category << " " << s.variant << " size=" << s.train_size
              << " mean=" << s.mean_accuracy << " std=" << s.std_accuracy
              << "\n";
  }
}

void cmd_noise(const ExperimentConfig& cfg, Variant variant) {
  auto tasks = load_suite_tasks(cfg);
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);

  std::vector<Cell> cells;
  for (size_t i = 0; i < tasks.size(); ++i)
    for (double w : cfg.noise_levels)
      cells.push_back({static_cast<int>(i), cfg.noise_train_pairs, w});

  auto rows = run_cells(tasks, cells, variant, cfg, "", "");
  append_results_csv((out / "results_noise.csv").string(), rows);
  for (const auto& s : summarize(rows))
    std::cout << s.category << " " << s.variant << " w=" << s.noise
              << " mean=" << s.mean_accuracy << " std=" << s.std_accuracy
              << "\n";
}

void cmd_mask(const std::string& action_text, const std::string& shape_text,
              const std::string& out_path) {
  LatticeAction action = LatticeAction::parse(action_text);
  LatticeShape shape = parse_shape(shape_text);
  write_mask(action_mask(action, shape), out_path);
}

void cmd_report(const ExperimentConfig& cfg) {
  const fs::path out(cfg.out_dir);
  std::vector<ResultRow> rows;
  for (const char* name : {"results.csv", "results_noise.csv"}) {
    const fs::path p = out / name;
    if (!fs::exists(p)) continue;
    auto part = read_results_csv(p.string());
    rows.insert(rows.end(), part.begin(), part.end());
  }
  if (rows.empty()) {
    std::cout << "no results under " << out.string() << "\n";
    return;
  }
  std::cout << "category,variant,train_size,noise,mean_acc,std_acc,tasks\n";
  for (const auto& s : summarize(rows)) {
    std::cout << s.category << "," << s.variant << "," << s.train_size << ","
              << s.noise << "," << s.mean_accuracy << "," << s.std_accuracy
              << "," << s.tasks << "\n";
  }
}

void append_results_csv(const std::string& path,
                        const std::vector<ResultRow>& rows) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw ParseError("cannot write " + path);
  if (fresh)
    out << "task,category,variant,train_size,noise,accuracy,solved,"
           "wall_seconds\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.accuracy);
    out << r.task << "," << r.category << "," << r.variant << ","
        << r.train_size << "," << r.noise << "," << buf << ","
        << (r.solved ? 1 : 0) << "," << r.wall_seconds << "\n";
  }
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<ResultRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    ResultRow r;
    std::getline(ls, r.task, ',');
    std::getline(ls, r.category, ',');
    std::getline(ls, r.variant, ',');
    std::getline(ls, field, ',');
    r.train_size = std::stoi(field);
    std::getline(ls, field, ',');
    r.noise = std::stod(field);
    std::getline(ls, field, ',');
    r.accuracy = std::stod(field);
    std::getline(ls, field, ',');
    r.solved = field == "1";
    std::getline(ls, field, ',');
    r.wall_seconds = std::stod(field);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::map<std::tuple<std::string, std::string, int, double>,
           std::vector<double>>
      buckets;
  for (const auto& r : rows)
    buckets[{r.category, r.variant, r.train_size, r.noise}].push_back(
        r.accuracy);
  std::vector<SummaryRow> out;
  for (const auto& [key, accs] : buckets) {
    SummaryRow s;
    s.category = std::get<0>(key);
    s.variant = std::get<1>(key);
    s.train_size = std::get<2>(key);
    s.noise = std::get<3>(key);
    s.tasks = static_cast<int>(accs.size());
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= accs.size();
    double var = 0.0;
    for (double a : accs) var += (a - mean) * (a - mean);
    s.mean_accuracy = mean;
    s.std_accuracy = std::sqrt(var / accs.size());
    out.push_back(std::move(s));
  }
  return out;
}

LatticeShape parse_shape(const std::string& text) {
  std::vector<int> dims;
  std::string cur;
  for (char ch : text + "x") {
    if (ch == 'x' || ch == 'X') {
      if (cur.empty()) throw ConfigError("bad shape '" + text + "'");
      dims.push_back(std::stoi(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  return LatticeShape(dims);
}

}  // namespace latformer
