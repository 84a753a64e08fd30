#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "dpmtl/checkpoint.hpp"
#include "dpmtl/csv.hpp"
#include "dpmtl/errors.hpp"
#include "dpmtl/metrics.hpp"
#include "dpmtl/models.hpp"
#include "dpmtl/score_prediction.hpp"
#include "dpmtl/split.hpp"
#include "dpmtl/synth.hpp"
#include "dpmtl/train.hpp"

namespace dpmtl {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

inline std::string fmt_full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Grid sweep over the experimental protocol: model families x lambda x
// embedding dimension x layer count x sparsity x seed. Defaults follow the
// published search space (lambda {0.0..1.0}, dims {1,4,8,16,32,64}, layers
// {1,2,3,4}); reproduction_mode rejects grids outside it.
struct SweepConfig {
  std::string dataset_path;
  std::string scores_path;  // empty: no score prediction
  std::string dataset_name{"dataset"};
  std::vector<std::string> families{"dp-irt"};
  std::vector<double> lambda_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<std::size_t> dim_grid{1, 4, 8, 16, 32, 64};
  std::vector<std::size_t> layer_grid{1, 2, 3, 4};
  std::vector<double> sparsity_grid{0.0};
  std::vector<std::uint64_t> seeds{1};
  std::string out_dir{"out"};
  TrainConfig base{};
  SplitSpec split{};
  double sp_train_frac{0.8};
  std::uint64_t sp_seed{7};
  bool reproduction_mode{false};
  std::size_t jobs{1};

  void validate() const {
    if (dataset_path.empty()) throw ConfigError("sweep: dataset path required");
    if (out_dir.empty()) throw ConfigError("sweep: output directory required");
    if (families.empty() || lambda_grid.empty() || dim_grid.empty() || layer_grid.empty() ||
        sparsity_grid.empty() || seeds.empty())
      throw ConfigError("sweep: all grids must be non-empty");
    for (const std::string& f : families) parse_family(f);
    for (double l : lambda_grid) DpLossSpec{l}.validate();
    for (double s : sparsity_grid)
      if (!(s >= 0.0 && s < 1.0)) throw ConfigError("sweep: sparsity values must be in [0, 1)");
    split.validate();
    if (jobs == 0) throw ConfigError("sweep: jobs must be positive");
    if (reproduction_mode) {
      const std::set<double> lambdas_ok{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
      const std::set<std::size_t> dims_ok{1, 4, 8, 16, 32, 64};
      const std::set<std::size_t> layers_ok{1, 2, 3, 4};
      for (double l : lambda_grid)
        if (!lambdas_ok.count(l))
          throw ConfigError("reproduction mode: lambda " + fmt_full(l) + " outside the search space");
      for (std::size_t d : dim_grid)
        if (!dims_ok.count(d))
          throw ConfigError("reproduction mode: dim " + std::to_string(d) + " outside the search space");
      for (std::size_t l : layer_grid)
        if (!layers_ok.count(l))
          throw ConfigError("reproduction mode: layers " + std::to_string(l) + " outside the search space");
    }
  }
};

inline json sweep_config_to_json(const SweepConfig& c) {
  return json{{"dataset_path", c.dataset_path},
              {"scores_path", c.scores_path},
              {"dataset_name", c.dataset_name},
              {"families", c.families},
              {"lambda_grid", c.lambda_grid},
              {"dim_grid", c.dim_grid},
              {"layer_grid", c.layer_grid},
              {"sparsity_grid", c.sparsity_grid},
              {"seeds", c.seeds},
              {"out_dir", c.out_dir},
              {"train",
               {{"learning_rate", c.base.adam.learning_rate},
                {"batch_size", c.base.batch_size},
                {"max_epochs", c.base.max_epochs},
                {"patience", c.base.patience},
                {"selection", selection_name(c.base.selection)},
                {"irt_bias", c.base.irt_bias}}},
              {"split",
               {{"train_frac", c.split.train_frac},
                {"val_frac", c.split.val_frac},
                {"test_frac", c.split.test_frac},
                {"unit", c.split.unit == SplitUnit::by_user ? "by_user" : "by_interaction"},
                {"seed", c.split.seed}}},
              {"sp_train_frac", c.sp_train_frac},
              {"sp_seed", c.sp_seed},
              {"reproduction_mode", c.reproduction_mode},
              {"jobs", c.jobs}};
}

inline SweepConfig sweep_config_from_json(const json& j) {
  SweepConfig c;
  c.dataset_path = j.value("dataset_path", c.dataset_path);
  c.scores_path = j.value("scores_path", c.scores_path);
  c.dataset_name = j.value("dataset_name", c.dataset_name);
  if (j.contains("families")) c.families = j["families"].get<std::vector<std::string>>();
  if (j.contains("lambda_grid")) c.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
  if (j.contains("dim_grid")) c.dim_grid = j["dim_grid"].get<std::vector<std::size_t>>();
  if (j.contains("layer_grid")) c.layer_grid = j["layer_grid"].get<std::vector<std::size_t>>();
  if (j.contains("sparsity_grid")) c.sparsity_grid = j["sparsity_grid"].get<std::vector<double>>();
  if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  c.out_dir = j.value("out_dir", c.out_dir);
  if (j.contains("train")) {
    const json& t = j["train"];
    c.base.adam.learning_rate = t.value("learning_rate", c.base.adam.learning_rate);
    c.base.batch_size = t.value("batch_size", c.base.batch_size);
    c.base.max_epochs = t.value("max_epochs", c.base.max_epochs);
    c.base.patience = t.value("patience", c.base.patience);
    if (t.contains("selection")) c.base.selection = parse_selection(t["selection"].get<std::string>());
    c.base.irt_bias = t.value("irt_bias", c.base.irt_bias);
  }
  if (j.contains("split")) {
    const json& s = j["split"];
    c.split.train_frac = s.value("train_frac", c.split.train_frac);
    c.split.val_frac = s.value("val_frac", c.split.val_frac);
    c.split.test_frac = s.value("test_frac", c.split.test_frac);
    if (s.contains("unit"))
      c.split.unit = s["unit"].get<std::string>() == "by_user" ? SplitUnit::by_user
                                                               : SplitUnit::by_interaction;
    c.split.seed = s.value("seed", c.split.seed);
  }
  c.sp_train_frac = j.value("sp_train_frac", c.sp_train_frac);
  c.sp_seed = j.value("sp_seed", c.sp_seed);
  c.reproduction_mode = j.value("reproduction_mode", c.reproduction_mode);
  c.jobs = j.value("jobs", c.jobs);
  return c;
}

struct Cell {
  std::string family;
  double sparsity{0.0};
  std::size_t dim{8};
  std::size_t layers{1};
  std::uint64_t seed{1};
  double lambda{0.5};

  std::string canonical() const {
    return family + "|s=" + fmt_full(sparsity) + "|d=" + std::to_string(dim) +
           "|l=" + std::to_string(layers) + "|seed=" + std::to_string(seed) +
           "|lambda=" + fmt_full(lambda);
  }

  std::string hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical())));
    return buf;
  }
};

struct CellResult {
  Cell cell;
  bool ok{false};
  std::optional<double> kt_auc;
  double ot_acc{0.0};
  double test_loss{0.0};
  double val_loss{0.0};
  std::optional<double> val_auc;
  double val_acc{0.0};
  std::optional<double> sp_val_mae;
  std::optional<double> sp_test_mae;
  std::size_t epochs_run{0};
  std::size_t best_epoch{0};
  double wall_seconds{0.0};
};

namespace detail {

inline json cell_result_to_json(const CellResult& r) {
  json j;
  j["config"] = {{"family", r.cell.family}, {"sparsity", r.cell.sparsity},
                 {"dim", r.cell.dim},       {"layers", r.cell.layers},
                 {"seed", r.cell.seed},     {"lambda", r.cell.lambda},
                 {"hash", r.cell.hash_hex()}};
  j["status"] = r.ok ? "ok" : "incomplete";
  json m;
  m["kt_auc"] = r.kt_auc ? json(*r.kt_auc) : json(nullptr);
  m["ot_acc"] = r.ot_acc;
  m["test_loss"] = r.test_loss;
  m["val_loss"] = r.val_loss;
  m["val_auc"] = r.val_auc ? json(*r.val_auc) : json(nullptr);
  m["val_acc"] = r.val_acc;
  m["sp_val_mae"] = r.sp_val_mae ? json(*r.sp_val_mae) : json(nullptr);
  m["sp_test_mae"] = r.sp_test_mae ? json(*r.sp_test_mae) : json(nullptr);
  j["metrics"] = std::move(m);
  j["train"] = {{"epochs_run", r.epochs_run},
                {"best_epoch", r.best_epoch},
                {"wall_seconds", r.wall_seconds}};
  return j;
}

inline CellResult cell_result_from_json(const json& j, const Cell& cell) {
  CellResult r;
  r.cell = cell;
  r.ok = j.value("status", "") == "ok";
  const json& m = j.at("metrics");
  if (!m["kt_auc"].is_null()) r.kt_auc = m["kt_auc"].get<double>();
  r.ot_acc = m.value("ot_acc", 0.0);
  r.test_loss = m.value("test_loss", 0.0);
  r.val_loss = m.value("val_loss", 0.0);
  if (!m["val_auc"].is_null()) r.val_auc = m["val_auc"].get<double>();
  r.val_acc = m.value("val_acc", 0.0);
  if (!m["sp_val_mae"].is_null()) r.sp_val_mae = m["sp_val_mae"].get<double>();
  if (!m["sp_test_mae"].is_null()) r.sp_test_mae = m["sp_test_mae"].get<double>();
  const json& t = j.at("train");
  r.epochs_run = t.value("epochs_run", std::size_t{0});
  r.best_epoch = t.value("best_epoch", std::size_t{0});
  r.wall_seconds = t.value("wall_seconds", 0.0);
  return r;
}

inline std::string opt4(const std::optional<double>& v) { return v ? fmt4(*v) : std::string(); }

}  // namespace detail

// Writes the aggregate reports for a list of cell results: results.csv with a
// stable column order and 4-decimal floats, results.json at full precision,
// the per-task rank-average table, and the (lambda, metric) series files. Rows
// for cells that never completed carry status=incomplete and empty metrics.
inline void emit_report(const std::vector<CellResult>& results,
                        const std::vector<double>& lambda_grid, const std::string& dataset_name,
                        const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  // results.csv
  {
    std::ofstream csv(out_dir / "results.csv", std::ios::binary);
    csv << "dataset,family,sparsity,dim,layers,seed,lambda,status,kt_auc,ot_acc,test_loss,"
           "val_loss,val_auc,val_acc,sp_val_mae,sp_test_mae\n";
    for (const CellResult& r : results) {
      csv << dataset_name << ',' << r.cell.family << ',' << fmt4(r.cell.sparsity) << ','
          << r.cell.dim << ',' << r.cell.layers << ',' << r.cell.seed << ','
          << fmt4(r.cell.lambda) << ',' << (r.ok ? "ok" : "incomplete") << ',';
      if (r.ok) {
        csv << detail::opt4(r.kt_auc) << ',' << fmt4(r.ot_acc) << ',' << fmt4(r.test_loss) << ','
            << fmt4(r.val_loss) << ',' << detail::opt4(r.val_auc) << ',' << fmt4(r.val_acc) << ','
            << detail::opt4(r.sp_val_mae) << ',' << detail::opt4(r.sp_test_mae);
      } else {
        csv << ",,,,,,,";
      }
      csv << '\n';
    }
  }

  // results.json (full precision)
  {
    json arr = json::array();
    for (const CellResult& r : results) arr.push_back(detail::cell_result_to_json(r));
    std::ofstream out(out_dir / "results.json", std::ios::binary);
    out << arr.dump(2) << '\n';
  }

  // rank-average table across configurations, per task
  RankTable table;
  table.lambdas = lambda_grid;
  std::map<std::string, std::map<std::string, RankRow>> rows;  // task -> config -> row
  const auto cell_pos = [&](double lambda) {
    for (std::size_t i = 0; i < lambda_grid.size(); ++i)
      if (lambda_grid[i] == lambda) return i;
    throw ConfigError("emit_report: lambda " + fmt_full(lambda) + " not on the grid");
  };
  const auto add_cell = [&](const std::string& task, bool higher, const CellResult& r,
                            double value) {
    const std::string config = r.cell.family + "|s=" + fmt4(r.cell.sparsity) +
                               "|d=" + std::to_string(r.cell.dim) +
                               "|l=" + std::to_string(r.cell.layers) +
                               "|seed=" + std::to_string(r.cell.seed);
    RankRow& row = rows[task]
                       .try_emplace(config, RankRow{task, config, higher,
                                                    std::vector<std::optional<double>>(
                                                        lambda_grid.size())})
                       .first->second;
    row.cells[cell_pos(r.cell.lambda)] = value;
  };
  for (const CellResult& r : results) {
    if (!r.ok) continue;
    if (r.kt_auc) add_cell("kt-auc", true, r, *r.kt_auc);
    add_cell("ot-acc", true, r, r.ot_acc);
    if (r.sp_test_mae) add_cell("sp-mae", false, r, *r.sp_test_mae);
  }
  for (auto& [task, by_config] : rows) {
    bool complete = true;
    for (auto& [config, row] : by_config)
      for (const auto& c : row.cells)
        if (!c) complete = false;
    if (!complete) continue;  // a partial sweep cannot be ranked
    for (auto& [config, row] : by_config) table.rows.push_back(row);
  }
  {
    std::ofstream csv(out_dir / "rank_average.csv", std::ios::binary);
    csv << "task,lambda,avg_rank\n";
    if (!table.rows.empty()) {
      const auto averages = rank_average(table);
      for (const auto& [task, per_lambda] : averages)
        for (std::size_t i = 0; i < lambda_grid.size(); ++i)
          csv << task << ',' << fmt4(lambda_grid[i]) << ',' << fmt4(per_lambda[i]) << '\n';
    }
  }

  // per-family mean KT-AUC against lambda
  {
    std::map<std::pair<std::string, double>, std::pair<double, std::size_t>> acc;
    for (const CellResult& r : results)
      if (r.ok && r.kt_auc) {
        auto& slot = acc[{r.cell.family, r.cell.lambda}];
        slot.first += *r.kt_auc;
        ++slot.second;
      }
    std::ofstream csv(out_dir / "series_kt_auc.csv", std::ios::binary);
    csv << "family,lambda,kt_auc\n";
    for (const auto& [key, slot] : acc)
      csv << key.first << ',' << fmt4(key.second) << ',' << fmt4(slot.first / slot.second) << '\n';
  }

  // Table-3 shaped matrix: per (sparsity, family, task), the best cell by the
  // validation metric of that task, with its test metric and chosen lambda.
  {
    struct Best {
      bool set{false};
      double val{0.0};
      double test{0.0};
      double lambda{0.0};
    };
    std::map<std::tuple<double, std::string, std::string>, Best> best;
    const auto consider = [&](double sparsity, const std::string& family, const std::string& task,
                              bool higher, double val_metric, double test_metric, double lambda) {
      Best& b = best[{sparsity, family, task}];
      const bool better = !b.set || (higher ? val_metric > b.val : val_metric < b.val);
      if (better) b = {true, val_metric, test_metric, lambda};
    };
    for (const CellResult& r : results) {
      if (!r.ok) continue;
      if (r.val_auc && r.kt_auc)
        consider(r.cell.sparsity, r.cell.family, "kt-auc", true, *r.val_auc, *r.kt_auc,
                 r.cell.lambda);
      consider(r.cell.sparsity, r.cell.family, "ot-acc", true, r.val_acc, r.ot_acc, r.cell.lambda);
      if (r.sp_val_mae && r.sp_test_mae)
        consider(r.cell.sparsity, r.cell.family, "sp-mae", false, *r.sp_val_mae, *r.sp_test_mae,
                 r.cell.lambda);
    }
    std::ofstream csv(out_dir / "ablation.csv", std::ios::binary);
    csv << "dataset,sparsity,family,task,best_lambda,test_metric\n";
    for (const auto& [key, b] : best)
      csv << dataset_name << ',' << fmt4(std::get<0>(key)) << ',' << std::get<1>(key) << ','
          << std::get<2>(key) << ',' << fmt4(b.lambda) << ',' << fmt4(b.test) << '\n';
  }
}

namespace detail {

struct PreparedData {
  Dataset full;
  std::map<double, DatasetSplit> by_sparsity;  // train masked, val/test fixed pre-mask
};

inline PreparedData prepare_data(const SweepConfig& cfg) {
  PreparedData data;
  std::ifstream in(cfg.dataset_path, std::ios::binary);
  if (!in) throw ConfigError("cannot read dataset: " + cfg.dataset_path);
  data.full = parse_interactions(in);
  if (!cfg.scores_path.empty()) {
    std::ifstream sin(cfg.scores_path, std::ios::binary);
    if (!sin) throw ConfigError("cannot read scores: " + cfg.scores_path);
    data.full.scores = parse_scores(sin);
    require_valid(data.full);
  }
  const DatasetSplit base = split_dataset(data.full, cfg.split);
  for (std::size_t si = 0; si < cfg.sparsity_grid.size(); ++si) {
    const double s = cfg.sparsity_grid[si];
    DatasetSplit masked = base;
    if (s > 0.0)
      masked.train = apply_sparsity_mask(base.train, s, derive_seed(cfg.split.seed, 1000 + si));
    data.by_sparsity.emplace(s, std::move(masked));
  }
  return data;
}

inline CellResult run_cell(const SweepConfig& cfg, const Cell& cell, const Dataset& full,
                           const DatasetSplit& split) {
  CellResult r;
  r.cell = cell;
  TrainConfig tc = cfg.base;
  tc.lambda = cell.lambda;
  tc.dim = cell.dim;
  tc.layers = cell.layers;
  tc.seed = cell.seed;
  ModelHyper hyper{cell.dim, cell.layers, tc.irt_bias};
  auto model = make_model(parse_family(cell.family), full, hyper, derive_seed(cell.seed, 17));
  const TrainReport report = train(*model, split, tc);
  const MetricsBundle test = evaluate(*model, split.test, cell.lambda);
  const MetricsBundle val = evaluate(*model, split.val, cell.lambda);
  r.kt_auc = test.kt_auc;
  r.ot_acc = test.ot_acc;
  r.test_loss = test.mean_loss;
  r.val_loss = val.mean_loss;
  r.val_auc = val.kt_auc;
  r.val_acc = val.ot_acc;
  r.epochs_run = report.epochs.size();
  r.best_epoch = report.best_epoch;
  r.wall_seconds = report.wall_seconds;

  // downstream score prediction on the learned representations
  std::vector<std::size_t> scored_users;
  for (const auto& [user, score] : full.scores) {
    (void)score;
    scored_users.push_back(user);
  }
  if (scored_users.size() >= 5) {
    std::vector<std::vector<double>> reps(full.num_users);
    for (std::size_t u : scored_users) reps[u] = model->user_representation(u);
    const SpSplit outer = make_sp_split(scored_users, cfg.sp_train_frac, cfg.sp_seed);
    const SpSplit inner = make_sp_split(outer.train_users, cfg.sp_train_frac,
                                        derive_seed(cfg.sp_seed, 1));
    r.sp_val_mae = sp_evaluate(reps, full.scores, inner).test_mae;
    r.sp_test_mae = sp_evaluate(reps, full.scores, outer).test_mae;
  }
  r.ok = true;
  return r;
}

}  // namespace detail

// Runs every grid cell (train, select on validation, evaluate test), writing
// one JSON per cell plus the aggregate reports. Completed cells found on disk
// are skipped by content hash, so an interrupted sweep resumes where it
// stopped. Cells are independent and run on `jobs` worker threads.
inline std::filesystem::path run_sweep(const SweepConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.validate();
  const detail::PreparedData data = detail::prepare_data(cfg);

  std::vector<Cell> cells;
  for (const std::string& family : cfg.families) {
    const bool uses_layers = parse_family(family) != ModelFamily::dp_irt;
    const std::vector<std::size_t> layer_grid =
        uses_layers ? cfg.layer_grid : std::vector<std::size_t>{1};
    for (double sparsity : cfg.sparsity_grid)
      for (std::size_t dim : cfg.dim_grid)
        for (std::size_t layers : layer_grid)
          for (std::uint64_t seed : cfg.seeds)
            for (double lambda : cfg.lambda_grid)
              cells.push_back(Cell{family, sparsity, dim, layers, seed, lambda});
  }

  const fs::path out_dir(cfg.out_dir);
  const fs::path cell_dir = out_dir / "cells";
  fs::create_directories(cell_dir);
  {
    std::ofstream cfg_out(out_dir / "sweep_config.json", std::ios::binary);
    cfg_out << sweep_config_to_json(cfg).dump(2) << '\n';
  }

  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;

  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size() || failed.load()) return;
      const Cell& cell = cells[i];
      const fs::path cell_file = cell_dir / ("cell_" + cell.hash_hex() + ".json");
      try {
        if (fs::exists(cell_file)) {
          std::ifstream in(cell_file, std::ios::binary);
          json j = json::parse(in);
          if (j.at("config").value("hash", "") == cell.hash_hex() && j.value("status", "") == "ok") {
            results[i] = detail::cell_result_from_json(j, cell);
            continue;
          }
        }
        CellResult r = detail::run_cell(cfg, cell, data.full, data.by_sparsity.at(cell.sparsity));
        std::ofstream out(cell_file, std::ios::binary);
        out << detail::cell_result_to_json(r).dump(2) << '\n';
        results[i] = std::move(r);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failed.store(true);
        if (failure.empty()) failure = "cell " + cell.canonical() + ": " + e.what();
        return;
      }
    }
  };

  if (cfg.jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < cfg.jobs; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failed.load()) throw NumericError("sweep failed: " + failure);

  emit_report(results, cfg.lambda_grid, cfg.dataset_name, out_dir);
  return out_dir;
}

// Sparsity ablation: the same sweep with a sparsity grid, every level scored
// against the identical pre-mask validation/test split.
inline std::filesystem::path run_sparsity_ablation(const SweepConfig& cfg) {
  if (cfg.sparsity_grid.empty()) throw ConfigError("ablation: sparsity grid required");
  return run_sweep(cfg);
}

}  // namespace dpmtl
