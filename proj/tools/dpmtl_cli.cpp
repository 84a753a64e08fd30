// Command-line front end: dataset ingestion, model training and evaluation,
// the synthetic generator, score prediction, gradient checks, and the sweep /
// ablation runners. Exit codes: 0 success, 1 configuration error, 2 runtime
// failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dpmtl/dpmtl.hpp"

namespace fs = std::filesystem;
using dpmtl::json;

namespace {

// Relative output paths land under $DPMTL_OUTPUT_ROOT when it is set.
fs::path resolve_out(const std::string& path) {
  const char* root = std::getenv("DPMTL_OUTPUT_ROOT");
  fs::path p(path);
  if (root && *root && p.is_relative()) return fs::path(root) / p;
  return p;
}

dpmtl::Dataset load_dataset(const std::string& data_path, const std::string& scores_path) {
  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw dpmtl::ConfigError("cannot read dataset: " + data_path);
  dpmtl::Dataset d = dpmtl::parse_interactions(in);
  if (!scores_path.empty()) {
    std::ifstream sin(scores_path, std::ios::binary);
    if (!sin) throw dpmtl::ConfigError("cannot read scores: " + scores_path);
    d.scores = dpmtl::parse_scores(sin);
    dpmtl::require_valid(d);
  }
  return d;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json metrics_to_json(const dpmtl::MetricsBundle& m) {
  json j;
  j["count"] = m.count;
  j["kt_auc"] = m.kt_auc ? json(*m.kt_auc) : json(nullptr);
  j["ot_acc"] = m.ot_acc;
  j["mean_loss"] = m.mean_loss;
  return j;
}

struct SplitFlags {
  double train = 0.8, val = 0.1, test = 0.1;
  std::string unit = "by_interaction";
  std::uint64_t seed = 1;

  dpmtl::SplitSpec spec() const {
    dpmtl::SplitSpec s;
    s.train_frac = train;
    s.val_frac = val;
    s.test_frac = test;
    s.unit = unit == "by_user" ? dpmtl::SplitUnit::by_user : dpmtl::SplitUnit::by_interaction;
    s.seed = seed;
    return s;
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--split-train", train, "training fraction");
    cmd->add_option("--split-val", val, "validation fraction");
    cmd->add_option("--split-test", test, "test fraction");
    cmd->add_option("--split-unit", unit, "by_interaction or by_user")
        ->check(CLI::IsMember({"by_interaction", "by_user"}));
    cmd->add_option("--split-seed", seed, "split seed");
  }
};

json split_to_json(const dpmtl::SplitSpec& s) {
  return json{{"train_frac", s.train_frac},
              {"val_frac", s.val_frac},
              {"test_frac", s.test_frac},
              {"unit", s.unit == dpmtl::SplitUnit::by_user ? "by_user" : "by_interaction"},
              {"seed", s.seed}};
}

dpmtl::SplitSpec split_from_json(const json& j) {
  dpmtl::SplitSpec s;
  s.train_frac = j.at("train_frac").get<double>();
  s.val_frac = j.at("val_frac").get<double>();
  s.test_frac = j.at("test_frac").get<double>();
  s.unit = j.at("unit").get<std::string>() == "by_user" ? dpmtl::SplitUnit::by_user
                                                        : dpmtl::SplitUnit::by_interaction;
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

int cmd_ingest(const std::string& data_path, const std::string& scores_path, double mask_ratio,
               std::uint64_t mask_seed, double top_items, double top_users,
               const std::string& out_path, const std::string& out_scores_path) {
  dpmtl::Dataset d = load_dataset(data_path, scores_path);
  if (top_items < 1.0 || top_users < 1.0) d = dpmtl::top_n_filter(d, top_items, top_users);
  if (mask_ratio > 0.0) d = dpmtl::apply_sparsity_mask(d, mask_ratio, mask_seed);

  json summary;
  summary["num_users"] = d.num_users;
  summary["num_items"] = d.num_items;
  summary["interactions"] = d.interactions.size();
  summary["sparsity"] = d.sparsity();
  summary["scored_users"] = d.scores.size();
  std::size_t correct = 0;
  for (const auto& x : d.interactions) correct += dpmtl::correctness_label(x);
  summary["mean_correctness"] =
      d.interactions.empty() ? 0.0
                             : static_cast<double>(correct) / static_cast<double>(d.interactions.size());
  std::cout << summary.dump(2) << std::endl;

  if (!out_path.empty()) {
    std::ofstream out(resolve_out(out_path), std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    dpmtl::write_interactions(d, out);
  }
  if (!out_scores_path.empty()) {
    std::ofstream out(resolve_out(out_scores_path), std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_scores_path);
    dpmtl::write_scores(d.scores, out);
  }
  return 0;
}

int cmd_train(const std::string& data_path, const std::string& scores_path,
              const std::string& family, const dpmtl::TrainConfig& cfg, const SplitFlags& split,
              const std::string& out_checkpoint, const std::string& out_report) {
  const dpmtl::Dataset data = load_dataset(data_path, scores_path);
  const dpmtl::SplitSpec spec = split.spec();
  const dpmtl::DatasetSplit parts = dpmtl::split_dataset(data, spec);
  const dpmtl::ModelFamily fam = dpmtl::parse_family(family);
  const std::uint64_t init_seed = dpmtl::derive_seed(cfg.seed, 17);
  auto model =
      dpmtl::make_model(fam, data, dpmtl::ModelHyper{cfg.dim, cfg.layers, cfg.irt_bias}, init_seed);
  const dpmtl::TrainReport report = dpmtl::train(*model, parts, cfg);

  json out;
  out["family"] = family;
  out["epochs_run"] = report.epochs.size();
  out["best_epoch"] = report.best_epoch;
  out["val"] = metrics_to_json(dpmtl::evaluate(*model, parts.val, cfg.lambda));
  out["test"] = metrics_to_json(dpmtl::evaluate(*model, parts.test, cfg.lambda));
  std::cout << out.dump(2) << std::endl;

  if (!out_checkpoint.empty()) {
    json training;
    training["lambda"] = cfg.lambda;
    training["train_seed"] = cfg.seed;
    training["split"] = split_to_json(spec);
    write_text(resolve_out(out_checkpoint),
               dpmtl::checkpoint_to_json(*model, data, init_seed, training).dump(2) + "\n");
  }
  if (!out_report.empty())
    write_text(resolve_out(out_report), dpmtl::train_report_to_json(report).dump(2) + "\n");
  return 0;
}

dpmtl::LoadedCheckpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dpmtl::ConfigError("cannot read checkpoint: " + path);
  return dpmtl::checkpoint_from_json(json::parse(in));
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& data_path,
                 const std::string& scores_path, const std::string& part) {
  dpmtl::LoadedCheckpoint ckpt = load_checkpoint_file(checkpoint_path);
  const dpmtl::Dataset data = load_dataset(data_path, scores_path);
  if (data.num_users != ckpt.shape.num_users || data.num_items != ckpt.shape.num_items)
    throw dpmtl::ConfigError("checkpoint was trained on a differently shaped dataset");
  const double lambda = ckpt.training.value("lambda", 0.5);
  json out;
  if (ckpt.training.contains("split")) {
    const dpmtl::DatasetSplit parts =
        dpmtl::split_dataset(data, split_from_json(ckpt.training["split"]));
    ckpt.model->set_context(parts.train);
    if (part == "train" || part == "all")
      out["train"] = metrics_to_json(dpmtl::evaluate(*ckpt.model, parts.train, lambda));
    if (part == "val" || part == "all")
      out["val"] = metrics_to_json(dpmtl::evaluate(*ckpt.model, parts.val, lambda));
    if (part == "test" || part == "all")
      out["test"] = metrics_to_json(dpmtl::evaluate(*ckpt.model, parts.test, lambda));
  } else {
    ckpt.model->set_context(data);
    out["all"] = metrics_to_json(dpmtl::evaluate(*ckpt.model, data, lambda));
  }
  std::cout << out.dump(2) << std::endl;
  return 0;
}

int cmd_sp(const std::string& checkpoint_path, const std::string& data_path,
           const std::string& scores_path, double train_frac, std::uint64_t seed,
           const std::string& out_model, const std::string& out_predictions) {
  dpmtl::LoadedCheckpoint ckpt = load_checkpoint_file(checkpoint_path);
  const dpmtl::Dataset data = load_dataset(data_path, scores_path);
  if (data.scores.empty()) throw dpmtl::ConfigError("sp: score file required");
  if (ckpt.training.contains("split")) {
    const dpmtl::DatasetSplit parts =
        dpmtl::split_dataset(data, split_from_json(ckpt.training["split"]));
    ckpt.model->set_context(parts.train);
  } else {
    ckpt.model->set_context(data);
  }

  std::vector<std::size_t> scored_users;
  for (const auto& [user, score] : data.scores) {
    (void)score;
    scored_users.push_back(user);
  }
  std::vector<std::vector<double>> reps(data.num_users);
  for (std::size_t u : scored_users) reps[u] = ckpt.model->user_representation(u);
  const dpmtl::SpSplit split = dpmtl::make_sp_split(scored_users, train_frac, seed);
  const dpmtl::SpEvalResult result = dpmtl::sp_evaluate(reps, data.scores, split);

  json out;
  out["train_users"] = result.train_count;
  out["test_users"] = result.test_count;
  out["test_mae"] = result.test_mae;
  std::cout << out.dump(2) << std::endl;

  if (!out_model.empty()) {
    json m;
    m["weights"] = result.model.linear.weights;
    m["intercept"] = result.model.linear.intercept;
    m["rank_deficient"] = result.model.linear.rank_deficient;
    m["knots"] = {{"x", result.model.isotonic.knot_x}, {"y", result.model.isotonic.knot_y}};
    write_text(resolve_out(out_model), m.dump(2) + "\n");
  }
  if (!out_predictions.empty()) {
    std::string csv = "user,predicted,actual\n";
    for (std::size_t i = 0; i < result.users.size(); ++i) {
      csv += std::to_string(result.users[i]);
      csv += ',';
      dpmtl::detail::append_double(csv, result.predicted[i]);
      csv += ',';
      dpmtl::detail::append_double(csv, result.actual[i]);
      csv += '\n';
    }
    write_text(resolve_out(out_predictions), csv);
  }
  return 0;
}

int cmd_synth(const dpmtl::GenConfig& cfg, const std::string& out_interactions,
              const std::string& out_scores, const std::string& out_truth) {
  const dpmtl::SynthResult result = dpmtl::generate_dataset(cfg);
  const dpmtl::BayesCeilings ceil = dpmtl::bayes_optimal_metrics(result.dataset, result.truth);
  json out;
  out["num_users"] = cfg.num_users;
  out["num_items"] = cfg.num_items;
  out["interactions"] = result.dataset.interactions.size();
  out["ceiling_kt_auc"] = ceil.kt_auc ? json(*ceil.kt_auc) : json(nullptr);
  out["ceiling_ot_acc"] = ceil.ot_acc;
  std::cout << out.dump(2) << std::endl;

  if (!out_interactions.empty()) {
    std::ofstream f(resolve_out(out_interactions), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + out_interactions);
    dpmtl::write_interactions(result.dataset, f);
  }
  if (!out_scores.empty()) {
    std::ofstream f(resolve_out(out_scores), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + out_scores);
    dpmtl::write_scores(result.dataset.scores, f);
  }
  if (!out_truth.empty()) {
    json truth;
    truth["correct_option"] = result.truth.correct_option;
    truth["theta"] = result.truth.params.find("theta")->values();
    truth["option_vectors"] = result.truth.params.find("option_vectors")->values();
    write_text(resolve_out(out_truth), truth.dump() + "\n");
  }
  return 0;
}

int cmd_gradcheck(std::size_t seeds) {
  dpmtl::Dataset shape;
  shape.num_users = 3;
  shape.num_items = 4;
  shape.options_per_item = {3, 4, 2, 3};
  dpmtl::Dataset context = shape;
  context.interactions = {
      {0, 0, 1, 2, std::nullopt}, {0, 1, 3, 0, std::nullopt}, {0, 3, 2, 2, std::nullopt},
      {1, 1, 0, 0, std::nullopt}, {1, 2, 1, 1, std::nullopt}, {2, 0, 0, 2, std::nullopt},
  };
  const std::vector<dpmtl::Interaction> queries{{0, 2, 0, 1, std::nullopt},
                                                {1, 0, 2, 2, std::nullopt},
                                                {2, 1, 1, 0, std::nullopt}};
  bool all_ok = true;
  for (dpmtl::ModelFamily family :
       {dpmtl::ModelFamily::dp_irt, dpmtl::ModelFamily::dp_nmf, dpmtl::ModelFamily::dp_bidkt}) {
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t s = 0; checked < seeds && s < 20 * seeds; ++s) {
      auto model = dpmtl::make_model(family, shape, dpmtl::ModelHyper{3, 2, true}, 100 + s);
      model->set_context(context);
      const auto f = [&](dpmtl::ad::Tape& t) {
        std::vector<dpmtl::ad::Var> logits;
        std::vector<std::size_t> chosen, correct;
        for (const dpmtl::Interaction& q : queries) {
          logits.push_back(model->forward(t, q));
          chosen.push_back(q.chosen);
          correct.push_back(q.correct);
        }
        return dpmtl::batch_loss(t, logits, chosen, correct, 0.4);
      };
      {
        dpmtl::ad::Tape probe;
        f(probe);
        // finite differences are invalid within epsilon of a relu kink
        if (probe.min_relu_input_abs() < 1e-3) continue;
      }
      worst = std::max(worst, dpmtl::ad::check_gradients(f, model->params().pointers(), 1e-5));
      ++checked;
    }
    const bool ok = worst < 1e-4;
    all_ok = all_ok && ok;
    std::cout << dpmtl::family_name(family) << ": max relative error " << worst << " ["
              << (ok ? "ok" : "FAIL") << "]\n";
  }
  return all_ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DP-MTL: joint knowledge/option tracing with a lambda-mixed loss"};
  app.require_subcommand(1);

  // ingest
  std::string in_data, in_scores, in_out, in_out_scores;
  double mask_ratio = 0.0, top_items = 1.0, top_users = 1.0;
  std::uint64_t mask_seed = 1;
  CLI::App* ingest = app.add_subcommand("ingest", "parse, validate and transform interaction data");
  ingest->add_option("--data", in_data, "interaction CSV")->required();
  ingest->add_option("--scores", in_scores, "score CSV");
  ingest->add_option("--mask-ratio", mask_ratio, "drop this fraction of interactions");
  ingest->add_option("--mask-seed", mask_seed, "mask seed");
  ingest->add_option("--top-items", top_items, "keep this fraction of most-answered items");
  ingest->add_option("--top-users", top_users, "keep this fraction of most-active users");
  ingest->add_option("--out", in_out, "write the transformed interaction CSV here");
  ingest->add_option("--out-scores", in_out_scores, "write the filtered score CSV here");

  // train
  std::string tr_data, tr_scores, tr_family = "dp-irt", tr_ckpt, tr_report, tr_selection = "val-loss";
  dpmtl::TrainConfig tr_cfg;
  SplitFlags tr_split;
  bool tr_no_bias = false;
  CLI::App* train_cmd = app.add_subcommand("train", "train one model configuration");
  train_cmd->add_option("--data", tr_data, "interaction CSV")->required();
  train_cmd->add_option("--scores", tr_scores, "score CSV");
  train_cmd->add_option("--family", tr_family, "dp-irt | dp-nmf | dp-bidkt");
  train_cmd->add_option("--lambda", tr_cfg.lambda, "mixing ratio in [0,1]");
  train_cmd->add_option("--dim", tr_cfg.dim, "embedding dimension");
  train_cmd->add_option("--layers", tr_cfg.layers, "scorer/head layers (dp-nmf, dp-bidkt)");
  train_cmd->add_option("--lr", tr_cfg.adam.learning_rate, "learning rate");
  train_cmd->add_option("--batch", tr_cfg.batch_size, "batch size");
  train_cmd->add_option("--epochs", tr_cfg.max_epochs, "max epochs");
  train_cmd->add_option("--patience", tr_cfg.patience, "early-stopping patience");
  train_cmd->add_option("--seed", tr_cfg.seed, "training seed");
  train_cmd->add_option("--selection", tr_selection, "val-loss | val-auc | val-acc");
  train_cmd->add_flag("--no-irt-bias", tr_no_bias, "disable the per-option bias of dp-irt");
  tr_split.attach(train_cmd);
  train_cmd->add_option("--out-checkpoint", tr_ckpt, "checkpoint JSON path");
  train_cmd->add_option("--out-report", tr_report, "training report JSON path");

  // evaluate
  std::string ev_ckpt, ev_data, ev_scores, ev_part = "test";
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset part");
  eval_cmd->add_option("--checkpoint", ev_ckpt, "checkpoint JSON")->required();
  eval_cmd->add_option("--data", ev_data, "interaction CSV")->required();
  eval_cmd->add_option("--scores", ev_scores, "score CSV");
  eval_cmd->add_option("--part", ev_part, "train | val | test | all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));

  // sp
  std::string sp_ckpt, sp_data, sp_scores, sp_model_out, sp_pred_out;
  double sp_frac = 0.8;
  std::uint64_t sp_seed = 7;
  CLI::App* sp_cmd = app.add_subcommand("sp", "downstream score prediction from a checkpoint");
  sp_cmd->add_option("--checkpoint", sp_ckpt, "checkpoint JSON")->required();
  sp_cmd->add_option("--data", sp_data, "interaction CSV")->required();
  sp_cmd->add_option("--scores", sp_scores, "score CSV")->required();
  sp_cmd->add_option("--train-frac", sp_frac, "train-user fraction");
  sp_cmd->add_option("--seed", sp_seed, "user split seed");
  sp_cmd->add_option("--out-model", sp_model_out, "fitted SP model JSON path");
  sp_cmd->add_option("--out-predictions", sp_pred_out, "predictions CSV path");

  // synth
  dpmtl::GenConfig gen;
  std::string sy_out, sy_out_scores, sy_out_truth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--users", gen.num_users, "number of users");
  synth_cmd->add_option("--items", gen.num_items, "number of items");
  synth_cmd->add_option("--options", gen.num_options, "options per item");
  synth_cmd->add_option("--dim", gen.latent_dim, "latent dimension");
  synth_cmd->add_option("--discrimination", gen.discrimination, "item vector scale");
  synth_cmd->add_option("--temperature", gen.temperature, "choice temperature");
  synth_cmd->add_option("--flatten", gen.distractor_flatten,
                        "pull incorrect options toward uninformative, in [0,1]");
  synth_cmd->add_option("--score-scale", gen.score_scale, "score signal scale");
  synth_cmd->add_option("--score-offset", gen.score_offset, "score offset");
  synth_cmd->add_option("--score-noise", gen.score_noise_sigma, "score noise sigma");
  synth_cmd->add_option("--seed", gen.seed, "generator seed");
  synth_cmd->add_option("--out-interactions", sy_out, "interaction CSV path");
  synth_cmd->add_option("--out-scores", sy_out_scores, "score CSV path");
  synth_cmd->add_option("--out-truth", sy_out_truth, "ground-truth parameter JSON path");

  // sweep / ablate
  std::string sw_config, sw_data, sw_scores, sw_out, sw_name;
  std::vector<std::string> sw_families;
  std::vector<double> sw_lambdas, sw_sparsities;
  std::vector<std::size_t> sw_dims, sw_layers;
  std::vector<std::uint64_t> sw_seeds;
  std::size_t sw_jobs = 0;
  bool sw_repro = false;
  long sw_epochs = -1, sw_batch = -1, sw_patience = -1;
  double sw_lr = -1.0;
  const auto attach_sweep_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", sw_config, "sweep config JSON file");
    cmd->add_option("--data", sw_data, "interaction CSV (overrides config)");
    cmd->add_option("--scores", sw_scores, "score CSV (overrides config)");
    cmd->add_option("--out", sw_out, "output directory (overrides config)");
    cmd->add_option("--name", sw_name, "dataset name used in reports");
    cmd->add_option("--families", sw_families, "model families");
    cmd->add_option("--lambdas", sw_lambdas, "lambda grid");
    cmd->add_option("--dims", sw_dims, "embedding dimension grid");
    cmd->add_option("--layers", sw_layers, "layer grid");
    cmd->add_option("--sparsities", sw_sparsities, "sparsity grid");
    cmd->add_option("--seeds", sw_seeds, "training seeds");
    cmd->add_option("--jobs", sw_jobs, "worker threads");
    cmd->add_option("--epochs", sw_epochs, "max epochs");
    cmd->add_option("--batch", sw_batch, "batch size");
    cmd->add_option("--patience", sw_patience, "early-stopping patience");
    cmd->add_option("--lr", sw_lr, "learning rate");
    cmd->add_flag("--reproduction", sw_repro, "restrict grids to the published search space");
  };
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run the full grid sweep");
  attach_sweep_flags(sweep_cmd);
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "run the sparsity ablation");
  attach_sweep_flags(ablate_cmd);

  // gradcheck
  std::size_t gc_seeds = 5;
  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference check of all model gradients");
  gradcheck_cmd->add_option("--seeds", gc_seeds, "number of random restarts");

  try {
    app.parse(argc, argv);

    if (*ingest)
      return cmd_ingest(in_data, in_scores, mask_ratio, mask_seed, top_items, top_users, in_out,
                        in_out_scores);
    if (*train_cmd) {
      tr_cfg.selection = dpmtl::parse_selection(tr_selection);
      tr_cfg.irt_bias = !tr_no_bias;
      return cmd_train(tr_data, tr_scores, tr_family, tr_cfg, tr_split, tr_ckpt, tr_report);
    }
    if (*eval_cmd) return cmd_evaluate(ev_ckpt, ev_data, ev_scores, ev_part);
    if (*sp_cmd) return cmd_sp(sp_ckpt, sp_data, sp_scores, sp_frac, sp_seed, sp_model_out,
                               sp_pred_out);
    if (*synth_cmd) return cmd_synth(gen, sy_out, sy_out_scores, sy_out_truth);
    if (*gradcheck_cmd) return cmd_gradcheck(gc_seeds);

    if (*sweep_cmd || *ablate_cmd) {
      dpmtl::SweepConfig cfg;
      if (*ablate_cmd) cfg.sparsity_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
      if (!sw_config.empty()) {
        std::ifstream in(sw_config, std::ios::binary);
        if (!in) throw dpmtl::ConfigError("cannot read config: " + sw_config);
        cfg = dpmtl::sweep_config_from_json(json::parse(in));
      }
      if (!sw_data.empty()) cfg.dataset_path = sw_data;
      if (!sw_scores.empty()) cfg.scores_path = sw_scores;
      if (!sw_out.empty()) cfg.out_dir = sw_out;
      if (!sw_name.empty()) cfg.dataset_name = sw_name;
      if (!sw_families.empty()) cfg.families = sw_families;
      if (!sw_lambdas.empty()) cfg.lambda_grid = sw_lambdas;
      if (!sw_dims.empty()) cfg.dim_grid = sw_dims;
      if (!sw_layers.empty()) cfg.layer_grid = sw_layers;
      if (!sw_sparsities.empty()) cfg.sparsity_grid = sw_sparsities;
      if (!sw_seeds.empty()) cfg.seeds = sw_seeds;
      if (sw_jobs > 0) cfg.jobs = sw_jobs;
      if (sw_epochs >= 0) cfg.base.max_epochs = static_cast<std::size_t>(sw_epochs);
      if (sw_batch > 0) cfg.base.batch_size = static_cast<std::size_t>(sw_batch);
      if (sw_patience >= 0) cfg.base.patience = static_cast<std::size_t>(sw_patience);
      if (sw_lr > 0.0) cfg.base.adam.learning_rate = sw_lr;
      if (sw_repro) cfg.reproduction_mode = true;
      cfg.out_dir = resolve_out(cfg.out_dir).string();
      const fs::path out =
          *ablate_cmd ? dpmtl::run_sparsity_ablation(cfg) : dpmtl::run_sweep(cfg);
      std::cout << "reports written to " << out.string() << std::endl;
      return 0;
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const dpmtl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 1;
  } catch (const dpmtl::ParseError& e) {
    std::cerr << "parse error: " << e.what() << std::endl;
    return 1;
  } catch (const dpmtl::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
}
