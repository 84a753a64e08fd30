#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "dpmtl/autodiff.hpp"
#include "dpmtl/loss.hpp"
#include "dpmtl/metrics.hpp"
#include "dpmtl/models.hpp"
#include "dpmtl/rng.hpp"
#include "dpmtl/split.hpp"

namespace dpmtl {

enum class SelectionMetric { val_loss, val_auc, val_acc };

inline const char* selection_name(SelectionMetric m) {
  switch (m) {
    case SelectionMetric::val_loss: return "val-loss";
    case SelectionMetric::val_auc: return "val-auc";
    case SelectionMetric::val_acc: return "val-acc";
  }
  return "?";
}

inline SelectionMetric parse_selection(const std::string& s) {
  if (s == "val-loss") return SelectionMetric::val_loss;
  if (s == "val-auc") return SelectionMetric::val_auc;
  if (s == "val-acc") return SelectionMetric::val_acc;
  throw ConfigError("unknown selection metric '" + s + "'");
}

struct AdamHyper {
  double learning_rate{1e-3};
  double beta1{0.9};
  double beta2{0.999};
  double epsilon{1e-8};
};

struct TrainConfig {
  double lambda{0.5};
  std::size_t dim{8};
  std::size_t layers{1};
  bool irt_bias{true};
  AdamHyper adam{};
  std::size_t batch_size{256};
  std::size_t max_epochs{500};
  std::size_t patience{10};
  std::uint64_t seed{1};
  SelectionMetric selection{SelectionMetric::val_loss};

  void validate() const {
    DpLossSpec{lambda}.validate();
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
    if (adam.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  }
};

// First and second moment estimates, one tensor per parameter tensor.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step{0};

  static AdamState init(const ParameterStore& params) {
    AdamState s;
    for (std::size_t i = 0; i < params.count(); ++i) {
      s.m.push_back(params.tensor(i).zeros_like());
      s.v.push_back(params.tensor(i).zeros_like());
    }
    return s;
  }
};

// One bias-corrected adaptive-moment update. Aborts on non-finite gradients,
// naming the offending tensor.
inline void adam_step(ParameterStore& params, const std::vector<Tensor>& grads, AdamState& state,
                      const AdamHyper& hp) {
  if (grads.size() != params.count()) throw ShapeError("adam_step: gradient count mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(hp.beta1, t);
  const double bc2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Tensor& p = params.tensor(i);
    const Tensor& g = grads[i];
    if (!g.same_shape(p)) throw ShapeError("adam_step: gradient shape mismatch for " + params.name(i));
    if (!g.all_finite())
      throw NumericError("adam_step: non-finite gradient in tensor '" + params.name(i) + "'");
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = hp.beta1 * m[k] + (1.0 - hp.beta1) * g[k];
      v[k] = hp.beta2 * v[k] + (1.0 - hp.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= hp.learning_rate * mhat / (std::sqrt(vhat) + hp.epsilon);
    }
  }
}

struct MetricsBundle {
  std::optional<double> kt_auc;  // absent when the part has a single class
  double ot_acc{0.0};
  double mean_loss{0.0};
  std::size_t count{0};
};

// Test-time metrics of a model on one dataset part: ROC-AUC of the correctness
// probability, option accuracy of the argmax choice, and the mean DP loss at
// the given lambda.
inline MetricsBundle evaluate(Model& model, const Dataset& part, double lambda) {
  MetricsBundle out;
  out.count = part.interactions.size();
  if (out.count == 0) return out;
  std::vector<double> correct_probs;
  std::vector<int> labels;
  std::vector<OptionPrediction> preds;
  std::vector<std::size_t> chosen;
  correct_probs.reserve(out.count);
  double loss_sum = 0.0;
  ad::Tape tape;
  for (const Interaction& x : part.interactions) {
    tape.clear();
    const ad::Var logits = model.forward(tape, x);
    loss_sum += dp_loss(tape, logits, x.chosen, x.correct, lambda).value()[0];
    OptionPrediction p = option_probabilities(logits.value().values(), x.correct);
    correct_probs.push_back(p.correct_probability());
    labels.push_back(correctness_label(x));
    preds.push_back(std::move(p));
    chosen.push_back(x.chosen);
  }
  out.kt_auc = roc_auc(correct_probs, labels);
  out.ot_acc = ot_accuracy(preds, chosen);
  out.mean_loss = loss_sum / static_cast<double>(out.count);
  return out;
}

struct EpochStats {
  double train_loss{0.0};
  double val_loss{0.0};
  std::optional<double> val_auc;
  double val_acc{0.0};
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch{0};  // index into epochs
  double best_metric{0.0};
  double wall_seconds{0.0};
};

namespace detail {

inline double selection_value(SelectionMetric sel, const EpochStats& e) {
  switch (sel) {
    case SelectionMetric::val_loss: return e.val_loss;
    case SelectionMetric::val_auc: return e.val_auc.value_or(0.5);
    case SelectionMetric::val_acc: return e.val_acc;
  }
  return 0.0;
}

inline bool selection_improved(SelectionMetric sel, double candidate, double best) {
  return sel == SelectionMetric::val_loss ? candidate < best : candidate > best;
}

}  // namespace detail

// Minibatch training under the DP loss. Deterministic per seed: fixed
// initialization, fixed per-epoch shuffle order, fixed accumulation order.
// Stops after `patience` epochs without improvement of the selection metric on
// the validation part (train loss when no validation data exists) and restores
// the best epoch's parameters.
inline TrainReport train(Model& model, const DatasetSplit& split, const TrainConfig& cfg) {
  cfg.validate();
  if (split.train.interactions.empty()) throw ConfigError("train: empty training set");
  const auto t_start = std::chrono::steady_clock::now();

  model.set_context(split.train);
  AdamState adam = AdamState::init(model.params());
  const bool has_val = !split.val.interactions.empty();

  TrainReport report;
  double best = 0.0;
  std::vector<std::vector<double>> best_params = model.params().snapshot();
  std::size_t since_best = 0;

  std::vector<std::size_t> order(split.train.interactions.size());
  std::iota(order.begin(), order.end(), 0);
  ad::Tape tape;
  std::vector<ad::Var> logits;
  std::vector<std::size_t> chosen, correct;
  std::vector<Tensor> grads;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    SplitMix64 shuffle_rng(derive_seed(cfg.seed, epoch));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      tape.clear();
      logits.clear();
      chosen.clear();
      correct.clear();
      for (std::size_t i = start; i < stop; ++i) {
        const Interaction& x = split.train.interactions[order[i]];
        logits.push_back(model.forward(tape, x));
        chosen.push_back(x.chosen);
        correct.push_back(x.correct);
      }
      const ad::Var loss = batch_loss(tape, logits, chosen, correct, cfg.lambda);
      const double loss_value = loss.value()[0];
      if (!std::isfinite(loss_value))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(start / cfg.batch_size));
      loss_sum += loss_value * static_cast<double>(stop - start);
      tape.backward(loss);
      grads.clear();
      for (std::size_t p = 0; p < model.params().count(); ++p)
        grads.push_back(tape.grad_of(model.params().tensor(p)));
      adam_step(model.params(), grads, adam, cfg.adam);
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    if (has_val) {
      const MetricsBundle val = evaluate(model, split.val, cfg.lambda);
      stats.val_loss = val.mean_loss;
      stats.val_auc = val.kt_auc;
      stats.val_acc = val.ot_acc;
    } else {
      stats.val_loss = stats.train_loss;
    }
    report.epochs.push_back(stats);

    const double candidate = detail::selection_value(cfg.selection, stats);
    if (report.epochs.size() == 1 || detail::selection_improved(cfg.selection, candidate, best)) {
      best = candidate;
      report.best_epoch = report.epochs.size() - 1;
      best_params = model.params().snapshot();
      since_best = 0;
    } else if (++since_best > cfg.patience) {
      break;
    }
  }

  model.params().restore(best_params);
  report.best_metric = best;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

}  // namespace dpmtl
