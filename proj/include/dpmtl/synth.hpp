#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "dpmtl/data.hpp"
#include "dpmtl/errors.hpp"
#include "dpmtl/metrics.hpp"
#include "dpmtl/models.hpp"
#include "dpmtl/rng.hpp"

namespace dpmtl {

// Generative polytomous-IRT simulator. Users and per-option item vectors are
// seeded Gaussians; option choices are sampled from
// softmax(theta_u . a_{i,k} / temperature). distractor_flatten in [0, 1] pulls
// the incorrect-option logits toward their mean, making the wrong options
// progressively uninformative about the student while leaving the correctness
// signal in place.
struct GenConfig {
  std::size_t num_users{2000};
  std::size_t num_items{100};
  std::size_t num_options{5};
  std::size_t latent_dim{8};
  double discrimination{1.0};
  double temperature{1.0};
  double distractor_flatten{0.0};
  double score_scale{100.0};
  double score_offset{500.0};
  double score_noise_sigma{0.0};
  std::uint64_t seed{1};

  void validate() const {
    if (num_users == 0 || num_items == 0 || latent_dim == 0)
      throw ConfigError("generator sizes must be positive");
    if (num_options < 2) throw ConfigError("generator needs at least 2 options per item");
    if (temperature <= 0.0) throw ConfigError("temperature must be positive");
    if (!(distractor_flatten >= 0.0 && distractor_flatten <= 1.0))
      throw ConfigError("distractor_flatten must be in [0, 1]");
    if (score_noise_sigma < 0.0) throw ConfigError("score noise sigma must be non-negative");
  }
};

// Ground truth behind a generated dataset: the parameters as a ParameterStore
// ("theta" n x d, "option_vectors" sum-j x d), the correct option of every
// item, and the config needed to reproduce the exact choice probabilities.
struct SynthTruth {
  ParameterStore params;
  std::vector<std::size_t> correct_option;
  std::vector<std::size_t> offsets;
  GenConfig config;

  // The exact logits the sampler used for (user, item).
  std::vector<double> true_logits(std::size_t user, std::size_t item) const {
    const Tensor& theta = *params.find("theta");
    const Tensor& options = *params.find("option_vectors");
    const std::size_t d = config.latent_dim;
    const std::size_t j = offsets[item + 1] - offsets[item];
    std::vector<double> z(j, 0.0);
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += theta.at(user, c) * options.at(offsets[item] + k, c);
      z[k] = dot / config.temperature;
    }
    if (config.distractor_flatten > 0.0) {
      double mean = 0.0;
      for (std::size_t k = 0; k < j; ++k)
        if (k != correct_option[item]) mean += z[k];
      mean /= static_cast<double>(j - 1);
      for (std::size_t k = 0; k < j; ++k)
        if (k != correct_option[item])
          z[k] = (1.0 - config.distractor_flatten) * z[k] + config.distractor_flatten * mean;
    }
    return z;
  }

  std::vector<double> true_probs(std::size_t user, std::size_t item) const {
    return option_probabilities(true_logits(user, item), correct_option[item]).probs;
  }
};

struct SynthResult {
  Dataset dataset;
  SynthTruth truth;
};

// Samples a dense interaction matrix plus scores that are linear in theta with
// seeded Gaussian noise. Fixed seed, fixed dataset.
inline SynthResult generate_dataset(const GenConfig& cfg) {
  cfg.validate();
  SplitMix64 rng(cfg.seed);
  const std::size_t n = cfg.num_users, m = cfg.num_items, d = cfg.latent_dim;

  SynthResult out;
  out.truth.config = cfg;
  Tensor theta = Tensor::zeros_matrix(n, d);
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = rng.next_gaussian();

  out.dataset.num_users = n;
  out.dataset.num_items = m;
  out.dataset.options_per_item.assign(m, cfg.num_options);
  out.truth.offsets = out.dataset.option_offsets();

  Tensor options = Tensor::zeros_matrix(out.truth.offsets.back(), d);
  for (std::size_t i = 0; i < options.size(); ++i)
    options[i] = rng.next_gaussian() * cfg.discrimination;

  out.truth.correct_option.resize(m);
  for (std::size_t i = 0; i < m; ++i)
    out.truth.correct_option[i] = static_cast<std::size_t>(rng.next_below(cfg.num_options));

  out.truth.params.add("theta", std::move(theta));
  out.truth.params.add("option_vectors", std::move(options));

  out.dataset.interactions.reserve(n * m);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t i = 0; i < m; ++i) {
      const std::vector<double> probs = out.truth.true_probs(u, i);
      const double r = rng.next_double();
      double acc = 0.0;
      std::size_t choice = probs.size() - 1;
      for (std::size_t k = 0; k < probs.size(); ++k) {
        acc += probs[k];
        if (r < acc) {
          choice = k;
          break;
        }
      }
      out.dataset.interactions.push_back(
          Interaction{u, i, choice, out.truth.correct_option[i], std::nullopt});
    }

  std::vector<double> w(d);
  for (std::size_t c = 0; c < d; ++c)
    w[c] = rng.next_gaussian() * cfg.score_scale / std::sqrt(static_cast<double>(d));
  const Tensor& th = *out.truth.params.find("theta");
  for (std::size_t u = 0; u < n; ++u) {
    double s = cfg.score_offset;
    for (std::size_t c = 0; c < d; ++c) s += w[c] * th.at(u, c);
    if (cfg.score_noise_sigma > 0.0) s += cfg.score_noise_sigma * rng.next_gaussian();
    out.dataset.scores[u] = s;
  }
  return out;
}

struct BayesCeilings {
  std::optional<double> kt_auc;
  double ot_acc{0.0};
};

// Metrics of the exact generative probabilities on a dataset part: the
// performance ceilings no learner can beat beyond sampling noise.
inline BayesCeilings bayes_optimal_metrics(const Dataset& part, const SynthTruth& truth) {
  if (part.num_items != truth.correct_option.size())
    throw ShapeError("bayes_optimal_metrics: dataset/truth shape mismatch");
  std::vector<double> correct_probs;
  std::vector<int> labels;
  std::vector<OptionPrediction> preds;
  std::vector<std::size_t> chosen;
  correct_probs.reserve(part.interactions.size());
  for (const Interaction& x : part.interactions) {
    OptionPrediction p;
    p.probs = truth.true_probs(x.user, x.item);
    p.correct_index = truth.correct_option[x.item];
    correct_probs.push_back(p.correct_probability());
    labels.push_back(correctness_label(x));
    preds.push_back(std::move(p));
    chosen.push_back(x.chosen);
  }
  BayesCeilings out;
  out.kt_auc = roc_auc(correct_probs, labels);
  out.ot_acc = ot_accuracy(preds, chosen);
  return out;
}

}  // namespace dpmtl
