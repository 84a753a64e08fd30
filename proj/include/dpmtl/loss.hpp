#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dpmtl/autodiff.hpp"
#include "dpmtl/errors.hpp"

namespace dpmtl {

// Mixing ratio between the dichotomous (correctness) and polytomous (option
// choice) objectives. 1 is pure knowledge tracing, 0 is pure option tracing.
struct DpLossSpec {
  double lambda{0.5};

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0, 1]");
  }
};

// Negative log likelihood of one response under the mixed objective, built on
// the tape in log space. For a correct response the loss is -log p_correct for
// every lambda. For an incorrect response it is
//   -[ lambda * log(sum of incorrect-option probabilities)
//      + (1 - lambda) * log p_chosen ].
// The incorrect-option mass is a log_sum_exp over the log-softmax outputs;
// 1 - p_correct in linear space would cancel catastrophically once a model
// grows confident.
inline ad::Var dp_loss(ad::Tape& t, ad::Var logits, std::size_t chosen, std::size_t correct,
                       double lambda) {
  DpLossSpec{lambda}.validate();
  const std::size_t j = logits.value().size();
  if (chosen >= j || correct >= j) throw ShapeError("dp_loss: option index out of range");
  if (j < 2) throw ShapeError("dp_loss: items need at least 2 options");
  const ad::Var logp = t.log_softmax(logits);
  if (chosen == correct)
    return t.scale(t.log_sum_exp(logp, {static_cast<std::uint32_t>(correct)}), -1.0);
  std::vector<std::uint32_t> incorrect;
  incorrect.reserve(j - 1);
  for (std::size_t k = 0; k < j; ++k)
    if (k != correct) incorrect.push_back(static_cast<std::uint32_t>(k));
  const ad::Var kt_term = t.log_sum_exp(logp, std::move(incorrect));
  const ad::Var ot_term = t.log_sum_exp(logp, {static_cast<std::uint32_t>(chosen)});
  return t.scale(t.add(t.scale(kt_term, lambda), t.scale(ot_term, 1.0 - lambda)), -1.0);
}

// Arithmetic mean of dp_loss over a batch, so lambda sweeps compare across
// batch sizes.
inline ad::Var batch_loss(ad::Tape& t, std::span<const ad::Var> logits,
                          std::span<const std::size_t> chosen,
                          std::span<const std::size_t> correct, double lambda) {
  if (logits.empty()) throw ConfigError("batch_loss: empty batch");
  if (logits.size() != chosen.size() || logits.size() != correct.size())
    throw ShapeError("batch_loss: mismatched batch arrays");
  std::vector<ad::Var> losses;
  losses.reserve(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i)
    losses.push_back(dp_loss(t, logits[i], chosen[i], correct[i], lambda));
  return t.mean(t.concat(losses));
}

}  // namespace dpmtl
