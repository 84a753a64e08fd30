#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpmtl/data.hpp"
#include "dpmtl/errors.hpp"

namespace dpmtl {

// ROC-AUC in the Mann-Whitney formulation: the probability that a random
// positive outscores a random negative, ties counting one half. Computed with
// sort + average ranks in O(n log n). Returns nothing when only one class is
// present (the metric is undefined there).
inline std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("roc_auc: size mismatch");
  const std::size_t n = scores.size();
  std::size_t positives = 0;
  for (int y : labels) positives += (y != 0);
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double p = static_cast<double>(positives);
  const double u = rank_sum_pos - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

// Fraction of records whose most likely option is the one the student chose.
// Argmax ties break to the lowest index.
inline double ot_accuracy(const std::vector<OptionPrediction>& predictions,
                          std::span<const std::size_t> chosen) {
  if (predictions.size() != chosen.size()) throw ShapeError("ot_accuracy: size mismatch");
  if (predictions.empty()) throw ConfigError("ot_accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    hits += predictions[i].argmax() == chosen[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

inline double mae(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw ShapeError("mae: size mismatch");
  if (predicted.empty()) throw ConfigError("mae: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) s += std::abs(predicted[i] - actual[i]);
  return s / static_cast<double>(predicted.size());
}

// Ranks 1..k, best first, tied values sharing the average of their ranks.
inline std::vector<double> rank_with_ties(std::span<const double> values, bool higher_is_better) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return higher_is_better ? values[a] > values[b] : values[a] < values[b];
  });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

// One experiment configuration's metric across the lambda grid. The
// orientation flag records whether larger values are better (AUC, ACC) or
// worse (MAE); ranking respects it.
struct RankRow {
  std::string task;
  std::string config;
  bool higher_is_better{true};
  std::vector<std::optional<double>> cells;  // one per lambda
};

struct RankTable {
  std::vector<double> lambdas;
  std::vector<RankRow> rows;
};

// Averages, per task, the per-row performance rank of each lambda across all
// rows of that task. Every cell must be present.
inline std::map<std::string, std::vector<double>> rank_average(const RankTable& table) {
  std::map<std::string, std::vector<double>> sums;
  std::map<std::string, std::size_t> counts;
  for (const RankRow& row : table.rows) {
    if (row.cells.size() != table.lambdas.size())
      throw ValidationError("rank_average: row '" + row.config + "' (" + row.task + ") has " +
                            std::to_string(row.cells.size()) + " cells for " +
                            std::to_string(table.lambdas.size()) + " lambdas");
    std::vector<double> values;
    values.reserve(row.cells.size());
    for (std::size_t c = 0; c < row.cells.size(); ++c) {
      if (!row.cells[c].has_value())
        throw ValidationError("rank_average: missing cell (config '" + row.config + "', task " +
                              row.task + ", lambda " + std::to_string(table.lambdas[c]) + ")");
      values.push_back(*row.cells[c]);
    }
    const std::vector<double> ranks = rank_with_ties(values, row.higher_is_better);
    auto& acc = sums[row.task];
    if (acc.empty()) acc.assign(table.lambdas.size(), 0.0);
    for (std::size_t c = 0; c < ranks.size(); ++c) acc[c] += ranks[c];
    ++counts[row.task];
  }
  for (auto& [task, acc] : sums)
    for (double& v : acc) v /= static_cast<double>(counts[task]);
  return sums;
}

}  // namespace dpmtl
