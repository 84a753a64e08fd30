#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dpmtl/errors.hpp"

namespace dpmtl {

// One (user, item, chosen option, correct option) event. Correctness is always
// derived from the two option indices, never stored, so the dichotomous and
// polytomous labels cannot disagree.
struct Interaction {
  std::size_t user{0};
  std::size_t item{0};
  std::size_t chosen{0};
  std::size_t correct{0};
  std::optional<std::size_t> position;  // sequence order for sequence models
};

inline int correctness_label(const Interaction& x) { return x.chosen == x.correct ? 1 : 0; }

struct Dataset {
  std::size_t num_users{0};
  std::size_t num_items{0};
  std::vector<std::size_t> options_per_item;
  std::vector<Interaction> interactions;
  std::map<std::size_t, double> scores;  // user -> exam score, optional

  // Fraction of the user x item matrix with no interaction.
  double sparsity() const {
    const double cells = static_cast<double>(num_users) * static_cast<double>(num_items);
    if (cells == 0.0) return 0.0;
    return 1.0 - static_cast<double>(interactions.size()) / cells;
  }

  std::size_t options(std::size_t item) const { return options_per_item[item]; }

  // Flat offset of item i's first option in per-option parameter blocks.
  std::vector<std::size_t> option_offsets() const {
    std::vector<std::size_t> off(num_items + 1, 0);
    for (std::size_t i = 0; i < num_items; ++i) off[i + 1] = off[i] + options_per_item[i];
    return off;
  }

  std::size_t total_options() const {
    std::size_t s = 0;
    for (std::size_t j : options_per_item) s += j;
    return s;
  }
};

// Checks every Dataset invariant. An empty report means the dataset is valid;
// each violation names the offending record. Pure; violations are data, not
// failures.
inline std::vector<std::string> validate_dataset(const Dataset& d) {
  std::vector<std::string> report;
  if (d.options_per_item.size() != d.num_items)
    report.push_back("options_per_item has " + std::to_string(d.options_per_item.size()) +
                     " entries for " + std::to_string(d.num_items) + " items");
  for (std::size_t i = 0; i < d.options_per_item.size(); ++i)
    if (d.options_per_item[i] < 2)
      report.push_back("item " + std::to_string(i) + " has " +
                       std::to_string(d.options_per_item[i]) + " options; at least 2 required");
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t k = 0; k < d.interactions.size(); ++k) {
    const Interaction& x = d.interactions[k];
    const std::string where = "interaction " + std::to_string(k) + " (user " +
                              std::to_string(x.user) + ", item " + std::to_string(x.item) + ")";
    if (x.user >= d.num_users) {
      report.push_back(where + ": user index out of range");
      continue;
    }
    if (x.item >= d.num_items) {
      report.push_back(where + ": item index out of range");
      continue;
    }
    const std::size_t j = d.options_per_item[x.item];
    if (x.chosen >= j)
      report.push_back(where + ": chosen option " + std::to_string(x.chosen) +
                       " out of range (item has " + std::to_string(j) + " options)");
    if (x.correct >= j)
      report.push_back(where + ": correct option " + std::to_string(x.correct) +
                       " out of range (item has " + std::to_string(j) + " options)");
    if (!seen.insert({x.user, x.item}).second)
      report.push_back(where + ": duplicate (user, item) pair");
  }
  for (const auto& [user, score] : d.scores) {
    (void)score;
    if (user >= d.num_users)
      report.push_back("score entry for user " + std::to_string(user) + ": user index out of range");
  }
  return report;
}

inline void require_valid(const Dataset& d) {
  const auto report = validate_dataset(d);
  if (report.empty()) return;
  std::string msg = "dataset invalid (" + std::to_string(report.size()) + " violation(s)):";
  for (const auto& v : report) msg += "\n  " + v;
  throw ValidationError(msg);
}

// Relabels chosen/correct of every interaction on `item` under a permutation of
// its option indices, where perm[new_index] == old_index. Model parameters
// permuted the same way must leave predictions equivariant.
inline Dataset permute_item_options(const Dataset& d, std::size_t item,
                                    const std::vector<std::size_t>& perm) {
  if (item >= d.num_items) throw ConfigError("permute_item_options: item out of range");
  if (perm.size() != d.options_per_item[item])
    throw ConfigError("permute_item_options: permutation size mismatch");
  std::vector<std::size_t> inverse(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) inverse[perm[k]] = k;
  Dataset out = d;
  for (Interaction& x : out.interactions) {
    if (x.item != item) continue;
    x.chosen = inverse[x.chosen];
    x.correct = inverse[x.correct];
  }
  return out;
}

// Per-option probability vector for one (user, item) query. Probabilities are
// strictly positive and sum to one; the correctness probability is the mass on
// the correct option.
struct OptionPrediction {
  std::vector<double> probs;
  std::size_t correct_index{0};

  double correct_probability() const { return probs[correct_index]; }

  std::size_t argmax() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < probs.size(); ++k)
      if (probs[k] > probs[best]) best = k;  // ties break to the lowest index
    return best;
  }
};

}  // namespace dpmtl
