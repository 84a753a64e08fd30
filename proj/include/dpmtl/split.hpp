#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "dpmtl/data.hpp"
#include "dpmtl/errors.hpp"
#include "dpmtl/rng.hpp"

namespace dpmtl {

enum class SplitUnit { by_interaction, by_user };

struct SplitSpec {
  double train_frac{0.8};
  double val_frac{0.1};
  double test_frac{0.1};
  SplitUnit unit{SplitUnit::by_interaction};
  std::uint64_t seed{1};

  void validate() const {
    if (!(train_frac > 0.0 && train_frac <= 1.0) || val_frac < 0.0 || val_frac >= 1.0 ||
        test_frac < 0.0 || test_frac >= 1.0)
      throw ConfigError("split fractions out of range");
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
      throw ConfigError("split fractions must sum to 1");
  }
};

// Three datasets over the same user/item index space whose interaction sets
// are pairwise disjoint and together exhaust the source.
struct DatasetSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Drops interactions uniformly at random, keeping exactly
// round((1 - drop_ratio) * N) of them in their original order. Deterministic
// per (dataset, ratio, seed).
inline Dataset apply_sparsity_mask(const Dataset& d, double drop_ratio, std::uint64_t seed) {
  if (!(drop_ratio >= 0.0 && drop_ratio < 1.0))
    throw ConfigError("apply_sparsity_mask: drop_ratio must be in [0, 1)");
  const std::size_t n = d.interactions.size();
  const std::size_t keep =
      static_cast<std::size_t>(std::llround((1.0 - drop_ratio) * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(seed);
  rng.shuffle(order);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  Dataset out = d;
  out.interactions.clear();
  out.interactions.reserve(keep);
  for (std::size_t i : order) out.interactions.push_back(d.interactions[i]);
  return out;
}

namespace detail {

// Indices of the `keep` highest-count entries, ties broken by lower index.
inline std::vector<std::size_t> top_by_count(const std::vector<std::size_t>& counts,
                                             std::size_t keep) {
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  order.resize(std::min(keep, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace detail

// Keeps the ceil(item_frac * m) items answered by most users and the
// ceil(user_frac * n) users answering most items, both ranked on the input
// dataset, then re-indexes users and items densely in ascending old-index
// order.
inline Dataset top_n_filter(const Dataset& d, double item_frac, double user_frac) {
  if (!(item_frac > 0.0 && item_frac <= 1.0) || !(user_frac > 0.0 && user_frac <= 1.0))
    throw ConfigError("top_n_filter: fractions must be in (0, 1]");
  std::vector<std::size_t> item_counts(d.num_items, 0);
  std::vector<std::size_t> user_counts(d.num_users, 0);
  for (const Interaction& x : d.interactions) {
    ++item_counts[x.item];
    ++user_counts[x.user];
  }
  const auto keep_items = detail::top_by_count(
      item_counts, static_cast<std::size_t>(std::ceil(item_frac * static_cast<double>(d.num_items))));
  const auto keep_users = detail::top_by_count(
      user_counts, static_cast<std::size_t>(std::ceil(user_frac * static_cast<double>(d.num_users))));

  std::vector<std::size_t> item_map(d.num_items, SIZE_MAX), user_map(d.num_users, SIZE_MAX);
  for (std::size_t k = 0; k < keep_items.size(); ++k) item_map[keep_items[k]] = k;
  for (std::size_t k = 0; k < keep_users.size(); ++k) user_map[keep_users[k]] = k;

  Dataset out;
  out.num_users = keep_users.size();
  out.num_items = keep_items.size();
  out.options_per_item.reserve(keep_items.size());
  for (std::size_t old : keep_items) out.options_per_item.push_back(d.options_per_item[old]);
  for (const Interaction& x : d.interactions) {
    if (item_map[x.item] == SIZE_MAX || user_map[x.user] == SIZE_MAX) continue;
    Interaction y = x;
    y.user = user_map[x.user];
    y.item = item_map[x.item];
    out.interactions.push_back(y);
  }
  for (const auto& [user, score] : d.scores)
    if (user_map[user] != SIZE_MAX) out.scores[user_map[user]] = score;
  if (out.interactions.empty()) throw ConfigError("top_n_filter: empty result");
  return out;
}

// Disjoint, exhaustive partition of the interactions. by_interaction
// stratifies per user (each user keeps at least one training interaction where
// possible; a single-interaction user goes entirely to train). by_user sends
// every interaction of a user to the same part and partitions scores with the
// users. Deterministic per seed.
inline DatasetSplit split_dataset(const Dataset& d, const SplitSpec& s) {
  s.validate();
  std::vector<std::size_t> part_of(d.interactions.size(), 0);  // 0 train, 1 val, 2 test
  SplitMix64 rng(s.seed);

  if (s.unit == SplitUnit::by_interaction) {
    std::vector<std::vector<std::size_t>> per_user(d.num_users);
    for (std::size_t k = 0; k < d.interactions.size(); ++k)
      per_user[d.interactions[k].user].push_back(k);
    for (std::size_t u = 0; u < d.num_users; ++u) {
      auto& ids = per_user[u];
      if (ids.empty()) continue;
      const std::size_t c = ids.size();
      std::size_t val_c =
          static_cast<std::size_t>(std::llround(s.val_frac * static_cast<double>(c)));
      std::size_t test_c =
          static_cast<std::size_t>(std::llround(s.test_frac * static_cast<double>(c)));
      while (val_c + test_c >= c && val_c > 0) --val_c;   // train keeps >= 1
      while (val_c + test_c >= c && test_c > 0) --test_c;
      const std::size_t train_c = c - val_c - test_c;
      rng.shuffle(ids);
      for (std::size_t i = 0; i < c; ++i)
        part_of[ids[i]] = i < train_c ? 0 : (i < train_c + val_c ? 1 : 2);
    }
  } else {
    std::vector<std::size_t> users(d.num_users);
    std::iota(users.begin(), users.end(), 0);
    rng.shuffle(users);
    const std::size_t n = users.size();
    const std::size_t train_u =
        static_cast<std::size_t>(std::llround(s.train_frac * static_cast<double>(n)));
    std::size_t val_u = static_cast<std::size_t>(std::llround(s.val_frac * static_cast<double>(n)));
    if (train_u + val_u > n) val_u = n - train_u;
    std::vector<std::size_t> user_part(n, 2);
    for (std::size_t i = 0; i < n && i < train_u; ++i) user_part[users[i]] = 0;
    for (std::size_t i = train_u; i < n && i < train_u + val_u; ++i) user_part[users[i]] = 1;
    for (std::size_t k = 0; k < d.interactions.size(); ++k)
      part_of[k] = user_part[d.interactions[k].user];

    DatasetSplit out;
    Dataset* parts[3] = {&out.train, &out.val, &out.test};
    for (Dataset* p : parts) {
      p->num_users = d.num_users;
      p->num_items = d.num_items;
      p->options_per_item = d.options_per_item;
    }
    for (std::size_t k = 0; k < d.interactions.size(); ++k)
      parts[part_of[k]]->interactions.push_back(d.interactions[k]);
    for (const auto& [user, score] : d.scores) parts[user_part[user]]->scores[user] = score;
    return out;
  }

  DatasetSplit out;
  Dataset* parts[3] = {&out.train, &out.val, &out.test};
  for (Dataset* p : parts) {
    p->num_users = d.num_users;
    p->num_items = d.num_items;
    p->options_per_item = d.options_per_item;
    p->scores = d.scores;  // shared index space; scorers split users themselves
  }
  for (std::size_t k = 0; k < d.interactions.size(); ++k)
    parts[part_of[k]]->interactions.push_back(d.interactions[k]);
  return out;
}

}  // namespace dpmtl
