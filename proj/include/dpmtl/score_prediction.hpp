#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "dpmtl/errors.hpp"
#include "dpmtl/linalg.hpp"
#include "dpmtl/metrics.hpp"
#include "dpmtl/rng.hpp"

namespace dpmtl {

struct LinearFit {
  std::vector<double> weights;
  double intercept{0.0};
  bool rank_deficient{false};
};

// Least-squares fit of score = theta . w + b via the normal equations. A rank
// deficient system is re-solved with 1e-8 ridge jitter on the diagonal and
// flagged.
inline LinearFit fit_linear(const std::vector<std::vector<double>>& x,
                            const std::vector<double>& y) {
  if (x.empty()) throw ConfigError("fit_linear: no training rows");
  if (x.size() != y.size()) throw ShapeError("fit_linear: row/target count mismatch");
  const std::size_t d = x[0].size();
  for (const auto& row : x)
    if (row.size() != d) throw ShapeError("fit_linear: ragged design matrix");

  const std::size_t n = d + 1;  // intercept column appended
  std::vector<std::vector<double>> gram(n, std::vector<double>(n, 0.0));
  std::vector<double> rhs(n, 0.0);
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a; b < d; ++b) gram[a][b] += x[r][a] * x[r][b];
      gram[a][d] += x[r][a];
      rhs[a] += x[r][a] * y[r];
    }
    gram[d][d] += 1.0;
    rhs[d] += y[r];
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < a; ++b) gram[a][b] = gram[b][a];

  LinearFit fit;
  std::vector<double> solution;
  if (!solve_linear_system(gram, rhs, solution)) {
    fit.rank_deficient = true;
    for (std::size_t a = 0; a < n; ++a) gram[a][a] += 1e-8;
    if (!solve_linear_system(gram, rhs, solution))
      throw NumericError("fit_linear: singular system even with ridge jitter");
  }
  fit.weights.assign(solution.begin(), solution.begin() + d);
  fit.intercept = solution[d];
  return fit;
}

inline double linear_predict(const LinearFit& fit, std::span<const double> theta) {
  if (theta.size() != fit.weights.size()) throw ShapeError("linear_predict: dimension mismatch");
  double s = fit.intercept;
  for (std::size_t i = 0; i < theta.size(); ++i) s += fit.weights[i] * theta[i];
  return s;
}

// Non-decreasing step function as (input, fitted) knots; inputs strictly
// increasing.
struct IsotonicFit {
  std::vector<double> knot_x;
  std::vector<double> knot_y;
};

// Pool-adjacent-violators over the pairs sorted by prediction: the
// least-squares non-decreasing fit. Ties in the predictions are pre-pooled by
// mean, so knot inputs stay strictly increasing.
inline IsotonicFit fit_isotonic(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size()) throw ShapeError("fit_isotonic: size mismatch");
  if (pred.empty()) throw ConfigError("fit_isotonic: empty input");

  std::vector<std::size_t> order(pred.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return pred[a] < pred[b]; });

  // pre-pool equal predictions
  std::vector<double> xs, ys, ws;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    double sum = actual[order[i]];
    while (j + 1 < order.size() && pred[order[j + 1]] == pred[order[i]]) {
      ++j;
      sum += actual[order[j]];
    }
    xs.push_back(pred[order[i]]);
    ys.push_back(sum / static_cast<double>(j - i + 1));
    ws.push_back(static_cast<double>(j - i + 1));
    i = j + 1;
  }

  // stack-based PAVA: merge while the last two blocks violate monotonicity
  struct Block {
    double value;
    double weight;
    std::size_t len;  // number of pooled x-groups
  };
  std::vector<Block> stack;
  for (std::size_t g = 0; g < xs.size(); ++g) {
    stack.push_back({ys[g], ws[g], 1});
    while (stack.size() >= 2 && stack[stack.size() - 2].value > stack.back().value) {
      const Block top = stack.back();
      stack.pop_back();
      Block& prev = stack.back();
      prev.value = (prev.value * prev.weight + top.value * top.weight) / (prev.weight + top.weight);
      prev.weight += top.weight;
      prev.len += top.len;
    }
  }

  IsotonicFit fit;
  fit.knot_x = std::move(xs);
  fit.knot_y.reserve(fit.knot_x.size());
  for (const Block& b : stack)
    for (std::size_t k = 0; k < b.len; ++k) fit.knot_y.push_back(b.value);
  return fit;
}

// Evaluates the fitted step function: linear interpolation between knots,
// clamped to the end values outside the knot range.
inline double apply_isotonic(const IsotonicFit& fit, double x) {
  if (fit.knot_x.empty()) throw ConfigError("apply_isotonic: unfitted model");
  if (x <= fit.knot_x.front()) return fit.knot_y.front();
  if (x >= fit.knot_x.back()) return fit.knot_y.back();
  const auto it = std::upper_bound(fit.knot_x.begin(), fit.knot_x.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - fit.knot_x.begin());
  const std::size_t lo = hi - 1;
  const double t = (x - fit.knot_x[lo]) / (fit.knot_x[hi] - fit.knot_x[lo]);
  return fit.knot_y[lo] + t * (fit.knot_y[hi] - fit.knot_y[lo]);
}

// Linear regression followed by isotonic calibration, the downstream probe of
// representation quality.
struct SpModel {
  LinearFit linear;
  IsotonicFit isotonic;
};

inline SpModel fit_sp_model(const std::vector<std::vector<double>>& reps,
                            const std::vector<double>& scores) {
  SpModel m;
  m.linear = fit_linear(reps, scores);
  std::vector<double> preds;
  preds.reserve(reps.size());
  for (const auto& r : reps) preds.push_back(linear_predict(m.linear, r));
  m.isotonic = fit_isotonic(preds, scores);
  return m;
}

inline double predict_score(std::span<const double> theta, const SpModel& m) {
  return apply_isotonic(m.isotonic, linear_predict(m.linear, theta));
}

struct SpSplit {
  std::vector<std::size_t> train_users;
  std::vector<std::size_t> test_users;
};

// Seeded disjoint user split over the scored users.
inline SpSplit make_sp_split(const std::vector<std::size_t>& users, double train_frac,
                             std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0))
    throw ConfigError("make_sp_split: train_frac must be in (0, 1)");
  std::vector<std::size_t> shuffled = users;
  SplitMix64 rng(seed);
  rng.shuffle(shuffled);
  const std::size_t n_train =
      static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(shuffled.size())));
  SpSplit split;
  split.train_users.assign(shuffled.begin(), shuffled.begin() + std::min(n_train, shuffled.size()));
  split.test_users.assign(shuffled.begin() + std::min(n_train, shuffled.size()), shuffled.end());
  std::sort(split.train_users.begin(), split.train_users.end());
  std::sort(split.test_users.begin(), split.test_users.end());
  return split;
}

struct SpEvalResult {
  double test_mae{0.0};
  SpModel model;
  std::size_t train_count{0};
  std::size_t test_count{0};
  std::vector<std::size_t> users;  // test users, aligned with predictions
  std::vector<double> predicted;
  std::vector<double> actual;
};

// Fits the SP pipeline on the train users' representations and scores, and
// reports MAE on the held-out test users.
inline SpEvalResult sp_evaluate(const std::vector<std::vector<double>>& reps_by_user,
                                const std::map<std::size_t, double>& scores,
                                const SpSplit& split) {
  if (split.test_users.empty()) throw ConfigError("sp_evaluate: empty test user set");
  if (split.train_users.empty()) throw ConfigError("sp_evaluate: empty train user set");
  const auto rep_of = [&](std::size_t user) -> const std::vector<double>& {
    if (user >= reps_by_user.size())
      throw ConfigError("sp_evaluate: no representation for user " + std::to_string(user));
    return reps_by_user[user];
  };
  const auto score_of = [&](std::size_t user) {
    const auto it = scores.find(user);
    if (it == scores.end())
      throw ConfigError("sp_evaluate: no score for user " + std::to_string(user));
    return it->second;
  };

  std::vector<std::vector<double>> x_train;
  std::vector<double> y_train;
  for (std::size_t u : split.train_users) {
    x_train.push_back(rep_of(u));
    y_train.push_back(score_of(u));
  }
  SpEvalResult out;
  out.model = fit_sp_model(x_train, y_train);
  out.train_count = split.train_users.size();
  out.test_count = split.test_users.size();
  for (std::size_t u : split.test_users) {
    out.users.push_back(u);
    out.predicted.push_back(predict_score(rep_of(u), out.model));
    out.actual.push_back(score_of(u));
  }
  out.test_mae = mae(out.predicted, out.actual);
  return out;
}

}  // namespace dpmtl
