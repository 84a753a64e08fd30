#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "dpmtl/autodiff.hpp"
#include "dpmtl/data.hpp"
#include "dpmtl/errors.hpp"
#include "dpmtl/linalg.hpp"
#include "dpmtl/rng.hpp"
#include "dpmtl/tensor.hpp"

namespace dpmtl {

// All trainable tensors of one model, in a fixed order the optimizer indexes.
// Tensors are added once at model construction; their addresses stay stable
// afterwards so tape leaves can key on them.
class ParameterStore {
 public:
  Tensor& add(std::string name, Tensor init) {
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(init));
    return tensors_.back();
  }

  std::size_t count() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& tensor(std::size_t i) { return tensors_[i]; }
  const Tensor& tensor(std::size_t i) const { return tensors_[i]; }

  Tensor* find(const std::string& name) {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return &tensors_[i];
    return nullptr;
  }

  const Tensor* find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return &tensors_[i];
    return nullptr;
  }

  std::size_t total_size() const {
    std::size_t s = 0;
    for (const Tensor& t : tensors_) s += t.size();
    return s;
  }

  std::vector<Tensor*> pointers() {
    std::vector<Tensor*> out;
    out.reserve(tensors_.size());
    for (Tensor& t : tensors_) out.push_back(&t);
    return out;
  }

  std::vector<std::vector<double>> snapshot() const {
    std::vector<std::vector<double>> out;
    out.reserve(tensors_.size());
    for (const Tensor& t : tensors_) out.push_back(t.values());
    return out;
  }

  void restore(const std::vector<std::vector<double>>& snap) {
    if (snap.size() != tensors_.size()) throw ShapeError("ParameterStore::restore: size mismatch");
    for (std::size_t i = 0; i < snap.size(); ++i) {
      if (snap[i].size() != tensors_[i].size())
        throw ShapeError("ParameterStore::restore: tensor " + names_[i] + " size mismatch");
      tensors_[i].values() = snap[i];
    }
  }

 private:
  std::vector<std::string> names_;
  std::deque<Tensor> tensors_;  // deque: references stay valid as entries are added
};

// Softmax over an item's logits plus the derived correctness probability.
inline OptionPrediction option_probabilities(const std::vector<double>& logits,
                                             std::size_t correct) {
  if (logits.empty()) throw ShapeError("option_probabilities: empty logits");
  if (correct >= logits.size()) throw ShapeError("option_probabilities: correct index out of range");
  for (double v : logits)
    if (!std::isfinite(v)) throw NumericError("option_probabilities: non-finite logit");
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  OptionPrediction p;
  p.probs.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p.probs[k] = std::exp(logits[k] - m);
    s += p.probs[k];
  }
  for (double& v : p.probs) v /= s;
  p.correct_index = correct;
  return p;
}

enum class ModelFamily { dp_irt, dp_nmf, dp_bidkt };

inline const char* family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::dp_irt: return "dp-irt";
    case ModelFamily::dp_nmf: return "dp-nmf";
    case ModelFamily::dp_bidkt: return "dp-bidkt";
  }
  return "?";
}

inline ModelFamily parse_family(const std::string& s) {
  if (s == "dp-irt" || s == "irt") return ModelFamily::dp_irt;
  if (s == "dp-nmf" || s == "nmf") return ModelFamily::dp_nmf;
  if (s == "dp-bidkt" || s == "bidkt") return ModelFamily::dp_bidkt;
  throw ConfigError("unknown model family '" + s + "'");
}

struct ModelHyper {
  std::size_t dim{8};
  std::size_t layers{1};   // scorer/head depth for dp-nmf and dp-bidkt
  bool irt_bias{true};     // per-option bias for dp-irt

  void validate(ModelFamily f) const {
    if (dim == 0) throw ConfigError("embedding dimension must be positive");
    if (f != ModelFamily::dp_irt && (layers < 1 || layers > 4))
      throw ConfigError("layer count must be in {1,2,3,4}");
  }
};

// Shared contract of the three families: one logit per option of the queried
// item, computed on a tape so the DP loss can differentiate through it. The
// forward never reads the query's own chosen option.
class Model {
 public:
  virtual ~Model() = default;
  virtual ModelFamily family() const = 0;
  virtual const ModelHyper& hyper() const = 0;
  virtual ad::Var forward(ad::Tape& t, const Interaction& query) = 0;
  virtual ParameterStore& params() = 0;
  virtual const ParameterStore& params() const = 0;
  // Student representation consumed by downstream score prediction.
  virtual std::vector<double> user_representation(std::size_t user) const = 0;
  // Reorders the per-option parameters of one item, perm[new] = old. Used by
  // the equivariance checks.
  virtual void permute_item_options(std::size_t item, const std::vector<std::size_t>& perm) = 0;
  // Sequence models read their history from here; a no-op for the others.
  virtual void set_context(const Dataset&) {}

  std::vector<double> predict_logits(const Interaction& query) {
    ad::Tape t;
    return forward(t, query).value().values();
  }

  OptionPrediction predict(const Interaction& query) {
    return option_probabilities(predict_logits(query), query.correct);
  }
};

namespace detail {

inline Tensor uniform_tensor(std::size_t rows, std::size_t cols, double bound, SplitMix64& rng) {
  Tensor t = Tensor::zeros_matrix(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.next_uniform(-bound, bound);
  return t;
}

inline Tensor uniform_vector(std::size_t n, double bound, SplitMix64& rng) {
  Tensor t = Tensor::zeros_vector(n);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.next_uniform(-bound, bound);
  return t;
}

// Swaps whole rows of a (rows x width) block starting at `base` so that
// new row k holds old row perm[k].
inline void permute_block_rows(Tensor& t, std::size_t base, std::size_t width,
                               const std::vector<std::size_t>& perm) {
  std::vector<double> copy(perm.size() * width);
  for (std::size_t k = 0; k < perm.size(); ++k)
    for (std::size_t c = 0; c < width; ++c)
      copy[k * width + c] = t[(base + perm[k]) * width + c];
  for (std::size_t i = 0; i < copy.size(); ++i) t[base * width + i] = copy[i];
}

// Multi-layer perceptron with shared weights, hidden widths equal to `hidden`,
// rectified units between layers and a linear scalar output.
struct Mlp {
  std::vector<Tensor*> weights;
  std::vector<Tensor*> biases;

  static Mlp build(ParameterStore& store, const std::string& prefix, std::size_t input,
                   std::size_t hidden, std::size_t layers, SplitMix64& rng) {
    Mlp m;
    std::size_t in = input;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t out = (l + 1 == layers) ? 1 : hidden;
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      m.weights.push_back(&store.add(prefix + "_w" + std::to_string(l),
                                     uniform_tensor(out, in, bound, rng)));
      m.biases.push_back(&store.add(prefix + "_b" + std::to_string(l), Tensor::zeros_vector(out)));
      in = out;
    }
    return m;
  }

  ad::Var apply(ad::Tape& t, ad::Var x) const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      x = t.add(t.matmul(t.leaf(*weights[l]), x), t.leaf(*biases[l]));
      if (l + 1 < weights.size()) x = t.relu(x);
    }
    return x;  // length-1 vector
  }
};

}  // namespace detail

// Collaborative-filtering style model: logit_k = theta_u . a_{i,k} + b_{i,k}.
// Per-option vectors are stored as one (sum j_i) x d matrix indexed through
// item offsets. The per-option bias keeps d=1 models non-degenerate and can be
// disabled.
class DpIrtModel final : public Model {
 public:
  DpIrtModel(const Dataset& shape, ModelHyper hyper, std::uint64_t seed) : hyper_(hyper) {
    hyper_.validate(ModelFamily::dp_irt);
    offsets_ = shape.option_offsets();
    const std::size_t d = hyper_.dim;
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    SplitMix64 rng(seed);
    theta_ = &params_.add("theta", detail::uniform_tensor(shape.num_users, d, bound, rng));
    option_vectors_ =
        &params_.add("option_vectors", detail::uniform_tensor(offsets_.back(), d, bound, rng));
    if (hyper_.irt_bias) option_bias_ = &params_.add("option_bias", Tensor::zeros_vector(offsets_.back()));
  }

  ModelFamily family() const override { return ModelFamily::dp_irt; }
  const ModelHyper& hyper() const override { return hyper_; }
  ParameterStore& params() override { return params_; }
  const ParameterStore& params() const override { return params_; }

  ad::Var forward(ad::Tape& t, const Interaction& q) override {
    const std::size_t j = offsets_[q.item + 1] - offsets_[q.item];
    std::vector<std::uint32_t> rows(j);
    for (std::size_t k = 0; k < j; ++k) rows[k] = static_cast<std::uint32_t>(offsets_[q.item] + k);
    const ad::Var theta_row = t.flatten(t.gather_row(t.leaf(*theta_), q.user));
    const ad::Var item_vectors = t.gather_rows(t.leaf(*option_vectors_), rows);
    ad::Var logits = t.matmul(item_vectors, theta_row);
    if (option_bias_) logits = t.add(logits, t.gather_rows(t.leaf(*option_bias_), std::move(rows)));
    return logits;
  }

  std::vector<double> user_representation(std::size_t user) const override {
    const std::size_t d = hyper_.dim;
    std::vector<double> out(d);
    for (std::size_t c = 0; c < d; ++c) out[c] = theta_->at(user, c);
    return out;
  }

  void permute_item_options(std::size_t item, const std::vector<std::size_t>& perm) override {
    detail::permute_block_rows(*option_vectors_, offsets_[item], hyper_.dim, perm);
    if (option_bias_) detail::permute_block_rows(*option_bias_, offsets_[item], 1, perm);
  }

 private:
  ModelHyper hyper_;
  std::vector<std::size_t> offsets_;
  ParameterStore params_;
  Tensor* theta_{nullptr};
  Tensor* option_vectors_{nullptr};
  Tensor* option_bias_{nullptr};
};

// Neural matrix factorization variant: a shared multilayer scorer maps
// concat(user embedding, option embedding) to one logit per option. Sharing
// the scorer across options is what makes the output equivariant under option
// permutation instead of position-bound.
class DpNmfModel final : public Model {
 public:
  DpNmfModel(const Dataset& shape, ModelHyper hyper, std::uint64_t seed) : hyper_(hyper) {
    hyper_.validate(ModelFamily::dp_nmf);
    offsets_ = shape.option_offsets();
    const std::size_t d = hyper_.dim;
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    SplitMix64 rng(seed);
    user_emb_ = &params_.add("user_emb", detail::uniform_tensor(shape.num_users, d, bound, rng));
    option_emb_ =
        &params_.add("option_emb", detail::uniform_tensor(offsets_.back(), d, bound, rng));
    scorer_ = detail::Mlp::build(params_, "scorer", 2 * d, d, hyper_.layers, rng);
  }

  ModelFamily family() const override { return ModelFamily::dp_nmf; }
  const ModelHyper& hyper() const override { return hyper_; }
  ParameterStore& params() override { return params_; }
  const ParameterStore& params() const override { return params_; }

  ad::Var forward(ad::Tape& t, const Interaction& q) override {
    const std::size_t j = offsets_[q.item + 1] - offsets_[q.item];
    const ad::Var user_row = t.flatten(t.gather_row(t.leaf(*user_emb_), q.user));
    const ad::Var options = t.leaf(*option_emb_);
    std::vector<ad::Var> per_option;
    per_option.reserve(j);
    for (std::size_t k = 0; k < j; ++k) {
      const ad::Var opt_row = t.flatten(t.gather_row(options, offsets_[q.item] + k));
      per_option.push_back(scorer_.apply(t, t.concat({user_row, opt_row})));
    }
    return t.concat(per_option);
  }

  std::vector<double> user_representation(std::size_t user) const override {
    const std::size_t d = hyper_.dim;
    std::vector<double> out(d);
    for (std::size_t c = 0; c < d; ++c) out[c] = user_emb_->at(user, c);
    return out;
  }

  void permute_item_options(std::size_t item, const std::vector<std::size_t>& perm) override {
    detail::permute_block_rows(*option_emb_, offsets_[item], hyper_.dim, perm);
  }

 private:
  ModelHyper hyper_;
  std::vector<std::size_t> offsets_;
  ParameterStore params_;
  Tensor* user_emb_{nullptr};
  Tensor* option_emb_{nullptr};
  detail::Mlp scorer_;
};

// Bidirectional LSTM over a user's interaction history. Each history event is
// embedded by its (item, chosen option) pair; the candidate options of the
// target item reuse the same embedding table. The score for position t sees
// the forward state through t-1 and the backward state from t+1 only, so the
// target's own interaction can never leak into its prediction.
class DpBidktModel final : public Model {
  struct GateWeights {
    Tensor* w;  // input
    Tensor* u;  // recurrent
    Tensor* b;
  };
  struct Direction {
    GateWeights in, forget, cell, out;
    Tensor* h0;
    Tensor* c0;
  };
  struct SeqEvent {
    std::size_t key;
    std::size_t item;
    std::size_t chosen;
  };

 public:
  DpBidktModel(const Dataset& shape, ModelHyper hyper, std::uint64_t seed) : hyper_(hyper) {
    hyper_.validate(ModelFamily::dp_bidkt);
    offsets_ = shape.option_offsets();
    num_users_ = shape.num_users;
    const std::size_t d = hyper_.dim;
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    SplitMix64 rng(seed);
    emb_ = &params_.add("interaction_emb", detail::uniform_tensor(offsets_.back(), d, bound, rng));
    fwd_ = make_direction("fwd", d, bound, rng);
    bwd_ = make_direction("bwd", d, bound, rng);
    head_ = detail::Mlp::build(params_, "head", 3 * d, d, hyper_.layers, rng);
    sequences_.resize(num_users_);
  }

  ModelFamily family() const override { return ModelFamily::dp_bidkt; }
  const ModelHyper& hyper() const override { return hyper_; }
  ParameterStore& params() override { return params_; }
  const ParameterStore& params() const override { return params_; }

  // Builds per-user histories ordered by position (item index when positions
  // are absent). Typically called with the training part so held-out targets
  // are predicted from training context only.
  void set_context(const Dataset& context) override {
    sequences_.assign(num_users_, {});
    for (const Interaction& x : context.interactions)
      sequences_[x.user].push_back({order_key(x), x.item, x.chosen});
    for (auto& seq : sequences_)
      std::sort(seq.begin(), seq.end(), [](const SeqEvent& a, const SeqEvent& b) {
        return a.key != b.key ? a.key < b.key : a.item < b.item;
      });
  }

  ad::Var forward(ad::Tape& t, const Interaction& q) override {
    const std::size_t j = offsets_[q.item + 1] - offsets_[q.item];
    const std::size_t target_key = q.position.value_or(q.item);
    const auto& seq = sequences_[q.user];

    const ad::Var emb = t.leaf(*emb_);
    ad::Var hf = t.leaf(*fwd_.h0);
    ad::Var cf = t.leaf(*fwd_.c0);
    for (const SeqEvent& e : seq) {
      if (!before_target(e, q, target_key)) break;
      const ad::Var x = t.flatten(t.gather_row(emb, offsets_[e.item] + e.chosen));
      step(t, fwd_, x, hf, cf);
    }
    ad::Var hb = t.leaf(*bwd_.h0);
    ad::Var cb = t.leaf(*bwd_.c0);
    for (std::size_t i = seq.size(); i-- > 0;) {
      const SeqEvent& e = seq[i];
      if (!after_target(e, q, target_key)) break;
      const ad::Var x = t.flatten(t.gather_row(emb, offsets_[e.item] + e.chosen));
      step(t, bwd_, x, hb, cb);
    }

    std::vector<ad::Var> per_option;
    per_option.reserve(j);
    for (std::size_t k = 0; k < j; ++k) {
      const ad::Var opt = t.flatten(t.gather_row(emb, offsets_[q.item] + k));
      per_option.push_back(head_.apply(t, t.concat({hf, hb, opt})));
    }
    return t.concat(per_option);
  }

  // Mean of the per-position context states concat(h_fwd, h_bwd) over the
  // user's history; the model has no static user vector.
  std::vector<double> user_representation(std::size_t user) const override {
    const std::size_t d = hyper_.dim;
    const auto& seq = sequences_[user];
    const std::size_t n = seq.size();
    // prefix[t]: forward state after consuming events 0..t-1
    std::vector<std::vector<double>> prefix(n + 1), suffix(n + 1);
    std::vector<double> h = fwd_.h0->values(), c = fwd_.c0->values();
    prefix[0] = h;
    for (std::size_t i = 0; i < n; ++i) {
      value_step(fwd_, embedding_of(seq[i]), h, c);
      prefix[i + 1] = h;
    }
    h = bwd_.h0->values();
    c = bwd_.c0->values();
    suffix[n] = h;
    for (std::size_t i = n; i-- > 0;) {
      value_step(bwd_, embedding_of(seq[i]), h, c);
      suffix[i] = h;
    }
    std::vector<double> rep(2 * d, 0.0);
    if (n == 0) {
      std::copy(prefix[0].begin(), prefix[0].end(), rep.begin());
      std::copy(suffix[0].begin(), suffix[0].end(), rep.begin() + d);
      return rep;
    }
    for (std::size_t tpos = 0; tpos < n; ++tpos) {
      for (std::size_t cidx = 0; cidx < d; ++cidx) {
        rep[cidx] += prefix[tpos][cidx];
        rep[d + cidx] += suffix[tpos + 1][cidx];
      }
    }
    for (double& v : rep) v /= static_cast<double>(n);
    return rep;
  }

  void permute_item_options(std::size_t item, const std::vector<std::size_t>& perm) override {
    detail::permute_block_rows(*emb_, offsets_[item], hyper_.dim, perm);
    // relabel chosen indices in cached histories to match the new order
    std::vector<std::size_t> inverse(perm.size());
    for (std::size_t k = 0; k < perm.size(); ++k) inverse[perm[k]] = k;
    for (auto& seq : sequences_)
      for (SeqEvent& e : seq)
        if (e.item == item) e.chosen = inverse[e.chosen];
  }

  // Direction states around a target, for tests: (forward h through t-1,
  // backward h from t+1).
  std::pair<std::vector<double>, std::vector<double>> context_states(const Interaction& q) const {
    const std::size_t target_key = q.position.value_or(q.item);
    const auto& seq = sequences_[q.user];
    std::vector<double> h = fwd_.h0->values(), c = fwd_.c0->values();
    for (const SeqEvent& e : seq) {
      if (!before_target(e, q, target_key)) break;
      value_step(fwd_, embedding_of(e), h, c);
    }
    std::vector<double> hb = bwd_.h0->values(), cb = bwd_.c0->values();
    for (std::size_t i = seq.size(); i-- > 0;) {
      const SeqEvent& e = seq[i];
      if (!after_target(e, q, target_key)) break;
      value_step(bwd_, embedding_of(e), hb, cb);
    }
    return {h, hb};
  }

 private:
  static std::size_t order_key(const Interaction& x) { return x.position.value_or(x.item); }

  static bool event_before(std::size_t key, std::size_t item, std::size_t target_key,
                           std::size_t target_item) {
    return key != target_key ? key < target_key : item < target_item;
  }

  bool before_target(const SeqEvent& e, const Interaction& q, std::size_t target_key) const {
    if (e.item == q.item) return false;  // the target itself is excluded
    return event_before(e.key, e.item, target_key, q.item);
  }

  bool after_target(const SeqEvent& e, const Interaction& q, std::size_t target_key) const {
    if (e.item == q.item) return false;
    return !event_before(e.key, e.item, target_key, q.item);
  }

  Direction make_direction(const std::string& prefix, std::size_t d, double bound,
                           SplitMix64& rng) {
    Direction dir;
    const auto gate = [&](const char* g) {
      GateWeights w;
      w.w = &params_.add(prefix + "_w" + g, detail::uniform_tensor(d, d, bound, rng));
      w.u = &params_.add(prefix + "_u" + g,
                         Tensor::from_matrix(d, d, random_orthogonal(d, rng)));
      w.b = &params_.add(prefix + "_b" + g, Tensor::zeros_vector(d));
      return w;
    };
    dir.in = gate("i");
    dir.forget = gate("f");
    dir.cell = gate("g");
    dir.out = gate("o");
    dir.h0 = &params_.add(prefix + "_h0", Tensor::zeros_vector(d));
    dir.c0 = &params_.add(prefix + "_c0", Tensor::zeros_vector(d));
    return dir;
  }

  void step(ad::Tape& t, const Direction& dir, ad::Var x, ad::Var& h, ad::Var& c) const {
    const auto pre = [&](const GateWeights& g) {
      return t.add(t.add(t.matmul(t.leaf(*g.w), x), t.matmul(t.leaf(*g.u), h)), t.leaf(*g.b));
    };
    const ad::Var gi = t.sigmoid(pre(dir.in));
    const ad::Var gf = t.sigmoid(pre(dir.forget));
    const ad::Var gg = t.tanh(pre(dir.cell));
    const ad::Var go = t.sigmoid(pre(dir.out));
    c = t.add(t.mul(gf, c), t.mul(gi, gg));
    h = t.mul(go, t.tanh(c));
  }

  std::vector<double> embedding_of(const SeqEvent& e) const {
    const std::size_t d = hyper_.dim;
    const std::size_t row = offsets_[e.item] + e.chosen;
    std::vector<double> x(d);
    for (std::size_t cidx = 0; cidx < d; ++cidx) x[cidx] = emb_->at(row, cidx);
    return x;
  }

  // Value-only cell used for representations and tests; mirrors step().
  void value_step(const Direction& dir, const std::vector<double>& x, std::vector<double>& h,
                  std::vector<double>& c) const {
    const std::size_t d = hyper_.dim;
    const auto pre = [&](const GateWeights& g, std::size_t r) {
      double s = (*g.b)[r];
      for (std::size_t k = 0; k < d; ++k) s += g.w->at(r, k) * x[k] + g.u->at(r, k) * h[k];
      return s;
    };
    std::vector<double> hn(d), cn(d);
    for (std::size_t r = 0; r < d; ++r) {
      const double gi = 1.0 / (1.0 + std::exp(-pre(dir.in, r)));
      const double gf = 1.0 / (1.0 + std::exp(-pre(dir.forget, r)));
      const double gg = std::tanh(pre(dir.cell, r));
      const double go = 1.0 / (1.0 + std::exp(-pre(dir.out, r)));
      cn[r] = gf * c[r] + gi * gg;
      hn[r] = go * std::tanh(cn[r]);
    }
    h = std::move(hn);
    c = std::move(cn);
  }

  ModelHyper hyper_;
  std::vector<std::size_t> offsets_;
  std::size_t num_users_{0};
  ParameterStore params_;
  Tensor* emb_{nullptr};
  Direction fwd_{}, bwd_{};
  detail::Mlp head_;
  std::vector<std::vector<SeqEvent>> sequences_;
};

inline std::unique_ptr<Model> make_model(ModelFamily family, const Dataset& shape,
                                         ModelHyper hyper, std::uint64_t seed) {
  switch (family) {
    case ModelFamily::dp_irt: return std::make_unique<DpIrtModel>(shape, hyper, seed);
    case ModelFamily::dp_nmf: return std::make_unique<DpNmfModel>(shape, hyper, seed);
    case ModelFamily::dp_bidkt: return std::make_unique<DpBidktModel>(shape, hyper, seed);
  }
  throw ConfigError("make_model: bad family");
}

}  // namespace dpmtl
