#pragma once

// Neural building blocks over the tensor engine: a named parameter registry,
// linear projections, a Transformer encoder with pad masking, attentive
// weighted averaging (AWA) pooling, and a BIO-constrained linear-chain CRF.
// Everything is templated on the scalar type so gradient checks can run at
// 64-bit while training runs at 32-bit.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "edag/errors.hpp"
#include "edag/rng.hpp"
#include "edag/schema.hpp"
#include "edag/tensor.hpp"

namespace edag {

// Owns every trainable tensor under a hierarchical dotted name (for example
// "transformer1.layer0.attn.wq"). Layers hold handles that share the same
// buffers, so checkpoint loads through the registry are visible everywhere.
template <typename T>
class ParamRegistry {
 public:
  Tensor<T>& create(const std::string& name, int64_t rows, int64_t cols) {
    if (params_.count(name))
      throw Error("parameter '" + name + "' registered twice");
    auto [it, ok] = params_.emplace(name, Tensor<T>::zeros(rows, cols, true));
    return it->second;
  }

  Tensor<T>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
    return it->second;
  }

  std::map<std::string, Tensor<T>>& params() { return params_; }
  const std::map<std::string, Tensor<T>>& params() const { return params_; }

  int64_t total_size() const {
    int64_t n = 0;
    for (const auto& [name, t] : params_) n += t.size();
    return n;
  }

  void zero_grads() {
    for (auto& [name, t] : params_) t.zero_grad();
  }

 private:
  std::map<std::string, Tensor<T>> params_;
};

namespace init {

// Projections: uniform(-r, r), r = sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T>& xavier(Tensor<T>& t, Rng& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
  for (T& v : *t.data) v = static_cast<T>(rng.uniform(-r, r));
  return t;
}

// Embedding tables: normal(0, 0.02).
template <typename T>
Tensor<T>& embedding(Tensor<T>& t, Rng& rng) {
  for (T& v : *t.data) v = static_cast<T>(rng.normal(0.0, 0.02));
  return t;
}

template <typename T>
Tensor<T>& ones(Tensor<T>& t) {
  for (T& v : *t.data) v = T(1);
  return t;
}

}  // namespace init

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParamRegistry<T>& reg, const std::string& prefix, Rng& rng,
         int64_t in_dim, int64_t out_dim, bool with_bias = true)
      : w(init::xavier(reg.create(prefix + ".w", in_dim, out_dim), rng)) {
    if (with_bias) b = reg.create(prefix + ".b", 1, out_dim);
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> y = matmul(x, w);
    return b.data ? add(y, tile_rows(b, x.rows)) : y;
  }

  Tensor<T> w, b;
};

// Layer-norm parameter pair (gain initialized to 1, bias to 0).
template <typename T>
struct NormParams {
  NormParams() = default;
  NormParams(ParamRegistry<T>& reg, const std::string& prefix, int64_t dim)
      : gain(init::ones(reg.create(prefix + ".gain", 1, dim))),
        bias(reg.create(prefix + ".bias", 1, dim)) {}

  Tensor<T> apply(const Tensor<T>& x) const { return layer_norm(x, gain, bias); }

  Tensor<T> gain, bias;
};

// Post-norm Transformer encoder. Padded positions (keep[i] == 0) are never
// attended to, and their output rows are zeroed, so real-position outputs are
// independent of pad content. No positional information is added here — the
// caller decides which positional scheme each encoder instance gets.
template <typename T>
class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(ParamRegistry<T>& reg, const std::string& prefix, Rng& rng,
                     int num_layers, int64_t d_model, int64_t ff_dim,
                     int num_heads, double dropout_p)
      : num_heads_(num_heads), d_model_(d_model), dropout_p_(dropout_p) {
    if (num_layers < 1) throw ConfigError("transformer: need at least 1 layer");
    if (num_heads < 1 || d_model % num_heads != 0)
      throw ConfigError("transformer: d_model " + std::to_string(d_model) +
                        " not divisible by " + std::to_string(num_heads) + " heads");
    for (int l = 0; l < num_layers; ++l) {
      const std::string lp = prefix + ".layer" + std::to_string(l);
      Layer layer;
      layer.wq = Linear<T>(reg, lp + ".attn.wq", rng, d_model, d_model);
      // No key bias: a constant added to every key shifts each attention row
      // uniformly, which softmax cancels — the parameter would be untrainable.
      layer.wk = Linear<T>(reg, lp + ".attn.wk", rng, d_model, d_model, false);
      layer.wv = Linear<T>(reg, lp + ".attn.wv", rng, d_model, d_model);
      layer.wo = Linear<T>(reg, lp + ".attn.wo", rng, d_model, d_model);
      layer.ff1 = Linear<T>(reg, lp + ".ff.w1", rng, d_model, ff_dim);
      layer.ff2 = Linear<T>(reg, lp + ".ff.w2", rng, ff_dim, d_model);
      layer.ln1 = NormParams<T>(reg, lp + ".ln1", d_model);
      layer.ln2 = NormParams<T>(reg, lp + ".ln2", d_model);
      layers_.push_back(std::move(layer));
    }
  }

  Tensor<T> encode(const Tensor<T>& x, const std::vector<uint8_t>& keep,
                   bool train, Rng& rng) const {
    if (x.cols != d_model_)
      throw ShapeError("transformer_encode: input " + shape_str(x.rows, x.cols) +
                       " does not match d_model " + std::to_string(d_model_));
    if (static_cast<int64_t>(keep.size()) != x.rows)
      throw ShapeError("transformer_encode: " + std::to_string(keep.size()) +
                       " pad flags for " + std::to_string(x.rows) + " positions");
    int64_t live = 0;
    for (uint8_t k : keep) live += k ? 1 : 0;
    if (live == 0) throw ShapeError("transformer_encode: every position is masked");

    const int64_t len = x.rows;
    const int64_t d_head = d_model_ / num_heads_;
    std::vector<T> mask_vals(static_cast<size_t>(len));
    for (int64_t i = 0; i < len; ++i)
      mask_vals[static_cast<size_t>(i)] = keep[static_cast<size_t>(i)] ? T(1) : T(0);
    Tensor<T> key_mask = Tensor<T>::from(1, len, std::move(mask_vals));

    Tensor<T> h = x;
    for (const Layer& layer : layers_) {
      Tensor<T> q = layer.wq.forward(h);
      Tensor<T> k = layer.wk.forward(h);
      Tensor<T> v = layer.wv.forward(h);
      std::vector<Tensor<T>> heads;
      for (int hh = 0; hh < num_heads_; ++hh) {
        const int64_t begin = hh * d_head, end = (hh + 1) * d_head;
        Tensor<T> qh = slice(q, 1, begin, end);
        Tensor<T> kh = slice(k, 1, begin, end);
        Tensor<T> vh = slice(v, 1, begin, end);
        Tensor<T> scores =
            scale(matmul(qh, transpose(kh)), T(1.0 / std::sqrt(double(d_head))));
        Tensor<T> attn = softmax(scores, 1, &key_mask);
        heads.push_back(matmul(attn, vh));
      }
      Tensor<T> ctx = layer.wo.forward(concat(heads, 1));
      ctx = dropout(ctx, dropout_p_, train, rng);
      h = layer.ln1.apply(add(h, ctx));
      Tensor<T> ff = layer.ff2.forward(relu(layer.ff1.forward(h)));
      ff = dropout(ff, dropout_p_, train, rng);
      h = layer.ln2.apply(add(h, ff));
    }
    return mask_rows(h, keep);
  }

 private:
  struct Layer {
    Linear<T> wq, wk, wv, wo, ff1, ff2;
    NormParams<T> ln1, ln2;
  };
  std::vector<Layer> layers_;
  int num_heads_ = 1;
  int64_t d_model_ = 0;
  double dropout_p_ = 0.0;
};

// Attentive weighted averaging: u = x·Q / sqrt(d_w), alpha = softmax(u) over
// the unmasked rows, output = Dropout(LayerNorm(sum_i alpha_i x_i)).
template <typename T>
class AwaPool {
 public:
  AwaPool() = default;
  AwaPool(ParamRegistry<T>& reg, const std::string& prefix, Rng& rng, int64_t d_w,
          double dropout_p)
      : q_(init::xavier(reg.create(prefix + ".q", d_w, 1), rng)),
        norm_(reg, prefix + ".ln", d_w),
        d_(d_w),
        dropout_p_(dropout_p) {}

  // Attention weights over rows; masked rows get exactly 0.
  Tensor<T> weights(const Tensor<T>& x, const std::vector<uint8_t>& keep) const {
    if (x.cols != d_)
      throw ShapeError("awa_pool: input " + shape_str(x.rows, x.cols) +
                       " does not match d_w " + std::to_string(d_));
    if (static_cast<int64_t>(keep.size()) != x.rows)
      throw ShapeError("awa_pool: " + std::to_string(keep.size()) + " mask flags for " +
                       std::to_string(x.rows) + " rows");
    int64_t live = 0;
    for (uint8_t k : keep) live += k ? 1 : 0;
    if (live == 0) throw ShapeError("awa_pool: all rows masked");
    std::vector<T> mask_vals(static_cast<size_t>(x.rows));
    for (int64_t i = 0; i < x.rows; ++i)
      mask_vals[static_cast<size_t>(i)] = keep[static_cast<size_t>(i)] ? T(1) : T(0);
    Tensor<T> mask = Tensor<T>::from(x.rows, 1, std::move(mask_vals));
    Tensor<T> u = scale(matmul(x, q_), T(1.0 / std::sqrt(double(d_))));
    return softmax(u, 0, &mask);
  }

  Tensor<T> pool(const Tensor<T>& x, const std::vector<uint8_t>& keep, bool train,
                 Rng& rng) const {
    Tensor<T> alpha = weights(x, keep);
    Tensor<T> pooled = matmul(transpose(alpha), x);
    return dropout(norm_.apply(pooled), dropout_p_, train, rng);
  }

  Tensor<T> pool_all(const Tensor<T>& x, bool train, Rng& rng) const {
    return pool(x, std::vector<uint8_t>(static_cast<size_t>(x.rows), 1), train, rng);
  }

 private:
  Tensor<T> q_;
  NormParams<T> norm_;
  int64_t d_ = 0;
  double dropout_p_ = 0.0;
};

// Which (prev -> next) tag moves and start tags the BIO scheme allows:
// an I tag may only follow the B or I tag of the same role, and no sequence
// may start with an I tag. Everything else is legal.
struct BioMasks {
  int num_tags = 0;
  std::vector<uint8_t> allowed;        // num_tags x num_tags, row = prev
  std::vector<uint8_t> allowed_start;  // num_tags

  bool transition_ok(int prev, int next) const {
    return allowed[static_cast<size_t>(prev * num_tags + next)] != 0;
  }
  bool start_ok(int tag) const {
    return allowed_start[static_cast<size_t>(tag)] != 0;
  }
  bool sequence_ok(const std::vector<int>& tags) const {
    if (tags.empty()) return false;
    if (!start_ok(tags[0])) return false;
    for (size_t t = 1; t < tags.size(); ++t)
      if (!transition_ok(tags[t - 1], tags[t])) return false;
    return true;
  }
};

inline BioMasks bio_masks(const SchemaRegistry& registry) {
  BioMasks m;
  m.num_tags = registry.num_tags();
  const int n = m.num_tags;
  m.allowed.assign(static_cast<size_t>(n * n), 1);
  m.allowed_start.assign(static_cast<size_t>(n), 1);
  for (int next = 1; next < n; ++next) {
    const TagInfo next_info = *tag_info(registry, next);
    if (next_info.begin) continue;  // B tags are reachable from anywhere
    m.allowed_start[static_cast<size_t>(next)] = 0;
    const int partner_b = next - 1;  // B-x sits immediately before I-x
    for (int prev = 0; prev < n; ++prev)
      if (prev != next && prev != partner_b)
        m.allowed[static_cast<size_t>(prev * n + next)] = 0;
  }
  return m;
}

// Linear-chain CRF with hard BIO constraints: forbidden transitions carry a
// -1e4 penalty during the forward-algorithm loss (probability underflows to
// exactly 0) and are skipped structurally during Viterbi decoding.
template <typename T>
class CrfLayer {
 public:
  static constexpr T kForbidden = T(-1e4);

  CrfLayer() = default;
  CrfLayer(ParamRegistry<T>& reg, const std::string& prefix, Rng& rng, int64_t d_w,
           const SchemaRegistry& schema)
      : emit_(reg, prefix + ".emit", rng, d_w, schema.num_tags()),
        trans_(reg.create(prefix + ".trans", schema.num_tags(), schema.num_tags())),
        start_(reg.create(prefix + ".start", 1, schema.num_tags())),
        stop_(reg.create(prefix + ".stop", 1, schema.num_tags())),
        masks_(bio_masks(schema)) {
    const int n = masks_.num_tags;
    std::vector<T> tp(static_cast<size_t>(n * n), T(0));
    for (int i = 0; i < n * n; ++i)
      if (!masks_.allowed[static_cast<size_t>(i)]) tp[static_cast<size_t>(i)] = kForbidden;
    trans_pen_ = Tensor<T>::from(n, n, std::move(tp));
    std::vector<T> sp(static_cast<size_t>(n), T(0));
    for (int i = 0; i < n; ++i)
      if (!masks_.allowed_start[static_cast<size_t>(i)]) sp[static_cast<size_t>(i)] = kForbidden;
    start_pen_ = Tensor<T>::from(1, n, std::move(sp));
  }

  int num_tags() const { return masks_.num_tags; }
  const BioMasks& masks() const { return masks_; }

  // -(score(gold) - logZ), logZ by the forward algorithm in log space.
  Tensor<T> nll(const Tensor<T>& h, const std::vector<int>& gold) const {
    const int64_t len = h.rows;
    const int n = masks_.num_tags;
    if (static_cast<int64_t>(gold.size()) != len)
      throw ShapeError("crf_nll: " + std::to_string(gold.size()) + " gold tags for " +
                       std::to_string(len) + " positions");
    for (int t : gold)
      if (t < 0 || t >= n)
        throw SchemaError("crf_nll: gold tag " + std::to_string(t) + " outside " +
                          std::to_string(n) + " tags");
    if (!masks_.sequence_ok(gold))
      throw SchemaError("crf_nll: gold sequence violates the BIO constraints");

    Tensor<T> emissions = emit_.forward(h);
    Tensor<T> trans_eff = add(trans_, trans_pen_);
    Tensor<T> start_eff = add(start_, start_pen_);

    std::vector<std::pair<int64_t, int64_t>> emit_at;
    for (int64_t t = 0; t < len; ++t) emit_at.push_back({t, gold[static_cast<size_t>(t)]});
    Tensor<T> gold_score = gather_sum(emissions, emit_at);
    gold_score = add(gold_score, gather_sum(start_eff, {{0, gold[0]}}));
    if (len > 1) {
      std::vector<std::pair<int64_t, int64_t>> moves;
      for (int64_t t = 1; t < len; ++t)
        moves.push_back({gold[static_cast<size_t>(t - 1)], gold[static_cast<size_t>(t)]});
      gold_score = add(gold_score, gather_sum(trans_eff, moves));
    }
    gold_score = add(gold_score, gather_sum(stop_, {{0, gold[static_cast<size_t>(len - 1)]}}));

    Tensor<T> alpha = add(slice(emissions, 0, 0, 1), start_eff);
    for (int64_t t = 1; t < len; ++t) {
      Tensor<T> moves = add(tile_cols(transpose(alpha), n), trans_eff);
      alpha = add(logsumexp(moves, 0), slice(emissions, 0, t, t + 1));
    }
    Tensor<T> log_z = logsumexp(add(alpha, stop_), 1);
    return add(log_z, scale(gold_score, T(-1)));
  }

  // Best tag sequence; ties break toward the lower tag index at each
  // backtrack step. Pure value computation — nothing is recorded.
  std::vector<int> viterbi(const Tensor<T>& h) const {
    const int64_t len = h.rows;
    const int n = masks_.num_tags;
    std::vector<double> emissions(static_cast<size_t>(len * n));
    for (int64_t t = 0; t < len; ++t)
      for (int j = 0; j < n; ++j) {
        double e = static_cast<double>(emit_.b.at(0, j));
        for (int64_t d = 0; d < h.cols; ++d)
          e += static_cast<double>(h.at(t, d)) * static_cast<double>(emit_.w.at(d, j));
        emissions[static_cast<size_t>(t * n + j)] = e;
      }
    const double kImpossible = -std::numeric_limits<double>::infinity();
    std::vector<double> score(static_cast<size_t>(n), kImpossible);
    std::vector<std::vector<int>> back(static_cast<size_t>(len),
                                       std::vector<int>(static_cast<size_t>(n), -1));
    for (int j = 0; j < n; ++j)
      if (masks_.start_ok(j))
        score[static_cast<size_t>(j)] =
            emissions[static_cast<size_t>(j)] + static_cast<double>(start_.at(0, j));
    for (int64_t t = 1; t < len; ++t) {
      std::vector<double> next(static_cast<size_t>(n), kImpossible);
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          if (!masks_.transition_ok(i, j)) continue;
          if (score[static_cast<size_t>(i)] == kImpossible) continue;
          const double cand =
              score[static_cast<size_t>(i)] + static_cast<double>(trans_.at(i, j));
          if (cand > next[static_cast<size_t>(j)]) {
            next[static_cast<size_t>(j)] = cand;
            back[static_cast<size_t>(t)][static_cast<size_t>(j)] = i;
          }
        }
        if (next[static_cast<size_t>(j)] != kImpossible)
          next[static_cast<size_t>(j)] += emissions[static_cast<size_t>(t * n + j)];
      }
      score = std::move(next);
    }
    int best = -1;
    double best_score = kImpossible;
    for (int j = 0; j < n; ++j) {
      if (score[static_cast<size_t>(j)] == kImpossible) continue;
      const double final_score =
          score[static_cast<size_t>(j)] + static_cast<double>(stop_.at(0, j));
      if (final_score > best_score) {
        best_score = final_score;
        best = j;
      }
    }
    std::vector<int> tags(static_cast<size_t>(len));
    for (int64_t t = len - 1; t >= 0; --t) {
      tags[static_cast<size_t>(t)] = best;
      if (t > 0) best = back[static_cast<size_t>(t)][static_cast<size_t>(best)];
    }
    return tags;
  }

  Linear<T> emit_;
  Tensor<T> trans_, start_, stop_;

 private:
  Tensor<T> trans_pen_, start_pen_;
  BioMasks masks_;
};

}  // namespace edag
