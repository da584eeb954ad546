#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "edag/baselines.hpp"
#include "edag/corpus.hpp"
#include "edag/edag.hpp"
#include "edag/errors.hpp"
#include "edag/labeling.hpp"
#include "edag/layers.hpp"
#include "edag/rng.hpp"
#include "edag/schema.hpp"
#include "edag/serialization.hpp"
#include "edag/tensor.hpp"

namespace edag {

// Everything the network needs to know about its own shape and training
// behaviour. Loss weights: total = lambda_er * L_er + lambda_tr * L_tr +
// lambda_dag * L_dag + lambda_ks * L_ks, where L_ks trains the per-sentence
// key-event heads consumed only by the baseline decoders.
struct ModelConfig {
  int64_t d_w = 768;
  int64_t vocab_size = 96;  // fixed printable-ASCII map, see token_id
  int max_sentences = 64;
  int max_sentence_len = 128;
  int num_layers = 4;
  int64_t ff_dim = 1024;
  int num_heads = 8;
  double dropout = 0.1;
  double lambda_er = 0.05;
  double lambda_tr = 0.95;
  double lambda_dag = 0.95;
  double lambda_ks = 0.95;
  double gamma = 3.0;  // extra weight on should-be-negative expansion rows
  int sched_start_epoch = 10;
  int sched_end_epoch = 20;
  double sched_start_prob = 1.0;
  double sched_end_prob = 0.1;
  double trigger_threshold = 0.5;
  double expand_threshold = 0.5;
  int frontier_cap = 64;
  bool use_path_memory = true;  // false = ablation: path arguments never
                                // enter the expansion memory

  bool operator==(const ModelConfig&) const = default;

  void validate() const {
    auto bad = [](const std::string& what) { throw ConfigError("model config: " + what); };
    if (d_w < 1) bad("d_w must be positive");
    if (vocab_size != 96) bad("vocab_size must be 96 (fixed character map)");
    if (max_sentences < 1) bad("max_sentences must be positive");
    if (max_sentence_len < 1) bad("max_sentence_len must be positive");
    if (num_layers < 1) bad("num_layers must be positive");
    if (ff_dim < 1) bad("ff_dim must be positive");
    if (num_heads < 1 || d_w % num_heads != 0)
      bad("d_w " + std::to_string(d_w) + " not divisible by num_heads " +
          std::to_string(num_heads));
    if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must be in [0, 1)");
    if (lambda_er < 0 || lambda_tr < 0 || lambda_dag < 0 || lambda_ks < 0)
      bad("loss weights must be non-negative");
    if (gamma <= 0) bad("gamma must be positive");
    if (sched_start_epoch > sched_end_epoch)
      bad("sched_start_epoch must not exceed sched_end_epoch");
    auto prob = [&](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) bad(std::string(name) + " must be in [0, 1]");
    };
    prob(sched_start_prob, "sched_start_prob");
    prob(sched_end_prob, "sched_end_prob");
    if (!(trigger_threshold > 0.0 && trigger_threshold < 1.0))
      bad("trigger_threshold must be in (0, 1)");
    if (!(expand_threshold > 0.0 && expand_threshold < 1.0))
      bad("expand_threshold must be in (0, 1)");
    if (frontier_cap < 1) bad("frontier_cap must be positive");
  }
};

// Probability of feeding gold mentions into the document encoder at a given
// training epoch: flat before the ramp, linear across it, flat after.
inline double scheduled_sampling_prob(const ModelConfig& cfg, int epoch) {
  if (epoch >= cfg.sched_end_epoch) return cfg.sched_end_prob;
  if (epoch <= cfg.sched_start_epoch) return cfg.sched_start_prob;
  const double t = double(epoch - cfg.sched_start_epoch) /
                   double(cfg.sched_end_epoch - cfg.sched_start_epoch);
  return cfg.sched_start_prob + t * (cfg.sched_end_prob - cfg.sched_start_prob);
}

// Printable ASCII 32..126 maps to 1..95; everything else (including every
// non-ASCII code point) is the unknown id 0.
inline int64_t token_id(char32_t c) {
  return (c >= 32 && c <= 126) ? static_cast<int64_t>(c) - 31 : 0;
}

// Document-level encodings shared by the trigger heads, key-sentence heads
// and the path expansion stage.
template <typename T>
struct EncodedDoc {
  std::vector<EntityMention> mentions;     // the mentions that were pooled
  std::vector<std::string> entity_names;   // distinct surfaces, first appearance
  Tensor<T> entity_emb;                    // [num entities x d_w]; unset if none
  Tensor<T> sentence_emb;                  // [num sentences x d_w]

  bool has_entities() const { return !entity_names.empty(); }
};

template <typename T>
struct RecognizeResult {
  std::vector<Tensor<T>> h;  // per-sentence token encodings [len x d_w]
  Tensor<T> er_loss;         // scalar; zero constant when no gold tags given
  std::vector<std::vector<int>> predicted_tags;  // only when requested
};

struct LossBreakdown {
  double er = 0, tr = 0, dag = 0, ks = 0, total = 0;
  int mention_mismatches = 0;   // gold arguments absent from the entity set
  bool used_gold_mentions = true;
};

// The full document-to-event-table network: character-level sentence
// encoding with a CRF mention recognizer, document-level encoding of
// mentions and sentences, per-type trigger heads, and the memory-based
// path expansion network that grows one entity DAG per triggered type.
template <typename T>
class Doc2EdagModel {
 public:
  Doc2EdagModel(ModelConfig cfg, SchemaRegistry registry, Rng& rng)
      : cfg_(std::move(cfg)), registry_(std::move(registry)) {
    cfg_.validate();
    if (registry_.specs.empty()) throw SchemaError("model: registry has no event types");
    const int64_t d = cfg_.d_w;
    token_table_ = init::embedding(reg_.create("embed.token", cfg_.vocab_size, d), rng);
    tok_pos_ = init::embedding(reg_.create("embed.tok_pos", cfg_.max_sentence_len, d), rng);
    sent_pos_ = init::embedding(reg_.create("embed.sent_pos", cfg_.max_sentences, d), rng);
    t1_ = TransformerEncoder<T>(reg_, "t1", rng, cfg_.num_layers, d, cfg_.ff_dim,
                                cfg_.num_heads, cfg_.dropout);
    t2_ = TransformerEncoder<T>(reg_, "t2", rng, cfg_.num_layers, d, cfg_.ff_dim,
                                cfg_.num_heads, cfg_.dropout);
    t3_ = TransformerEncoder<T>(reg_, "t3", rng, cfg_.num_layers, d, cfg_.ff_dim,
                                cfg_.num_heads, cfg_.dropout);
    awa_mention_ = AwaPool<T>(reg_, "awa.mention", rng, d, cfg_.dropout);
    awa_sentence_ = AwaPool<T>(reg_, "awa.sentence", rng, d, cfg_.dropout);
    awa_merge_ = AwaPool<T>(reg_, "awa.merge", rng, d, cfg_.dropout);
    awa_doc_ = AwaPool<T>(reg_, "awa.doc", rng, d, cfg_.dropout);
    crf_ = CrfLayer<T>(reg_, "crf", rng, d, registry_);
    expand_head_ = Linear<T>(reg_, "expand", rng, d, 2);
    int64_t total_roles = 0;
    for (const auto& spec : registry_.specs) {
      role_offsets_.push_back(total_roles);
      total_roles += static_cast<int64_t>(spec.roles.size());
      trigger_heads_.emplace_back(reg_, "trigger." + spec.code, rng, d, 2);
      key_heads_.emplace_back(reg_, "ks." + spec.code, rng, d, 2);
    }
    indicator_ = init::embedding(reg_.create("indicator", total_roles, d), rng);
    na_emb_ = init::embedding(reg_.create("na", 1, d), rng);
  }

  const ModelConfig& config() const { return cfg_; }
  const SchemaRegistry& registry() const { return registry_; }

  // Inference-time decode knobs. None of these affect parameter shapes, so
  // a restored checkpoint can be decoded at a different operating point
  // than it was trained with.
  void set_decode_options(double trigger_threshold, double expand_threshold,
                          int frontier_cap) {
    ModelConfig probe = cfg_;
    probe.trigger_threshold = trigger_threshold;
    probe.expand_threshold = expand_threshold;
    probe.frontier_cap = frontier_cap;
    probe.validate();
    cfg_ = probe;
  }
  ParamRegistry<T>& params() { return reg_; }
  const ParamRegistry<T>& params() const { return reg_; }

  // --- Sentence stage -------------------------------------------------

  // Token-level encodings per sentence, the recognition loss when gold tags
  // are given, and Viterbi tag predictions when asked for.
  RecognizeResult<T> encode_and_recognize(const Document& doc,
                                          const std::vector<std::vector<int>>* gold_tags,
                                          bool train, Rng& rng,
                                          bool want_predictions) const {
    const int n_sent = doc.num_sentences();
    if (n_sent == 0) throw ShapeError("model: document has no sentences");
    if (n_sent > cfg_.max_sentences)
      throw ShapeError("model: " + std::to_string(n_sent) + " sentences exceed the " +
                       std::to_string(cfg_.max_sentences) + "-sentence limit; truncate first");
    if (gold_tags && static_cast<int>(gold_tags->size()) != n_sent)
      throw ShapeError("model: " + std::to_string(gold_tags->size()) + " tag rows for " +
                       std::to_string(n_sent) + " sentences");

    RecognizeResult<T> out;
    out.er_loss = Tensor<T>::scalar(T(0));
    for (int s = 0; s < n_sent; ++s) {
      const auto& sent = doc.sentences[static_cast<size_t>(s)];
      const int64_t len = static_cast<int64_t>(sent.size());
      if (len == 0)
        throw ShapeError("model: sentence " + std::to_string(s) + " is empty");
      if (len > cfg_.max_sentence_len)
        throw ShapeError("model: sentence " + std::to_string(s) + " has " +
                         std::to_string(len) + " tokens, over the " +
                         std::to_string(cfg_.max_sentence_len) + "-token limit; truncate first");
      std::vector<int64_t> ids(sent.size());
      for (size_t i = 0; i < sent.size(); ++i) ids[i] = token_id(sent[i]);
      Tensor<T> x = add(embedding_lookup(token_table_, ids), slice(tok_pos_, 0, 0, len));
      Tensor<T> h = t1_.encode(x, std::vector<uint8_t>(sent.size(), 1), train, rng);
      if (gold_tags) {
        const auto& row = (*gold_tags)[static_cast<size_t>(s)];
        if (static_cast<int64_t>(row.size()) != len)
          throw ShapeError("model: tag row " + std::to_string(s) +
                           " does not cover its sentence");
        out.er_loss = add(out.er_loss, crf_.nll(h, row));
      }
      if (want_predictions) out.predicted_tags.push_back(crf_.viterbi(h));
      out.h.push_back(std::move(h));
    }
    return out;
  }

  // --- Document stage -------------------------------------------------

  // Pools mentions and sentences, runs the document transformer over the
  // combined stack, and merges same-surface mentions into entity rows.
  EncodedDoc<T> encode_document(const std::vector<Tensor<T>>& h,
                                const std::vector<EntityMention>& mentions,
                                bool train, Rng& rng) const {
    const int n_sent = static_cast<int>(h.size());
    if (n_sent == 0) throw ShapeError("model: no sentence encodings");

    std::vector<Tensor<T>> rows;
    rows.reserve(mentions.size() + 1);
    for (const auto& m : mentions) {
      if (m.sent_idx < 0 || m.sent_idx >= n_sent)
        throw ShapeError("model: mention sentence " + std::to_string(m.sent_idx) +
                         " outside the document");
      const Tensor<T>& hs = h[static_cast<size_t>(m.sent_idx)];
      if (m.begin < 0 || m.end <= m.begin || m.end > hs.rows)
        throw ShapeError("model: mention span [" + std::to_string(m.begin) + ", " +
                         std::to_string(m.end) + ") outside sentence " +
                         std::to_string(m.sent_idx));
      rows.push_back(awa_mention_.pool_all(slice(hs, 0, m.begin, m.end), train, rng));
    }

    std::vector<Tensor<T>> sent_rows;
    sent_rows.reserve(h.size());
    for (const auto& hs : h) sent_rows.push_back(awa_sentence_.pool_all(hs, train, rng));
    Tensor<T> c = add(concat(sent_rows, 0), slice(sent_pos_, 0, 0, n_sent));

    rows.push_back(c);
    Tensor<T> stacked = concat(rows, 0);
    Tensor<T> encoded = t2_.encode(
        stacked, std::vector<uint8_t>(static_cast<size_t>(stacked.rows), 1), train, rng);

    EncodedDoc<T> out;
    out.mentions = mentions;
    const int64_t n_mention = static_cast<int64_t>(mentions.size());
    out.sentence_emb = slice(encoded, 0, n_mention, n_mention + n_sent);

    // Group mention rows by surface string in first-appearance order and
    // merge each group with its own attentive pooling.
    std::map<std::string, std::vector<int64_t>> groups;
    for (int64_t i = 0; i < n_mention; ++i) {
      const std::string& name = mentions[static_cast<size_t>(i)].surface;
      if (!groups.count(name)) out.entity_names.push_back(name);
      groups[name].push_back(i);
    }
    if (!out.entity_names.empty()) {
      std::vector<Tensor<T>> entity_rows;
      entity_rows.reserve(out.entity_names.size());
      for (const auto& name : out.entity_names) {
        std::vector<Tensor<T>> members;
        for (int64_t i : groups[name]) members.push_back(slice(encoded, 0, i, i + 1));
        Tensor<T> group = members.size() == 1 ? members[0] : concat(members, 0);
        entity_rows.push_back(awa_merge_.pool_all(group, train, rng));
      }
      out.entity_emb = concat(entity_rows, 0);
    }
    return out;
  }

  // [1 x 2] trigger logits per event type, from a document embedding pooled
  // over the sentence rows.
  std::vector<Tensor<T>> trigger_logits(const EncodedDoc<T>& enc, bool train,
                                        Rng& rng) const {
    Tensor<T> doc_emb = awa_doc_.pool_all(enc.sentence_emb, train, rng);
    std::vector<Tensor<T>> out;
    out.reserve(trigger_heads_.size());
    for (const auto& head : trigger_heads_) out.push_back(head.forward(doc_emb));
    return out;
  }

  // [num sentences x 2] key-sentence logits for one event type.
  Tensor<T> key_sentence_logits(const EncodedDoc<T>& enc, int spec_idx) const {
    return key_heads_[static_cast<size_t>(spec_idx)].forward(enc.sentence_emb);
  }

  // --- Path expansion stage --------------------------------------------

  // Expansion logits [num candidates + 1 x 2] for filling `role_idx`, given
  // the argument rows appended to the memory so far. Candidate order is
  // entity_names order; the trailing row is the NA choice.
  Tensor<T> expansion_logits(const EncodedDoc<T>& enc, int spec_idx, int role_idx,
                             const std::vector<Tensor<T>>& appended, bool train,
                             Rng& rng) const {
    std::vector<Tensor<T>> rows;
    rows.reserve(appended.size() + 3);
    rows.push_back(enc.sentence_emb);
    for (const auto& a : appended) rows.push_back(a);
    if (enc.has_entities()) rows.push_back(enc.entity_emb);
    rows.push_back(na_emb_);
    Tensor<T> stacked = concat(rows, 0);
    Tensor<T> ind = embedding_lookup(indicator_, {indicator_index(spec_idx, role_idx)});
    stacked = add(stacked, tile_rows(ind, stacked.rows));
    Tensor<T> encoded = t3_.encode(
        stacked, std::vector<uint8_t>(static_cast<size_t>(stacked.rows), 1), train, rng);
    const int64_t n_cand = num_candidate_rows(enc);
    return expand_head_.forward(slice(encoded, 0, encoded.rows - n_cand, encoded.rows));
  }

  // The memory row recording one filled argument: the entity's embedding,
  // or zeros for NA — and always zeros when path memory is ablated.
  Tensor<T> argument_row(const EncodedDoc<T>& enc, std::optional<int> choice) const {
    if (!cfg_.use_path_memory || !choice) return Tensor<T>::zeros(1, cfg_.d_w);
    if (*choice < 0 || *choice >= static_cast<int>(enc.entity_names.size()))
      throw ShapeError("model: argument index " + std::to_string(*choice) +
                       " outside the " + std::to_string(enc.entity_names.size()) +
                       "-entity candidate set");
    return slice(enc.entity_emb, 0, *choice, *choice + 1);
  }

  // Adapts the network to the shared frontier decoder. Stateless: the
  // memory is rebuilt from the path history on every call.
  class Scorer : public PathScorer {
   public:
    Scorer(const Doc2EdagModel& model, const EncodedDoc<T>& enc, int spec_idx)
        : model_(model), enc_(enc), spec_idx_(spec_idx), rng_(0) {}

    int num_candidates() const override {
      return static_cast<int>(enc_.entity_names.size());
    }

    std::vector<double> expand(const std::vector<std::optional<int>>& history,
                               int role_idx) override {
      std::vector<Tensor<T>> appended;
      appended.reserve(history.size());
      for (const auto& choice : history)
        appended.push_back(model_.argument_row(enc_, choice));
      Tensor<T> logits =
          model_.expansion_logits(enc_, spec_idx_, role_idx, appended, false, rng_);
      std::vector<double> probs(static_cast<size_t>(logits.rows));
      for (int64_t i = 0; i < logits.rows; ++i)
        probs[static_cast<size_t>(i)] =
            1.0 / (1.0 + std::exp(double(logits.at(i, 0) - logits.at(i, 1))));
      return probs;
    }

   private:
    const Doc2EdagModel& model_;
    const EncodedDoc<T>& enc_;
    int spec_idx_;
    Rng rng_;  // encode runs with train=false, so this is never drawn from
  };

  // Grows the entity DAG for one event type with the shared decoder.
  DecodeResult generate_edag(const EncodedDoc<T>& enc, int spec_idx) const {
    Scorer scorer(*this, enc, spec_idx);
    return decode_edag(scorer, registry_.specs[static_cast<size_t>(spec_idx)],
                       enc.entity_names, cfg_.expand_threshold, cfg_.frontier_cap);
  }

  // --- Training objective ----------------------------------------------

  // Weighted sum of the recognition, trigger, path-expansion and
  // key-sentence losses for one labeled document. Teacher-forces the gold
  // DAG; scheduled sampling decides whether the document encoder sees gold
  // or recognized mentions.
  Tensor<T> compute_loss(const LabeledDoc& gold, int epoch, bool train, Rng& rng,
                         LossBreakdown* parts = nullptr) const {
    auto [doc, tags] = truncated_with_tags(gold);

    const bool use_gold_mentions =
        !train || rng.bernoulli(scheduled_sampling_prob(cfg_, epoch));
    RecognizeResult<T> rec =
        encode_and_recognize(doc, &tags, train, rng, !use_gold_mentions);
    std::vector<EntityMention> mentions = mentions_from_tags(
        doc, use_gold_mentions ? tags : rec.predicted_tags, registry_);
    EncodedDoc<T> enc = encode_document(rec.h, mentions, train, rng);

    // Trigger loss: one binary decision per event type.
    Tensor<T> tr_loss = Tensor<T>::scalar(T(0));
    std::vector<Tensor<T>> trig = trigger_logits(enc, train, rng);
    for (size_t t = 0; t < registry_.specs.size(); ++t) {
      const bool on = type_triggered(gold, registry_.specs[t].code);
      tr_loss = add(tr_loss, weighted_ce(trig[t], {on ? int64_t(1) : int64_t(0)},
                                         {T(1), T(1)}));
    }

    // Path expansion loss: teacher-forced walk of each gold DAG.
    Tensor<T> dag_loss = Tensor<T>::scalar(T(0));
    int mismatches = 0;
    for (size_t t = 0; t < registry_.specs.size(); ++t) {
      const auto& spec = registry_.specs[t];
      auto it = gold.tables.find(spec.code);
      if (it == gold.tables.end() || it->second.empty()) continue;
      dag_loss = add(dag_loss, teacher_forced_dag_loss(enc, static_cast<int>(t),
                                                       it->second, train, rng,
                                                       &mismatches));
    }

    // Key-sentence loss: the sentence carrying the most argument spans of
    // each triggered type is the positive row; every other row is negative.
    Tensor<T> ks_loss = Tensor<T>::scalar(T(0));
    LabeledDoc clipped{doc, tags, gold.tables, gold.triggered, gold.tag_conflicts};
    std::map<std::string, int> key_labels = derive_key_sentence_labels(clipped, registry_);
    for (size_t t = 0; t < registry_.specs.size(); ++t) {
      std::vector<int64_t> labels(static_cast<size_t>(doc.num_sentences()), 0);
      auto it = key_labels.find(registry_.specs[t].code);
      if (it != key_labels.end()) labels[static_cast<size_t>(it->second)] = 1;
      ks_loss = add(ks_loss, weighted_ce(key_sentence_logits(enc, static_cast<int>(t)),
                                         labels, {T(1), T(1)}));
    }

    Tensor<T> total = add(
        add(scale(rec.er_loss, T(cfg_.lambda_er)), scale(tr_loss, T(cfg_.lambda_tr))),
        add(scale(dag_loss, T(cfg_.lambda_dag)), scale(ks_loss, T(cfg_.lambda_ks))));
    if (parts) {
      parts->er = double(rec.er_loss.item());
      parts->tr = double(tr_loss.item());
      parts->dag = double(dag_loss.item());
      parts->ks = double(ks_loss.item());
      parts->total = double(total.item());
      parts->mention_mismatches = mismatches;
      parts->used_gold_mentions = use_gold_mentions;
    }
    return total;
  }

  // --- Inference ---------------------------------------------------------

  // Everything a decoder needs from one document, computed without gold
  // access: recognized tagged mentions, document encodings, trigger
  // probabilities and per-type key-sentence probabilities.
  struct InferenceState {
    Document doc;  // truncated to the model's limits
    std::vector<std::vector<int>> tags;
    std::vector<TaggedMention> tagged_mentions;
    EncodedDoc<T> enc;
    std::map<std::string, double> trigger_probs;
    std::vector<std::vector<double>> key_probs;  // [type][sentence]
  };

  InferenceState infer_state(const Document& raw_doc) const {
    InferenceState st;
    st.doc = truncate(raw_doc, cfg_.max_sentences, cfg_.max_sentence_len).doc;
    Rng rng(0);  // train=false everywhere below: never drawn from
    RecognizeResult<T> rec = encode_and_recognize(st.doc, nullptr, false, rng, true);
    st.tags = rec.predicted_tags;
    st.tagged_mentions = tagged_mentions_from_tags(st.doc, st.tags, registry_);
    std::vector<EntityMention> mentions;
    mentions.reserve(st.tagged_mentions.size());
    for (const auto& tm : st.tagged_mentions) mentions.push_back(tm.mention);
    st.enc = encode_document(rec.h, mentions, false, rng);
    std::vector<Tensor<T>> trig = trigger_logits(st.enc, false, rng);
    for (size_t t = 0; t < registry_.specs.size(); ++t)
      st.trigger_probs[registry_.specs[t].code] = binary_prob(trig[t], 0);
    for (size_t t = 0; t < registry_.specs.size(); ++t) {
      Tensor<T> ks = key_sentence_logits(st.enc, static_cast<int>(t));
      std::vector<double> probs(static_cast<size_t>(ks.rows));
      for (int64_t s = 0; s < ks.rows; ++s) probs[static_cast<size_t>(s)] = binary_prob(ks, s);
      st.key_probs.push_back(std::move(probs));
    }
    return st;
  }

  // Full pipeline for one document with the EDAG decoder.
  Prediction predict(const Document& raw_doc) const {
    InferenceState st = infer_state(raw_doc);
    Prediction pred;
    pred.doc_id = st.doc.doc_id;
    pred.decoder = "doc2edag";
    pred.triggered = st.trigger_probs;
    for (size_t t = 0; t < registry_.specs.size(); ++t) {
      const auto& spec = registry_.specs[t];
      if (st.trigger_probs.at(spec.code) < cfg_.trigger_threshold) continue;
      DecodeResult decoded = generate_edag(st.enc, static_cast<int>(t));
      pred.frontier_truncations += decoded.frontier_truncations;
      pred.tables[spec.code] = edag_to_records(decoded.edag, spec);
    }
    return pred;
  }

  // Clips a labeled document to the model's sentence/length limits, keeping
  // the tag rows aligned with the surviving tokens.
  std::pair<Document, std::vector<std::vector<int>>> truncated_with_tags(
      const LabeledDoc& gold) const {
    if (gold.tags.size() != gold.doc.sentences.size())
      throw SchemaError("model: labeled document has " + std::to_string(gold.tags.size()) +
                        " tag rows for " + std::to_string(gold.doc.sentences.size()) +
                        " sentences");
    Document doc = truncate(gold.doc, cfg_.max_sentences, cfg_.max_sentence_len).doc;
    std::vector<std::vector<int>> tags(doc.sentences.size());
    for (size_t s = 0; s < doc.sentences.size(); ++s) {
      const auto& row = gold.tags[s];
      if (row.size() < doc.sentences[s].size())
        throw SchemaError("model: tag row " + std::to_string(s) +
                          " shorter than its sentence");
      tags[s].assign(row.begin(), row.begin() + static_cast<int64_t>(doc.sentences[s].size()));
    }
    return {std::move(doc), std::move(tags)};
  }

  int64_t indicator_index(int spec_idx, int role_idx) const {
    const auto& spec = registry_.specs.at(static_cast<size_t>(spec_idx));
    if (role_idx < 0 || role_idx >= static_cast<int>(spec.roles.size()))
      throw SchemaError("model: role index " + std::to_string(role_idx) +
                        " outside event type " + spec.code);
    return role_offsets_[static_cast<size_t>(spec_idx)] + role_idx;
  }

 private:
  // Rows the expansion head scores: one per entity plus the NA row.
  int64_t num_candidate_rows(const EncodedDoc<T>& enc) const {
    return static_cast<int64_t>(enc.entity_names.size()) + 1;
  }

  static double binary_prob(const Tensor<T>& logits, int64_t row) {
    return 1.0 / (1.0 + std::exp(double(logits.at(row, 0) - logits.at(row, 1))));
  }

  static bool type_triggered(const LabeledDoc& gold, const std::string& code) {
    auto it = gold.triggered.find(code);
    if (it != gold.triggered.end()) return it->second;
    auto tab = gold.tables.find(code);
    return tab != gold.tables.end() && !tab->second.empty();
  }

  // Walks the gold DAG; at every non-leaf node, every candidate (and the NA
  // row) gets a binary label from that node's gold children, with weight
  // gamma on the should-be-negative rows. Children then extend the memory
  // with their own argument rows. Gold arguments missing from the candidate
  // set supervise the NA row instead and are counted as mismatches.
  Tensor<T> teacher_forced_dag_loss(const EncodedDoc<T>& enc, int spec_idx,
                                    const std::vector<EventRecord>& records,
                                    bool train, Rng& rng, int* mismatches) const {
    const auto& spec = registry_.specs[static_cast<size_t>(spec_idx)];
    Edag dag = records_to_edag(records, spec);

    std::map<std::string, int> name_index;
    for (size_t i = 0; i < enc.entity_names.size(); ++i)
      name_index[enc.entity_names[i]] = static_cast<int>(i);

    Tensor<T> loss = Tensor<T>::scalar(T(0));
    struct Task {
      int node_id;
      std::vector<Tensor<T>> appended;
    };
    std::vector<Task> stack;
    stack.push_back({dag.root_id, {}});
    while (!stack.empty()) {
      Task task = std::move(stack.back());
      stack.pop_back();
      const EdagNode& node = dag.nodes[static_cast<size_t>(task.node_id)];
      if (node.level >= dag.num_levels()) continue;  // leaf: nothing to expand
      const int role_idx = spec.generation_order[static_cast<size_t>(node.level)];

      const int64_t n_rows = num_candidate_rows(enc);
      std::vector<int64_t> labels(static_cast<size_t>(n_rows), 0);
      struct Child {
        int node_id;
        std::optional<int> choice;
      };
      std::vector<Child> children;
      for (int child_id : node.children) {
        const EdagNode& child = dag.nodes[static_cast<size_t>(child_id)];
        std::optional<int> choice;
        if (child.argument) {
          auto it = name_index.find(*child.argument);
          if (it != name_index.end()) {
            choice = it->second;
            labels[static_cast<size_t>(it->second)] = 1;
          } else {
            ++*mismatches;
            labels[static_cast<size_t>(n_rows - 1)] = 1;  // supervise as NA
          }
        } else {
          labels[static_cast<size_t>(n_rows - 1)] = 1;
        }
        children.push_back({child_id, choice});
      }

      Tensor<T> logits =
          expansion_logits(enc, spec_idx, role_idx, task.appended, train, rng);
      loss = add(loss, weighted_ce(logits, labels, {T(cfg_.gamma), T(1)}));

      for (const auto& child : children) {
        std::vector<Tensor<T>> appended = task.appended;
        appended.push_back(argument_row(enc, child.choice));
        stack.push_back({child.node_id, std::move(appended)});
      }
    }
    return loss;
  }

  ModelConfig cfg_;
  SchemaRegistry registry_;
  ParamRegistry<T> reg_;
  Tensor<T> token_table_, tok_pos_, sent_pos_;
  TransformerEncoder<T> t1_, t2_, t3_;
  AwaPool<T> awa_mention_, awa_sentence_, awa_merge_, awa_doc_;
  CrfLayer<T> crf_;
  std::vector<Linear<T>> trigger_heads_;
  std::vector<Linear<T>> key_heads_;
  Linear<T> expand_head_;
  Tensor<T> indicator_, na_emb_;
  std::vector<int64_t> role_offsets_;
};

}  // namespace edag
