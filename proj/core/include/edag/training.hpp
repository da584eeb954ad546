#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "edag/errors.hpp"
#include "edag/eval.hpp"
#include "edag/labeling.hpp"
#include "edag/model.hpp"
#include "edag/rng.hpp"
#include "edag/tensor.hpp"
#include "edag/threading.hpp"

namespace edag {

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 4;
  int max_epochs = 100;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 1;
  int validate_every = 1;  // epochs between dev evaluations
  double clip_norm = 0.0;  // global-norm gradient clip; 0 disables

  void validate() const {
    auto bad = [](const std::string& what) { throw ConfigError("train config: " + what); };
    if (!(lr > 0)) bad("learning rate must be positive");
    if (batch_size < 1) bad("batch_size must be positive");
    if (max_epochs < 1) bad("max_epochs must be at least 1");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1)) bad("adam_beta1 must be in [0, 1)");
    if (!(adam_beta2 >= 0 && adam_beta2 < 1)) bad("adam_beta2 must be in [0, 1)");
    if (!(adam_eps > 0)) bad("adam_eps must be positive");
    if (validate_every < 1) bad("validate_every must be at least 1");
    if (clip_norm < 0) bad("clip_norm must be non-negative");
  }
};

// First/second moment accumulators, kept in double regardless of the
// parameter precision.
struct AdamState {
  int64_t t = 0;
  std::map<std::string, std::vector<double>> m, v;
};

// One bias-corrected Adam update over every registered parameter. Zero
// gradients leave their parameters untouched; a non-finite gradient aborts
// naming the offending parameter.
template <typename T>
void adam_step(ParamRegistry<T>& params, AdamState& state, const TrainConfig& cfg) {
  ++state.t;
  const double correct1 = 1.0 - std::pow(cfg.adam_beta1, double(state.t));
  const double correct2 = 1.0 - std::pow(cfg.adam_beta2, double(state.t));
  for (auto& [name, p] : params.params()) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) {
      m.assign(p.data->size(), 0.0);
      v.assign(p.data->size(), 0.0);
    }
    for (size_t i = 0; i < p.data->size(); ++i) {
      const double g = double((*p.grad)[i]);
      if (!std::isfinite(g))
        throw Error("adam_step: non-finite gradient in parameter '" + name + "'");
      m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g;
      v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g * g;
      const double update =
          cfg.lr * (m[i] / correct1) / (std::sqrt(v[i] / correct2) + cfg.adam_eps);
      (*p.data)[i] = T(double((*p.data)[i]) - update);
    }
  }
}

// Global L2 gradient norm; scales every gradient down when it exceeds
// max_norm (> 0). Returns the pre-clip norm.
template <typename T>
double global_grad_norm(ParamRegistry<T>& params, double max_norm) {
  double sq = 0;
  for (auto& [name, p] : params.params())
    for (T g : *p.grad) sq += double(g) * double(g);
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm && norm > 0) {
    const T factor = T(max_norm / norm);
    for (auto& [name, p] : params.params())
      for (T& g : *p.grad) g *= factor;
  }
  return norm;
}

// Parameter payload of one model plus everything needed to rebuild it:
// the checkpoint's in-memory form. Values are float32 — the one binary
// format — whatever precision the live model uses.
struct TensorBlob {
  int64_t rows = 0, cols = 0;
  std::vector<float> values;
};
struct CheckpointData {
  ModelConfig config;
  std::string schema_text;
  std::map<std::string, TensorBlob> tensors;
};

// Byte format: "EDAG" magic, u32 version, u64 header length, JSON header
// (config, schema text, tensor manifest with offsets), float32 LE payload,
// trailing CRC32 of everything before it. Decode validates magic, version,
// bounds, offset disjointness and the checksum before touching values.
std::vector<uint8_t> encode_checkpoint(const CheckpointData& data);
CheckpointData decode_checkpoint(const std::vector<uint8_t>& bytes);
void write_checkpoint_file(const std::string& path, const CheckpointData& data);
CheckpointData read_checkpoint_file(const std::string& path);

template <typename T>
CheckpointData snapshot_model(const Doc2EdagModel<T>& model) {
  CheckpointData data;
  data.config = model.config();
  data.schema_text = serialize_registry(model.registry());
  for (const auto& [name, p] : model.params().params()) {
    TensorBlob blob;
    blob.rows = p.rows;
    blob.cols = p.cols;
    blob.values.reserve(p.data->size());
    for (T x : *p.data) blob.values.push_back(float(x));
    data.tensors[name] = std::move(blob);
  }
  return data;
}

// Loads a snapshot back into a model built with the same schema and config.
template <typename T>
void restore_model(Doc2EdagModel<T>& model, const CheckpointData& data) {
  if (serialize_registry(model.registry()) != data.schema_text)
    throw ConfigError("checkpoint: schema does not match the model's registry");
  if (!(model.config() == data.config))
    throw ConfigError("checkpoint: model config does not match");
  auto& params = model.params().params();
  if (params.size() != data.tensors.size())
    throw ConfigError("checkpoint: " + std::to_string(data.tensors.size()) +
                      " tensors for " + std::to_string(params.size()) + " parameters");
  for (auto& [name, p] : params) {
    auto it = data.tensors.find(name);
    if (it == data.tensors.end())
      throw ConfigError("checkpoint: missing tensor '" + name + "'");
    const TensorBlob& blob = it->second;
    if (blob.rows != p.rows || blob.cols != p.cols)
      throw ConfigError("checkpoint: tensor '" + name + "' has shape " +
                        std::to_string(blob.rows) + "x" + std::to_string(blob.cols) +
                        ", expected " + std::to_string(p.rows) + "x" +
                        std::to_string(p.cols));
    for (size_t i = 0; i < blob.values.size(); ++i) (*p.data)[i] = T(blob.values[i]);
  }
}

// Macro F1 of the model's predictions against the labeled tables:
// event-level micro F1 per type, unweighted mean over types. Documents are
// scored in parallel (prediction is tape-free and read-only).
template <typename T>
double validation_score(const Doc2EdagModel<T>& model,
                        const std::vector<LabeledDoc>& dev_docs) {
  std::vector<Prediction> preds(dev_docs.size());
  parallel_for(static_cast<int64_t>(dev_docs.size()), [&](int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i)
      preds[static_cast<size_t>(i)] = model.predict(dev_docs[static_cast<size_t>(i)].doc);
  });
  TableSet pred, gold;
  for (size_t i = 0; i < dev_docs.size(); ++i) {
    gold[dev_docs[i].doc.doc_id] = dev_docs[i].tables;
    pred[dev_docs[i].doc.doc_id] = preds[i].tables;
  }
  return evaluate_tables(pred, gold, model.registry()).all.macro_f1;
}

struct EpochLog {
  int epoch = 0;
  double objective = 0;  // what the optimizer actually minimized (incl. ks)
  double l_all = 0;      // lambda_er*er + lambda_tr*tr + lambda_dag*dag
  double er = 0, tr = 0, dag = 0, ks = 0;  // raw component sums over docs
  int mention_mismatches = 0;
  int gold_mention_docs = 0;  // docs whose encoder saw gold mentions
  double grad_norm = 0;       // largest pre-clip global norm this epoch
  bool validated = false;
  double dev_score = -1;
  double seconds = 0;
};

struct TrainResult {
  int best_epoch = -1;
  double best_score = -1;
  CheckpointData best;  // snapshot at the best-scoring validation
  std::vector<EpochLog> epochs;
};

// Full optimization loop: seeded shuffles, summed batch losses, Adam,
// periodic dev validation with best-checkpoint retention. The model is left
// holding the best parameters. on_epoch (when given) observes each epoch's
// log line as it completes.
template <typename T>
TrainResult train(Doc2EdagModel<T>& model, const std::vector<LabeledDoc>& train_docs,
                  const std::vector<LabeledDoc>& dev_docs, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  if (train_docs.empty()) throw ConfigError("train: empty training set");
  if (dev_docs.empty()) throw ConfigError("train: empty dev set");

  Rng master(cfg.seed);
  AdamState adam;
  TrainResult result;
  std::vector<size_t> order(train_docs.size());
  std::iota(order.begin(), order.end(), size_t(0));

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    // Epoch-local streams: the trajectory of epoch N is independent of how
    // many random draws earlier epochs consumed.
    Rng shuffle_rng = master.fork(uint64_t(2 * epoch));
    Rng doc_rng = master.fork(uint64_t(2 * epoch + 1));
    shuffle_rng.shuffle(order);

    EpochLog log;
    log.epoch = epoch;
    int batch_index = 0;
    for (size_t start = 0; start < order.size();
         start += size_t(cfg.batch_size), ++batch_index) {
      const size_t stop = std::min(order.size(), start + size_t(cfg.batch_size));
      model.params().zero_grads();
      double batch_objective = 0;
      {
        Tape<T> tape;
        Tensor<T> batch_loss = Tensor<T>::scalar(T(0));
        for (size_t i = start; i < stop; ++i) {
          LossBreakdown parts;
          Tensor<T> loss =
              model.compute_loss(train_docs[order[i]], epoch, true, doc_rng, &parts);
          batch_loss = add(batch_loss, loss);
          log.er += parts.er;
          log.tr += parts.tr;
          log.dag += parts.dag;
          log.ks += parts.ks;
          log.mention_mismatches += parts.mention_mismatches;
          log.gold_mention_docs += parts.used_gold_mentions ? 1 : 0;
        }
        batch_objective = double(batch_loss.item());
        if (!std::isfinite(batch_objective))
          throw Error("train: non-finite loss at epoch " + std::to_string(epoch) +
                      ", batch " + std::to_string(batch_index));
        tape.backward(batch_loss);
      }
      log.grad_norm =
          std::max(log.grad_norm, global_grad_norm(model.params(), cfg.clip_norm));
      adam_step(model.params(), adam, cfg);
      log.objective += batch_objective;
    }
    const ModelConfig& mc = model.config();
    log.l_all = mc.lambda_er * log.er + mc.lambda_tr * log.tr + mc.lambda_dag * log.dag;

    if (epoch % cfg.validate_every == 0 || epoch == cfg.max_epochs) {
      log.validated = true;
      log.dev_score = validation_score(model, dev_docs);
      if (log.dev_score > result.best_score) {
        result.best_score = log.dev_score;
        result.best_epoch = epoch;
        result.best = snapshot_model(model);
      }
    }
    log.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  if (result.best_epoch >= 0) restore_model(model, result.best);
  return result;
}

}  // namespace edag
