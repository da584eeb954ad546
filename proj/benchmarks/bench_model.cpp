#include <benchmark/benchmark.h>

#include "edag/corpus.hpp"
#include "edag/labeling.hpp"
#include "edag/model.hpp"
#include "edag/rng.hpp"
#include "edag/schema.hpp"
#include "edag/tensor.hpp"

namespace {

// The desk-profile shape: what one real training/inference step costs.
edag::ModelConfig desk_config() {
  edag::ModelConfig cfg;
  cfg.d_w = 32;
  cfg.num_layers = 2;
  cfg.num_heads = 2;
  cfg.max_sentences = 16;
  cfg.max_sentence_len = 48;
  cfg.ff_dim = 64;
  cfg.dropout = 0.1;
  return cfg;
}

struct Fixture {
  edag::SchemaRegistry registry = edag::synthetic_registry();
  edag::Corpus corpus;
  std::vector<edag::LabeledDoc> labeled;

  Fixture() {
    edag::GeneratorConfig gen;
    gen.seed = 42;
    gen.num_docs = 8;
    gen.multi_event_ratio = 0.5;
    corpus = edag::generate_corpus(gen, registry);
    for (const auto& doc : corpus.docs)
      labeled.push_back(edag::label_document(doc, corpus.kb.records.at(doc.doc_id), registry));
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

static void BM_ModelLoss(benchmark::State& state) {
  Fixture& f = fixture();
  edag::Rng rng(21);
  edag::Doc2EdagModel<float> model(desk_config(), f.registry, rng);
  edag::Rng loss_rng(1);
  size_t i = 0;
  for (auto _ : state) {
    edag::Tensor<float> loss =
        model.compute_loss(f.labeled[i++ % f.labeled.size()], 0, false, loss_rng);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_ModelLoss)->Unit(benchmark::kMillisecond);

static void BM_ModelTrainStep(benchmark::State& state) {
  Fixture& f = fixture();
  edag::Rng rng(22);
  edag::Doc2EdagModel<float> model(desk_config(), f.registry, rng);
  edag::Rng loss_rng(1);
  size_t i = 0;
  for (auto _ : state) {
    model.params().zero_grads();
    edag::Tape<float> tape;
    edag::Tensor<float> loss =
        model.compute_loss(f.labeled[i++ % f.labeled.size()], 0, true, loss_rng);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_ModelTrainStep)->Unit(benchmark::kMillisecond);

static void BM_ModelPredict(benchmark::State& state) {
  Fixture& f = fixture();
  edag::Rng rng(23);
  edag::Doc2EdagModel<float> model(desk_config(), f.registry, rng);
  size_t i = 0;
  for (auto _ : state) {
    edag::Prediction pred = model.predict(f.corpus.docs[i++ % f.corpus.docs.size()]);
    benchmark::DoNotOptimize(pred);
  }
}
BENCHMARK(BM_ModelPredict)->Unit(benchmark::kMillisecond);
