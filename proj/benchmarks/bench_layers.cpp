#include <benchmark/benchmark.h>

#include <vector>

#include "edag/layers.hpp"
#include "edag/rng.hpp"
#include "edag/schema.hpp"
#include "edag/tensor.hpp"

namespace {

using edag::Rng;
using edag::Tensor;

Tensor<float> random_tensor(Rng& rng, int64_t r, int64_t c) {
  std::vector<float> v(static_cast<size_t>(r * c));
  for (float& x : v) x = float(rng.uniform(-1, 1));
  return Tensor<float>::from(r, c, std::move(v));
}

edag::SchemaRegistry bench_registry() {
  edag::EventTypeSpec spec;
  spec.code = "BN";
  spec.name = "Bench";
  spec.min_matched_roles = 1;
  for (int i = 0; i < 5; ++i) spec.roles.push_back({"R" + std::to_string(i), i == 0, -1, -1});
  return edag::make_registry({spec});
}

}  // namespace

static void BM_MatMul(benchmark::State& state) {
  const int64_t n = state.range(0);
  Rng rng(11);
  Tensor<float> a = random_tensor(rng, n, n);
  Tensor<float> b = random_tensor(rng, n, n);
  for (auto _ : state) {
    Tensor<float> c = edag::matmul(a, b);
    benchmark::DoNotOptimize(c);
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * n * n * n);
}
BENCHMARK(BM_MatMul)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

static void BM_MatMulBackward(benchmark::State& state) {
  const int64_t n = state.range(0);
  Rng rng(12);
  Tensor<float> a = random_tensor(rng, n, n);
  Tensor<float> b = random_tensor(rng, n, n);
  for (auto _ : state) {
    edag::Tape<float> tape;
    Tensor<float> c = edag::matmul(a, b);
    Tensor<float> s = edag::sum(c);
    tape.backward(s);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_MatMulBackward)->Arg(32)->Arg(64)->Arg(128);

static void BM_TransformerForward(benchmark::State& state) {
  const int64_t len = state.range(0);
  Rng rng(13);
  edag::ParamRegistry<float> reg;
  edag::TransformerEncoder<float> enc(reg, "t", rng, 2, 32, 64, 2, 0.0);
  Tensor<float> x = random_tensor(rng, len, 32);
  std::vector<uint8_t> keep(static_cast<size_t>(len), 1);
  Rng fwd(1);
  for (auto _ : state) {
    Tensor<float> h = enc.encode(x, keep, false, fwd);
    benchmark::DoNotOptimize(h);
  }
}
BENCHMARK(BM_TransformerForward)->Arg(16)->Arg(48)->Arg(128);

static void BM_TransformerTrainStep(benchmark::State& state) {
  const int64_t len = state.range(0);
  Rng rng(14);
  edag::ParamRegistry<float> reg;
  edag::TransformerEncoder<float> enc(reg, "t", rng, 2, 32, 64, 2, 0.0);
  Tensor<float> x = random_tensor(rng, len, 32);
  std::vector<uint8_t> keep(static_cast<size_t>(len), 1);
  Rng fwd(1);
  for (auto _ : state) {
    reg.zero_grads();
    edag::Tape<float> tape;
    Tensor<float> s = edag::sum(enc.encode(x, keep, false, fwd));
    tape.backward(s);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_TransformerTrainStep)->Arg(16)->Arg(48);

static void BM_CrfNll(benchmark::State& state) {
  const int64_t len = state.range(0);
  Rng rng(15);
  edag::SchemaRegistry schema = bench_registry();  // 11 tags
  edag::ParamRegistry<float> reg;
  edag::CrfLayer<float> crf(reg, "crf", rng, 32, schema);
  Tensor<float> h = random_tensor(rng, len, 32);
  std::vector<int> gold(static_cast<size_t>(len), 0);
  for (auto _ : state) {
    Tensor<float> l = crf.nll(h, gold);
    benchmark::DoNotOptimize(l);
  }
}
BENCHMARK(BM_CrfNll)->Arg(16)->Arg(48)->Arg(128);

static void BM_CrfViterbi(benchmark::State& state) {
  const int64_t len = state.range(0);
  Rng rng(16);
  edag::SchemaRegistry schema = bench_registry();
  edag::ParamRegistry<float> reg;
  edag::CrfLayer<float> crf(reg, "crf", rng, 32, schema);
  Tensor<float> h = random_tensor(rng, len, 32);
  for (auto _ : state) {
    std::vector<int> tags = crf.viterbi(h);
    benchmark::DoNotOptimize(tags);
  }
}
BENCHMARK(BM_CrfViterbi)->Arg(16)->Arg(48)->Arg(128);
