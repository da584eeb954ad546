#include <benchmark/benchmark.h>

#include "edag/edag.hpp"
#include "edag/rng.hpp"
#include "edag/schema.hpp"

namespace {

edag::EventTypeSpec bench_spec(int num_roles) {
  edag::EventTypeSpec spec;
  spec.code = "BN";
  spec.name = "Bench";
  for (int i = 0; i < num_roles; ++i) {
    spec.roles.push_back({"R" + std::to_string(i), i == 0, 2 * i + 1, 2 * i + 2});
    spec.generation_order.push_back(i);
  }
  spec.min_matched_roles = 1;
  return spec;
}

std::vector<edag::EventRecord> random_records(const edag::EventTypeSpec& spec,
                                              int num_records, uint64_t seed) {
  edag::Rng rng(seed);
  std::vector<edag::EventRecord> recs;
  for (int r = 0; r < num_records; ++r) {
    edag::EventRecord rec;
    rec.event_type = spec.code;
    for (const auto& role : spec.roles) {
      if (rng.bernoulli(0.3)) continue;  // NA
      rec.args[role.name] = "v" + std::to_string(rng.uniform_int(0, 4));
    }
    recs.push_back(std::move(rec));
  }
  return recs;
}

}  // namespace

static void BM_RecordsToEdag(benchmark::State& state) {
  auto spec = bench_spec(8);
  auto recs = random_records(spec, static_cast<int>(state.range(0)), 17);
  for (auto _ : state) {
    auto dag = edag::records_to_edag(recs, spec);
    benchmark::DoNotOptimize(dag);
  }
}
BENCHMARK(BM_RecordsToEdag)->Arg(4)->Arg(16)->Arg(64);

static void BM_EdagRoundTrip(benchmark::State& state) {
  auto spec = bench_spec(8);
  auto recs = random_records(spec, static_cast<int>(state.range(0)), 17);
  auto dag = edag::records_to_edag(recs, spec);
  for (auto _ : state) {
    auto back = edag::edag_to_records(dag, spec);
    benchmark::DoNotOptimize(back);
  }
}
BENCHMARK(BM_EdagRoundTrip)->Arg(4)->Arg(16)->Arg(64);
