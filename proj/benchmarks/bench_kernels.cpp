#include <benchmark/benchmark.h>

#include "grouprec/data.hpp"
#include "grouprec/layers.hpp"
#include "grouprec/model.hpp"
#include "grouprec/optimizer.hpp"
#include "grouprec/rng.hpp"

using namespace grouprec;

namespace {

FieldSchema bench_schema(std::size_t fields) {
  FieldSchema s;
  for (std::size_t i = 0; i < fields; ++i) {
    const FieldKind kind = i == 0 ? FieldKind::group : i == 1 ? FieldKind::item : FieldKind::context;
    s.fields.push_back({"f" + std::to_string(i), kind, 64});
  }
  return s;
}

EncodedExample bench_example(const Model& m, SeededRng& rng) {
  EncodedExample ex;
  for (const auto& f : m.schema.fields) ex.indices.push_back(rng.below(f.vocab_size));
  ex.target = 3.0;
  return ex;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  SeededRng rng(0);
  const auto a = rng_matrix(rng, n, n, -1, 1);
  const auto b = rng_matrix(rng, n, n, -1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetComplexityN(static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(8, 128)->Complexity(benchmark::oNCubed);

static void BM_MhaForward(benchmark::State& state) {
  const auto fields = static_cast<std::size_t>(state.range(0));
  SeededRng rng(1);
  const auto p = MhaParams::init(16, 4, 4, rng);
  const auto x = rng_matrix(rng, fields, 16, -1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(mha_forward(p, x));
}
BENCHMARK(BM_MhaForward)->Arg(2)->Arg(6)->Arg(8)->Arg(16);

static void BM_MhaBackward(benchmark::State& state) {
  const auto fields = static_cast<std::size_t>(state.range(0));
  SeededRng rng(2);
  auto p = MhaParams::init(16, 4, 4, rng);
  const auto x = rng_matrix(rng, fields, 16, -1, 1);
  const auto dz = rng_matrix(rng, fields, 16, -1, 1);
  const auto fwd = mha_forward(p, x);
  for (auto _ : state) benchmark::DoNotOptimize(mha_backward(p, fwd.cache, dz));
}
BENCHMARK(BM_MhaBackward)->Arg(2)->Arg(6)->Arg(8)->Arg(16);

static void BM_ModelForwardBackward(benchmark::State& state) {
  const auto fields = static_cast<std::size_t>(state.range(0));
  auto model = build_model(bench_schema(fields), Hyperparams{});
  SeededRng rng(3);
  const auto ex = bench_example(model, rng);
  for (auto _ : state) {
    const auto fwd = model_forward(model, ex);
    model_backward(model, fwd.cache, 2.0 * (fwd.prediction - ex.target));
    benchmark::DoNotOptimize(model.output.grad_b(0, 0));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ModelForwardBackward)->Arg(2)->Arg(6)->Arg(8);

static void BM_TrainEpoch(benchmark::State& state) {
  SyntheticConfig scfg;
  scfg.n_records = static_cast<std::size_t>(state.range(0));
  const auto data = generate_synthetic(scfg);
  const auto vocabs = build_vocabs(data);
  const auto schema = scenario_schema(vocabs.full_schema(), Scenario::mcgrs_sc("Class"));
  const auto train = encode_dataset(data, vocabs, schema);
  auto model = build_model(schema, Hyperparams{});
  TrainConfig cfg;
  auto opt = AdagradState::for_model(model, cfg.eta, cfg.eps);
  SeededRng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(train_epoch(model, train, opt, cfg, rng));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(train.size()));
}
BENCHMARK(BM_TrainEpoch)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
