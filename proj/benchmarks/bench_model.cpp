#include <benchmark/benchmark.h>

#include <vector>

#include "miarn/model.hpp"
#include "miarn/ops.hpp"
#include "miarn/rng.hpp"

using namespace miarn;

namespace {

num::Tensor<float> random_tensor(num::Shape shape, Rng& rng) {
  num::Tensor<float> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

corpus::Batch random_batch(std::size_t docs, std::size_t max_len, std::size_t vocab, Rng& rng) {
  std::vector<corpus::EncodedDoc> encoded;
  for (std::size_t d = 0; d < docs; ++d) {
    corpus::EncodedDoc doc;
    doc.ids.assign(max_len, 0);
    doc.valid_len = max_len / 2 + rng.below(max_len / 2 + 1);
    for (std::size_t i = 0; i < doc.valid_len; ++i) doc.ids[i] = static_cast<std::int32_t>(2 + rng.below(vocab - 2));
    doc.label = static_cast<int>(rng.below(2));
    encoded.push_back(std::move(doc));
  }
  return corpus::make_batch(encoded);
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  auto a = random_tensor({n, n}, rng);
  auto b = random_tensor({n, n}, rng);
  num::Graph<float> g(false);
  for (auto _ : state) benchmark::DoNotOptimize(num::matmul(g, a, b).data().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(100)->Arg(256);

// One document through forward and backward, as in a training step.
static void BM_DocStep(benchmark::State& state, model::ModelKind kind) {
  const auto max_len = static_cast<std::size_t>(state.range(0));
  model::ModelConfig cfg{kind, 5000, 100, 100, kind == model::ModelKind::miarn ? 8u : 0u};
  Rng init(2);
  auto params = model::init_params(cfg, init);
  params.set_requires_grad(true);
  Rng rng(3);
  const auto batch = random_batch(1, max_len, cfg.vocab_size, rng);
  for (auto _ : state) {
    num::Graph<float> g;
    auto loss = model::batch_loss(g, params, batch, 1e-8f);
    g.backward(loss);
    benchmark::DoNotOptimize(loss[0]);
  }
}
BENCHMARK_CAPTURE(BM_DocStep, siarn, model::ModelKind::siarn)->Arg(20)->Arg(40);
BENCHMARK_CAPTURE(BM_DocStep, miarn, model::ModelKind::miarn)->Arg(20)->Arg(40);
BENCHMARK_CAPTURE(BM_DocStep, lstm, model::ModelKind::lstm)->Arg(40);

static void BM_ForwardBatch(benchmark::State& state) {
  model::ModelConfig cfg{model::ModelKind::miarn, 5000, 100, 100, 8};
  Rng init(4);
  auto params = model::init_params(cfg, init);
  Rng rng(5);
  const auto batch = random_batch(static_cast<std::size_t>(state.range(0)), 40, cfg.vocab_size, rng);
  for (auto _ : state) {
    num::Graph<float> g(false);
    benchmark::DoNotOptimize(model::forward_batch(g, params, batch).probs.size());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBatch)->Arg(32)->Arg(128);

BENCHMARK_MAIN();
