#include <benchmark/benchmark.h>

#include "sparta/global_context.hpp"
#include "sparta/local_context.hpp"
#include "sparta/model.hpp"
#include "sparta/synth.hpp"
#include "sparta/train.hpp"

using namespace sparta;

namespace {

Tensor random_vector(std::size_t d, Rng& rng) {
  Tensor t(Shape{d});
  for (auto& v : t.values()) v = uniform(rng, -1.0, 1.0);
  return t;
}

Corpus bench_corpus(std::size_t n) {
  GeneratorConfig gc;
  gc.n_dialogues = n;
  gc.seed = 1;
  return generate_corpus(default_grammar(), gc);
}

SpartaConfig bench_model(std::size_t d, Variant v) {
  SpartaConfig c;
  c.encoder.dim = d;
  c.window = 4;
  c.variant = v;
  return c;
}

void BM_TimeAwareAttention(benchmark::State& state) {
  const std::size_t d = state.range(0), k = state.range(1);
  ParameterStore store;
  Rng rng(1);
  const AttentionParams p = add_attention_params(store, "att", d, rng);
  std::vector<Tensor> slots;
  for (std::size_t i = 0; i < k; ++i) slots.push_back(random_vector(d, rng));
  const Tensor h = random_vector(d, rng);
  for (auto _ : state) {
    ad::Graph g(&store);
    std::vector<ad::Var> vars;
    for (const auto& s : slots) vars.push_back(g.constant(s));
    benchmark::DoNotOptimize(time_aware_attention(g, p, g.constant(h), vars).value());
  }
}
BENCHMARK(BM_TimeAwareAttention)->Args({32, 4})->Args({64, 6})->Args({128, 6});

void BM_MultiHeadAttention(benchmark::State& state) {
  const std::size_t d = state.range(0), k = state.range(1);
  ParameterStore store;
  Rng rng(2);
  const AttentionParams p = add_attention_params(store, "att", d, rng);
  std::vector<Tensor> slots;
  for (std::size_t i = 0; i < k; ++i) slots.push_back(random_vector(d, rng));
  const Tensor h = random_vector(d, rng);
  for (auto _ : state) {
    ad::Graph g(&store);
    std::vector<ad::Var> vars;
    for (const auto& s : slots) vars.push_back(g.constant(s));
    benchmark::DoNotOptimize(multi_head_attention(g, p, g.constant(h), vars, 4).value());
  }
}
BENCHMARK(BM_MultiHeadAttention)->Args({32, 4})->Args({64, 6})->Args({128, 6});

void BM_GruSequence(benchmark::State& state) {
  const std::size_t d = state.range(0), len = state.range(1);
  ParameterStore store;
  Rng rng(3);
  const GruParams p = add_gru_params(store, "gru", d, rng);
  std::vector<Tensor> xs;
  for (std::size_t i = 0; i < len; ++i) xs.push_back(random_vector(d, rng));
  for (auto _ : state) {
    ad::Graph g(&store);
    std::vector<ad::Var> vars;
    for (const auto& x : xs) vars.push_back(g.constant(x));
    benchmark::DoNotOptimize(run_global_context(g, p, vars).back().value());
  }
  state.SetItemsProcessed(state.iterations() * len);
}
BENCHMARK(BM_GruSequence)->Args({32, 12})->Args({64, 12});

void BM_ForwardDialogue(benchmark::State& state) {
  const Corpus corpus = bench_corpus(1);
  const SpartaModel model =
      init_params(bench_model(state.range(0), Variant::TAA), build_vocabulary(corpus, 1), 4);
  for (auto _ : state) benchmark::DoNotOptimize(forward_dialogue(model, corpus.dialogues[0]));
  state.SetItemsProcessed(state.iterations() * corpus.dialogues[0].utterances.size());
}
BENCHMARK(BM_ForwardDialogue)->Arg(32)->Arg(64);

void BM_TrainStep(benchmark::State& state) {
  const Corpus corpus = bench_corpus(1);
  const SpartaModel model =
      init_params(bench_model(state.range(0), Variant::TAA), build_vocabulary(corpus, 1), 5);
  Rng rng(6);
  for (auto _ : state) {
    ad::Graph g(&model.params);
    ad::Var loss = dialogue_loss(g, model, corpus.dialogues[0], Mode::Train, rng);
    g.backward(loss);
    GradientStore grads(model.params);
    g.accumulate_gradients(grads);
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(64);

void BM_TrainEpoch(benchmark::State& state) {
  const Corpus corpus = bench_corpus(20);
  TrainConfig tc;
  tc.max_epochs = 1;
  tc.learning_rate = 3e-3;
  tc.speaker_epochs = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(train(corpus, corpus, bench_model(32, Variant::TAA), tc).log);
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
