// Serial reference vs OpenMP kernels on a synthetic corpus.

#include <benchmark/benchmark.h>

#include <vector>

#include "hgf/align.hpp"
#include "hgf/bandit.hpp"
#include "hgf/kernels.hpp"
#include "hgf/predictor.hpp"
#include "hgf/simhuman.hpp"

namespace {

using namespace hgf;

struct Fixture {
  Corpus corpus;
  std::vector<QuestionPair> pairs;
  std::vector<std::uint8_t> correctness;
  std::optional<Predictor> predictor;

  Fixture() {
    SyntheticCorpusConfig sc;
    sc.models = {{"m", 0.6, std::nullopt}};
    sc.seed = 7;
    corpus = make_synthetic_corpus(sc);
    correctness = corpus.correctness("m");
    Rng rng(11);
    pairs = sample_candidate_pairs(corpus, 20000, rng);
    std::vector<GeneralizationExample> examples;
    for (std::size_t i = 0; i < 2000; ++i) {
      const auto& p = pairs[i];
      examples.push_back(make_example(corpus, p, rng.bernoulli(0.5), corpus.same_task(p.target, p.shown)));
    }
    TextTrainConfig tc;
    tc.epochs = 2;
    predictor = fit_text_predictor(examples, tc);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_ScorePairsSerial(benchmark::State& state) {
  auto& f = fixture();
  std::vector<double> out(f.pairs.size());
  for (auto _ : state) {
    kernels::score_pairs_serial(*f.predictor, f.corpus, f.pairs, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.pairs.size()));
}

void BM_ScorePairsParallel(benchmark::State& state) {
  auto& f = fixture();
  std::vector<double> out(f.pairs.size());
  for (auto _ : state) {
    kernels::score_pairs_parallel(*f.predictor, f.corpus, f.pairs, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.pairs.size()));
  state.counters["threads"] = kernels::max_threads();
}

kernels::BeliefFunction mixture(Fixture& f) {
  static std::vector<double> priors(f.corpus.size(), 0.5);
  return mixture_posterior(f.corpus, *f.predictor, {0.9, 0.2}, priors);
}

void BM_BeliefsSerial(benchmark::State& state) {
  auto& f = fixture();
  const auto belief = mixture(f);
  std::vector<double> out(f.pairs.size());
  for (auto _ : state) {
    kernels::beliefs_serial(belief, f.pairs, f.correctness, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.pairs.size()));
}

void BM_BeliefsParallel(benchmark::State& state) {
  auto& f = fixture();
  const auto belief = mixture(f);
  std::vector<double> out(f.pairs.size());
  for (auto _ : state) {
    kernels::beliefs_parallel(belief, f.pairs, f.correctness, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.pairs.size()));
  state.counters["threads"] = kernels::max_threads();
}

}  // namespace

BENCHMARK(BM_ScorePairsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScorePairsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BeliefsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BeliefsParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
