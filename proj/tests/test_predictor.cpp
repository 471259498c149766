#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hgf/metrics.hpp"
#include "hgf/predictor.hpp"
#include "hgf/rng.hpp"
#include "hgf/simhuman.hpp"
#include "test_util.hpp"

namespace hgf {
namespace {

GeneralizationExample ex(bool shown_correct, bool same_task, bool changed, std::string x = "x text",
                         std::string xp = "x prime text") {
  return {"x", "xp", std::move(x), std::move(xp), shown_correct, same_task, changed};
}

std::vector<GeneralizationExample> cell(std::size_t n, std::size_t positives, bool sc, bool st) {
  std::vector<GeneralizationExample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(ex(sc, st, i < positives));
  return out;
}

void append(std::vector<GeneralizationExample>& a, const std::vector<GeneralizationExample>& b) {
  a.insert(a.end(), b.begin(), b.end());
}

double p_of(const Predictor& p, bool sc, bool st = false) {
  return p.predict(to_input(ex(sc, st, false)));
}

TEST(PrevCorrect, MatchesEmpiricalRates) {
  std::vector<GeneralizationExample> data;
  append(data, cell(400, 100, true, false));
  append(data, cell(200, 100, false, false));
  const Predictor p = fit_baseline_prevcorrect(data);
  EXPECT_NEAR(p_of(p, true), 0.25, 1e-6);
  EXPECT_NEAR(p_of(p, false), 0.5, 1e-6);
}

TEST(PrevCorrect, IndependentLabelsGiveOverallRate) {
  std::vector<GeneralizationExample> data;
  append(data, cell(100, 30, true, false));
  append(data, cell(300, 90, false, false));
  const Predictor p = fit_baseline_prevcorrect(data);
  EXPECT_NEAR(p_of(p, true), 0.3, 1e-6);
  EXPECT_NEAR(p_of(p, false), 0.3, 1e-6);
  EXPECT_NEAR(p.logistic()->weights[1], 0.0, 1e-6);
}

TEST(PrevCorrect, DegenerateAndEmpty) {
  EXPECT_HGF_ERROR(fit_baseline_prevcorrect(cell(10, 0, true, false)), ErrorKind::kPrecondition);
  EXPECT_HGF_ERROR(fit_baseline_prevcorrect(cell(10, 10, false, false)), ErrorKind::kPrecondition);
  EXPECT_HGF_ERROR(fit_baseline_sametask({}), ErrorKind::kPrecondition);
}

TEST(PrevCorrect, OrderIndependent) {
  std::vector<GeneralizationExample> data;
  append(data, cell(40, 10, true, false));
  append(data, cell(20, 15, false, false));
  const Predictor a = fit_baseline_prevcorrect(data);
  std::reverse(data.begin(), data.end());
  const Predictor b = fit_baseline_prevcorrect(data);
  EXPECT_EQ(a.logistic()->weights, b.logistic()->weights);
}

TEST(SameTask, PerfectPredictorApproachesCellRates) {
  std::vector<GeneralizationExample> data;
  append(data, cell(50, 50, true, true));
  append(data, cell(50, 50, false, true));
  append(data, cell(50, 0, true, false));
  append(data, cell(50, 0, false, false));
  const Predictor p = fit_baseline_sametask(data);
  EXPECT_GT(p_of(p, true, true), 0.999);
  EXPECT_GT(p_of(p, false, true), 0.999);
  EXPECT_LT(p_of(p, true, false), 0.001);
  EXPECT_LT(p_of(p, false, false), 0.001);
}

TEST(SameTask, IndependentLabelsGiveZeroCoefficients) {
  std::vector<GeneralizationExample> data;
  append(data, cell(100, 20, true, true));
  append(data, cell(200, 40, false, true));
  append(data, cell(300, 60, true, false));
  append(data, cell(100, 20, false, false));
  const Predictor p = fit_baseline_sametask(data);
  EXPECT_NEAR(p.logistic()->weights[1], 0.0, 1e-6);
  EXPECT_NEAR(p.logistic()->weights[2], 0.0, 1e-6);
  EXPECT_NEAR(p_of(p, true, true), 0.2, 1e-6);
}

TEST(SameTask, MatchesCheckedTwoByTwoTable) {
  // Rates consistent with an additive logit: 0.5 / 0.2 / 0.8 / and the implied fourth cell.
  const double logit = std::log(0.8 / 0.2);
  const double p11 = 1.0 / (1.0 + std::exp(-(logit + logit)));  // sc=1, st=1
  std::vector<GeneralizationExample> data;
  append(data, cell(1000, 500, false, false));
  append(data, cell(1000, 800, true, false));
  append(data, cell(1000, 800, false, true));
  append(data, cell(1000, static_cast<std::size_t>(std::lround(p11 * 1000)), true, true));
  const Predictor p = fit_baseline_sametask(data);
  EXPECT_NEAR(p_of(p, false, false), 0.5, 2e-3);
  EXPECT_NEAR(p_of(p, true, false), 0.8, 2e-3);
  EXPECT_NEAR(p_of(p, true, true), p11, 2e-3);
}

Corpus text_corpus() {
  SyntheticCorpusConfig sc;
  sc.n_tasks = 10;
  sc.questions_per_task = 20;
  sc.seed = 17;
  return make_synthetic_corpus(sc);
}

std::vector<GeneralizationExample> random_examples(const Corpus& c, std::size_t n, Rng& rng,
                                                   const std::function<bool(QuestionPair, bool, Rng&)>& label) {
  std::vector<GeneralizationExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    QuestionPair p = sample_pair(c, rng);
    // Oversample same-task pairs so both classes are common.
    if (rng.bernoulli(0.4)) {
      const auto t = c.task_index(p.target);
      do {
        p.shown = static_cast<QuestionIndex>(rng.uniform_index(c.size()));
      } while (p.shown == p.target || c.task_index(p.shown) != t);
    }
    const bool sc = rng.bernoulli(0.5);
    out.push_back(make_example(c, p, sc, label(p, sc, rng)));
  }
  return out;
}

double held_out_auc(const Predictor& p, const std::vector<GeneralizationExample>& test) {
  return *evaluate_predictor(p, test).overall.auc;
}

TEST(TextPredictor, LearnsSameTaskFromText) {
  const Corpus c = text_corpus();
  Rng rng(3);
  auto label = [&](QuestionPair p, bool, Rng&) { return c.same_task(p.target, p.shown); };
  const auto train = random_examples(c, 1500, rng, label);
  const auto test = random_examples(c, 500, rng, label);
  TextTrainConfig cfg;
  cfg.seed = 1;
  const Predictor p = fit_text_predictor(train, cfg);
  EXPECT_GE(held_out_auc(p, test), 0.9);
}

TEST(TextPredictor, IndependentLabelsNearChance) {
  const Corpus c = text_corpus();
  Rng rng(5);
  auto coin = [](QuestionPair, bool, Rng& r) { return r.bernoulli(0.5); };
  const auto train = random_examples(c, 1500, rng, coin);
  const auto test = random_examples(c, 2000, rng, coin);
  TextTrainConfig cfg;
  cfg.seed = 2;
  const double a = held_out_auc(fit_text_predictor(train, cfg), test);
  EXPECT_GE(a, 0.45);
  EXPECT_LE(a, 0.55);
}

TEST(TextPredictor, MemorizesDuplicateGroup) {
  std::vector<GeneralizationExample> train;
  for (int i = 0; i < 50; ++i) train.push_back(ex(true, false, i < 35, "alpha beta gamma", "delta epsilon"));
  for (int i = 0; i < 50; ++i) train.push_back(ex(false, false, i < 5, "zeta eta theta", "iota kappa"));
  TextTrainConfig cfg;
  const Predictor p = fit_text_predictor(train, cfg);
  EXPECT_NEAR(p.predict(to_input(train[0])), 0.7, 0.1);
  EXPECT_NEAR(p.predict(to_input(train[50])), 0.1, 0.1);
}

TEST(TextPredictor, DeterministicAndConfigErrors) {
  std::vector<GeneralizationExample> train = {ex(true, false, true, "a b", "c d"), ex(false, true, false, "e f", "g h")};
  TextTrainConfig cfg;
  cfg.seed = 9;
  cfg.ensemble = 3;
  const Predictor a = fit_text_predictor(train, cfg);
  const Predictor b = fit_text_predictor(train, cfg);
  EXPECT_EQ(a.snapshot(), b.snapshot());
  cfg.features.hash_dim = 0;
  EXPECT_HGF_ERROR(fit_text_predictor(train, cfg), ErrorKind::kValidation);
  cfg.features.hash_dim = 64;
  EXPECT_HGF_ERROR(fit_text_predictor({}, cfg), ErrorKind::kPrecondition);
}

TEST(Featurizer, OrderedSegmentsAndUnitNorm) {
  TextFeaturizerConfig cfg;
  cfg.pair_features = false;
  const auto a = featurize(cfg, to_input(ex(true, false, false, "one two", "three four")));
  const auto b = featurize(cfg, to_input(ex(true, false, false, "three four", "one two")));
  EXPECT_NE(a.index, b.index);  // x and x' are tagged differently
  double n = 0;
  for (double v : a.value) n += v * v;
  EXPECT_NEAR(n, 1.0, 1e-12);
  EXPECT_TRUE(std::is_sorted(a.index.begin(), a.index.end()));
  const auto c = featurize(cfg, to_input(ex(false, false, false, "one two", "three four")));
  EXPECT_NE(a.index, c.index);  // correctness token differs
}

TEST(Predictor, OutputsInUnitIntervalForRandomStrings) {
  std::vector<GeneralizationExample> train;
  Rng rng(8);
  auto random_text = [&](std::size_t len) {
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s.push_back(static_cast<char>(1 + rng.uniform_index(255)));
    return s;
  };
  for (int i = 0; i < 200; ++i) train.push_back(ex(rng.bernoulli(0.5), rng.bernoulli(0.5), rng.bernoulli(0.3), random_text(40), random_text(40)));
  TextTrainConfig cfg;
  cfg.learning_rate = 50.0;  // deliberately large weights
  const Predictor text = fit_text_predictor(train, cfg);
  const Predictor base = fit_baseline_sametask(train);
  for (int i = 0; i < 1000; ++i) {
    const auto e = ex(rng.bernoulli(0.5), rng.bernoulli(0.5), false, random_text(rng.uniform_index(300)), random_text(rng.uniform_index(300)));
    for (const Predictor* p : {&text, &base}) {
      const double v = p->predict(to_input(e));
      ASSERT_TRUE(std::isfinite(v));
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(ExternalScores, LookupFallbackAndValidation) {
  const std::vector<Json> rows = {{{"x_id", "a"}, {"xprime_id", "b"}, {"shown_correct", 1}, {"p_change", 0.625}},
                                  {{"x_id", "a"}, {"xprime_id", "b"}, {"shown_correct", 0}, {"p_change", 0.0}}};
  const Predictor p = load_external_scores(rows, {});
  PairInput in{"a", "b", "", "", true, false};
  EXPECT_EQ(p.predict(in), 0.625);
  in.shown_correct = false;
  EXPECT_EQ(p.predict(in), 0.0);
  in.x_id = "zz";
  EXPECT_HGF_ERROR(p.predict(in), ErrorKind::kNotFound);
  const Predictor q = load_external_scores(rows, ExternalScoresConfig{0.5});
  EXPECT_EQ(q.predict(in), 0.5);

  EXPECT_HGF_ERROR(load_external_scores({{{"x_id", "a"}, {"xprime_id", "b"}, {"shown_correct", 1}, {"p_change", 1.3}}}, {}),
                   ErrorKind::kValidation);
  EXPECT_HGF_ERROR(load_external_scores({rows[0], rows[0]}, {}), ErrorKind::kConflict);
  std::istringstream bad("{\"x_id\":\"a\",\"xprime_id\":\"b\",\"shown_correct\":1,\"p_change\":-0.1}\n");
  EXPECT_HGF_ERROR(load_external_scores(bad, {}), ErrorKind::kValidation);
}

TEST(Snapshot, RoundTripsExactlyForEveryKind) {
  test::TempDir dir;
  std::vector<GeneralizationExample> train;
  Rng rng(12);
  for (int i = 0; i < 300; ++i) {
    train.push_back(ex(rng.bernoulli(0.5), rng.bernoulli(0.5), rng.bernoulli(0.4),
                       "word" + std::to_string(rng.uniform_index(20)), "term" + std::to_string(rng.uniform_index(20))));
  }
  TextTrainConfig cfg;
  cfg.features.hash_dim = 4096;
  cfg.ensemble = 2;
  std::vector<Predictor> ps = {fit_baseline_prevcorrect(train), fit_baseline_sametask(train),
                               fit_text_predictor(train, cfg),
                               load_external_scores({{{"x_id", "x"}, {"xprime_id", "xp"}, {"shown_correct", 1}, {"p_change", 0.3}}},
                                                    ExternalScoresConfig{0.1})};
  for (const auto& p : ps) {
    const std::string path = dir.file(std::string(to_string(p.kind())) + ".json");
    save_snapshot(path, p);
    const Predictor back = load_snapshot(path);
    EXPECT_EQ(back.kind(), p.kind());
    EXPECT_EQ(back.snapshot(), p.snapshot());
    for (const auto& e : train) EXPECT_EQ(back.predict(to_input(e)), p.predict(to_input(e)));
  }
  Json bad = ps[0].snapshot();
  bad["version"] = 99;
  EXPECT_HGF_ERROR(Predictor::from_snapshot(bad), ErrorKind::kValidation);
  EXPECT_HGF_ERROR(load_snapshot(dir.file("missing.json")), ErrorKind::kIo);
}

TEST(PairScore, IsMaxOverCorrectness) {
  std::vector<GeneralizationExample> data;
  append(data, cell(100, 20, true, false));
  append(data, cell(100, 60, false, false));
  const Predictor p = fit_baseline_prevcorrect(data);
  PairInput in{"a", "b", "t", "u", true, false};
  EXPECT_EQ(p.pair_score(in), std::max(p_of(p, true), p_of(p, false)));
}

}  // namespace
}  // namespace hgf
