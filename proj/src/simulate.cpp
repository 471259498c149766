#include "hgf/simulate.hpp"

#include <atomic>
#include <memory>

#include "hgf/error.hpp"

namespace hgf {

Clock logical_clock(std::int64_t start_ms) {
  auto tick = std::make_shared<std::atomic<std::int64_t>>(0);
  return [tick, start_ms] { return start_ms + 1000 * tick->fetch_add(1); };
}

SyntheticCorpusConfig synthetic_corpus_config_from_json(const Json& j) {
  SyntheticCorpusConfig c;
  try {
    c.n_tasks = j.value("n_tasks", c.n_tasks);
    c.questions_per_task = j.value("questions_per_task", c.questions_per_task);
    c.filler_words = j.value("filler_words", c.filler_words);
    c.seed = j.value("seed", c.seed);
    for (const Json& m : j.value("models", Json::array())) {
      SyntheticModelSpec spec;
      spec.model_id = m.at("model_id").get<std::string>();
      spec.accuracy = m.value("accuracy", spec.accuracy);
      if (m.contains("subset_of") && m["subset_of"].is_string()) spec.subset_of = m["subset_of"].get<std::string>();
      c.models.push_back(std::move(spec));
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::kValidation, std::string("synthetic corpus config: ") + e.what());
  }
  return c;
}

namespace {

// Returns false when the session ended early (failed check or abandoned).
bool run_respondent(SurveyService& service, const SyntheticOracle& oracle, const std::string& respondent,
                    const SimulationConfig& config, Rng& rng, std::size_t& sessions) {
  const Corpus& corpus = service.corpus();
  const Session session = service.create_session(respondent);
  ++sessions;
  std::vector<std::string> answers;
  for (const auto& item : service.config().comprehension) answers.push_back(item.answer);
  if (config.comprehension_fail_rate > 0 && rng.bernoulli(config.comprehension_fail_rate)) {
    answers.front() += " (wrong)";
  }
  if (!service.submit_comprehension(session.session_id, answers)) return false;

  std::size_t stop_after = kPairsPerSession;
  if (config.abandon_rate > 0 && rng.bernoulli(config.abandon_rate)) {
    stop_after = rng.uniform_index(kPairsPerSession);
  }
  for (std::size_t i = 0; i < stop_after; ++i) {
    const Session s = service.session(session.session_id);
    const SessionItem& item = s.items.at(s.cursor);
    const Question& x = corpus.question(item.pair.target);
    const Question& xp = corpus.question(item.pair.shown);
    const int prior = oracle.sample_prior_percent(x, rng);
    service.record_belief(session.session_id, prior);
    const int posterior = oracle.sample_posterior_percent(x, xp, prior, item.shown_correct, rng);
    service.record_belief(session.session_id, posterior);
  }
  return stop_after == kPairsPerSession;
}

}  // namespace

SimulationResult run_simulation(SurveyService& service, std::span<const SyntheticOracle> population,
                                const SimulationConfig& config) {
  if (population.empty()) fail(ErrorKind::kPrecondition, "simulation needs a non-empty population");
  if (config.n_stages == 0) fail(ErrorKind::kValidation, "simulation needs at least one stage");
  if (config.abandon_rate >= 1.0 || config.comprehension_fail_rate >= 1.0) {
    fail(ErrorKind::kValidation, "abandon and failure rates must be below 1");
  }
  SimulationResult result;
  const std::size_t quota = service.config().stage_quota;
  while (true) {
    const int stage = service.current_stage_index();
    std::size_t k = 0;
    while (service.stage_report_count(stage) < quota) {
      const std::string respondent = "sim-s" + std::to_string(stage) + "-r" + std::to_string(k);
      Rng rng(derive_seed(config.seed, (static_cast<std::uint64_t>(stage) << 32) | k));
      run_respondent(service, population[k % population.size()], respondent, config, rng, result.sessions);
      ++k;
    }
    if (static_cast<std::size_t>(stage) + 1 >= config.n_stages) break;
    service.advance_stage(&result.warnings);
  }
  result.stages = service.stages();
  result.reports = service.reports();
  return result;
}

std::vector<GeneralizationExample> label_test_pairs(const Corpus& corpus,
                                                    std::span<const Assignment> pairs,
                                                    std::span<const SyntheticOracle> population,
                                                    std::size_t responses_per_pair, Rng& rng) {
  if (responses_per_pair > population.size()) {
    fail(ErrorKind::kPrecondition, "population of " + std::to_string(population.size()) +
                                       " cannot give " + std::to_string(responses_per_pair) +
                                       " distinct responses per pair");
  }
  std::vector<std::size_t> order(population.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<GeneralizationExample> out;
  out.reserve(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const Assignment& a = pairs[p];
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<BeliefReport> reports;
    const Question& x = corpus.question(a.pair.target);
    const Question& xp = corpus.question(a.pair.shown);
    for (std::size_t r = 0; r < responses_per_pair; ++r) {
      const auto& oracle = population[order[r]];
      reports.push_back(respond(oracle, x, xp, a.shown_correct, rng,
                                {"test-" + std::to_string(p) + "-" + std::to_string(r),
                                 "pop-" + std::to_string(order[r]), 0, 0}));
    }
    const bool label = aggregate_majority(reports, responses_per_pair, x.question_id + "/" + xp.question_id);
    out.push_back(make_example(corpus, a.pair, a.shown_correct, label));
  }
  return out;
}

}  // namespace hgf
