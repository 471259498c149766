#include <gtest/gtest.h>

#include <atomic>
#include <sstream>
#include <thread>

#include "hgf/simulate.hpp"
#include "hgf/survey.hpp"
#include "test_util.hpp"

namespace hgf {
namespace {

Corpus small_corpus() {
  SyntheticCorpusConfig cc;
  cc.n_tasks = 4;
  cc.questions_per_task = 10;
  cc.models = {{"ref", 0.6, std::nullopt}};
  cc.seed = 11;
  return make_synthetic_corpus(cc);
}

SurveyConfig small_config() {
  SurveyConfig c;
  c.stage_quota = 30;
  c.stage_assignments = 40;
  c.policy.pool_size = 600;
  c.predictor.epochs = 5;
  c.reference_model = "ref";
  c.seed = 5;
  return c;
}

std::vector<std::string> right_answers(const SurveyService& s) {
  std::vector<std::string> a;
  for (const auto& i : s.config().comprehension) a.push_back(i.answer);
  return a;
}

void collect_strings(const Json& j, std::vector<std::string>& out) {
  if (j.is_string()) out.push_back(j.get<std::string>());
  if (j.is_structured()) {
    for (const auto& [k, v] : j.items()) {
      out.push_back(k);
      collect_strings(v, out);
    }
  }
}

// Asserts the payload carries nothing about x'.
void expect_no_leak(const Corpus& c, const Session& s, const Json& payload) {
  EXPECT_FALSE(payload.contains("shown"));
  EXPECT_FALSE(payload.contains("prior"));
  const Question& xp = c.question(s.items.at(s.cursor).pair.shown);
  std::vector<std::string> strings;
  collect_strings(payload, strings);
  for (const auto& str : strings) {
    EXPECT_NE(str, xp.question_id);
    EXPECT_NE(str, xp.text);
    EXPECT_NE(str, "correct");
    EXPECT_NE(str, "response_text");
    if (xp.choices) {
      for (const auto& ch : *xp.choices) {
        if (ch.text != c.question(s.items.at(s.cursor).pair.target).text) EXPECT_NE(str, ch.text);
      }
    }
  }
}

// Completes `n_pairs` pairs of the session with fixed readings.
void answer_pairs(SurveyService& svc, const std::string& sid, std::size_t n_pairs, int prior = 50,
                  int posterior = 70) {
  for (std::size_t i = 0; i < n_pairs; ++i) {
    expect_no_leak(svc.corpus(), svc.session(sid), svc.next_item(sid));
    svc.record_belief(sid, prior);
    svc.record_belief(sid, posterior);
  }
}

std::string full_session(SurveyService& svc, const std::string& respondent) {
  const auto s = svc.create_session(respondent);
  EXPECT_TRUE(svc.submit_comprehension(s.session_id, right_answers(svc)));
  answer_pairs(svc, s.session_id, kPairsPerSession);
  return s.session_id;
}

TEST(SurveyConfig, JsonRoundTripAndValidation) {
  const auto c = small_config();
  EXPECT_EQ(survey_config_to_json(survey_config_from_json(survey_config_to_json(c))), survey_config_to_json(c));
  EXPECT_EQ(survey_config_from_json(Json::object()).stage_quota, 400u);
  EXPECT_EQ(default_comprehension_items().size(), 2u);
  EXPECT_HGF_ERROR(survey_config_from_json(Json{{"stage_assignments", 14}}), ErrorKind::kValidation);
  EXPECT_HGF_ERROR(survey_config_from_json(Json{{"responses_per_pair", 0}}), ErrorKind::kValidation);
  EXPECT_HGF_ERROR(survey_config_from_json(Json{{"policy", {{"epsilon", 2}}}}), ErrorKind::kValidation);
  EXPECT_HGF_ERROR(survey_config_from_json(Json{{"comprehension", Json::array()}}), ErrorKind::kValidation);
  EXPECT_HGF_ERROR(survey_config_from_json(Json{{"stage_quota", "many"}}), ErrorKind::kValidation);
}

TEST(PlanStage, StageZeroIsUniformAndDeterministic) {
  const auto c = small_corpus();
  const auto cfg = small_config();
  const auto a = plan_stage(c, {}, 0, cfg, {});
  const auto b = plan_stage(c, {}, 0, cfg, {});
  EXPECT_EQ(stage_manifest(a, c), stage_manifest(b, c));
  EXPECT_EQ(a.assignments.size(), 40u);
  EXPECT_EQ(a.policy.epsilon, 1.0);
  std::set<QuestionPair> used;
  for (const auto& x : a.assignments) {
    used.insert(x.pair);
    EXPECT_EQ(x.shown_correct, c.response("ref", x.pair.shown)->correct);
  }
  Warnings w;
  const auto d = plan_stage(c, {}, 1, cfg, used, &w);
  EXPECT_FALSE(w.empty());  // no training data
  for (const auto& x : d.assignments) EXPECT_FALSE(used.count(x.pair));
}

TEST(Session, LifecycleAndCompletion) {
  const auto c = small_corpus();
  SurveyService svc(c, small_config());
  EXPECT_HGF_ERROR(svc.create_session(""), ErrorKind::kValidation);
  const auto s = svc.create_session("alice");
  EXPECT_EQ(s.state, SessionState::kComprehension);
  EXPECT_HGF_ERROR(svc.create_session("alice"), ErrorKind::kConflict);
  EXPECT_HGF_ERROR(svc.next_item(s.session_id), ErrorKind::kState);
  EXPECT_HGF_ERROR(svc.record_belief(s.session_id, 50), ErrorKind::kState);
  EXPECT_HGF_ERROR(svc.submit_comprehension(s.session_id, {"x"}), ErrorKind::kValidation);
  EXPECT_TRUE(svc.submit_comprehension(s.session_id, right_answers(svc)));
  EXPECT_HGF_ERROR(svc.submit_comprehension(s.session_id, right_answers(svc)), ErrorKind::kState);

  const Json first = svc.next_item(s.session_id);
  EXPECT_EQ(first["phase"], "AWAITING_PRIOR");
  EXPECT_EQ(first["index"], 0);
  EXPECT_EQ(first["total"], 15);
  expect_no_leak(c, svc.session(s.session_id), first);
  EXPECT_HGF_ERROR(svc.record_belief(s.session_id, 101), ErrorKind::kValidation);
  EXPECT_HGF_ERROR(svc.record_belief(s.session_id, -1), ErrorKind::kValidation);
  EXPECT_HGF_ERROR(svc.record_belief(s.session_id, 40, std::string("because")), ErrorKind::kValidation);
  const auto r1 = svc.record_belief(s.session_id, 40);
  EXPECT_EQ(r1.phase, PairPhase::kAwaitingPosterior);
  EXPECT_FALSE(r1.report);

  const Json second = svc.next_item(s.session_id);
  EXPECT_EQ(second["phase"], "AWAITING_POSTERIOR");
  EXPECT_EQ(second["prior"], 40);
  const SessionItem item = svc.session(s.session_id).items[0];
  EXPECT_EQ(second["shown"]["question_id"], c.question(item.pair.shown).question_id);
  EXPECT_EQ(second["shown"]["correct"], item.shown_correct);
  EXPECT_EQ(second["question"]["question_id"], first["question"]["question_id"]);
  EXPECT_FALSE(second["question"].contains("answer_key"));

  const auto r2 = svc.record_belief(s.session_id, 90, std::string("saw it"));
  ASSERT_TRUE(r2.report);
  EXPECT_EQ(r2.report->prior_percent, 40);
  EXPECT_EQ(r2.report->posterior_percent, 90);
  EXPECT_EQ(r2.report->explanation, "saw it");
  EXPECT_EQ(r2.report->report_id, s.session_id + "-1");

  answer_pairs(svc, s.session_id, kPairsPerSession - 2);
  EXPECT_EQ(svc.session(s.session_id).state, SessionState::kActive);
  svc.record_belief(s.session_id, 10);
  const auto last = svc.record_belief(s.session_id, 10);
  EXPECT_EQ(last.state, SessionState::kComplete);
  ASSERT_TRUE(last.completion_code);
  EXPECT_EQ(last.completion_code->size(), 10u);
  EXPECT_HGF_ERROR(svc.next_item(s.session_id), ErrorKind::kExhausted);
  EXPECT_HGF_ERROR(svc.record_belief(s.session_id, 10), ErrorKind::kState);
  EXPECT_EQ(svc.reports(ExportFilter{std::nullopt, std::string("alice")}).size(), 15u);
  EXPECT_HGF_ERROR(svc.create_session("alice"), ErrorKind::kConflict);
  EXPECT_HGF_ERROR(svc.session("nope"), ErrorKind::kNotFound);

  std::set<QuestionPair> pairs;
  for (const auto& it : svc.session(s.session_id).items) pairs.insert(it.pair);
  EXPECT_EQ(pairs.size(), 15u);
}

TEST(Session, FailedComprehensionYieldsNoReports) {
  const auto c = small_corpus();
  auto cfg = small_config();
  cfg.allow_repeat_respondents = true;
  SurveyService svc(c, cfg);
  const auto s = svc.create_session("bob");
  EXPECT_FALSE(svc.submit_comprehension(s.session_id, {"wrong", "wrong"}));
  EXPECT_EQ(svc.session(s.session_id).state, SessionState::kFailed);
  EXPECT_HGF_ERROR(svc.next_item(s.session_id), ErrorKind::kState);
  EXPECT_TRUE(svc.reports().empty());
  const auto retry = svc.create_session("bob");  // repeats allowed by config
  EXPECT_NE(retry.session_id, s.session_id);
}

TEST(Session, AssignmentsSpreadLeastServedFirst) {
  const auto c = small_corpus();
  SurveyService svc(c, small_config());
  std::set<std::size_t> first, second;
  const auto a = svc.create_session("a");
  svc.submit_comprehension(a.session_id, right_answers(svc));
  const auto b = svc.create_session("b");
  svc.submit_comprehension(b.session_id, right_answers(svc));
  for (const auto& i : svc.session(a.session_id).items) first.insert(i.assignment);
  for (const auto& i : svc.session(b.session_id).items) second.insert(i.assignment);
  for (auto i : second) EXPECT_FALSE(first.count(i));
}

TEST(Stages, QuotaGatesAdvanceAndPartialSessionsDoNotCount) {
  const auto c = small_corpus();
  SurveyService svc(c, small_config());
  EXPECT_HGF_ERROR(svc.advance_stage(), ErrorKind::kConflict);
  full_session(svc, "r1");
  const auto partial = svc.create_session("r2");
  svc.submit_comprehension(partial.session_id, right_answers(svc));
  answer_pairs(svc, partial.session_id, 14);
  EXPECT_EQ(svc.stage_report_count(0), 15u);
  EXPECT_EQ(svc.training_reports().size(), 15u);
  EXPECT_HGF_ERROR(svc.advance_stage(), ErrorKind::kConflict);
  full_session(svc, "r3");
  const Json cur = svc.current_stage_json();
  EXPECT_EQ(cur["reports_collected"], 30);
  EXPECT_EQ(cur["quota"], 30);
  const Stage next = svc.advance_stage();
  EXPECT_EQ(next.index, 1);
  EXPECT_EQ(svc.current_stage_index(), 1);
  EXPECT_EQ(next.assignments.size(), 40u);
  // The partial session can still finish; its reports stay in stage 0.
  answer_pairs(svc, partial.session_id, 1);
  EXPECT_EQ(svc.session(partial.session_id).state, SessionState::kComplete);
  EXPECT_EQ(svc.stage_report_count(0), 45u);
  const auto s = svc.create_session("r4");
  svc.submit_comprehension(s.session_id, right_answers(svc));
  EXPECT_EQ(svc.session(s.session_id).stage, 1);
  for (const auto& st : svc.stages()) {
    for (const auto& r : st.reports) EXPECT_EQ(r.stage, st.index);
  }
}

TEST(Stages, ConcurrentAdvanceHasOneWinner) {
  const auto c = small_corpus();
  SurveyService svc(c, small_config());
  full_session(svc, "r1");
  full_session(svc, "r2");
  std::atomic<int> ok{0}, refused{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      try {
        svc.advance_stage();
        ++ok;
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::kLocked || e.kind() == ErrorKind::kConflict) ++refused;
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 1);
  EXPECT_EQ(refused.load(), 3);
  EXPECT_EQ(svc.current_stage_index(), 1);
}

TEST(Export, FiltersAndRoundTrip) {
  const auto c = small_corpus();
  SurveyService svc(c, small_config());
  EXPECT_EQ(svc.export_reports(), "");
  full_session(svc, "r1");
  full_session(svc, "r2");
  svc.advance_stage();
  full_session(svc, "r3");
  EXPECT_EQ(svc.reports().size(), 45u);
  EXPECT_EQ(svc.reports({0, std::nullopt}).size(), 30u);
  EXPECT_EQ(svc.reports({1, std::nullopt}).size(), 15u);
  EXPECT_EQ(svc.reports({0, std::string("r3")}).size(), 0u);
  EXPECT_EQ(svc.reports({std::nullopt, std::string("r3")}).size(), 15u);
  EXPECT_EQ(svc.reports({7, std::nullopt}).size(), 0u);
  const std::string text = svc.export_reports();
  std::istringstream in(text);
  const auto parsed = read_reports(in);
  std::ostringstream out;
  write_reports(out, parsed);
  EXPECT_EQ(out.str(), text);
}

TEST(Replay, RestartRebuildsIdenticalState) {
  const auto c = small_corpus();
  test::TempDir dir;
  std::string export_before, stage_before, partial_id;
  std::size_t events_before = 0;
  {
    SurveyService svc(c, small_config(), dir.path().string(), logical_clock());
    full_session(svc, "r1");
    full_session(svc, "r2");
    svc.advance_stage();
    const auto p = svc.create_session("r3");
    partial_id = p.session_id;
    svc.submit_comprehension(p.session_id, right_answers(svc));
    answer_pairs(svc, p.session_id, 3);
    svc.record_belief(p.session_id, 33);
    export_before = svc.export_reports();
    stage_before = svc.current_stage_json().dump();
    events_before = svc.events().size();
  }
  SurveyService again(c, small_config(), dir.path().string(), logical_clock(5));
  EXPECT_EQ(again.export_reports(), export_before);
  EXPECT_EQ(again.current_stage_json().dump(), stage_before);
  EXPECT_EQ(again.events().size(), events_before);
  const Json view = again.next_item(partial_id);
  EXPECT_EQ(view["phase"], "AWAITING_POSTERIOR");
  EXPECT_EQ(view["prior"], 33);
  EXPECT_EQ(view["index"], 3);
  EXPECT_HGF_ERROR(again.create_session("r1"), ErrorKind::kConflict);
  EXPECT_EQ(again.create_session("r9").session_id, "s000004");
}

TEST(Simulation, DeterministicAndWellFormed) {
  const auto c = small_corpus();
  std::vector<std::string> ids;
  for (const auto& t : c.tasks()) ids.push_back(t.task_id);
  auto oc = block_oracle_config(ids, 2, 0.4, 0.0);
  oc.population_size = 10;
  Rng prng(1);
  const auto pop = make_population(oc, prng);
  SimulationConfig sc{3, 0.2, 0.1, 9};
  auto run = [&] {
    SurveyService svc(c, small_config(), {}, logical_clock());
    const auto result = run_simulation(svc, pop, sc);
    return std::make_pair(svc.export_reports(), result);
  };
  const auto [text1, r1] = run();
  const auto [text2, r2] = run();
  EXPECT_EQ(text1, text2);
  ASSERT_EQ(r1.stages.size(), 3u);
  EXPECT_EQ(r1.sessions, r2.sessions);
  std::map<std::string, int> per_respondent;
  for (const auto& r : r1.reports) ++per_respondent[r.respondent_id];
  for (const auto& [id, n] : per_respondent) EXPECT_LE(n, 15) << id;
  EXPECT_GT(r1.sessions, per_respondent.size());  // some failed the check
}

TEST(Simulation, CompleteSessionsHaveFifteenReports) {
  const auto c = small_corpus();
  std::vector<std::string> ids;
  for (const auto& t : c.tasks()) ids.push_back(t.task_id);
  auto oc = block_oracle_config(ids, 2, 0.4, 0.0);
  oc.population_size = 4;
  Rng prng(2);
  const auto pop = make_population(oc, prng);
  SurveyService svc(c, small_config(), {}, logical_clock());
  run_simulation(svc, pop, {2, 0.3, 0.2, 4});
  std::map<std::string, std::size_t> counts;
  for (const auto& r : svc.reports()) ++counts[r.report_id.substr(0, r.report_id.find('-'))];
  for (std::uint64_t i = 1;; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(i));
    Session s;
    try {
      s = svc.session(buf);
    } catch (const Error&) {
      break;
    }
    if (s.state == SessionState::kComplete) EXPECT_EQ(counts[buf], 15u) << buf;
    if (s.state == SessionState::kFailed) EXPECT_EQ(counts[buf], 0u) << buf;
    if (s.state == SessionState::kActive) EXPECT_LT(counts[buf], 15u) << buf;
  }
  EXPECT_THROW(run_simulation(svc, {}, {}), Error);
}

TEST(LabelTestPairs, MajorityFromDistinctRespondents) {
  const auto c = small_corpus();
  std::vector<std::string> ids;
  for (const auto& t : c.tasks()) ids.push_back(t.task_id);
  auto oc = block_oracle_config(ids, 1, 1.0, 0.0);
  oc.population_size = 8;
  oc.noise = 0.0;
  Rng prng(3);
  const auto pop = make_population(oc, prng);
  const std::vector<Assignment> pairs = {{{0, 1}, true, 0, 0.0}, {{0, 35}, true, 1, 0.0}};
  Rng rng(4);
  const auto ex = label_test_pairs(c, pairs, pop, 8, rng);
  ASSERT_EQ(ex.size(), 2u);
  EXPECT_TRUE(ex[0].label_changed);   // same task: similarity 1
  EXPECT_FALSE(ex[1].label_changed);  // different task: similarity 0
  EXPECT_HGF_ERROR(label_test_pairs(c, pairs, pop, 9, rng), ErrorKind::kPrecondition);
}

}  // namespace
}  // namespace hgf
