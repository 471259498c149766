#include "hgf/survey.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "hgf/error.hpp"

namespace hgf {

std::vector<ComprehensionItem> default_comprehension_items() {
  return {
      {"You will first see one question and report how likely you think the AI system is to answer it "
       "correctly. What do you see next?",
       {"The AI system's answer to a different question", "The correct answer to the first question"},
       "The AI system's answer to a different question"},
      {"After seeing the AI system's answer to another question, what should you do?",
       {"Update your prediction for the first question if you want to", "Answer the first question yourself"},
       "Update your prediction for the first question if you want to"},
  };
}

namespace {

Json policy_json(const SamplingPolicy& p) {
  return {{"epsilon", p.epsilon}, {"greedy_percentile", p.greedy_percentile}, {"pool_size", p.pool_size}};
}

}  // namespace

Json survey_config_to_json(const SurveyConfig& c) {
  Json items = Json::array();
  for (const auto& i : c.comprehension) {
    items.push_back({{"prompt", i.prompt}, {"choices", i.choices}, {"answer", i.answer}});
  }
  return {{"stage_quota", c.stage_quota},
          {"stage_assignments", c.stage_assignments},
          {"responses_per_pair", c.responses_per_pair},
          {"policy", policy_json(c.policy)},
          {"predictor",
           {{"hash_dim", c.predictor.features.hash_dim},
            {"word_ngrams", c.predictor.features.word_ngrams},
            {"char_ngrams", c.predictor.features.char_ngrams},
            {"pair_features", c.predictor.features.pair_features},
            {"l2", c.predictor.l2},
            {"epochs", c.predictor.epochs},
            {"learning_rate", c.predictor.learning_rate},
            {"ensemble", c.predictor.ensemble}}},
          {"reference_model", c.reference_model ? Json(*c.reference_model) : Json(nullptr)},
          {"allow_repeat_respondents", c.allow_repeat_respondents},
          {"include_partial_sessions", c.include_partial_sessions},
          {"dedupe_pairs_across_stages", c.dedupe_pairs_across_stages},
          {"disclose_ai_source", c.disclose_ai_source},
          {"comprehension", items},
          {"seed", c.seed}};
}

SurveyConfig survey_config_from_json(const Json& j) {
  SurveyConfig c;
  try {
    c.stage_quota = j.value("stage_quota", c.stage_quota);
    c.stage_assignments = j.value("stage_assignments", c.stage_assignments);
    c.responses_per_pair = j.value("responses_per_pair", c.responses_per_pair);
    if (j.contains("policy")) {
      const Json& p = j["policy"];
      c.policy.epsilon = p.value("epsilon", c.policy.epsilon);
      c.policy.greedy_percentile = p.value("greedy_percentile", c.policy.greedy_percentile);
      c.policy.pool_size = p.value("pool_size", c.policy.pool_size);
    }
    if (j.contains("predictor")) {
      const Json& p = j["predictor"];
      auto& f = c.predictor.features;
      f.hash_dim = p.value("hash_dim", f.hash_dim);
      f.word_ngrams = p.value("word_ngrams", f.word_ngrams);
      f.char_ngrams = p.value("char_ngrams", f.char_ngrams);
      f.pair_features = p.value("pair_features", f.pair_features);
      c.predictor.l2 = p.value("l2", c.predictor.l2);
      c.predictor.epochs = p.value("epochs", c.predictor.epochs);
      c.predictor.learning_rate = p.value("learning_rate", c.predictor.learning_rate);
      c.predictor.ensemble = p.value("ensemble", c.predictor.ensemble);
    }
    if (j.contains("reference_model") && j["reference_model"].is_string()) {
      c.reference_model = j["reference_model"].get<std::string>();
    }
    c.allow_repeat_respondents = j.value("allow_repeat_respondents", c.allow_repeat_respondents);
    c.include_partial_sessions = j.value("include_partial_sessions", c.include_partial_sessions);
    c.dedupe_pairs_across_stages = j.value("dedupe_pairs_across_stages", c.dedupe_pairs_across_stages);
    c.disclose_ai_source = j.value("disclose_ai_source", c.disclose_ai_source);
    if (j.contains("comprehension")) {
      c.comprehension.clear();
      for (const Json& i : j["comprehension"]) {
        c.comprehension.push_back({i.at("prompt").get<std::string>(),
                                   i.value("choices", std::vector<std::string>{}),
                                   i.at("answer").get<std::string>()});
      }
    }
    c.seed = j.value("seed", c.seed);
  } catch (const Json::exception& e) {
    fail(ErrorKind::kValidation, std::string("survey config: ") + e.what());
  }
  validate(c.policy);
  if (c.comprehension.size() != 2) fail(ErrorKind::kValidation, "survey config: exactly two comprehension items required");
  if (c.stage_assignments < kPairsPerSession) {
    fail(ErrorKind::kValidation, "survey config: stage_assignments must be at least 15");
  }
  if (c.responses_per_pair == 0) fail(ErrorKind::kValidation, "survey config: responses_per_pair must be >= 1");
  return c;
}

Stage plan_stage(const Corpus& corpus, std::span<const BeliefReport> training, int index,
                 const SurveyConfig& config, const std::set<QuestionPair>& used_pairs,
                 Warnings* warnings) {
  const auto base = static_cast<std::uint64_t>(index) * 3;
  Rng pool_rng(derive_seed(config.seed, base));
  Rng pick_rng(derive_seed(config.seed, base + 1));
  Rng correct_rng(derive_seed(config.seed, base + 2));

  bool two_classes = false;
  if (!training.empty()) {
    const bool first = label_changed(training.front());
    two_classes = std::any_of(training.begin(), training.end(),
                              [&](const BeliefReport& r) { return label_changed(r) != first; });
  }

  Stage stage;
  stage.index = index;
  stage.policy = config.policy;
  std::vector<ScoredPair> ranked;
  if (index == 0 || !two_classes) {
    if (index > 0 && warnings) {
      warnings->push_back("training reports contain a single class; stage sampled uniformly");
    }
    for (const auto& p : sample_candidate_pairs(corpus, config.policy.pool_size, pool_rng, warnings)) {
      ranked.push_back({p, 0.0});
    }
    stage.policy.epsilon = 1.0;
  } else {
    TextTrainConfig tc = config.predictor;
    tc.seed = derive_seed(config.seed, 0x5EED0000ULL + static_cast<std::uint64_t>(index));
    const auto examples = examples_from_reports(corpus, training);
    const Predictor predictor = fit_text_predictor(examples, tc);
    ranked = score_pool(predictor, corpus, config.policy.pool_size, pool_rng, warnings);
  }
  stage.ranked_pool_size = ranked.size();
  const auto picks = sample_stage(ranked, stage.policy, config.stage_assignments, pick_rng, warnings,
                                  config.dedupe_pairs_across_stages ? &used_pairs : nullptr);
  stage.assignments = assign_correctness(corpus, config.reference_model, picks, correct_rng);
  return stage;
}

const char* to_string(SessionState s) {
  switch (s) {
    case SessionState::kComprehension: return "COMPREHENSION";
    case SessionState::kActive: return "ACTIVE";
    case SessionState::kComplete: return "COMPLETE";
    case SessionState::kFailed: return "FAILED";
  }
  return "FAILED";
}

const char* to_string(PairPhase p) {
  switch (p) {
    case PairPhase::kAwaitingPrior: return "AWAITING_PRIOR";
    case PairPhase::kAwaitingPosterior: return "AWAITING_POSTERIOR";
    case PairPhase::kDone: return "DONE";
  }
  return "DONE";
}

Json session_to_json(const Session& s) {
  Json j = {{"session_id", s.session_id},
            {"respondent_id", s.respondent_id},
            {"state", to_string(s.state)},
            {"stage", s.stage},
            {"progress", s.cursor},
            {"total", kPairsPerSession}};
  if (s.state == SessionState::kActive && s.cursor < s.items.size()) {
    j["phase"] = to_string(s.items[s.cursor].phase);
  }
  if (s.completion_code) j["completion_code"] = *s.completion_code;
  return j;
}

Clock system_clock_ms() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

namespace {

std::string completion_code_for(std::uint64_t seed, const std::string& session_id) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : session_id) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llX", static_cast<unsigned long long>(derive_seed(seed, h)));
  return std::string(buf).substr(0, 10);
}

Json question_view(const Question& q) {
  Json j = {{"question_id", q.question_id}, {"text", q.text}};
  if (q.choices) {
    Json cs = Json::array();
    for (const auto& c : *q.choices) cs.push_back({{"label", c.label}, {"text", c.text}});
    j["choices"] = std::move(cs);
  }
  return j;
}

}  // namespace

SurveyService::SurveyService(const Corpus& corpus, SurveyConfig config, const std::string& data_dir,
                             Clock clock, bool sync_writes)
    : corpus_(corpus), config_(std::move(config)), clock_(std::move(clock)) {
  validate(config_.policy);
  if (config_.comprehension.size() != 2) {
    fail(ErrorKind::kValidation, "exactly two comprehension items required");
  }
  if (config_.stage_assignments < kPairsPerSession) {
    fail(ErrorKind::kValidation, "stage_assignments must be at least 15");
  }
  if (!data_dir.empty()) {
    std::filesystem::create_directories(data_dir);
    log_ = EventLog((std::filesystem::path(data_dir) / "events.jsonl").string(), sync_writes);
  }
  for (const auto& e : log_.events()) apply(e);
  if (stages_.empty()) {
    const Stage first = plan_stage(corpus_, {}, 0, config_, used_pairs_);
    std::lock_guard lock(mu_);
    commit("stage_opened", stage_manifest(first, corpus_));
  }
}

const EventRecord& SurveyService::commit(std::string type, Json payload) {
  const EventRecord& e = log_.append(std::move(type), std::move(payload), clock_());
  apply(e);
  return e;
}

void SurveyService::apply(const EventRecord& e) {
  const Json& p = e.payload;
  if (e.type == "stage_opened") {
    Stage s = stage_from_manifest(p, corpus_);
    for (const auto& a : s.assignments) used_pairs_.insert(a.pair);
    served_.emplace_back(s.assignments.size(), 0);
    stages_.push_back(std::move(s));
  } else if (e.type == "session_created") {
    Session s;
    s.session_id = p.at("session_id").get<std::string>();
    s.respondent_id = p.at("respondent_id").get<std::string>();
    respondent_session_[s.respondent_id] = s.session_id;
    sessions_.emplace(s.session_id, std::move(s));
    ++session_counter_;
  } else if (e.type == "comprehension_submitted") {
    Session& s = session_locked(p.at("session_id").get<std::string>());
    if (!p.at("passed").get<bool>()) {
      s.state = SessionState::kFailed;
      return;
    }
    s.stage = p.at("stage").get<int>();
    const Stage& stage = stages_.at(static_cast<std::size_t>(s.stage));
    for (std::size_t idx : p.at("assignments").get<std::vector<std::size_t>>()) {
      const Assignment& a = stage.assignments.at(idx);
      s.items.push_back({idx, a.pair, a.shown_correct, PairPhase::kAwaitingPrior, -1});
      ++served_[static_cast<std::size_t>(s.stage)][idx];
    }
    s.state = SessionState::kActive;
  } else if (e.type == "prior_recorded") {
    Session& s = session_locked(p.at("session_id").get<std::string>());
    SessionItem& item = s.items.at(s.cursor);
    item.prior_percent = p.at("value").get<int>();
    item.phase = PairPhase::kAwaitingPosterior;
  } else if (e.type == "report_recorded") {
    Session& s = session_locked(p.at("session_id").get<std::string>());
    s.items.at(s.cursor).phase = PairPhase::kDone;
    s.report_indices.push_back(reports_.size());
    reports_.push_back(report_from_json(p.at("report")));
    report_session_.push_back(s.session_id);
    ++s.cursor;
    if (s.cursor == s.items.size()) {
      s.state = SessionState::kComplete;
      s.completion_code = completion_code_for(config_.seed, s.session_id);
    }
  } else {
    fail(ErrorKind::kValidation, "unknown event type '" + e.type + "'");
  }
}

Session& SurveyService::session_locked(const std::string& id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) fail(ErrorKind::kNotFound, "unknown session '" + id + "'");
  return it->second;
}

const Session& SurveyService::session_locked(const std::string& id) const {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) fail(ErrorKind::kNotFound, "unknown session '" + id + "'");
  return it->second;
}

Session SurveyService::create_session(const std::string& respondent_id) {
  if (respondent_id.empty()) fail(ErrorKind::kValidation, "respondent_id must be non-empty");
  std::lock_guard lock(mu_);
  auto prev = respondent_session_.find(respondent_id);
  if (prev != respondent_session_.end()) {
    const Session& old = sessions_.at(prev->second);
    if (old.state == SessionState::kComprehension || old.state == SessionState::kActive) {
      fail(ErrorKind::kConflict, "respondent '" + respondent_id + "' already has an active session");
    }
    if (!config_.allow_repeat_respondents) {
      fail(ErrorKind::kConflict, "respondent '" + respondent_id + "' has already taken the survey");
    }
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(session_counter_ + 1));
  const std::string id = buf;
  commit("session_created", {{"session_id", id}, {"respondent_id", respondent_id}});
  return sessions_.at(id);
}

std::vector<std::size_t> SurveyService::choose_assignments_locked() const {
  const auto& served = served_.back();
  std::vector<std::size_t> order(served.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Least-served first, so pairs fill toward their target counts evenly.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return served[a] < served[b]; });
  if (order.size() < kPairsPerSession) {
    fail(ErrorKind::kState, "current stage has fewer than 15 assignments");
  }
  order.resize(kPairsPerSession);
  return order;
}

bool SurveyService::submit_comprehension(const std::string& session_id,
                                         const std::vector<std::string>& answers) {
  std::lock_guard lock(mu_);
  const Session& s = session_locked(session_id);
  if (s.state != SessionState::kComprehension) {
    fail(ErrorKind::kState, std::string("session is ") + to_string(s.state) + ", not COMPREHENSION");
  }
  if (answers.size() != config_.comprehension.size()) {
    fail(ErrorKind::kValidation, "expected " + std::to_string(config_.comprehension.size()) + " answers");
  }
  bool passed = true;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (answers[i] != config_.comprehension[i].answer) passed = false;
  }
  Json payload = {{"session_id", session_id}, {"passed", passed}};
  if (passed) {
    payload["stage"] = static_cast<int>(stages_.size()) - 1;
    payload["assignments"] = choose_assignments_locked();
  }
  commit("comprehension_submitted", std::move(payload));
  return passed;
}

std::string SurveyService::shown_response_text(const SessionItem& item) const {
  if (config_.reference_model) {
    const ModelResponse* r = corpus_.response(*config_.reference_model, item.pair.shown);
    if (r && r->correct == item.shown_correct) return r->response_text;
  }
  const Question& q = corpus_.question(item.pair.shown);
  if (item.shown_correct) return q.answer_key;
  if (q.choices) {
    for (const auto& c : *q.choices) {
      if (c.label != q.answer_key) return c.label;
    }
  }
  return "I am not sure.";
}

Json SurveyService::next_item(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  const Session& s = session_locked(session_id);
  if (s.state == SessionState::kComplete) {
    fail(ErrorKind::kExhausted, "no more items: session is COMPLETE");
  }
  if (s.state != SessionState::kActive) {
    fail(ErrorKind::kState, std::string("session is ") + to_string(s.state) + ", not ACTIVE");
  }
  const SessionItem& item = s.items.at(s.cursor);
  Json view = {{"session_id", s.session_id},
               {"state", to_string(s.state)},
               {"phase", to_string(item.phase)},
               {"index", s.cursor},
               {"total", kPairsPerSession},
               {"source", config_.disclose_ai_source ? "an AI system" : "an AI system or a human"},
               {"question", question_view(corpus_.question(item.pair.target))}};
  if (item.phase == PairPhase::kAwaitingPosterior) {
    Json shown = question_view(corpus_.question(item.pair.shown));
    shown["response_text"] = shown_response_text(item);
    shown["correct"] = item.shown_correct;
    view["shown"] = std::move(shown);
    view["prior"] = item.prior_percent;
  }
  return view;
}

BeliefResult SurveyService::record_belief(const std::string& session_id, int value,
                                          const std::optional<std::string>& explanation) {
  if (value < 0 || value > 100) fail(ErrorKind::kValidation, "belief must be an integer percent in [0,100]");
  std::lock_guard lock(mu_);
  const Session& s = session_locked(session_id);
  if (s.state != SessionState::kActive) {
    fail(ErrorKind::kState, std::string("session is ") + to_string(s.state) + ", not ACTIVE");
  }
  const SessionItem& item = s.items.at(s.cursor);
  if (item.phase == PairPhase::kAwaitingPrior) {
    if (explanation) fail(ErrorKind::kValidation, "explanations are accepted with the posterior only");
    commit("prior_recorded", {{"session_id", session_id}, {"value", value}});
    return {PairPhase::kAwaitingPosterior, SessionState::kActive, std::nullopt, std::nullopt};
  }
  BeliefReport r;
  r.report_id = session_id + "-" + std::to_string(s.cursor + 1);
  r.respondent_id = s.respondent_id;
  r.stage = s.stage;
  r.target_question_id = corpus_.question(item.pair.target).question_id;
  r.shown_question_id = corpus_.question(item.pair.shown).question_id;
  r.shown_correct = item.shown_correct;
  r.prior_percent = item.prior_percent;
  r.posterior_percent = value;
  r.explanation = explanation;
  r.timestamp_ms = clock_();
  validate(r);
  commit("report_recorded", {{"session_id", session_id}, {"report", report_to_json(r)}});
  const Session& after = sessions_.at(session_id);
  return {PairPhase::kDone, after.state, r, after.completion_code};
}

std::size_t SurveyService::quota_count_locked(int stage) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < reports_.size(); ++i) {
    if (reports_[i].stage != stage) continue;
    if (config_.include_partial_sessions ||
        sessions_.at(report_session_[i]).state == SessionState::kComplete) {
      ++n;
    }
  }
  return n;
}

std::vector<BeliefReport> SurveyService::training_reports_locked() const {
  std::vector<BeliefReport> out;
  for (std::size_t i = 0; i < reports_.size(); ++i) {
    if (config_.include_partial_sessions ||
        sessions_.at(report_session_[i]).state == SessionState::kComplete) {
      out.push_back(reports_[i]);
    }
  }
  return out;
}

Stage SurveyService::advance_stage(Warnings* warnings) {
  std::unique_lock advance(advance_mu_, std::try_to_lock);
  if (!advance.owns_lock()) fail(ErrorKind::kLocked, "another stage advance is in progress");
  std::vector<BeliefReport> training;
  std::set<QuestionPair> used;
  int next = 0;
  {
    std::lock_guard lock(mu_);
    const int current = static_cast<int>(stages_.size()) - 1;
    const std::size_t have = quota_count_locked(current);
    if (have < config_.stage_quota) {
      fail(ErrorKind::kConflict, "stage " + std::to_string(current) + " quota unmet: " +
                                     std::to_string(have) + " of " + std::to_string(config_.stage_quota) +
                                     " reports (short by " + std::to_string(config_.stage_quota - have) + ")");
    }
    training = training_reports_locked();
    used = used_pairs_;
    next = current + 1;
  }
  Stage planned = plan_stage(corpus_, training, next, config_, used, warnings);
  std::lock_guard lock(mu_);
  commit("stage_opened", stage_manifest(planned, corpus_));
  return planned;
}

Session SurveyService::session(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  return session_locked(session_id);
}

Json SurveyService::current_stage_json() const {
  std::lock_guard lock(mu_);
  Json j = stage_manifest(stages_.back(), corpus_);
  j["reports_collected"] = quota_count_locked(stages_.back().index);
  j["quota"] = config_.stage_quota;
  return j;
}

int SurveyService::current_stage_index() const {
  std::lock_guard lock(mu_);
  return stages_.back().index;
}

std::size_t SurveyService::stage_report_count(int stage) const {
  std::lock_guard lock(mu_);
  return quota_count_locked(stage);
}

std::vector<Stage> SurveyService::stages() const {
  std::lock_guard lock(mu_);
  std::vector<Stage> out = stages_;
  for (const auto& r : reports_) out.at(static_cast<std::size_t>(r.stage)).reports.push_back(r);
  return out;
}

std::vector<BeliefReport> SurveyService::reports(const ExportFilter& filter) const {
  std::lock_guard lock(mu_);
  std::vector<BeliefReport> out;
  for (const auto& r : reports_) {
    if (filter.stage && r.stage != *filter.stage) continue;
    if (filter.respondent_id && r.respondent_id != *filter.respondent_id) continue;
    out.push_back(r);
  }
  return out;
}

std::vector<BeliefReport> SurveyService::training_reports() const {
  std::lock_guard lock(mu_);
  return training_reports_locked();
}

std::string SurveyService::export_reports(const ExportFilter& filter) const {
  std::ostringstream out;
  const auto rs = reports(filter);
  write_reports(out, rs);
  return out.str();
}

}  // namespace hgf
