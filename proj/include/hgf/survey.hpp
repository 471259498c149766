#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hgf/bandit.hpp"
#include "hgf/beliefs.hpp"
#include "hgf/corpus.hpp"
#include "hgf/event_log.hpp"
#include "hgf/predictor.hpp"

namespace hgf {

inline constexpr std::size_t kPairsPerSession = 15;

struct ComprehensionItem {
  std::string prompt;
  std::vector<std::string> choices;
  std::string answer;
};

std::vector<ComprehensionItem> default_comprehension_items();

struct SurveyConfig {
  std::size_t stage_quota = 400;        // reports needed before a stage may advance
  std::size_t stage_assignments = 420;  // distinct pairs sampled per stage
  std::size_t responses_per_pair = 1;   // target responses per assigned pair
  SamplingPolicy policy;
  TextTrainConfig predictor;
  std::optional<std::string> reference_model;
  bool allow_repeat_respondents = false;
  bool include_partial_sessions = false;  // in training data
  bool dedupe_pairs_across_stages = true;
  bool disclose_ai_source = true;  // false: responses may come from "AI systems or humans"
  std::vector<ComprehensionItem> comprehension = default_comprehension_items();
  std::uint64_t seed = 0;
};

Json survey_config_to_json(const SurveyConfig& c);
SurveyConfig survey_config_from_json(const Json& j);

// Plans stage `index`. Stage 0 is uniform over a random candidate pool;
// later stages retrain the text predictor on `training` and sample
// epsilon-greedily from the scored pool. Deterministic in (seed, index, training).
Stage plan_stage(const Corpus& corpus, std::span<const BeliefReport> training, int index,
                 const SurveyConfig& config, const std::set<QuestionPair>& used_pairs,
                 Warnings* warnings = nullptr);

enum class SessionState { kComprehension, kActive, kComplete, kFailed };
enum class PairPhase { kAwaitingPrior, kAwaitingPosterior, kDone };

const char* to_string(SessionState s);
const char* to_string(PairPhase p);

struct SessionItem {
  std::size_t assignment = 0;  // index into the stage's assignments
  QuestionPair pair;
  bool shown_correct = false;
  PairPhase phase = PairPhase::kAwaitingPrior;
  int prior_percent = -1;
};

struct Session {
  std::string session_id;
  std::string respondent_id;
  SessionState state = SessionState::kComprehension;
  int stage = 0;
  std::vector<SessionItem> items;
  std::size_t cursor = 0;
  std::optional<std::string> completion_code;
  std::vector<std::size_t> report_indices;  // into the report store
};

Json session_to_json(const Session& s);

struct BeliefResult {
  PairPhase phase;                       // phase of the item just answered, after the update
  SessionState state;
  std::optional<BeliefReport> report;    // set when a posterior completes a pair
  std::optional<std::string> completion_code;
};

using Clock = std::function<std::int64_t()>;
Clock system_clock_ms();

struct ExportFilter {
  std::optional<int> stage;
  std::optional<std::string> respondent_id;
};

// Survey state machine over an append-only event log. Every mutation is an
// event appended before it is applied, and replaying the log on construction
// rebuilds the same state. All public methods are thread-safe.
class SurveyService {
 public:
  // `data_dir` empty: memory-only log.
  SurveyService(const Corpus& corpus, SurveyConfig config, const std::string& data_dir = {},
                Clock clock = system_clock_ms(), bool sync_writes = true);

  Session create_session(const std::string& respondent_id);
  bool submit_comprehension(const std::string& session_id, const std::vector<std::string>& answers);
  Json next_item(const std::string& session_id) const;
  BeliefResult record_belief(const std::string& session_id, int value,
                             const std::optional<std::string>& explanation = std::nullopt);

  // Exclusive; kLocked if another advance is running, kConflict if the
  // current stage's quota is unmet.
  Stage advance_stage(Warnings* warnings = nullptr);

  Session session(const std::string& session_id) const;
  Json current_stage_json() const;
  int current_stage_index() const;
  std::size_t stage_report_count(int stage) const;
  std::vector<Stage> stages() const;  // with their reports attached

  std::vector<BeliefReport> reports(const ExportFilter& filter = {}) const;
  std::vector<BeliefReport> training_reports() const;
  std::string export_reports(const ExportFilter& filter = {}) const;

  const std::vector<EventRecord>& events() const { return log_.events(); }
  const SurveyConfig& config() const { return config_; }
  const Corpus& corpus() const { return corpus_; }

 private:
  void apply(const EventRecord& e);
  const EventRecord& commit(std::string type, Json payload);
  Session& session_locked(const std::string& session_id);
  const Session& session_locked(const std::string& session_id) const;
  std::vector<std::size_t> choose_assignments_locked() const;
  std::vector<BeliefReport> training_reports_locked() const;
  std::string shown_response_text(const SessionItem& item) const;
  std::size_t quota_count_locked(int stage) const;

  const Corpus& corpus_;
  SurveyConfig config_;
  Clock clock_;
  EventLog log_;

  mutable std::mutex mu_;
  std::mutex advance_mu_;
  std::vector<Stage> stages_;                  // reports are kept in reports_
  std::vector<std::vector<std::size_t>> served_;  // per stage, per assignment
  std::map<std::string, Session> sessions_;
  std::map<std::string, std::string> respondent_session_;  // latest session per respondent
  std::vector<BeliefReport> reports_;
  std::vector<std::string> report_session_;
  std::set<QuestionPair> used_pairs_;
  std::uint64_t session_counter_ = 0;
};

}  // namespace hgf
