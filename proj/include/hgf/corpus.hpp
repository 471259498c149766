#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hgf/jsonl.hpp"
#include "hgf/rng.hpp"

namespace hgf {

enum class Benchmark { kMmlu, kBbh, kCustom };

const char* to_string(Benchmark b);
Benchmark benchmark_from_string(const std::string& s);

struct Task {
  std::string task_id;
  std::string name;
  Benchmark benchmark = Benchmark::kCustom;
};

struct Choice {
  std::string label;
  std::string text;
};

struct Question {
  std::string question_id;
  std::string task_id;
  std::string text;
  std::optional<std::vector<Choice>> choices;
  std::string answer_key;
  Json extra = Json::object();  // unknown fields, kept for export
};

struct ModelResponse {
  std::string model_id;
  std::string question_id;
  std::string response_text;
  bool correct = false;
  Json extra = Json::object();
};

// Dense index of a question inside a Corpus.
using QuestionIndex = std::uint32_t;

// Ordered pair: `target` is x (the question beliefs are about), `shown` is
// x' (the question whose response the respondent saw).
struct QuestionPair {
  QuestionIndex target = 0;
  QuestionIndex shown = 0;

  friend auto operator<=>(const QuestionPair&, const QuestionPair&) = default;
};

// Tasks, questions and graded responses. Immutable once built by ingest;
// add_response is only used while loading.
class Corpus {
 public:
  const std::vector<Task>& tasks() const { return tasks_; }
  const std::vector<Question>& questions() const { return questions_; }
  std::size_t size() const { return questions_.size(); }

  const Question& question(QuestionIndex i) const { return questions_.at(i); }
  std::optional<QuestionIndex> find_question(const std::string& id) const;
  QuestionIndex index_of(const std::string& question_id) const;  // throws kNotFound
  const Task* find_task(const std::string& task_id) const;

  bool same_task(QuestionIndex a, QuestionIndex b) const {
    return task_of_[a] == task_of_[b];
  }
  std::uint32_t task_index(QuestionIndex q) const { return task_of_[q]; }

  void add_task(Task task);      // throws kConflict on duplicate id
  void add_question(Question q);  // throws kConflict / kValidation
  void add_response(ModelResponse r);  // throws kConflict / kNotFound

  const ModelResponse* response(const std::string& model_id, QuestionIndex q) const;
  std::vector<std::string> model_ids() const;

  // Per-question correctness of `model_id`; kPrecondition if any question is
  // ungraded for that model.
  std::vector<std::uint8_t> correctness(const std::string& model_id) const;

 private:
  std::vector<Task> tasks_;
  std::unordered_map<std::string, std::uint32_t> task_index_;
  std::vector<Question> questions_;
  std::vector<std::uint32_t> task_of_;
  std::unordered_map<std::string, QuestionIndex> question_index_;
  std::map<std::pair<std::string, QuestionIndex>, ModelResponse> responses_;
};

struct FilterConfig {
  std::size_t max_length = 750;  // in Unicode code points
  std::set<std::string> excluded_tasks;
};

struct IngestResult {
  Corpus corpus;
  std::size_t dropped_length = 0;
  std::size_t dropped_excluded = 0;

  std::size_t dropped() const { return dropped_length + dropped_excluded; }
};

std::size_t utf8_length(const std::string& s);

IngestResult ingest_corpus(const std::vector<Json>& records, const FilterConfig& filter);
IngestResult ingest_corpus(std::istream& in, const FilterConfig& filter);

Question question_from_json(const Json& record);
Json question_to_json(const Question& q, const Task& task);
void export_questions(std::ostream& out, const Corpus& corpus);

// Loads model responses into `corpus`, grading any record without `correct`.
// Returns the number of records graded on load.
std::size_t load_responses(Corpus& corpus, const std::vector<Json>& records);
Json response_to_json(const ModelResponse& r);
void export_responses(std::ostream& out, const Corpus& corpus);

// Normalized exact-match grading.
std::string normalize_answer(const std::string& s, bool strip_label_punctuation);
bool grade(const Question& question, const std::string& response_text);

// Uniform ordered pair with target != shown.
QuestionPair sample_pair(const Corpus& corpus, Rng& rng);

}  // namespace hgf
