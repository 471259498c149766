#include "hgf/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "hgf/error.hpp"

namespace hgf {

const char* to_string(Benchmark b) {
  switch (b) {
    case Benchmark::kMmlu: return "MMLU";
    case Benchmark::kBbh: return "BBH";
    case Benchmark::kCustom: return "CUSTOM";
  }
  return "CUSTOM";
}

Benchmark benchmark_from_string(const std::string& s) {
  if (s == "MMLU") return Benchmark::kMmlu;
  if (s == "BBH") return Benchmark::kBbh;
  if (s == "CUSTOM") return Benchmark::kCustom;
  fail(ErrorKind::kValidation, "unknown benchmark '" + s + "'");
}

std::optional<QuestionIndex> Corpus::find_question(const std::string& id) const {
  auto it = question_index_.find(id);
  if (it == question_index_.end()) return std::nullopt;
  return it->second;
}

QuestionIndex Corpus::index_of(const std::string& question_id) const {
  auto idx = find_question(question_id);
  if (!idx) fail(ErrorKind::kNotFound, "unknown question_id '" + question_id + "'");
  return *idx;
}

const Task* Corpus::find_task(const std::string& task_id) const {
  auto it = task_index_.find(task_id);
  return it == task_index_.end() ? nullptr : &tasks_[it->second];
}

void Corpus::add_task(Task task) {
  if (task_index_.count(task.task_id)) {
    fail(ErrorKind::kConflict, "duplicate task_id '" + task.task_id + "'");
  }
  task_index_.emplace(task.task_id, static_cast<std::uint32_t>(tasks_.size()));
  tasks_.push_back(std::move(task));
}

void Corpus::add_question(Question q) {
  auto task = task_index_.find(q.task_id);
  if (task == task_index_.end()) {
    fail(ErrorKind::kValidation,
         "question '" + q.question_id + "' references unknown task '" + q.task_id + "'");
  }
  if (question_index_.count(q.question_id)) {
    fail(ErrorKind::kConflict, "duplicate question_id '" + q.question_id + "'");
  }
  question_index_.emplace(q.question_id, static_cast<QuestionIndex>(questions_.size()));
  task_of_.push_back(task->second);
  questions_.push_back(std::move(q));
}

void Corpus::add_response(ModelResponse r) {
  const QuestionIndex q = index_of(r.question_id);
  auto key = std::make_pair(r.model_id, q);
  if (responses_.count(key)) {
    fail(ErrorKind::kConflict,
         "duplicate response for model '" + r.model_id + "' on '" + r.question_id + "'");
  }
  responses_.emplace(std::move(key), std::move(r));
}

const ModelResponse* Corpus::response(const std::string& model_id, QuestionIndex q) const {
  auto it = responses_.find({model_id, q});
  return it == responses_.end() ? nullptr : &it->second;
}

std::vector<std::string> Corpus::model_ids() const {
  std::vector<std::string> ids;
  for (const auto& [key, _] : responses_) {
    if (ids.empty() || ids.back() != key.first) ids.push_back(key.first);
  }
  return ids;
}

std::vector<std::uint8_t> Corpus::correctness(const std::string& model_id) const {
  std::vector<std::uint8_t> out(questions_.size());
  std::vector<std::string> missing;
  for (QuestionIndex q = 0; q < questions_.size(); ++q) {
    const ModelResponse* r = response(model_id, q);
    if (!r) {
      missing.push_back(questions_[q].question_id);
      continue;
    }
    out[q] = r->correct ? 1 : 0;
  }
  if (!missing.empty()) {
    std::string msg = "model '" + model_id + "' has no graded response for " +
                      std::to_string(missing.size()) + " question(s):";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
    if (missing.size() > 10) msg += " ...";
    fail(ErrorKind::kPrecondition, msg);
  }
  return out;
}

std::size_t utf8_length(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

namespace {

const std::set<std::string> kQuestionFields = {
    "question_id", "task_id", "task_name", "benchmark", "text", "choices", "answer_key"};
const std::set<std::string> kResponseFields = {
    "model_id", "question_id", "response_text", "correct"};

Json unknown_fields(const Json& record, const std::set<std::string>& known) {
  Json extra = Json::object();
  for (auto it = record.begin(); it != record.end(); ++it) {
    if (!known.count(it.key())) extra[it.key()] = it.value();
  }
  return extra;
}

Task task_from_json(const Json& record) {
  Task t;
  t.task_id = require_string(record, "task_id");
  t.name = record.contains("task_name") && record["task_name"].is_string()
               ? record["task_name"].get<std::string>()
               : t.task_id;
  t.benchmark = record.contains("benchmark")
                    ? benchmark_from_string(require_string(record, "benchmark"))
                    : Benchmark::kCustom;
  return t;
}

}  // namespace

Question question_from_json(const Json& record) {
  Question q;
  q.question_id = require_string(record, "question_id");
  q.task_id = require_string(record, "task_id");
  q.text = require_string(record, "text");
  if (q.text.empty()) fail(ErrorKind::kValidation, "question '" + q.question_id + "' has empty text");
  if (record.contains("answer_key") && !record["answer_key"].is_null()) {
    q.answer_key = require_string(record, "answer_key");
  }
  if (record.contains("choices") && !record["choices"].is_null()) {
    const Json& cs = record["choices"];
    if (!cs.is_array()) fail(ErrorKind::kValidation, "'choices' must be an array");
    std::vector<Choice> choices;
    for (const Json& c : cs) {
      if (!c.is_object()) fail(ErrorKind::kValidation, "choice must be an object");
      choices.push_back({require_string(c, "label"), require_string(c, "text")});
    }
    if (!q.answer_key.empty()) {
      const auto matches = std::count_if(choices.begin(), choices.end(),
                                         [&](const Choice& c) { return c.label == q.answer_key; });
      if (matches != 1) {
        fail(ErrorKind::kValidation, "question '" + q.question_id +
                                         "': answer_key must match exactly one choice label");
      }
    }
    q.choices = std::move(choices);
  }
  q.extra = unknown_fields(record, kQuestionFields);
  return q;
}

Json question_to_json(const Question& q, const Task& task) {
  Json j = q.extra;
  j["question_id"] = q.question_id;
  j["task_id"] = q.task_id;
  j["task_name"] = task.name;
  j["benchmark"] = to_string(task.benchmark);
  j["text"] = q.text;
  if (q.choices) {
    Json cs = Json::array();
    for (const auto& c : *q.choices) cs.push_back({{"label", c.label}, {"text", c.text}});
    j["choices"] = std::move(cs);
  }
  j["answer_key"] = q.answer_key;
  return j;
}

IngestResult ingest_corpus(const std::vector<Json>& records, const FilterConfig& filter) {
  IngestResult result;
  std::unordered_set<std::string> seen_ids;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string where = "line " + std::to_string(i + 1) + ": ";
    Question q;
    Task task;
    try {
      q = question_from_json(records[i]);
      task = task_from_json(records[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), where + e.what());
    }
    if (!seen_ids.insert(q.question_id).second) {
      fail(ErrorKind::kConflict, where + "duplicate question_id '" + q.question_id + "'");
    }
    if (filter.excluded_tasks.count(q.task_id)) {
      ++result.dropped_excluded;
      continue;
    }
    if (utf8_length(q.text) > filter.max_length) {
      ++result.dropped_length;
      continue;
    }
    if (!result.corpus.find_task(task.task_id)) result.corpus.add_task(task);
    result.corpus.add_question(std::move(q));
  }
  return result;
}

IngestResult ingest_corpus(std::istream& in, const FilterConfig& filter) {
  return ingest_corpus(read_jsonl(in), filter);
}

void export_questions(std::ostream& out, const Corpus& corpus) {
  for (const Question& q : corpus.questions()) {
    out << question_to_json(q, *corpus.find_task(q.task_id)).dump() << '\n';
  }
}

std::size_t load_responses(Corpus& corpus, const std::vector<Json>& records) {
  std::size_t graded = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Json& rec = records[i];
    try {
      ModelResponse r;
      r.model_id = require_string(rec, "model_id");
      r.question_id = require_string(rec, "question_id");
      r.response_text = require_string(rec, "response_text");
      const QuestionIndex q = corpus.index_of(r.question_id);
      if (rec.contains("correct") && !rec["correct"].is_null()) {
        r.correct = require_binary(rec, "correct");
      } else {
        r.correct = grade(corpus.question(q), r.response_text);
        ++graded;
      }
      r.extra = unknown_fields(rec, kResponseFields);
      corpus.add_response(std::move(r));
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return graded;
}

Json response_to_json(const ModelResponse& r) {
  Json j = r.extra;
  j["model_id"] = r.model_id;
  j["question_id"] = r.question_id;
  j["response_text"] = r.response_text;
  j["correct"] = r.correct ? 1 : 0;
  return j;
}

void export_responses(std::ostream& out, const Corpus& corpus) {
  for (const auto& model : corpus.model_ids()) {
    for (QuestionIndex q = 0; q < corpus.size(); ++q) {
      if (const ModelResponse* r = corpus.response(model, q)) {
        out << response_to_json(*r).dump() << '\n';
      }
    }
  }
}

std::string normalize_answer(const std::string& s, bool strip_label_punctuation) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  std::string out = s.substr(first, last - first + 1);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (strip_label_punctuation) {
    // "(b).", "b)", "b." -> "b"
    std::size_t lo = 0;
    std::size_t hi = out.size();
    while (hi > lo && (out[hi - 1] == '.' || out[hi - 1] == ')')) --hi;
    while (lo < hi && out[lo] == '(') ++lo;
    out = out.substr(lo, hi - lo);
    const auto a = out.find_first_not_of(" \t");
    const auto b = out.find_last_not_of(" \t");
    out = a == std::string::npos ? std::string{} : out.substr(a, b - a + 1);
  }
  return out;
}

namespace {

// A bare label is a single letter or digit, optionally wrapped as "(b)" or "b."
bool is_bare_label(const std::string& key) {
  const std::string k = normalize_answer(key, /*strip_label_punctuation=*/true);
  return k.size() == 1 && std::isalnum(static_cast<unsigned char>(k[0]));
}

}  // namespace

bool grade(const Question& question, const std::string& response_text) {
  if (question.answer_key.empty()) {
    fail(ErrorKind::kPrecondition, "question '" + question.question_id + "' is ungradeable: no answer_key");
  }
  const bool is_label = question.choices.has_value() || is_bare_label(question.answer_key);
  const std::string key = normalize_answer(question.answer_key, is_label);
  const std::string got = normalize_answer(response_text, is_label);
  return !got.empty() && got == key;
}

QuestionPair sample_pair(const Corpus& corpus, Rng& rng) {
  const std::size_t n = corpus.size();
  if (n < 2) {
    fail(ErrorKind::kPrecondition, "corpus needs at least 2 questions to sample a pair");
  }
  QuestionPair p;
  p.target = static_cast<QuestionIndex>(rng.uniform_index(n));
  do {
    p.shown = static_cast<QuestionIndex>(rng.uniform_index(n));
  } while (p.shown == p.target);
  return p;
}

}  // namespace hgf
