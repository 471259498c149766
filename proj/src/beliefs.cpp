#include "hgf/beliefs.hpp"

#include <cmath>
#include <fstream>

#include "hgf/error.hpp"

namespace hgf {

void validate(const BeliefReport& r) {
  auto bad = [&](const std::string& what) {
    fail(ErrorKind::kValidation, "report '" + r.report_id + "': " + what);
  };
  if (r.report_id.empty()) fail(ErrorKind::kValidation, "report_id must be non-empty");
  if (r.stage < 0) bad("stage must be >= 0");
  if (r.prior_percent < 0 || r.prior_percent > 100) bad("prior out of [0,1]");
  if (r.posterior_percent < 0 || r.posterior_percent > 100) bad("posterior out of [0,1]");
  if (r.target_question_id == r.shown_question_id) bad("target and shown question must differ");
}

Json report_to_json(const BeliefReport& r) {
  Json j = {
      {"report_id", r.report_id},
      {"respondent_id", r.respondent_id},
      {"stage", r.stage},
      {"target_question_id", r.target_question_id},
      {"shown_question_id", r.shown_question_id},
      {"shown_correct", r.shown_correct ? 1 : 0},
      {"prior", r.prior()},
      {"posterior", r.posterior()},
      {"delta", r.delta()},
      {"timestamp", r.timestamp_ms},
  };
  j["explanation"] = r.explanation ? Json(*r.explanation) : Json(nullptr);
  return j;
}

namespace {

int to_percent(double v, const char* field) {
  if (!(v >= 0.0 && v <= 1.0)) {
    fail(ErrorKind::kValidation, std::string(field) + " must lie in [0,1]");
  }
  const auto pct = static_cast<int>(std::lround(v * 100.0));
  if (pct / 100.0 != v) {
    fail(ErrorKind::kValidation, std::string(field) + " must be an integer percent");
  }
  return pct;
}

}  // namespace

BeliefReport report_from_json(const Json& j) {
  BeliefReport r;
  r.report_id = require_string(j, "report_id");
  r.respondent_id = require_string(j, "respondent_id");
  const Json& stage = require_field(j, "stage");
  if (!stage.is_number_integer()) fail(ErrorKind::kValidation, "stage must be an integer");
  r.stage = stage.get<int>();
  r.target_question_id = require_string(j, "target_question_id");
  r.shown_question_id = require_string(j, "shown_question_id");
  r.shown_correct = require_binary(j, "shown_correct");
  r.prior_percent = to_percent(require_number(j, "prior"), "prior");
  r.posterior_percent = to_percent(require_number(j, "posterior"), "posterior");
  if (j.contains("delta") && !j["delta"].is_null()) {
    if (require_number(j, "delta") != r.delta()) {
      fail(ErrorKind::kValidation, "report '" + r.report_id + "': delta != posterior - prior");
    }
  }
  if (j.contains("explanation") && j["explanation"].is_string()) {
    r.explanation = j["explanation"].get<std::string>();
  }
  if (j.contains("timestamp") && !j["timestamp"].is_null()) {
    if (!j["timestamp"].is_number_integer()) {
      fail(ErrorKind::kValidation, "timestamp must be integer milliseconds");
    }
    r.timestamp_ms = j["timestamp"].get<std::int64_t>();
  }
  validate(r);
  return r;
}

std::vector<BeliefReport> read_reports(std::istream& in) {
  std::vector<BeliefReport> out;
  const auto records = read_jsonl(in);
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      out.push_back(report_from_json(records[i]));
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

std::vector<BeliefReport> read_reports_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path);
  return read_reports(in);
}

void write_reports(std::ostream& out, std::span<const BeliefReport> reports) {
  for (const auto& r : reports) out << report_to_json(r).dump() << '\n';
}

GeneralizationExample make_example(const Corpus& corpus, QuestionPair pair, bool shown_correct,
                                   bool changed) {
  const Question& x = corpus.question(pair.target);
  const Question& xp = corpus.question(pair.shown);
  return GeneralizationExample{x.question_id, xp.question_id, x.text, xp.text, shown_correct,
                               corpus.same_task(pair.target, pair.shown), changed};
}

std::vector<GeneralizationExample> examples_from_reports(const Corpus& corpus,
                                                         std::span<const BeliefReport> reports) {
  std::vector<GeneralizationExample> out;
  out.reserve(reports.size());
  for (const auto& r : reports) {
    const QuestionPair p{corpus.index_of(r.target_question_id), corpus.index_of(r.shown_question_id)};
    out.push_back(make_example(corpus, p, r.shown_correct, label_changed(r)));
  }
  return out;
}

Json example_to_json(const GeneralizationExample& e) {
  return {{"x_id", e.x_id},
          {"xprime_id", e.xprime_id},
          {"shown_correct", e.shown_correct ? 1 : 0},
          {"label", e.label_changed ? 1 : 0}};
}

std::vector<GeneralizationExample> examples_from_json(const Corpus& corpus,
                                                      const std::vector<Json>& records) {
  std::vector<GeneralizationExample> out;
  out.reserve(records.size());
  for (const Json& j : records) {
    const QuestionPair p{corpus.index_of(require_string(j, "x_id")),
                         corpus.index_of(require_string(j, "xprime_id"))};
    out.push_back(make_example(corpus, p, require_binary(j, "shown_correct"),
                               require_binary(j, "label")));
  }
  return out;
}

PosteriorModel fit_posterior_model(std::span<const BeliefReport> reports) {
  double sum[2] = {0.0, 0.0};
  std::size_t count[2] = {0, 0};
  for (const auto& r : reports) {
    if (!label_changed(r)) continue;
    const int k = r.shown_correct ? 1 : 0;
    sum[k] += r.posterior();
    ++count[k];
  }
  if (count[1] == 0) fail(ErrorKind::kPrecondition, "no changed reports with shown_correct = 1");
  if (count[0] == 0) fail(ErrorKind::kPrecondition, "no changed reports with shown_correct = 0");
  return PosteriorModel{sum[1] / static_cast<double>(count[1]),
                        sum[0] / static_cast<double>(count[0])};
}

double predict_posterior(const PosteriorModel& model, double prior, double p_change,
                         bool shown_correct) {
  // std::lerp is exact at both endpoints and monotone in t.
  return std::lerp(prior, model.mu(shown_correct), p_change);
}

}  // namespace hgf
