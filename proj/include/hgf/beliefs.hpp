#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hgf/corpus.hpp"
#include "hgf/jsonl.hpp"

namespace hgf {

// Beliefs are elicited on an integer-percent slider, so prior and posterior
// are stored as percents and exposed as percent / 100.
struct BeliefReport {
  std::string report_id;
  std::string respondent_id;
  int stage = 0;
  std::string target_question_id;  // x
  std::string shown_question_id;   // x'
  bool shown_correct = false;
  int prior_percent = 0;
  int posterior_percent = 0;
  std::optional<std::string> explanation;
  std::int64_t timestamp_ms = 0;

  double prior() const { return prior_percent / 100.0; }
  double posterior() const { return posterior_percent / 100.0; }
  double delta() const { return posterior() - prior(); }
};

void validate(const BeliefReport& r);  // throws kValidation
Json report_to_json(const BeliefReport& r);
BeliefReport report_from_json(const Json& j);
std::vector<BeliefReport> read_reports(std::istream& in);
std::vector<BeliefReport> read_reports_file(const std::string& path);
void write_reports(std::ostream& out, std::span<const BeliefReport> reports);

inline bool label_changed(const BeliefReport& r) {
  return r.posterior_percent != r.prior_percent;
}

struct GeneralizationExample {
  std::string x_id;
  std::string xprime_id;
  std::string x_text;
  std::string xprime_text;
  bool shown_correct = false;
  bool same_task = false;
  bool label_changed = false;
};

GeneralizationExample make_example(const Corpus& corpus, QuestionPair pair, bool shown_correct,
                                   bool changed);

// One example per report, labelled by that report's own change.
std::vector<GeneralizationExample> examples_from_reports(const Corpus& corpus,
                                                         std::span<const BeliefReport> reports);

// Aggregated test examples on disk: {x_id, xprime_id, shown_correct, label}.
Json example_to_json(const GeneralizationExample& e);
std::vector<GeneralizationExample> examples_from_json(const Corpus& corpus,
                                                      const std::vector<Json>& records);

struct PosteriorModel {
  double mu_correct = 0.0;    // mean posterior of changed reports, shown correct
  double mu_incorrect = 0.0;  // same, shown incorrect

  double mu(bool shown_correct) const { return shown_correct ? mu_correct : mu_incorrect; }
};

PosteriorModel fit_posterior_model(std::span<const BeliefReport> reports);

// Mixture: prior when no change is predicted, the stratum mean when a change
// is certain, linear in between.
double predict_posterior(const PosteriorModel& model, double prior, double p_change,
                         bool shown_correct);

}  // namespace hgf
