#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hgf/beliefs.hpp"
#include "hgf/corpus.hpp"
#include "hgf/jsonl.hpp"
#include "hgf/rng.hpp"

namespace hgf {

// Ground-truth generalization behaviour for synthetic respondents. Belief
// changes happen with probability similarity(task(x), task(x')), multiplied
// by `asymmetry` when the shown response was wrong.
struct OracleConfig {
  std::vector<std::string> task_ids;
  std::vector<std::vector<double>> similarity;  // symmetric, unit diagonal
  std::vector<double> difficulty;               // per task, in [0,1]
  double update_step = 0.5;                     // (0,1]
  double asymmetry = 1.5;                       // >= 1
  double noise = 0.05;                          // prior noise s.d.
  double jitter = 0.0;                          // per-respondent parameter jitter
  std::size_t population_size = 50;
  std::uint64_t seed = 0;
};

void validate(const OracleConfig& config);
Json oracle_config_to_json(const OracleConfig& config);
OracleConfig oracle_config_from_json(const Json& j);
OracleConfig load_oracle_config(const std::string& path);

// Tasks grouped into consecutive blocks of `block_size`: 1 on the diagonal,
// `within_block` between distinct tasks of a block, `between` elsewhere.
OracleConfig block_oracle_config(std::vector<std::string> task_ids, std::size_t block_size,
                                 double within_block, double between);

class SyntheticOracle {
 public:
  SyntheticOracle(std::shared_ptr<const OracleConfig> shared, std::vector<double> difficulty,
                  double update_step, double asymmetry, std::uint64_t seed);

  double similarity(const std::string& task_a, const std::string& task_b) const;
  double difficulty(const std::string& task_id) const;
  double update_step() const { return update_step_; }
  double asymmetry() const { return asymmetry_; }
  double noise() const { return shared_->noise; }
  std::uint64_t seed() const { return seed_; }

  double change_probability(const std::string& task_x, const std::string& task_xprime,
                            bool shown_correct) const;

  // Two-step elicitation, as in the survey flow.
  int sample_prior_percent(const Question& x, Rng& rng) const;
  int sample_posterior_percent(const Question& x, const Question& xprime, int prior_percent,
                               bool shown_correct, Rng& rng) const;

 private:
  std::size_t task_index(const std::string& task_id) const;

  std::shared_ptr<const OracleConfig> shared_;
  std::shared_ptr<const std::unordered_map<std::string, std::size_t>> index_;
  std::vector<double> difficulty_;
  double update_step_;
  double asymmetry_;
  std::uint64_t seed_;
};

std::vector<SyntheticOracle> make_population(const OracleConfig& config, Rng& rng);

struct ReportMeta {
  std::string report_id;
  std::string respondent_id;
  int stage = 0;
  std::int64_t timestamp_ms = 0;
};

BeliefReport respond(const SyntheticOracle& oracle, const Question& x, const Question& xprime,
                     bool shown_correct, Rng& rng, const ReportMeta& meta);

struct SyntheticModelSpec {
  std::string model_id;
  double accuracy = 0.5;
  // When set, correct only where this earlier model is correct (so the
  // earlier model dominates), with probability `accuracy` there.
  std::optional<std::string> subset_of;
};

struct SyntheticCorpusConfig {
  std::size_t n_tasks = 20;
  std::size_t questions_per_task = 30;
  std::size_t filler_words = 10;
  std::vector<SyntheticModelSpec> models;
  std::uint64_t seed = 0;
};

// Four-choice questions whose text names their task, so task identity is
// visible to text predictors. Model responses are graded on creation.
Corpus make_synthetic_corpus(const SyntheticCorpusConfig& config);

}  // namespace hgf
