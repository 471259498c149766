#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hgf/bandit.hpp"
#include "hgf/simhuman.hpp"
#include "hgf/survey.hpp"

namespace hgf {

// Deterministic timestamps for reproducible runs: start, start + 1000, ...
Clock logical_clock(std::int64_t start_ms = 1'700'000'000'000);

// Reads {"n_tasks", "questions_per_task", "filler_words", "models": [...], "seed"}.
SyntheticCorpusConfig synthetic_corpus_config_from_json(const Json& j);

struct SimulationConfig {
  std::size_t n_stages = 3;
  double abandon_rate = 0.0;        // respondents quitting partway through a session
  double comprehension_fail_rate = 0.0;
  std::uint64_t seed = 0;
};

struct SimulationResult {
  std::vector<Stage> stages;  // with reports attached
  std::vector<BeliefReport> reports;
  std::size_t sessions = 0;
  Warnings warnings;
};

// Drives `service` with synthetic respondents drawn round-robin from
// `population`, advancing stages as quotas fill. Respondent k of stage s is
// "sim-s{s}-r{k}" and gets its own random stream.
SimulationResult run_simulation(SurveyService& service, std::span<const SyntheticOracle> population,
                                const SimulationConfig& config);

// Collects `responses_per_pair` reports per test pair from distinct
// respondents and labels each pair by strict majority.
std::vector<GeneralizationExample> label_test_pairs(const Corpus& corpus,
                                                    std::span<const Assignment> pairs,
                                                    std::span<const SyntheticOracle> population,
                                                    std::size_t responses_per_pair, Rng& rng);

}  // namespace hgf
