#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hgf/beliefs.hpp"
#include "hgf/corpus.hpp"
#include "hgf/predictor.hpp"
#include "hgf/rng.hpp"

namespace hgf {

using Warnings = std::vector<std::string>;

struct SamplingPolicy {
  double epsilon = 0.2;             // share of each stage drawn outside the greedy stratum
  double greedy_percentile = 0.10;  // top share of the ranking that forms the greedy stratum
  std::size_t pool_size = 200'000;  // candidate pairs scored per stage
};

void validate(const SamplingPolicy& policy);

struct ScoredPair {
  QuestionPair pair;
  double score = 0.0;
};

// `pool_size` distinct ordered pairs drawn uniformly (capped at n(n-1)).
std::vector<QuestionPair> sample_candidate_pairs(const Corpus& corpus, std::size_t pool_size,
                                                 Rng& rng, Warnings* warnings = nullptr);

// Descending by score; ties broken by pair id so the order is total.
std::vector<ScoredPair> rank_pairs(std::span<const QuestionPair> pairs, std::span<const double> scores);

std::vector<ScoredPair> score_pool(const Predictor& predictor, const Corpus& corpus,
                                   std::size_t pool_size, Rng& rng, Warnings* warnings = nullptr,
                                   bool parallel = true);

struct RankedPick {
  QuestionPair pair;
  std::size_t rank = 0;  // position in the ranked pool
  double score = 0.0;
};

// ceil((1 - epsilon) n) picks from the top greedy_percentile of the ranking,
// the rest from below it (from the whole pool when epsilon = 1). Pairs in
// `exclude` are removed from the pool first.
std::vector<RankedPick> sample_stage(std::span<const ScoredPair> ranked, const SamplingPolicy& policy,
                                     std::size_t n_assignments, Rng& rng,
                                     Warnings* warnings = nullptr,
                                     const std::set<QuestionPair>* exclude = nullptr);

struct TestSetSpec {
  std::size_t n_pairs = 492;
  double top_fraction = 2.0 / 3.0;
  double bottom_fraction = 1.0 / 3.0;
  std::size_t min_responses_per_pair = 8;
  double stratum_fraction = 0.01;  // top / bottom 1% of the ranking
};

void validate(const TestSetSpec& spec);

std::vector<RankedPick> build_test_set(std::span<const ScoredPair> ranked, const TestSetSpec& spec,
                                       Rng& rng, const std::set<QuestionPair>& training_pairs,
                                       Warnings* warnings = nullptr);

// Strict majority of changed reports; ties resolve to "no change".
bool aggregate_majority(std::span<const BeliefReport> reports, std::size_t min_responses,
                        const std::string& pair_name);

struct Assignment {
  QuestionPair pair;
  bool shown_correct = false;
  std::size_t rank = 0;
  double score = 0.0;
};

// shown_correct comes from `reference_model`'s graded response when present,
// else a fair coin.
std::vector<Assignment> assign_correctness(const Corpus& corpus,
                                           const std::optional<std::string>& reference_model,
                                           std::span<const RankedPick> picks, Rng& rng);

struct Stage {
  int index = 0;
  SamplingPolicy policy;
  std::size_t ranked_pool_size = 0;  // for rank -> decile bucketing
  std::vector<Assignment> assignments;
  std::vector<BeliefReport> reports;
};

Json stage_manifest(const Stage& stage, const Corpus& corpus);
Stage stage_from_manifest(const Json& manifest, const Corpus& corpus);

struct ProgressRow {
  int stage = 0;
  int bucket = 0;  // 0 = top decile of predicted change
  std::size_t n_reports = 0;
  std::size_t n_changed = 0;
  std::optional<double> rate;
};

std::vector<ProgressRow> stage_progress(std::span<const Stage> stages, const Corpus& corpus);
Json progress_to_json(const ProgressRow& row);

}  // namespace hgf
