#include "hgf/bandit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_set>

#include "hgf/error.hpp"
#include "hgf/kernels.hpp"

namespace hgf {

void validate(const SamplingPolicy& p) {
  if (!(p.epsilon >= 0.0 && p.epsilon <= 1.0)) fail(ErrorKind::kValidation, "epsilon must lie in [0,1]");
  if (!(p.greedy_percentile > 0.0 && p.greedy_percentile <= 1.0)) {
    fail(ErrorKind::kValidation, "greedy_percentile must lie in (0,1]");
  }
  if (p.pool_size == 0) fail(ErrorKind::kValidation, "pool_size must be positive");
}

void validate(const TestSetSpec& s) {
  if (s.top_fraction < 0 || s.bottom_fraction < 0 ||
      std::fabs(s.top_fraction + s.bottom_fraction - 1.0) > 1e-9) {
    fail(ErrorKind::kValidation, "test-set fractions must be nonnegative and sum to 1");
  }
  if (!(s.stratum_fraction > 0.0 && s.stratum_fraction <= 0.5)) {
    fail(ErrorKind::kValidation, "stratum_fraction must lie in (0, 0.5]");
  }
}

std::vector<QuestionPair> sample_candidate_pairs(const Corpus& corpus, std::size_t pool_size,
                                                 Rng& rng, Warnings* warnings) {
  const std::uint64_t n = corpus.size();
  if (n < 2) fail(ErrorKind::kPrecondition, "corpus needs at least 2 questions to form pairs");
  const std::uint64_t total = n * (n - 1);
  if (pool_size > total) {
    if (warnings) {
      warnings->push_back("pool_size " + std::to_string(pool_size) + " exceeds the " +
                          std::to_string(total) + " distinct ordered pairs; capped");
    }
    pool_size = static_cast<std::size_t>(total);
  }
  auto decode = [n](std::uint64_t k) {
    const auto t = static_cast<QuestionIndex>(k / (n - 1));
    auto s = static_cast<QuestionIndex>(k % (n - 1));
    if (s >= t) ++s;  // skip the self-pair
    return QuestionPair{t, s};
  };
  std::vector<QuestionPair> out;
  out.reserve(pool_size);
  if (pool_size * 2 >= total) {
    std::vector<std::uint64_t> keys(total);
    std::iota(keys.begin(), keys.end(), std::uint64_t{0});
    for (std::size_t i = 0; i < pool_size; ++i) {
      std::swap(keys[i], keys[i + rng.uniform_index(total - i)]);
      out.push_back(decode(keys[i]));
    }
  } else {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(pool_size * 2);
    while (out.size() < pool_size) {
      const std::uint64_t k = rng.uniform_index(total);
      if (seen.insert(k).second) out.push_back(decode(k));
    }
  }
  return out;
}

std::vector<ScoredPair> rank_pairs(std::span<const QuestionPair> pairs, std::span<const double> scores) {
  if (pairs.size() != scores.size()) fail(ErrorKind::kValidation, "pairs/scores size mismatch");
  std::vector<ScoredPair> ranked(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) ranked[i] = {pairs[i], scores[i]};
  std::sort(ranked.begin(), ranked.end(), [](const ScoredPair& a, const ScoredPair& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.pair < b.pair;
  });
  return ranked;
}

std::vector<ScoredPair> score_pool(const Predictor& predictor, const Corpus& corpus,
                                   std::size_t pool_size, Rng& rng, Warnings* warnings,
                                   bool parallel) {
  const auto pairs = sample_candidate_pairs(corpus, pool_size, rng, warnings);
  std::vector<double> scores(pairs.size());
  if (parallel) {
    kernels::score_pairs_parallel(predictor, corpus, pairs, scores);
  } else {
    kernels::score_pairs_serial(predictor, corpus, pairs, scores);
  }
  return rank_pairs(pairs, scores);
}

namespace {

// Draws `k` distinct positions uniformly from `candidates` (partial shuffle).
std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t> candidates, std::size_t k,
                                                  Rng& rng) {
  k = std::min(k, candidates.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(candidates[i], candidates[i + rng.uniform_index(candidates.size() - i)]);
  }
  candidates.resize(k);
  return candidates;
}

std::size_t ceil_count(double x) {
  // Guards against 0.8 * 5 = 4.000000000000001 style rounding.
  return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

}  // namespace

std::vector<RankedPick> sample_stage(std::span<const ScoredPair> ranked, const SamplingPolicy& policy,
                                     std::size_t n, Rng& rng, Warnings* warnings,
                                     const std::set<QuestionPair>* exclude) {
  validate(policy);
  if (ranked.empty()) fail(ErrorKind::kPrecondition, "ranked pool is empty");
  const std::size_t pool = ranked.size();
  const std::size_t top_size = std::max<std::size_t>(1, ceil_count(policy.greedy_percentile * pool));

  std::vector<std::size_t> top, rest;
  for (std::size_t r = 0; r < pool; ++r) {
    if (exclude && exclude->count(ranked[r].pair)) continue;
    (r < top_size ? top : rest).push_back(r);
  }
  std::size_t want_greedy = std::min(n, ceil_count((1.0 - policy.epsilon) * static_cast<double>(n)));
  std::size_t want_explore = n - want_greedy;

  std::vector<std::size_t> chosen;
  if (want_greedy == 0) {
    // Pure exploration is uniform over the whole pool.
    std::vector<std::size_t> all = top;
    all.insert(all.end(), rest.begin(), rest.end());
    chosen = draw_without_replacement(std::move(all), n, rng);
  } else {
    if (top.size() < want_greedy) {
      if (warnings) {
        warnings->push_back("greedy stratum has " + std::to_string(top.size()) + " pairs for a quota of " +
                            std::to_string(want_greedy) + "; filling from the rest");
      }
      want_explore += want_greedy - top.size();
      want_greedy = top.size();
    } else if (rest.size() < want_explore) {
      if (warnings) {
        warnings->push_back("exploration stratum has " + std::to_string(rest.size()) +
                            " pairs for a quota of " + std::to_string(want_explore) +
                            "; filling from the greedy stratum");
      }
      want_greedy += want_explore - rest.size();
      want_explore = rest.size();
    }
    chosen = draw_without_replacement(top, want_greedy, rng);
    const auto explore = draw_without_replacement(rest, want_explore, rng);
    chosen.insert(chosen.end(), explore.begin(), explore.end());
  }
  if (chosen.size() < n && warnings) {
    warnings->push_back("pool supplied " + std::to_string(chosen.size()) + " of " + std::to_string(n) +
                        " requested pairs");
  }
  std::vector<RankedPick> out;
  out.reserve(chosen.size());
  for (std::size_t r : chosen) out.push_back({ranked[r].pair, r, ranked[r].score});
  return out;
}

std::vector<RankedPick> build_test_set(std::span<const ScoredPair> ranked, const TestSetSpec& spec,
                                       Rng& rng, const std::set<QuestionPair>& training_pairs,
                                       Warnings* warnings) {
  validate(spec);
  const std::size_t pool = ranked.size();
  const std::size_t stratum = ceil_count(spec.stratum_fraction * static_cast<double>(pool));
  if (stratum == 0 || 2 * stratum > pool) {
    fail(ErrorKind::kPrecondition, "ranked pool of " + std::to_string(pool) +
                                       " is too small for disjoint top/bottom strata");
  }
  const auto n_top = static_cast<std::size_t>(std::llround(spec.n_pairs * spec.top_fraction));
  const std::size_t n_bottom = spec.n_pairs - n_top;

  std::vector<std::size_t> top, bottom;
  std::size_t excluded = 0;
  for (std::size_t r = 0; r < stratum; ++r) {
    if (training_pairs.count(ranked[r].pair)) ++excluded; else top.push_back(r);
  }
  for (std::size_t r = pool - stratum; r < pool; ++r) {
    if (training_pairs.count(ranked[r].pair)) ++excluded; else bottom.push_back(r);
  }
  if (excluded > 0 && warnings) {
    warnings->push_back(std::to_string(excluded) + " stratum pairs overlap training pairs; excluded");
  }
  if (top.size() < n_top || bottom.size() < n_bottom) {
    fail(ErrorKind::kPrecondition,
         "test-set strata too small: need " + std::to_string(n_top) + " top / " +
             std::to_string(n_bottom) + " bottom, have " + std::to_string(top.size()) + " / " +
             std::to_string(bottom.size()));
  }
  auto picks = draw_without_replacement(top, n_top, rng);
  const auto low = draw_without_replacement(bottom, n_bottom, rng);
  picks.insert(picks.end(), low.begin(), low.end());
  std::vector<RankedPick> out;
  out.reserve(picks.size());
  for (std::size_t r : picks) out.push_back({ranked[r].pair, r, ranked[r].score});
  return out;
}

bool aggregate_majority(std::span<const BeliefReport> reports, std::size_t min_responses,
                        const std::string& pair_name) {
  if (reports.size() < min_responses) {
    fail(ErrorKind::kPrecondition, "pair " + pair_name + " is under-collected: " +
                                       std::to_string(reports.size()) + " of " +
                                       std::to_string(min_responses) + " responses");
  }
  const auto changed = static_cast<std::size_t>(
      std::count_if(reports.begin(), reports.end(), [](const BeliefReport& r) { return label_changed(r); }));
  return 2 * changed > reports.size();
}

std::vector<Assignment> assign_correctness(const Corpus& corpus,
                                           const std::optional<std::string>& reference_model,
                                           std::span<const RankedPick> picks, Rng& rng) {
  std::vector<Assignment> out;
  out.reserve(picks.size());
  for (const auto& p : picks) {
    const ModelResponse* r = reference_model ? corpus.response(*reference_model, p.pair.shown) : nullptr;
    const bool correct = r ? r->correct : rng.bernoulli(0.5);
    out.push_back({p.pair, correct, p.rank, p.score});
  }
  return out;
}

Json stage_manifest(const Stage& stage, const Corpus& corpus) {
  Json assignments = Json::array();
  for (const auto& a : stage.assignments) {
    assignments.push_back({{"x_id", corpus.question(a.pair.target).question_id},
                           {"xprime_id", corpus.question(a.pair.shown).question_id},
                           {"shown_correct", a.shown_correct ? 1 : 0},
                           {"rank", a.rank},
                           {"score", a.score}});
  }
  return {{"stage", stage.index},
          {"policy",
           {{"epsilon", stage.policy.epsilon},
            {"greedy_percentile", stage.policy.greedy_percentile},
            {"pool_size", stage.policy.pool_size}}},
          {"ranked_pool_size", stage.ranked_pool_size},
          {"assignments", assignments}};
}

Stage stage_from_manifest(const Json& m, const Corpus& corpus) {
  try {
    Stage s;
    s.index = m.at("stage").get<int>();
    s.policy.epsilon = m.at("policy").at("epsilon").get<double>();
    s.policy.greedy_percentile = m.at("policy").at("greedy_percentile").get<double>();
    s.policy.pool_size = m.at("policy").at("pool_size").get<std::size_t>();
    s.ranked_pool_size = m.at("ranked_pool_size").get<std::size_t>();
    std::set<QuestionPair> seen;
    for (const Json& a : m.at("assignments")) {
      Assignment asg;
      asg.pair = {corpus.index_of(a.at("x_id").get<std::string>()),
                  corpus.index_of(a.at("xprime_id").get<std::string>())};
      asg.shown_correct = require_binary(a, "shown_correct");
      asg.rank = a.at("rank").get<std::size_t>();
      asg.score = a.at("score").get<double>();
      if (!seen.insert(asg.pair).second) {
        fail(ErrorKind::kValidation, "duplicate pair in stage manifest");
      }
      s.assignments.push_back(asg);
    }
    return s;
  } catch (const Json::exception& e) {
    fail(ErrorKind::kValidation, std::string("malformed stage manifest: ") + e.what());
  }
}

std::vector<ProgressRow> stage_progress(std::span<const Stage> stages, const Corpus& corpus) {
  std::vector<ProgressRow> rows;
  for (const Stage& s : stages) {
    std::map<QuestionPair, std::size_t> rank_of;
    for (const auto& a : s.assignments) rank_of[a.pair] = a.rank;
    std::array<std::size_t, 10> n{}, changed{};
    const std::size_t pool = std::max<std::size_t>(1, s.ranked_pool_size);
    for (const auto& r : s.reports) {
      auto it = rank_of.find({corpus.index_of(r.target_question_id), corpus.index_of(r.shown_question_id)});
      if (it == rank_of.end()) continue;
      const auto bucket = std::min<std::size_t>(9, it->second * 10 / pool);
      ++n[bucket];
      if (label_changed(r)) ++changed[bucket];
    }
    for (int b = 0; b < 10; ++b) {
      ProgressRow row{s.index, b, n[b], changed[b], std::nullopt};
      if (n[b] > 0) row.rate = static_cast<double>(changed[b]) / static_cast<double>(n[b]);
      rows.push_back(row);
    }
  }
  return rows;
}

Json progress_to_json(const ProgressRow& row) {
  return {{"stage", row.stage},
          {"bucket", row.bucket},
          {"n_reports", row.n_reports},
          {"n_changed", row.n_changed},
          {"rate", row.rate ? Json(*row.rate) : Json(nullptr)}};
}

}  // namespace hgf
