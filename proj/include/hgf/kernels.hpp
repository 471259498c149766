#pragma once

// Data-parallel inner loops. Each kernel has a serial reference version and an
// OpenMP version; both write out[i] for input i and must agree exactly.

#include <cstdint>
#include <functional>
#include <span>

#include "hgf/corpus.hpp"
#include "hgf/predictor.hpp"

namespace hgf::kernels {

// out[i] = max over shown_correct of predictor(pairs[i], shown_correct).
void score_pairs_serial(const Predictor& predictor, const Corpus& corpus,
                        std::span<const QuestionPair> pairs, std::span<double> out);
void score_pairs_parallel(const Predictor& predictor, const Corpus& corpus,
                          std::span<const QuestionPair> pairs, std::span<double> out);

// Posterior belief b(x | x', f) for a pair given f's correctness on x'.
using BeliefFunction = std::function<double(QuestionPair pair, bool shown_correct)>;

// out[i] = belief(pairs[i], correctness[pairs[i].shown]).
void beliefs_serial(const BeliefFunction& belief, std::span<const QuestionPair> pairs,
                    std::span<const std::uint8_t> correctness, std::span<double> out);
void beliefs_parallel(const BeliefFunction& belief, std::span<const QuestionPair> pairs,
                      std::span<const std::uint8_t> correctness, std::span<double> out);

int max_threads();

}  // namespace hgf::kernels
