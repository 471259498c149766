#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hgf/predictor.hpp"

namespace hgf {

inline constexpr double kProbabilityClamp = 1e-9;

// Mean negative log-likelihood (natural log), probabilities clamped to
// [1e-9, 1 - 1e-9].
double mean_nll(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Fraction of (positive, negative) pairs ranked concordantly, ties counted
// one half. Empty when either class is absent.
std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct SliceMetrics {
  std::size_t n = 0;
  std::size_t positives = 0;
  double nll = 0.0;
  std::optional<double> auc;  // unset: single-class slice, AUC undefined
};

struct PredictorMetrics {
  SliceMetrics overall;
  SliceMetrics shown_correct;
  SliceMetrics shown_incorrect;
};

PredictorMetrics evaluate_predictor(const Predictor& predictor,
                                    std::span<const GeneralizationExample> test_examples);

struct AsymmetryReport {
  double mean_if_correct = 0.0;
  double mean_if_incorrect = 0.0;
  std::size_t n_pairs = 0;
};

// Each pair is scored twice, once per correctness value of the shown response.
AsymmetryReport asymmetry_report(const Predictor& predictor, std::span<const PairInput> pairs);

}  // namespace hgf
