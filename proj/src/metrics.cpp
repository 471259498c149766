#include "hgf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hgf/error.hpp"

namespace hgf {

double mean_nll(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) fail(ErrorKind::kValidation, "scores/labels size mismatch");
  if (scores.empty()) fail(ErrorKind::kPrecondition, "NLL of an empty set is undefined");
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(scores[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    sum += labels[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  return sum / static_cast<double>(scores.size());
}

std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) fail(ErrorKind::kValidation, "scores/labels size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // 2 * concordant + ties, kept integral so the final ratio is a single
  // rounding of an exact count.
  std::uint64_t twice_concordant = 0;
  std::uint64_t negatives_below = 0;
  std::uint64_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? pos : neg) += 1;
      ++j;
    }
    twice_concordant += 2 * pos * negatives_below + pos * neg;
    negatives_below += neg;
    n_pos += pos;
    n_neg += neg;
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  return (static_cast<double>(twice_concordant) / 2.0) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

SliceMetrics slice_metrics(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  SliceMetrics m;
  m.n = scores.size();
  m.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (m.n == 0) {
    m.nll = std::nan("");
    return m;
  }
  m.nll = mean_nll(scores, labels);
  m.auc = auc(scores, labels);
  return m;
}

}  // namespace

PredictorMetrics evaluate_predictor(const Predictor& predictor,
                                    std::span<const GeneralizationExample> test_examples) {
  if (test_examples.empty()) fail(ErrorKind::kPrecondition, "no test examples");
  std::vector<double> all_s, cor_s, inc_s;
  std::vector<std::uint8_t> all_y, cor_y, inc_y;
  for (const auto& e : test_examples) {
    const double s = predictor.predict(to_input(e));
    const std::uint8_t y = e.label_changed ? 1 : 0;
    all_s.push_back(s);
    all_y.push_back(y);
    (e.shown_correct ? cor_s : inc_s).push_back(s);
    (e.shown_correct ? cor_y : inc_y).push_back(y);
  }
  return PredictorMetrics{slice_metrics(all_s, all_y), slice_metrics(cor_s, cor_y),
                          slice_metrics(inc_s, inc_y)};
}

AsymmetryReport asymmetry_report(const Predictor& predictor, std::span<const PairInput> pairs) {
  if (pairs.empty()) fail(ErrorKind::kPrecondition, "asymmetry report needs at least one pair");
  double sum_c = 0.0, sum_i = 0.0;
  for (PairInput p : pairs) {
    p.shown_correct = true;
    sum_c += predictor.predict(p);
    p.shown_correct = false;
    sum_i += predictor.predict(p);
  }
  const double n = static_cast<double>(pairs.size());
  return AsymmetryReport{sum_c / n, sum_i / n, pairs.size()};
}

}  // namespace hgf
