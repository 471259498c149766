#include "hgf/align.hpp"

#include <algorithm>
#include <cmath>

#include "hgf/error.hpp"
#include "hgf/metrics.hpp"

namespace hgf {

DeploymentDistribution::DeploymentDistribution(std::map<std::string, double> weights,
                                               const Corpus* corpus)
    : weights_(std::move(weights)) {
  double total = 0.0;
  for (const auto& [id, w] : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      fail(ErrorKind::kValidation, "deployment weight for '" + id + "' must be a nonnegative real");
    }
    if (corpus && !corpus->find_question(id)) {
      fail(ErrorKind::kValidation, "deployment support contains unknown question '" + id + "'");
    }
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    fail(ErrorKind::kValidation, "deployment weights must sum to 1 (got " + std::to_string(total) + ")");
  }
}

DeploymentDistribution DeploymentDistribution::point_mass(const std::string& question_id) {
  return DeploymentDistribution({{question_id, 1.0}});
}

DeploymentDistribution DeploymentDistribution::uniform(const std::vector<std::string>& ids) {
  if (ids.empty()) fail(ErrorKind::kPrecondition, "empty deployment set");
  std::map<std::string, double> w;
  const double each = 1.0 / static_cast<double>(ids.size());
  for (const auto& id : ids) w[id] = each;
  if (w.size() != ids.size()) fail(ErrorKind::kValidation, "duplicate ids in uniform deployment");
  return DeploymentDistribution(std::move(w));
}

Json distribution_to_json(const DeploymentDistribution& d) {
  Json j = Json::object();
  for (const auto& [id, w] : d.weights()) j[id] = w;
  return j;
}

double weighted_accuracy_single(bool y, double b, double alpha) {
  const double yy = y ? 1.0 : 0.0;
  return yy * b + alpha * (1.0 - yy) * (1.0 - b);
}

double implied_threshold(double alpha) {
  if (!(alpha >= 0.0)) fail(ErrorKind::kValidation, "alpha must be >= 0");
  return alpha / (1.0 + alpha);
}

std::vector<QuestionPair> evaluation_pairs(const Corpus& corpus, const PairSampling& sampling) {
  const std::size_t n = corpus.size();
  if (n < 2) fail(ErrorKind::kPrecondition, "corpus needs at least 2 questions to form pairs");
  std::vector<QuestionPair> pairs;
  if (sampling.mode == PairSampling::Mode::kExhaustive) {
    pairs.reserve(n * (n - 1));
    for (QuestionIndex x = 0; x < n; ++x) {
      for (QuestionIndex xp = 0; xp < n; ++xp) {
        if (x != xp) pairs.push_back({x, xp});
      }
    }
    return pairs;
  }
  if (sampling.n_samples == 0) fail(ErrorKind::kValidation, "n_samples must be positive");
  Rng rng(sampling.seed);
  pairs.reserve(sampling.n_samples);
  for (std::size_t i = 0; i < sampling.n_samples; ++i) pairs.push_back(sample_pair(corpus, rng));
  return pairs;
}

namespace {

void check_inputs(std::span<const std::uint8_t> correctness, std::span<const QuestionPair> pairs,
                  std::span<const double> beliefs, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail(ErrorKind::kValidation, "alpha must be >= 0");
  if (pairs.size() != beliefs.size()) fail(ErrorKind::kValidation, "pairs/beliefs size mismatch");
  if (pairs.empty()) fail(ErrorKind::kPrecondition, "no evaluation pairs");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].target >= correctness.size() || pairs[i].shown >= correctness.size()) {
      fail(ErrorKind::kValidation, "pair index outside the corpus");
    }
    if (!(beliefs[i] >= 0.0 && beliefs[i] <= 1.0)) {
      fail(ErrorKind::kValidation, "posterior belief outside [0,1]");
    }
  }
}

// value = sum(a) / sum(c), with a delta-method standard error.
MetricEstimate ratio_estimate(std::span<const double> a, std::span<const double> c, bool exhaustive) {
  double sa = 0.0, sc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sc += c[i];
  }
  if (sc == 0.0) {
    fail(ErrorKind::kPrecondition,
         "undefined score: normalizer is zero (alpha = 0 and no sampled question answered correctly)");
  }
  MetricEstimate est;
  est.value = sa / sc;
  est.n = a.size();
  if (!exhaustive && a.size() > 1) {
    const double ratio = est.value;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - ratio * c[i];
      ss += d * d;
    }
    const double n = static_cast<double>(a.size());
    est.std_error = std::sqrt(ss / (n * (n - 1.0))) / (sc / n);
  }
  return est;
}

}  // namespace

MetricEstimate generalized_accuracy(std::span<const std::uint8_t> correctness,
                                    std::span<const QuestionPair> pairs,
                                    std::span<const double> beliefs, double alpha, bool exhaustive) {
  check_inputs(correctness, pairs, beliefs, alpha);
  std::vector<double> num(pairs.size()), den(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const bool y = correctness[pairs[i].target] != 0;
    num[i] = weighted_accuracy_single(y, beliefs[i], alpha);
    den[i] = y ? 1.0 : alpha;
  }
  return ratio_estimate(num, den, exhaustive);
}

MetricEstimate weighted_bce(std::span<const std::uint8_t> correctness,
                            std::span<const QuestionPair> pairs, std::span<const double> beliefs,
                            double alpha, bool exhaustive) {
  check_inputs(correctness, pairs, beliefs, alpha);
  std::vector<double> num(pairs.size()), den(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const bool y = correctness[pairs[i].target] != 0;
    const double b = std::clamp(beliefs[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    num[i] = y ? -std::log(b) : -alpha * std::log(1.0 - b);
    den[i] = y ? 1.0 : alpha;
  }
  return ratio_estimate(num, den, exhaustive);
}

namespace {

std::vector<double> compute_beliefs(const BeliefFunction& posterior, std::span<const QuestionPair> pairs,
                                    std::span<const std::uint8_t> correctness, bool parallel) {
  std::vector<double> beliefs(pairs.size());
  if (parallel) {
    kernels::beliefs_parallel(posterior, pairs, correctness, beliefs);
  } else {
    kernels::beliefs_serial(posterior, pairs, correctness, beliefs);
  }
  return beliefs;
}

}  // namespace

MetricEstimate generalized_accuracy(const Corpus& corpus, const std::string& model_id,
                                    const BeliefFunction& posterior, double alpha,
                                    const PairSampling& sampling) {
  const auto correctness = corpus.correctness(model_id);
  const auto pairs = evaluation_pairs(corpus, sampling);
  const auto beliefs = compute_beliefs(posterior, pairs, correctness, true);
  return generalized_accuracy(correctness, pairs, beliefs, alpha,
                              sampling.mode == PairSampling::Mode::kExhaustive);
}

MetricEstimate weighted_bce(const Corpus& corpus, const std::string& model_id,
                            const BeliefFunction& posterior, double alpha,
                            const PairSampling& sampling) {
  const auto correctness = corpus.correctness(model_id);
  const auto pairs = evaluation_pairs(corpus, sampling);
  const auto beliefs = compute_beliefs(posterior, pairs, correctness, true);
  return weighted_bce(correctness, pairs, beliefs, alpha,
                      sampling.mode == PairSampling::Mode::kExhaustive);
}

double fixed_distribution_eval(const Corpus& corpus, const std::string& model_id,
                               const DeploymentDistribution& p) {
  double total = 0.0;
  for (const auto& [id, w] : p.weights()) {
    const auto q = corpus.find_question(id);
    if (!q) fail(ErrorKind::kValidation, "deployment support contains unknown question '" + id + "'");
    const ModelResponse* r = corpus.response(model_id, *q);
    if (!r) {
      fail(ErrorKind::kPrecondition, "model '" + model_id + "' is ungraded on '" + id + "'");
    }
    if (r->correct) total += w;
  }
  return total;
}

double human_deployed_performance(const Corpus& corpus, const std::string& model_id,
                                  const DeploymentDistribution& h) {
  return fixed_distribution_eval(corpus, model_id, h);
}

const char* to_string(Dominance d) {
  switch (d) {
    case Dominance::kADominates: return "A_DOMINATES";
    case Dominance::kBDominates: return "B_DOMINATES";
    case Dominance::kEqual: return "EQUAL";
    case Dominance::kIncomparable: return "INCOMPARABLE";
  }
  return "INCOMPARABLE";
}

Dominance check_dominance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) fail(ErrorKind::kPrecondition, "models graded on different question sets");
  bool a_covers_b = true;  // every question B gets right, A gets right
  bool b_covers_a = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b[i] && !a[i]) a_covers_b = false;
    if (a[i] && !b[i]) b_covers_a = false;
  }
  if (a_covers_b && b_covers_a) return Dominance::kEqual;
  if (a_covers_b) return Dominance::kADominates;
  if (b_covers_a) return Dominance::kBDominates;
  return Dominance::kIncomparable;
}

Dominance check_dominance(const Corpus& corpus, const std::string& model_a, const std::string& model_b) {
  std::vector<std::string> missing;
  for (QuestionIndex q = 0; q < corpus.size(); ++q) {
    if (!corpus.response(model_a, q) || !corpus.response(model_b, q)) {
      missing.push_back(corpus.question(q).question_id);
    }
  }
  if (!missing.empty()) {
    std::string msg = "coverage mismatch; ungraded question ids:";
    for (const auto& id : missing) msg += " " + id;
    fail(ErrorKind::kPrecondition, msg);
  }
  return check_dominance(corpus.correctness(model_a), corpus.correctness(model_b));
}

AdversarialDeployment adversarial_deployment(const Corpus& corpus, const std::string& model_f1,
                                             const std::string& model_f2) {
  const Dominance d = check_dominance(corpus, model_f1, model_f2);
  if (d != Dominance::kADominates && d != Dominance::kEqual) {
    fail(ErrorKind::kPrecondition, "'" + model_f1 + "' does not dominate '" + model_f2 + "' (" +
                                       to_string(d) + ")");
  }
  const auto c1 = corpus.correctness(model_f1);
  const auto c2 = corpus.correctness(model_f2);
  const auto z = std::find(c1.begin(), c1.end(), 0);
  if (z == c1.end()) {
    fail(ErrorKind::kPrecondition, "'" + model_f1 + "' is trivial: it answers every question correctly");
  }
  const auto zp = std::find(c2.begin(), c2.end(), 1);
  if (zp == c2.end()) {
    fail(ErrorKind::kPrecondition, "'" + model_f2 + "' is trivial: it answers no question correctly");
  }
  const std::string z_id = corpus.question(static_cast<QuestionIndex>(z - c1.begin())).question_id;
  const std::string zp_id = corpus.question(static_cast<QuestionIndex>(zp - c2.begin())).question_id;
  return AdversarialDeployment{DeploymentDistribution::point_mass(z_id),
                               DeploymentDistribution::point_mass(zp_id), z_id, zp_id};
}

DeploymentDistribution threshold_deployment(const std::map<std::string, double>& beliefs, double tau) {
  std::vector<std::string> ids;
  for (const auto& [id, b] : beliefs) {
    if (!(b >= 0.0 && b <= 1.0)) fail(ErrorKind::kValidation, "belief for '" + id + "' outside [0,1]");
    if (b > tau) ids.push_back(id);
  }
  if (ids.empty()) {
    fail(ErrorKind::kPrecondition, "empty deployment: no belief exceeds " + std::to_string(tau));
  }
  return DeploymentDistribution::uniform(ids);
}

std::size_t calibration_bin(double posterior) {
  if (!(posterior >= 0.0 && posterior <= 1.0)) {
    fail(ErrorKind::kValidation, "posterior outside [0,1]");
  }
  if (posterior < 0.30) return 0;
  if (posterior < 0.70) return 1;
  return 2;
}

CalibrationTable calibration_table(std::span<const CalibrationSample> samples) {
  CalibrationTable t;
  t.bins[0].lo = 0.0;
  t.bins[0].hi = 0.30;
  t.bins[1].lo = 0.30;
  t.bins[1].hi = 0.70;
  t.bins[2].lo = 0.70;
  t.bins[2].hi = 1.0;
  std::array<std::size_t, 3> correct{};
  for (const auto& s : samples) {
    const std::size_t b = calibration_bin(s.posterior);
    ++t.bins[b].count;
    if (s.correct) ++correct[b];
  }
  for (std::size_t b = 0; b < 3; ++b) {
    auto& bin = t.bins[b];
    if (bin.count == 0) continue;
    const double n = static_cast<double>(bin.count);
    const double m = static_cast<double>(correct[b]) / n;
    bin.mean_accuracy = m;
    bin.std_error = std::sqrt(m * (1.0 - m) / n);
  }
  return t;
}

std::vector<AlignmentReport> alignment_table(const Corpus& corpus,
                                             const std::vector<std::string>& model_ids,
                                             const std::vector<double>& alphas,
                                             const BeliefFunction& posterior,
                                             const PairSampling& sampling, bool parallel) {
  for (double a : alphas) implied_threshold(a);
  const auto pairs = evaluation_pairs(corpus, sampling);
  const bool exhaustive = sampling.mode == PairSampling::Mode::kExhaustive;
  std::vector<AlignmentReport> out;
  for (const auto& model : model_ids) {
    const auto correctness = corpus.correctness(model);
    const auto beliefs = compute_beliefs(posterior, pairs, correctness, parallel);
    AlignmentReport report{model, {}};
    for (double alpha : alphas) {
      const auto acc = generalized_accuracy(correctness, pairs, beliefs, alpha, exhaustive);
      const auto bce = weighted_bce(correctness, pairs, beliefs, alpha, exhaustive);
      report.entries.push_back({alpha, implied_threshold(alpha), acc.value, bce.value, acc.n,
                                acc.std_error, bce.std_error});
    }
    out.push_back(std::move(report));
  }
  return out;
}

std::vector<Json> alignment_records(const std::vector<AlignmentReport>& reports) {
  std::vector<Json> records;
  for (const auto& r : reports) {
    for (const auto& e : r.entries) {
      records.push_back({{"model_id", r.model_id}, {"alpha", e.alpha}, {"threshold", e.threshold},
                         {"metric", "weighted_accuracy"}, {"value", e.weighted_accuracy},
                         {"n", e.n_samples}, {"stderr", e.accuracy_std_error}});
      records.push_back({{"model_id", r.model_id}, {"alpha", e.alpha}, {"threshold", e.threshold},
                         {"metric", "weighted_bce"}, {"value", e.weighted_bce},
                         {"n", e.n_samples}, {"stderr", e.bce_std_error}});
    }
  }
  return records;
}

std::vector<double> priors_from_reports(const Corpus& corpus, std::span<const BeliefReport> reports) {
  if (reports.empty()) fail(ErrorKind::kPrecondition, "no reports to estimate priors from");
  std::vector<double> task_sum(corpus.tasks().size(), 0.0);
  std::vector<std::size_t> task_n(corpus.tasks().size(), 0);
  double sum = 0.0;
  for (const auto& r : reports) {
    const QuestionIndex x = corpus.index_of(r.target_question_id);
    task_sum[corpus.task_index(x)] += r.prior();
    ++task_n[corpus.task_index(x)];
    sum += r.prior();
  }
  const double global = sum / static_cast<double>(reports.size());
  std::vector<double> priors(corpus.size());
  for (QuestionIndex q = 0; q < corpus.size(); ++q) {
    const auto t = corpus.task_index(q);
    priors[q] = task_n[t] ? task_sum[t] / static_cast<double>(task_n[t]) : global;
  }
  return priors;
}

BeliefFunction mixture_posterior(const Corpus& corpus, const Predictor& predictor,
                                 const PosteriorModel& model, std::vector<double> priors) {
  if (priors.size() != corpus.size()) fail(ErrorKind::kValidation, "one prior per question required");
  // Captures corpus and predictor by reference; both must outlive the function.
  return [&corpus, &predictor, model, priors = std::move(priors)](QuestionPair pair, bool shown_correct) {
    const double p = predictor.predict(pair_input(corpus, pair, shown_correct));
    return predict_posterior(model, priors[pair.target], p, shown_correct);
  };
}

}  // namespace hgf
