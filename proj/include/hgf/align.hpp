#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hgf/beliefs.hpp"
#include "hgf/corpus.hpp"
#include "hgf/kernels.hpp"
#include "hgf/predictor.hpp"

namespace hgf {

using kernels::BeliefFunction;

// Probability distribution over question ids.
class DeploymentDistribution {
 public:
  DeploymentDistribution() = default;
  // Validates nonnegativity and unit mass (1e-9); when `corpus` is given,
  // also that the support lies in it.
  explicit DeploymentDistribution(std::map<std::string, double> weights,
                                  const Corpus* corpus = nullptr);

  static DeploymentDistribution point_mass(const std::string& question_id);
  static DeploymentDistribution uniform(const std::vector<std::string>& question_ids);

  const std::map<std::string, double>& weights() const { return weights_; }

 private:
  std::map<std::string, double> weights_;
};

Json distribution_to_json(const DeploymentDistribution& d);

// l_alpha(y, b) = y b + alpha (1 - y)(1 - b)
double weighted_accuracy_single(bool y, double b, double alpha);

// Belief level above which a user with risk weight alpha deploys.
double implied_threshold(double alpha);

struct PairSampling {
  enum class Mode { kMonteCarlo, kExhaustive };
  Mode mode = Mode::kMonteCarlo;
  std::size_t n_samples = 500;
  std::uint64_t seed = 0;
};

// Monte-Carlo: n_samples uniform ordered pairs with x != x'. Exhaustive: all
// n(n-1) ordered pairs once each.
std::vector<QuestionPair> evaluation_pairs(const Corpus& corpus, const PairSampling& sampling);

struct MetricEstimate {
  double value = 0.0;
  std::size_t n = 0;
  double std_error = 0.0;  // delta-method ratio standard error; 0 in exhaustive mode
};

// Ratio estimators over precomputed beliefs[i] = b(pairs[i].target | pairs[i].shown, f).
MetricEstimate generalized_accuracy(std::span<const std::uint8_t> correctness,
                                    std::span<const QuestionPair> pairs,
                                    std::span<const double> beliefs, double alpha,
                                    bool exhaustive = false);
MetricEstimate weighted_bce(std::span<const std::uint8_t> correctness,
                            std::span<const QuestionPair> pairs, std::span<const double> beliefs,
                            double alpha, bool exhaustive = false);

MetricEstimate generalized_accuracy(const Corpus& corpus, const std::string& model_id,
                                    const BeliefFunction& posterior, double alpha,
                                    const PairSampling& sampling);
MetricEstimate weighted_bce(const Corpus& corpus, const std::string& model_id,
                            const BeliefFunction& posterior, double alpha,
                            const PairSampling& sampling);

double fixed_distribution_eval(const Corpus& corpus, const std::string& model_id,
                               const DeploymentDistribution& p);
// Same computation; h may depend on the model being evaluated.
double human_deployed_performance(const Corpus& corpus, const std::string& model_id,
                                  const DeploymentDistribution& h);

enum class Dominance { kADominates, kBDominates, kEqual, kIncomparable };
const char* to_string(Dominance d);

Dominance check_dominance(std::span<const std::uint8_t> correct_a,
                          std::span<const std::uint8_t> correct_b);
Dominance check_dominance(const Corpus& corpus, const std::string& model_a,
                          const std::string& model_b);

struct AdversarialDeployment {
  DeploymentDistribution h1;  // point mass where f1 is wrong
  DeploymentDistribution h2;  // point mass where f2 is right
  std::string z;
  std::string z_prime;
};

AdversarialDeployment adversarial_deployment(const Corpus& corpus, const std::string& model_f1,
                                             const std::string& model_f2);

// Uniform over {x : b(x) > tau}.
DeploymentDistribution threshold_deployment(const std::map<std::string, double>& beliefs, double tau);

struct CalibrationSample {
  double posterior = 0.0;
  bool correct = false;
};

struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  std::optional<double> mean_accuracy;
  std::optional<double> std_error;
};

struct CalibrationTable {
  std::array<CalibrationBin, 3> bins;  // [0, .3), [.3, .7), [.7, 1]
};

std::size_t calibration_bin(double posterior);
CalibrationTable calibration_table(std::span<const CalibrationSample> samples);

struct AlignmentEntry {
  double alpha = 0.0;
  double threshold = 0.0;
  double weighted_accuracy = 0.0;
  double weighted_bce = 0.0;
  std::size_t n_samples = 0;
  double accuracy_std_error = 0.0;
  double bce_std_error = 0.0;
};

struct AlignmentReport {
  std::string model_id;
  std::vector<AlignmentEntry> entries;
};

// Every model is evaluated on the same sampled pairs.
std::vector<AlignmentReport> alignment_table(const Corpus& corpus,
                                             const std::vector<std::string>& model_ids,
                                             const std::vector<double>& alphas,
                                             const BeliefFunction& posterior,
                                             const PairSampling& sampling, bool parallel = true);

std::vector<Json> alignment_records(const std::vector<AlignmentReport>& reports);

// Posterior sources.

// Mean reported prior per task of x, falling back to the global mean prior.
std::vector<double> priors_from_reports(const Corpus& corpus, std::span<const BeliefReport> reports);

BeliefFunction mixture_posterior(const Corpus& corpus, const Predictor& predictor,
                                 const PosteriorModel& model, std::vector<double> priors);

}  // namespace hgf
