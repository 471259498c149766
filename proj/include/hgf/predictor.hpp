#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

#include "hgf/beliefs.hpp"
#include "hgf/corpus.hpp"
#include "hgf/jsonl.hpp"

namespace hgf {

enum class PredictorKind { kPrevCorrect, kPrevCorrectSameTask, kTextNgram, kExternalScores };

const char* to_string(PredictorKind k);
PredictorKind predictor_kind_from_string(const std::string& s);

// Everything a belief-change predictor may look at for one (x, x', f(x')).
struct PairInput {
  std::string_view x_id;
  std::string_view xprime_id;
  std::string_view x_text;
  std::string_view xprime_text;
  bool shown_correct = false;
  bool same_task = false;
};

PairInput to_input(const GeneralizationExample& e);
PairInput pair_input(const Corpus& corpus, QuestionPair pair, bool shown_correct);

struct TextFeaturizerConfig {
  std::uint32_t hash_dim = 1u << 18;
  std::vector<int> word_ngrams = {1, 2};
  std::vector<int> char_ngrams = {3};
  // Adds words shared by x and x' and a bucketed count of shared bigrams
  // (plain and crossed with correctness), as a block weighted equally with
  // the text n-grams. A linear model cannot otherwise express agreement
  // between the two texts.
  bool pair_features = true;
};

struct TextTrainConfig {
  TextFeaturizerConfig features;
  double l2 = 1e-6;
  int epochs = 10;
  double learning_rate = 0.5;
  int ensemble = 1;  // models trained with derived seeds; prediction is their mean
  std::uint64_t seed = 0;
};

struct SparseFeatures {
  std::vector<std::uint32_t> index;  // sorted, unique
  std::vector<double> value;         // unit L2 norm unless hashes collide across blocks
};

SparseFeatures featurize(const TextFeaturizerConfig& config, const PairInput& input);

struct ExternalScoresConfig {
  std::optional<double> fallback;  // unset: missing keys are an error
};

// A fitted model of P(belief changes | x, x', f(x')). Immutable once built;
// predict() is safe to call concurrently.
class Predictor {
 public:
  struct Logistic {
    // intercept, shown_correct[, same_task]
    std::vector<double> weights;
  };
  struct Text {
    TextTrainConfig config;
    std::vector<std::vector<double>> weights;  // one dense hash_dim vector per member
    std::vector<double> bias;
  };
  struct External {
    using Key = std::tuple<std::string, std::string, bool>;
    std::map<Key, double> scores;
    ExternalScoresConfig config;
  };

  Predictor(PredictorKind kind, Logistic params);
  explicit Predictor(Text params);
  explicit Predictor(External params);

  PredictorKind kind() const { return kind_; }
  double predict(const PairInput& input) const;

  // Probability under both correctness hypotheses, maximum taken.
  double pair_score(PairInput input) const;

  const Logistic* logistic() const { return std::get_if<Logistic>(&params_); }
  const Text* text() const { return std::get_if<Text>(&params_); }
  const External* external() const { return std::get_if<External>(&params_); }

  Json snapshot() const;
  static Predictor from_snapshot(const Json& snapshot);

 private:
  PredictorKind kind_;
  std::variant<Logistic, Text, External> params_;
};

Predictor fit_baseline_prevcorrect(std::span<const GeneralizationExample> examples);
Predictor fit_baseline_sametask(std::span<const GeneralizationExample> examples);
Predictor fit_text_predictor(std::span<const GeneralizationExample> examples,
                             const TextTrainConfig& config);
Predictor load_external_scores(std::istream& in, const ExternalScoresConfig& config);
Predictor load_external_scores(const std::vector<Json>& rows, const ExternalScoresConfig& config);

void save_snapshot(const std::string& path, const Predictor& p);
Predictor load_snapshot(const std::string& path);

}  // namespace hgf
