#include "hgf/predictor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>

#include "hgf/error.hpp"

namespace hgf {

const char* to_string(PredictorKind k) {
  switch (k) {
    case PredictorKind::kPrevCorrect: return "prev_correct";
    case PredictorKind::kPrevCorrectSameTask: return "prev_correct_same_task";
    case PredictorKind::kTextNgram: return "text_ngram";
    case PredictorKind::kExternalScores: return "external_scores";
  }
  return "unknown";
}

PredictorKind predictor_kind_from_string(const std::string& s) {
  if (s == "prev_correct") return PredictorKind::kPrevCorrect;
  if (s == "prev_correct_same_task") return PredictorKind::kPrevCorrectSameTask;
  if (s == "text_ngram") return PredictorKind::kTextNgram;
  if (s == "external_scores") return PredictorKind::kExternalScores;
  fail(ErrorKind::kValidation, "unknown predictor kind '" + s + "'");
}

PairInput to_input(const GeneralizationExample& e) {
  return PairInput{e.x_id, e.xprime_id, e.x_text, e.xprime_text, e.shown_correct, e.same_task};
}

PairInput pair_input(const Corpus& corpus, QuestionPair pair, bool shown_correct) {
  const Question& x = corpus.question(pair.target);
  const Question& xp = corpus.question(pair.shown);
  return PairInput{x.question_id, xp.question_id, x.text, xp.text, shown_correct,
                   corpus.same_task(pair.target, pair.shown)};
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double clamp01(double p) {
  if (!(p >= 0.0)) return 0.0;  // also maps NaN to 0
  return std::min(p, 1.0);
}

// Maximum-likelihood logistic regression on binary features, computed from
// per-cell counts so the fit does not depend on example order. A 1e-8 ridge
// keeps weights finite when a cell is pure.
std::vector<double> fit_logistic_cells(std::span<const GeneralizationExample> examples,
                                       int n_features) {
  if (examples.empty()) fail(ErrorKind::kPrecondition, "cannot fit a predictor on zero examples");
  const int dim = n_features + 1;
  const int n_cells = 1 << n_features;
  std::vector<double> count(n_cells, 0.0), positives(n_cells, 0.0);
  for (const auto& e : examples) {
    int cell = e.shown_correct ? 1 : 0;
    if (n_features > 1 && e.same_task) cell |= 2;
    count[cell] += 1.0;
    positives[cell] += e.label_changed ? 1.0 : 0.0;
  }
  const double total_pos = std::accumulate(positives.begin(), positives.end(), 0.0);
  if (total_pos == 0.0 || total_pos == static_cast<double>(examples.size())) {
    fail(ErrorKind::kPrecondition, "degenerate fit: all labels belong to a single class");
  }

  constexpr double kRidge = 1e-8;
  std::vector<double> w(dim, 0.0);
  auto row = [&](int cell) {
    std::array<double, 3> x{1.0, static_cast<double>(cell & 1), static_cast<double>((cell >> 1) & 1)};
    return x;
  };
  for (int iter = 0; iter < 500; ++iter) {
    std::array<std::array<double, 4>, 3> aug{};  // [H | g]
    for (int c = 0; c < n_cells; ++c) {
      if (count[c] == 0.0) continue;
      const auto x = row(c);
      double z = 0.0;
      for (int i = 0; i < dim; ++i) z += w[i] * x[i];
      const double p = sigmoid(z);
      const double r = positives[c] - count[c] * p;
      const double v = count[c] * p * (1.0 - p);
      for (int i = 0; i < dim; ++i) {
        aug[i][dim] += r * x[i];
        for (int j = 0; j < dim; ++j) aug[i][j] += v * x[i] * x[j];
      }
    }
    for (int i = 0; i < dim; ++i) {
      aug[i][i] += kRidge;
      aug[i][dim] -= kRidge * w[i];
    }
    // Gaussian elimination with partial pivoting.
    for (int col = 0; col < dim; ++col) {
      int piv = col;
      for (int r = col + 1; r < dim; ++r) {
        if (std::fabs(aug[r][col]) > std::fabs(aug[piv][col])) piv = r;
      }
      std::swap(aug[col], aug[piv]);
      for (int r = 0; r < dim; ++r) {
        if (r == col) continue;
        const double f = aug[r][col] / aug[col][col];
        for (int k = col; k <= dim; ++k) aug[r][k] -= f * aug[col][k];
      }
    }
    double max_step = 0.0;
    for (int i = 0; i < dim; ++i) {
      double step = aug[i][dim] / aug[i][i];
      step = std::clamp(step, -5.0, 5.0);
      w[i] += step;
      max_step = std::max(max_step, std::fabs(step));
    }
    if (max_step < 1e-12) break;
  }
  return w;
}

std::uint64_t fnv1a(std::string_view a, std::string_view b) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : a) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  h = (h ^ 0x1F) * 1099511628211ULL;
  for (char c : b) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return h;
}

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

void add_segment(const TextFeaturizerConfig& cfg, std::string_view tag,
                 const std::vector<std::string>& words, std::vector<std::uint32_t>& out) {
  std::string key;
  for (int n : cfg.word_ngrams) {
    if (n <= 0) continue;
    for (std::size_t i = 0; i + n <= words.size(); ++i) {
      key.clear();
      key += tag;
      key += 'w';
      key += std::to_string(n);
      for (int k = 0; k < n; ++k) {
        key += ' ';
        key += words[i + k];
      }
      out.push_back(static_cast<std::uint32_t>(fnv1a(key, {}) % cfg.hash_dim));
    }
  }
  if (cfg.char_ngrams.empty()) return;
  std::string joined = " ";
  for (const auto& w : words) {
    joined += w;
    joined += ' ';
  }
  for (int n : cfg.char_ngrams) {
    if (n <= 0) continue;
    const std::string prefix = std::string(tag) + "c" + std::to_string(n);
    for (std::size_t i = 0; i + n <= joined.size(); ++i) {
      out.push_back(static_cast<std::uint32_t>(
          fnv1a(prefix, std::string_view(joined).substr(i, n)) % cfg.hash_dim));
    }
  }
}

}  // namespace

namespace {

std::vector<std::string> unique_ngrams(const std::vector<std::string>& words, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    std::string g = words[i];
    for (std::size_t k = 1; k < n; ++k) g += ' ' + words[i + k];
    out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::string> intersect(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Merges duplicate hashes into counts, scales the block to norm `target`.
void append_block(std::vector<std::uint32_t> raw, double target, SparseFeatures& f) {
  std::sort(raw.begin(), raw.end());
  const std::size_t start = f.index.size();
  for (std::size_t i = 0; i < raw.size();) {
    std::size_t j = i;
    while (j < raw.size() && raw[j] == raw[i]) ++j;
    f.index.push_back(raw[i]);
    f.value.push_back(static_cast<double>(j - i));
    i = j;
  }
  double norm = 0.0;
  for (std::size_t k = start; k < f.value.size(); ++k) norm += f.value[k] * f.value[k];
  norm = std::sqrt(norm);
  if (norm > 0) {
    for (std::size_t k = start; k < f.value.size(); ++k) f.value[k] *= target / norm;
  }
}

}  // namespace

SparseFeatures featurize(const TextFeaturizerConfig& cfg, const PairInput& input) {
  if (cfg.hash_dim == 0) fail(ErrorKind::kValidation, "text featurizer hash width must be > 0");
  std::vector<std::uint32_t> text;
  const auto xp_words = words_of(input.xprime_text);
  const auto x_words = words_of(input.x_text);
  const char* correctness = input.shown_correct ? "c1" : "c0";
  add_segment(cfg, "p:", xp_words, text);
  text.push_back(static_cast<std::uint32_t>(fnv1a("tok:", correctness) % cfg.hash_dim));
  add_segment(cfg, "x:", x_words, text);

  SparseFeatures merged;
  if (!cfg.pair_features) {
    append_block(std::move(text), 1.0, merged);
  } else {
    // Two blocks of equal weight, so the few pair features are not drowned
    // by the many n-grams of the texts themselves.
    std::vector<std::uint32_t> pair;
    const std::string crossed = std::string("s") + correctness + ":";
    for (const auto& w : intersect(unique_ngrams(xp_words, 1), unique_ngrams(x_words, 1))) {
      pair.push_back(static_cast<std::uint32_t>(fnv1a("s:", w) % cfg.hash_dim));
      pair.push_back(static_cast<std::uint32_t>(fnv1a(crossed, w) % cfg.hash_dim));
    }
    // Task-agnostic overlap: how many word bigrams the two texts share.
    const std::size_t shared_bigrams =
        std::min<std::size_t>(intersect(unique_ngrams(xp_words, 2), unique_ngrams(x_words, 2)).size(), 4);
    const std::string bucket = std::to_string(shared_bigrams);
    pair.push_back(static_cast<std::uint32_t>(fnv1a("ov:", bucket) % cfg.hash_dim));
    pair.push_back(static_cast<std::uint32_t>(fnv1a(std::string("ov") + correctness + ":", bucket) % cfg.hash_dim));
    const double half = std::sqrt(0.5);
    append_block(std::move(text), half, merged);
    append_block(std::move(pair), half, merged);
  }

  // Hash collisions across blocks: sum their values (index stays unique and sorted).
  std::vector<std::size_t> order(merged.index.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return merged.index[a] < merged.index[b]; });
  SparseFeatures f;
  for (std::size_t k : order) {
    if (!f.index.empty() && f.index.back() == merged.index[k]) {
      f.value.back() += merged.value[k];
    } else {
      f.index.push_back(merged.index[k]);
      f.value.push_back(merged.value[k]);
    }
  }
  return f;
}

Predictor::Predictor(PredictorKind kind, Logistic params) : kind_(kind), params_(std::move(params)) {
  const std::size_t want = kind == PredictorKind::kPrevCorrect ? 2 : 3;
  if ((kind != PredictorKind::kPrevCorrect && kind != PredictorKind::kPrevCorrectSameTask) ||
      std::get<Logistic>(params_).weights.size() != want) {
    fail(ErrorKind::kValidation, "logistic predictor parameters do not match its kind");
  }
}

Predictor::Predictor(Text params) : kind_(PredictorKind::kTextNgram), params_(std::move(params)) {
  const auto& t = std::get<Text>(params_);
  if (t.weights.empty() || t.weights.size() != t.bias.size()) {
    fail(ErrorKind::kValidation, "text predictor needs at least one ensemble member");
  }
  for (const auto& w : t.weights) {
    if (w.size() != t.config.features.hash_dim) {
      fail(ErrorKind::kValidation, "text predictor weight size does not match hash width");
    }
  }
}

Predictor::Predictor(External params)
    : kind_(PredictorKind::kExternalScores), params_(std::move(params)) {}

double Predictor::predict(const PairInput& in) const {
  if (const auto* lg = logistic()) {
    double z = lg->weights[0] + (in.shown_correct ? lg->weights[1] : 0.0);
    if (lg->weights.size() > 2 && in.same_task) z += lg->weights[2];
    return clamp01(sigmoid(z));
  }
  if (const auto* tx = text()) {
    const SparseFeatures f = featurize(tx->config.features, in);
    double sum = 0.0;
    for (std::size_t m = 0; m < tx->weights.size(); ++m) {
      double z = tx->bias[m];
      const auto& w = tx->weights[m];
      for (std::size_t k = 0; k < f.index.size(); ++k) z += w[f.index[k]] * f.value[k];
      sum += sigmoid(z);
    }
    return clamp01(sum / static_cast<double>(tx->weights.size()));
  }
  const auto& ex = std::get<External>(params_);
  auto it = ex.scores.find({std::string(in.x_id), std::string(in.xprime_id), in.shown_correct});
  if (it != ex.scores.end()) return it->second;
  if (ex.config.fallback) return *ex.config.fallback;
  fail(ErrorKind::kNotFound, "no external score for (" + std::string(in.x_id) + ", " +
                                 std::string(in.xprime_id) + ", " +
                                 (in.shown_correct ? "1" : "0") + ")");
}

double Predictor::pair_score(PairInput input) const {
  input.shown_correct = true;
  const double a = predict(input);
  input.shown_correct = false;
  const double b = predict(input);
  return std::max(a, b);
}

Predictor fit_baseline_prevcorrect(std::span<const GeneralizationExample> examples) {
  return Predictor(PredictorKind::kPrevCorrect, {fit_logistic_cells(examples, 1)});
}

Predictor fit_baseline_sametask(std::span<const GeneralizationExample> examples) {
  return Predictor(PredictorKind::kPrevCorrectSameTask, {fit_logistic_cells(examples, 2)});
}

Predictor fit_text_predictor(std::span<const GeneralizationExample> examples,
                             const TextTrainConfig& config) {
  if (config.features.hash_dim == 0) {
    fail(ErrorKind::kValidation, "text featurizer hash width must be > 0");
  }
  if (examples.empty()) fail(ErrorKind::kPrecondition, "cannot fit a predictor on zero examples");
  if (config.ensemble < 1 || config.epochs < 1 || !(config.learning_rate > 0) || config.l2 < 0) {
    fail(ErrorKind::kValidation, "invalid text predictor training config");
  }
  std::vector<SparseFeatures> feats;
  feats.reserve(examples.size());
  for (const auto& e : examples) feats.push_back(featurize(config.features, to_input(e)));

  Predictor::Text params;
  params.config = config;
  for (int m = 0; m < config.ensemble; ++m) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(m)));
    std::vector<double> v(config.features.hash_dim, 0.0);
    double bias = 0.0;
    double scale = 1.0;  // true weights are scale * v (lazy L2 shrinkage)
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      rng.shuffle(std::span<std::size_t>(order));
      const double eta = config.learning_rate / std::sqrt(1.0 + epoch);
      for (std::size_t idx : order) {
        const auto& f = feats[idx];
        double z = bias;
        for (std::size_t k = 0; k < f.index.size(); ++k) z += scale * v[f.index[k]] * f.value[k];
        const double g = sigmoid(z) - (examples[idx].label_changed ? 1.0 : 0.0);
        scale *= 1.0 - eta * config.l2;
        if (scale < 1e-6) {
          for (double& w : v) w *= scale;
          scale = 1.0;
        }
        for (std::size_t k = 0; k < f.index.size(); ++k) {
          v[f.index[k]] -= eta * g * f.value[k] / scale;
        }
        bias -= eta * g;
      }
    }
    for (double& w : v) w *= scale;
    params.weights.push_back(std::move(v));
    params.bias.push_back(bias);
  }
  return Predictor(std::move(params));
}

Predictor load_external_scores(const std::vector<Json>& rows, const ExternalScoresConfig& config) {
  if (config.fallback && !(*config.fallback >= 0.0 && *config.fallback <= 1.0)) {
    fail(ErrorKind::kValidation, "external-score fallback must lie in [0,1]");
  }
  Predictor::External params;
  params.config = config;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = "line " + std::to_string(i + 1) + ": ";
    try {
      const double p = require_number(rows[i], "p_change");
      if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::kValidation, "p_change outside [0,1]");
      Predictor::External::Key key{require_string(rows[i], "x_id"),
                                   require_string(rows[i], "xprime_id"),
                                   require_binary(rows[i], "shown_correct")};
      if (!params.scores.emplace(std::move(key), p).second) {
        fail(ErrorKind::kConflict, "duplicate score key");
      }
    } catch (const Error& e) {
      throw Error(e.kind(), where + e.what());
    }
  }
  return Predictor(std::move(params));
}

Predictor load_external_scores(std::istream& in, const ExternalScoresConfig& config) {
  return load_external_scores(read_jsonl(in), config);
}

namespace {

constexpr int kSnapshotVersion = 1;

Json text_config_json(const TextTrainConfig& c) {
  return {{"hash_dim", c.features.hash_dim},     {"word_ngrams", c.features.word_ngrams},
          {"char_ngrams", c.features.char_ngrams}, {"pair_features", c.features.pair_features},
          {"l2", c.l2},                           {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},     {"ensemble", c.ensemble},
          {"seed", c.seed}};
}

TextTrainConfig text_config_from_json(const Json& j) {
  TextTrainConfig c;
  c.features.hash_dim = j.at("hash_dim").get<std::uint32_t>();
  c.features.word_ngrams = j.at("word_ngrams").get<std::vector<int>>();
  c.features.char_ngrams = j.at("char_ngrams").get<std::vector<int>>();
  c.features.pair_features = j.at("pair_features").get<bool>();
  c.l2 = j.at("l2").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.ensemble = j.at("ensemble").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

Json Predictor::snapshot() const {
  Json j = {{"format", "hgf-predictor"}, {"version", kSnapshotVersion}, {"kind", to_string(kind_)}};
  if (const auto* lg = logistic()) {
    j["config"] = Json::object();
    j["parameters"] = {{"weights", lg->weights}};
  } else if (const auto* tx = text()) {
    j["config"] = text_config_json(tx->config);
    Json members = Json::array();
    for (std::size_t m = 0; m < tx->weights.size(); ++m) {
      std::vector<std::uint32_t> idx;
      std::vector<double> val;
      for (std::uint32_t k = 0; k < tx->weights[m].size(); ++k) {
        if (tx->weights[m][k] != 0.0) {
          idx.push_back(k);
          val.push_back(tx->weights[m][k]);
        }
      }
      members.push_back({{"bias", tx->bias[m]}, {"index", idx}, {"value", val}});
    }
    j["parameters"] = {{"members", members}};
  } else {
    const auto& ex = std::get<External>(params_);
    j["config"] = Json::object();
    if (ex.config.fallback) j["config"]["fallback"] = *ex.config.fallback;
    Json rows = Json::array();
    for (const auto& [key, p] : ex.scores) {
      rows.push_back({{"x_id", std::get<0>(key)},
                      {"xprime_id", std::get<1>(key)},
                      {"shown_correct", std::get<2>(key) ? 1 : 0},
                      {"p_change", p}});
    }
    j["parameters"] = {{"scores", rows}};
  }
  return j;
}

Predictor Predictor::from_snapshot(const Json& j) {
  try {
    if (j.at("format") != "hgf-predictor") fail(ErrorKind::kValidation, "not a predictor snapshot");
    if (j.at("version").get<int>() != kSnapshotVersion) {
      fail(ErrorKind::kValidation, "unsupported predictor snapshot version");
    }
    const PredictorKind kind = predictor_kind_from_string(j.at("kind").get<std::string>());
    const Json& params = j.at("parameters");
    switch (kind) {
      case PredictorKind::kPrevCorrect:
      case PredictorKind::kPrevCorrectSameTask:
        return Predictor(kind, Logistic{params.at("weights").get<std::vector<double>>()});
      case PredictorKind::kTextNgram: {
        Text t;
        t.config = text_config_from_json(j.at("config"));
        for (const Json& m : params.at("members")) {
          std::vector<double> w(t.config.features.hash_dim, 0.0);
          const auto idx = m.at("index").get<std::vector<std::uint32_t>>();
          const auto val = m.at("value").get<std::vector<double>>();
          if (idx.size() != val.size()) fail(ErrorKind::kValidation, "index/value length mismatch");
          for (std::size_t k = 0; k < idx.size(); ++k) w.at(idx[k]) = val[k];
          t.weights.push_back(std::move(w));
          t.bias.push_back(m.at("bias").get<double>());
        }
        return Predictor(std::move(t));
      }
      case PredictorKind::kExternalScores: {
        ExternalScoresConfig cfg;
        if (j.at("config").contains("fallback")) cfg.fallback = j["config"]["fallback"].get<double>();
        return load_external_scores(params.at("scores").get<std::vector<Json>>(), cfg);
      }
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::kValidation, std::string("malformed predictor snapshot: ") + e.what());
  }
  fail(ErrorKind::kValidation, "malformed predictor snapshot");
}

void save_snapshot(const std::string& path, const Predictor& p) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path);
  out << p.snapshot().dump() << '\n';
}

Predictor load_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path);
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::kValidation, path + ": malformed predictor snapshot");
  return Predictor::from_snapshot(j);
}

}  // namespace hgf
