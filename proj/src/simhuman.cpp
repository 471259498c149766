#include "hgf/simhuman.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hgf/error.hpp"

namespace hgf {

void validate(const OracleConfig& c) {
  const std::size_t n = c.task_ids.size();
  auto bad = [](const std::string& m) { fail(ErrorKind::kValidation, "oracle config: " + m); };
  if (c.similarity.size() != n || c.difficulty.size() != n) {
    bad("similarity and difficulty must have one entry per task");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (c.similarity[i].size() != n) bad("similarity matrix must be square");
    if (c.similarity[i][i] != 1.0) bad("similarity(t, t) must be 1");
    if (!(c.difficulty[i] >= 0.0 && c.difficulty[i] <= 1.0)) bad("difficulty must lie in [0,1]");
    for (std::size_t j = 0; j < n; ++j) {
      const double s = c.similarity[i][j];
      if (!(s >= 0.0 && s <= 1.0)) bad("similarity must lie in [0,1]");
      if (s != c.similarity[j][i]) bad("similarity must be symmetric");
    }
  }
  if (!(c.update_step > 0.0 && c.update_step <= 1.0)) bad("update_step must lie in (0,1]");
  if (!(c.asymmetry >= 1.0) || !std::isfinite(c.asymmetry)) bad("asymmetry must be >= 1");
  if (!(c.noise >= 0.0) || !std::isfinite(c.noise)) bad("noise must be >= 0");
  if (!(c.jitter >= 0.0) || !std::isfinite(c.jitter)) bad("jitter must be >= 0");
}

Json oracle_config_to_json(const OracleConfig& c) {
  return {{"task_ids", c.task_ids},     {"similarity", c.similarity}, {"difficulty", c.difficulty},
          {"update_step", c.update_step}, {"asymmetry", c.asymmetry},   {"noise", c.noise},
          {"jitter", c.jitter},         {"population_size", c.population_size},
          {"seed", c.seed}};
}

OracleConfig oracle_config_from_json(const Json& j) {
  OracleConfig c;
  try {
    c.task_ids = j.at("task_ids").get<std::vector<std::string>>();
    if (j.contains("similarity")) {
      c.similarity = j["similarity"].get<std::vector<std::vector<double>>>();
    } else {
      // Compact form: {"blocks": {"size": k, "within_block": b, "between": c}}
      const Json& b = j.at("blocks");
      c = block_oracle_config(c.task_ids, b.at("size").get<std::size_t>(),
                              b.at("within_block").get<double>(), b.at("between").get<double>());
    }
    if (j.contains("difficulty")) {
      const Json& d = j["difficulty"];
      if (d.is_number()) {
        c.difficulty.assign(c.task_ids.size(), d.get<double>());
      } else {
        c.difficulty = d.get<std::vector<double>>();
      }
    } else {
      c.difficulty.assign(c.task_ids.size(), 0.5);
    }
    c.update_step = j.value("update_step", c.update_step);
    c.asymmetry = j.value("asymmetry", c.asymmetry);
    c.noise = j.value("noise", c.noise);
    c.jitter = j.value("jitter", c.jitter);
    c.population_size = j.value("population_size", c.population_size);
    c.seed = j.value("seed", c.seed);
  } catch (const Json::exception& e) {
    fail(ErrorKind::kValidation, std::string("oracle config: ") + e.what());
  }
  validate(c);
  return c;
}

OracleConfig load_oracle_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path);
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::kValidation, path + ": malformed oracle config");
  return oracle_config_from_json(j);
}

OracleConfig block_oracle_config(std::vector<std::string> task_ids, std::size_t block_size,
                                 double within_block, double between) {
  if (block_size == 0) fail(ErrorKind::kValidation, "oracle config: block size must be positive");
  OracleConfig c;
  const std::size_t n = task_ids.size();
  c.task_ids = std::move(task_ids);
  c.similarity.assign(n, std::vector<double>(n, between));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i / block_size == j / block_size) c.similarity[i][j] = within_block;
    }
    c.similarity[i][i] = 1.0;
  }
  c.difficulty.assign(n, 0.5);
  return c;
}

SyntheticOracle::SyntheticOracle(std::shared_ptr<const OracleConfig> shared, std::vector<double> difficulty,
                                 double update_step, double asymmetry, std::uint64_t seed)
    : shared_(std::move(shared)),
      difficulty_(std::move(difficulty)),
      update_step_(update_step),
      asymmetry_(asymmetry),
      seed_(seed) {
  auto index = std::make_shared<std::unordered_map<std::string, std::size_t>>();
  for (std::size_t i = 0; i < shared_->task_ids.size(); ++i) (*index)[shared_->task_ids[i]] = i;
  index_ = std::move(index);
}

std::size_t SyntheticOracle::task_index(const std::string& task_id) const {
  auto it = index_->find(task_id);
  if (it == index_->end()) fail(ErrorKind::kValidation, "oracle has no task '" + task_id + "'");
  return it->second;
}

double SyntheticOracle::similarity(const std::string& a, const std::string& b) const {
  return shared_->similarity[task_index(a)][task_index(b)];
}

double SyntheticOracle::difficulty(const std::string& task_id) const {
  return difficulty_[task_index(task_id)];
}

double SyntheticOracle::change_probability(const std::string& task_x, const std::string& task_xprime,
                                           bool shown_correct) const {
  const double base = similarity(task_x, task_xprime);
  return std::clamp(shown_correct ? base : base * asymmetry_, 0.0, 1.0);
}

int SyntheticOracle::sample_prior_percent(const Question& x, Rng& rng) const {
  const double raw = 1.0 - difficulty(x.task_id) + shared_->noise * rng.normal();
  return static_cast<int>(std::lround(100.0 * std::clamp(raw, 0.0, 1.0)));
}

int SyntheticOracle::sample_posterior_percent(const Question& x, const Question& xprime, int prior,
                                              bool shown_correct, Rng& rng) const {
  const double p = change_probability(x.task_id, xprime.task_id, shown_correct);
  if (!(rng.uniform01() < p)) return prior;
  const int target = shown_correct ? 100 : 0;
  int post = static_cast<int>(std::lround(prior + update_step_ * (target - prior)));
  // A fired change always moves at least one slider step unless already at the end.
  if (post == prior && prior != target) post += target > prior ? 1 : -1;
  return post;
}

std::vector<SyntheticOracle> make_population(const OracleConfig& config, Rng& rng) {
  validate(config);
  auto shared = std::make_shared<const OracleConfig>(config);
  std::vector<SyntheticOracle> population;
  population.reserve(config.population_size);
  for (std::size_t r = 0; r < config.population_size; ++r) {
    std::vector<double> difficulty = config.difficulty;
    for (double& d : difficulty) d = std::clamp(d + config.jitter * rng.normal(), 0.0, 1.0);
    const double step =
        std::clamp(config.update_step * (1.0 + config.jitter * rng.normal()), 0.01, 1.0);
    const double asym = std::max(1.0, config.asymmetry * (1.0 + config.jitter * rng.normal()));
    population.emplace_back(shared, std::move(difficulty), step, asym, rng.next());
  }
  return population;
}

BeliefReport respond(const SyntheticOracle& oracle, const Question& x, const Question& xprime,
                     bool shown_correct, Rng& rng, const ReportMeta& meta) {
  BeliefReport r;
  r.report_id = meta.report_id;
  r.respondent_id = meta.respondent_id;
  r.stage = meta.stage;
  r.timestamp_ms = meta.timestamp_ms;
  r.target_question_id = x.question_id;
  r.shown_question_id = xprime.question_id;
  r.shown_correct = shown_correct;
  r.prior_percent = oracle.sample_prior_percent(x, rng);
  r.posterior_percent = oracle.sample_posterior_percent(x, xprime, r.prior_percent, shown_correct, rng);
  return r;
}

Corpus make_synthetic_corpus(const SyntheticCorpusConfig& config) {
  static const char* kFiller[] = {"which", "value", "following", "best", "describes", "the",
                                  "result", "when", "given", "statement", "most", "likely",
                                  "answer", "choose", "correct", "option", "about", "case"};
  constexpr std::size_t kFillerCount = sizeof(kFiller) / sizeof(kFiller[0]);
  static const char* kLabels[] = {"A", "B", "C", "D"};

  Rng rng(config.seed);
  Corpus corpus;
  for (std::size_t t = 0; t < config.n_tasks; ++t) {
    const std::string tid = "task_" + std::string(t < 10 ? "0" : "") + std::to_string(t);
    corpus.add_task({tid, "Synthetic task " + std::to_string(t), Benchmark::kCustom});
  }
  for (std::size_t t = 0; t < config.n_tasks; ++t) {
    const std::string tid = corpus.tasks()[t].task_id;
    const std::string topic = "topic" + std::to_string(t);
    for (std::size_t k = 0; k < config.questions_per_task; ++k) {
      Question q;
      q.question_id = tid + "_q" + std::to_string(k);
      q.task_id = tid;
      q.text = "In " + topic + ":";
      for (std::size_t w = 0; w < config.filler_words; ++w) {
        q.text += " ";
        q.text += kFiller[rng.uniform_index(kFillerCount)];
      }
      q.text += " (" + topic + " item " + std::to_string(k) + ")";
      std::vector<Choice> choices;
      for (int c = 0; c < 4; ++c) {
        choices.push_back({kLabels[c], topic + " option " + std::to_string(rng.uniform_index(1000))});
      }
      q.answer_key = kLabels[rng.uniform_index(4)];
      q.choices = std::move(choices);
      corpus.add_question(std::move(q));
    }
  }
  for (std::size_t mi = 0; mi < config.models.size(); ++mi) {
    const auto& m = config.models[mi];
    Rng mrng(derive_seed(config.seed, 1000 + mi));
    for (QuestionIndex q = 0; q < corpus.size(); ++q) {
      const Question& question = corpus.question(q);
      bool right = mrng.bernoulli(m.accuracy);
      if (m.subset_of) {
        const ModelResponse* parent = corpus.response(*m.subset_of, q);
        if (!parent) fail(ErrorKind::kValidation, "subset_of refers to an unknown or later model");
        right = right && parent->correct;
      }
      std::string text = question.answer_key;
      if (!right) {
        const char wrong = static_cast<char>('A' + (question.answer_key[0] - 'A' + 1 +
                                                    static_cast<int>(mrng.uniform_index(3))) % 4);
        text = std::string(1, wrong);
      }
      ModelResponse r{m.model_id, question.question_id, text, grade(question, text), {}};
      corpus.add_response(std::move(r));
    }
  }
  return corpus;
}

}  // namespace hgf
