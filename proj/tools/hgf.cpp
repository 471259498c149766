// hgf: operator entry point. Every subcommand prints a table to stdout and
// writes records.jsonl plus manifest.json into --out.

#include <CLI11.hpp>

#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "hgf/align.hpp"
#include "hgf/bandit.hpp"
#include "hgf/beliefs.hpp"
#include "hgf/corpus.hpp"
#include "hgf/error.hpp"
#include "hgf/http_service.hpp"
#include "hgf/jsonl.hpp"
#include "hgf/metrics.hpp"
#include "hgf/predictor.hpp"
#include "hgf/simhuman.hpp"
#include "hgf/simulate.hpp"
#include "hgf/survey.hpp"

namespace fs = std::filesystem;
using namespace hgf;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string corpus;
  std::string responses;
  std::string reports;
  std::string test;
  std::string scores;
  std::string config;
  std::string predictor;
  std::string out = "hgf_out";
  std::string model_a;
  std::string model_b;
  std::vector<std::string> models;
  std::vector<double> alphas;
  std::uint64_t seed = 0;
  std::size_t samples = 500;
  bool exhaustive = false;
  std::size_t stages = 0;
  std::size_t quota = 0;
  std::string data_dir;
};

// Column-aligned text table.
class Table {
 public:
  explicit Table(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  std::string render() const {
    std::vector<std::size_t> width;
    for (const auto& r : rows_) {
      width.resize(std::max(width.size(), r.size()), 0);
      for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    std::ostringstream out;
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      for (std::size_t i = 0; i < rows_[k].size(); ++i) {
        out << (i ? "  " : "") << rows_[k][i] << std::string(width[i] - rows_[k][i].size(), ' ');
      }
      out << '\n';
      if (k == 0) {
        std::size_t total = 0;
        for (std::size_t w : width) total += w;
        out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
      }
    }
    return out.str();
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : "n/a"; }

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path);
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::kValidation, path + ": malformed JSON");
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

fs::path prepare_out(const Options& o) {
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create output directory " + o.out + ": " + ec.message());
  return fs::path(o.out);
}

void finish(const std::string& command, const Options& o, const std::vector<std::string>& args,
            const std::vector<Json>& records, const Table& table, const Json& extra = Json::object()) {
  const fs::path dir = prepare_out(o);
  write_jsonl_file((dir / "records.jsonl").string(), records);
  Json inputs = Json::object();
  for (auto [k, v] : {std::pair{"corpus", &o.corpus}, {"responses", &o.responses}, {"reports", &o.reports},
                      {"test", &o.test}, {"scores", &o.scores}, {"config", &o.config},
                      {"predictor", &o.predictor}}) {
    if (!v->empty()) inputs[k] = *v;
  }
  Json manifest = {{"command", command}, {"version", kVersion}, {"seed", o.seed},
                   {"args", args},       {"inputs", inputs},    {"out", o.out}};
  if (!extra.empty()) manifest["details"] = extra;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << table.render();
}

Corpus load_corpus(const Options& o, bool need_responses) {
  if (o.corpus.empty()) fail(ErrorKind::kValidation, "--corpus is required");
  std::ifstream in(o.corpus);
  if (!in) fail(ErrorKind::kIo, "cannot open " + o.corpus);
  FilterConfig keep_all;
  keep_all.max_length = std::numeric_limits<std::size_t>::max();
  Corpus corpus = std::move(ingest_corpus(in, keep_all).corpus);
  if (!o.responses.empty()) {
    load_responses(corpus, read_jsonl_file(o.responses));
  } else if (need_responses) {
    fail(ErrorKind::kValidation, "--responses is required");
  }
  return corpus;
}

std::vector<std::string> models_to_use(const Options& o, const Corpus& corpus) {
  auto ids = o.models.empty() ? corpus.model_ids() : o.models;
  if (ids.empty()) fail(ErrorKind::kPrecondition, "corpus has no model responses");
  return ids;
}

// ---- ingest / grade --------------------------------------------------------

void cmd_ingest(const Options& o, const std::vector<std::string>& args) {
  if (o.corpus.empty()) fail(ErrorKind::kValidation, "--corpus is required");
  FilterConfig filter;
  if (!o.config.empty()) {
    const Json j = read_json_file(o.config);
    filter.max_length = j.value("max_length", filter.max_length);
    for (const auto& t : j.value("excluded_tasks", std::vector<std::string>{})) filter.excluded_tasks.insert(t);
  }
  std::ifstream in(o.corpus);
  if (!in) fail(ErrorKind::kIo, "cannot open " + o.corpus);
  IngestResult r = ingest_corpus(in, filter);
  const fs::path dir = prepare_out(o);
  {
    std::ostringstream q;
    export_questions(q, r.corpus);
    write_text(dir / "questions.jsonl", q.str());
  }
  std::size_t graded = 0;
  if (!o.responses.empty()) {
    graded = load_responses(r.corpus, read_jsonl_file(o.responses));
    std::ostringstream s;
    export_responses(s, r.corpus);
    write_text(dir / "responses.jsonl", s.str());
  }
  Table t({"kept", "tasks", "dropped_length", "dropped_excluded"});
  t.add({std::to_string(r.corpus.size()), std::to_string(r.corpus.tasks().size()),
         std::to_string(r.dropped_length), std::to_string(r.dropped_excluded)});
  finish("ingest", o, args,
         {{{"kept", r.corpus.size()},
           {"tasks", r.corpus.tasks().size()},
           {"dropped_length", r.dropped_length},
           {"dropped_excluded", r.dropped_excluded},
           {"graded_on_load", graded}}},
         t);
}

void cmd_grade(const Options& o, const std::vector<std::string>& args) {
  Corpus corpus = load_corpus(o, true);
  const fs::path dir = prepare_out(o);
  std::ostringstream s;
  export_responses(s, corpus);
  write_text(dir / "responses.jsonl", s.str());
  Table t({"model_id", "answered", "correct", "accuracy"});
  std::vector<Json> records;
  for (const auto& m : corpus.model_ids()) {
    std::size_t n = 0, c = 0;
    for (QuestionIndex q = 0; q < corpus.size(); ++q) {
      if (const ModelResponse* r = corpus.response(m, q)) {
        ++n;
        c += r->correct ? 1 : 0;
      }
    }
    const double acc = n ? static_cast<double>(c) / static_cast<double>(n) : 0.0;
    t.add({m, std::to_string(n), std::to_string(c), fmt(acc)});
    records.push_back({{"model_id", m}, {"answered", n}, {"correct", c}, {"accuracy", acc}});
  }
  finish("grade", o, args, records, t);
}

// ---- simulate --------------------------------------------------------------

void cmd_simulate(const Options& o, const std::vector<std::string>& args) {
  if (o.config.empty()) fail(ErrorKind::kValidation, "--config (simulation config) is required");
  const Json cfg = read_json_file(o.config);

  Corpus corpus;
  if (!o.corpus.empty()) {
    corpus = load_corpus(o, false);
  } else {
    SyntheticCorpusConfig sc = synthetic_corpus_config_from_json(cfg.value("corpus", Json::object()));
    sc.seed = derive_seed(o.seed, 1);
    corpus = make_synthetic_corpus(sc);
  }

  Json oracle_json = cfg.value("oracle", Json::object());
  if (!oracle_json.contains("task_ids")) {
    std::vector<std::string> ids;
    for (const auto& t : corpus.tasks()) ids.push_back(t.task_id);
    oracle_json["task_ids"] = ids;
  }
  if (!oracle_json.contains("similarity") && !oracle_json.contains("blocks")) {
    oracle_json["blocks"] = {{"size", 2}, {"within_block", 0.4}, {"between", 0.0}};
  }
  OracleConfig oracle = oracle_config_from_json(oracle_json);
  oracle.seed = derive_seed(o.seed, 2);

  SurveyConfig survey = survey_config_from_json(cfg.value("survey", Json::object()));
  survey.seed = derive_seed(o.seed, 3);
  if (o.quota) survey.stage_quota = o.quota;

  const Json sim_json = cfg.value("simulation", Json::object());
  SimulationConfig sim;
  sim.n_stages = sim_json.value("stages", sim.n_stages);
  sim.abandon_rate = sim_json.value("abandon_rate", sim.abandon_rate);
  sim.comprehension_fail_rate = sim_json.value("comprehension_fail_rate", sim.comprehension_fail_rate);
  if (o.stages) sim.n_stages = o.stages;
  sim.seed = derive_seed(o.seed, 4);

  Rng pop_rng(oracle.seed);
  const auto population = make_population(oracle, pop_rng);
  SurveyService service(corpus, survey, o.data_dir, logical_clock(), !o.data_dir.empty());
  const SimulationResult result = run_simulation(service, population, sim);

  const fs::path dir = prepare_out(o);
  {
    std::ostringstream q, r;
    export_questions(q, corpus);
    export_responses(r, corpus);
    write_text(dir / "questions.jsonl", q.str());
    write_text(dir / "responses.jsonl", r.str());
    write_text(dir / "reports.jsonl", service.export_reports());
  }
  std::vector<Json> manifests;
  for (const auto& s : result.stages) manifests.push_back(stage_manifest(s, corpus));
  write_jsonl_file((dir / "stages.jsonl").string(), manifests);

  Table t({"stage", "bucket", "reports", "changed", "rate"});
  std::vector<Json> records;
  for (const auto& row : stage_progress(result.stages, corpus)) {
    t.add({std::to_string(row.stage), std::to_string(row.bucket), std::to_string(row.n_reports),
           std::to_string(row.n_changed), fmt_opt(row.rate)});
    records.push_back(progress_to_json(row));
  }
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  finish("simulate", o, args, records, t,
         {{"stages", sim.n_stages},
          {"stage_quota", survey.stage_quota},
          {"sessions", result.sessions},
          {"reports", result.reports.size()},
          {"survey", survey_config_to_json(survey)},
          {"oracle", oracle_config_to_json(oracle)}});
}

// ---- train / eval-predictor ------------------------------------------------

std::vector<GeneralizationExample> load_examples(const Corpus& corpus, const std::string& reports,
                                                 const std::string& examples) {
  if (!examples.empty()) return examples_from_json(corpus, read_jsonl_file(examples));
  if (!reports.empty()) {
    const auto rs = read_reports_file(reports);
    return examples_from_reports(corpus, rs);
  }
  fail(ErrorKind::kValidation, "--reports or --test is required");
}

Table metrics_table(const PredictorMetrics& m, std::vector<Json>& records, const std::string& kind) {
  Table t({"slice", "n", "changed", "nll", "auc"});
  for (auto [name, s] : {std::pair{"overall", &m.overall},
                         {"shown_correct", &m.shown_correct},
                         {"shown_incorrect", &m.shown_incorrect}}) {
    t.add({name, std::to_string(s->n), std::to_string(s->positives), s->n ? fmt(s->nll) : "n/a",
           fmt_opt(s->auc)});
    records.push_back({{"predictor", kind},
                       {"slice", name},
                       {"n", s->n},
                       {"positives", s->positives},
                       {"nll", s->n ? Json(s->nll) : Json(nullptr)},
                       {"auc", opt_json(s->auc)}});
  }
  return t;
}

void cmd_train(const Options& o, const std::vector<std::string>& args) {
  if (o.predictor.empty()) fail(ErrorKind::kValidation, "--predictor (kind) is required");
  const PredictorKind kind = predictor_kind_from_string(o.predictor);
  const Corpus corpus = load_corpus(o, false);
  std::optional<Predictor> p;
  if (kind == PredictorKind::kExternalScores) {
    if (o.scores.empty()) fail(ErrorKind::kValidation, "--scores is required for external_scores");
    ExternalScoresConfig ec;
    if (!o.config.empty()) {
      const Json j = read_json_file(o.config);
      if (j.contains("fallback") && j["fallback"].is_number()) ec.fallback = j["fallback"].get<double>();
    }
    p = load_external_scores(read_jsonl_file(o.scores), ec);
  } else {
    const auto examples = load_examples(corpus, o.reports, o.test);
    if (kind == PredictorKind::kPrevCorrect) {
      p = fit_baseline_prevcorrect(examples);
    } else if (kind == PredictorKind::kPrevCorrectSameTask) {
      p = fit_baseline_sametask(examples);
    } else {
      TextTrainConfig tc;
      if (!o.config.empty()) {
        Json j = read_json_file(o.config);
        tc = survey_config_from_json(Json{{"predictor", j.value("predictor", j)}}).predictor;
      }
      tc.seed = o.seed;
      p = fit_text_predictor(examples, tc);
    }
  }
  const fs::path dir = prepare_out(o);
  save_snapshot((dir / "predictor.json").string(), *p);
  std::vector<Json> records;
  Table t({"slice", "n", "changed", "nll", "auc"});
  if (kind != PredictorKind::kExternalScores) {
    const auto examples = load_examples(corpus, o.reports, o.test);
    t = metrics_table(evaluate_predictor(*p, examples), records, to_string(kind));
  }
  finish("train", o, args, records, t, {{"kind", to_string(kind)}, {"snapshot", (dir / "predictor.json").string()}});
}

void cmd_eval_predictor(const Options& o, const std::vector<std::string>& args) {
  if (o.predictor.empty()) fail(ErrorKind::kValidation, "--predictor (snapshot path) is required");
  const Corpus corpus = load_corpus(o, false);
  const Predictor p = load_snapshot(o.predictor);
  const auto examples = load_examples(corpus, o.reports, o.test);
  std::vector<Json> records;
  const Table t = metrics_table(evaluate_predictor(p, examples), records, to_string(p.kind()));
  finish("eval-predictor", o, args, records, t);
}

// ---- align / dominance / calibration ---------------------------------------

void cmd_align(const Options& o, const std::vector<std::string>& args) {
  const Corpus corpus = load_corpus(o, true);
  const auto models = models_to_use(o, corpus);
  const std::vector<double> alphas = o.alphas.empty() ? std::vector<double>{1, 9, 19, 99} : o.alphas;
  PairSampling sampling;
  sampling.mode = o.exhaustive ? PairSampling::Mode::kExhaustive : PairSampling::Mode::kMonteCarlo;
  sampling.n_samples = o.samples;
  sampling.seed = o.seed;

  Json posterior_cfg = {{"kind", "mixture"}};
  if (!o.config.empty()) posterior_cfg = read_json_file(o.config).value("posterior", posterior_cfg);
  const std::string kind = posterior_cfg.value("kind", "mixture");

  std::optional<Predictor> predictor;
  std::vector<BeliefReport> reports;
  std::vector<AlignmentReport> table;
  for (const auto& model : models) {
    BeliefFunction posterior;
    std::vector<std::uint8_t> correctness;
    if (kind == "correctness") {
      correctness = corpus.correctness(model);
      posterior = [&correctness](QuestionPair p, bool) { return correctness[p.target] ? 1.0 : 0.0; };
    } else if (kind == "constant") {
      const double v = posterior_cfg.at("value").get<double>();
      if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::kValidation, "constant posterior must be in [0,1]");
      posterior = [v](QuestionPair, bool) { return v; };
    } else if (kind == "mixture") {
      const std::string pred_path = o.predictor.empty() ? posterior_cfg.value("predictor", "") : o.predictor;
      const std::string rep_path = o.reports.empty() ? posterior_cfg.value("reports", "") : o.reports;
      if (pred_path.empty() || rep_path.empty()) {
        fail(ErrorKind::kValidation, "mixture posterior needs --predictor and --reports");
      }
      if (!predictor) {
        predictor = load_snapshot(pred_path);
        reports = read_reports_file(rep_path);
      }
      posterior = mixture_posterior(corpus, *predictor, fit_posterior_model(reports),
                                    priors_from_reports(corpus, reports));
    } else {
      fail(ErrorKind::kValidation, "unknown posterior kind '" + kind + "'");
    }
    auto one = alignment_table(corpus, {model}, alphas, posterior, sampling);
    table.push_back(std::move(one.front()));
  }

  std::vector<std::string> header = {"metric", "model_id"};
  for (double a : alphas) header.push_back(fmt(100.0 * implied_threshold(a), 1) + "%");
  Table t(header);
  for (const bool accuracy : {true, false}) {
    for (const auto& r : table) {
      std::vector<std::string> row = {accuracy ? "weighted_accuracy" : "weighted_bce", r.model_id};
      for (const auto& e : r.entries) row.push_back(fmt(accuracy ? e.weighted_accuracy : e.weighted_bce));
      t.add(row);
    }
  }
  finish("align", o, args, alignment_records(table), t,
         {{"posterior", posterior_cfg}, {"samples", o.samples}, {"exhaustive", o.exhaustive}});
}

void cmd_dominance(const Options& o, const std::vector<std::string>& args) {
  const Corpus corpus = load_corpus(o, true);
  if (o.model_a.empty() || o.model_b.empty()) fail(ErrorKind::kValidation, "--model-a and --model-b are required");
  const Dominance d = check_dominance(corpus, o.model_a, o.model_b);
  std::vector<Json> records = {{{"model_a", o.model_a}, {"model_b", o.model_b}, {"verdict", to_string(d)}}};
  Table t({"model_id", "role", "deployment", "performance"});
  if (d == Dominance::kIncomparable) {
    std::cout << "verdict: " << to_string(d) << '\n';
    fail(ErrorKind::kPrecondition, "neither model dominates the other; no adversarial construction");
  }
  const bool a_first = d != Dominance::kBDominates;
  const std::string f1 = a_first ? o.model_a : o.model_b;
  const std::string f2 = a_first ? o.model_b : o.model_a;
  const AdversarialDeployment adv = adversarial_deployment(corpus, f1, f2);
  const double p1 = human_deployed_performance(corpus, f1, adv.h1);
  const double p2 = human_deployed_performance(corpus, f2, adv.h2);
  std::vector<std::string> all;
  for (QuestionIndex q = 0; q < corpus.size(); ++q) all.push_back(corpus.question(q).question_id);
  const auto uniform = DeploymentDistribution::uniform(all);
  const double u1 = fixed_distribution_eval(corpus, f1, uniform);
  const double u2 = fixed_distribution_eval(corpus, f2, uniform);
  t.add({f1, "dominant", "uniform", fmt(u1)});
  t.add({f2, "dominated", "uniform", fmt(u2)});
  t.add({f1, "dominant", "point mass at " + adv.z, fmt(p1)});
  t.add({f2, "dominated", "point mass at " + adv.z_prime, fmt(p2)});
  records.push_back({{"model_id", f1}, {"role", "dominant"}, {"deployment", "uniform"}, {"performance", u1}});
  records.push_back({{"model_id", f2}, {"role", "dominated"}, {"deployment", "uniform"}, {"performance", u2}});
  records.push_back({{"model_id", f1}, {"role", "dominant"}, {"deployment", distribution_to_json(adv.h1)},
                     {"performance", p1}});
  records.push_back({{"model_id", f2}, {"role", "dominated"}, {"deployment", distribution_to_json(adv.h2)},
                     {"performance", p2}});
  std::cout << "verdict: " << to_string(d) << '\n';
  finish("dominance", o, args, records, t);
}

void cmd_calibration(const Options& o, const std::vector<std::string>& args) {
  const Corpus corpus = load_corpus(o, true);
  if (o.reports.empty()) fail(ErrorKind::kValidation, "--reports is required");
  const auto models = models_to_use(o, corpus);
  const auto reports = read_reports_file(o.reports);
  Table t({"model_id", "posterior", "count", "accuracy", "std_error"});
  std::vector<Json> records;
  for (const auto& m : models) {
    const auto correct = corpus.correctness(m);
    std::vector<CalibrationSample> samples;
    for (const auto& r : reports) samples.push_back({r.posterior(), correct[corpus.index_of(r.target_question_id)] != 0});
    const CalibrationTable ct = calibration_table(samples);
    for (const auto& b : ct.bins) {
      const std::string range = fmt(100 * b.lo, 0) + "-" + fmt(100 * b.hi, 0) + "%";
      t.add({m, range, std::to_string(b.count), fmt_opt(b.mean_accuracy), fmt_opt(b.std_error)});
      records.push_back({{"model_id", m}, {"lo", b.lo}, {"hi", b.hi}, {"count", b.count},
                         {"accuracy", opt_json(b.mean_accuracy)}, {"std_error", opt_json(b.std_error)}});
    }
  }
  finish("calibration", o, args, records, t);
}

// ---- serve -----------------------------------------------------------------

HttpServer* g_server = nullptr;

void cmd_serve(const Options& o) {
  ServiceSettings settings;
  if (!o.config.empty()) settings = settings_from_json(read_json_file(o.config));
  apply_env_overrides(settings, process_env());
  if (!o.data_dir.empty()) settings.data_dir = o.data_dir;
  if (o.quota) settings.survey.stage_quota = o.quota;
  const Corpus corpus = load_corpus(o, false);
  SurveyService service(corpus, settings.survey, settings.data_dir);
  HttpServer server(service, settings.admin_token);
  const int port = server.bind(settings.host, settings.port);
  g_server = &server;
  std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
  std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
  std::cout << "listening on " << settings.host << ":" << port << std::endl;
  server.listen_after_bind();
  g_server = nullptr;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::kValidation:
    case ErrorKind::kConflict: return 2;
    case ErrorKind::kIo: return 4;
    default: return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Harness for measuring alignment with the human generalization function"};
  app.require_subcommand(1);
  Options o;
  std::vector<std::string> args(argv + 1, argv + argc);

  auto add_corpus = [&](CLI::App* c, bool responses) {
    c->add_option("--corpus", o.corpus, "Questions JSONL");
    if (responses) c->add_option("--responses", o.responses, "Model responses JSONL");
  };
  auto add_out = [&](CLI::App* c) {
    c->add_option("--out", o.out, "Output directory")->capture_default_str();
    c->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  };

  auto* ingest = app.add_subcommand("ingest", "Filter and normalize a raw question corpus");
  add_corpus(ingest, true);
  ingest->add_option("--config", o.config, "Filter config JSON (max_length, excluded_tasks)");
  add_out(ingest);

  auto* grade = app.add_subcommand("grade", "Grade model responses by normalized exact match");
  add_corpus(grade, true);
  add_out(grade);

  auto* simulate = app.add_subcommand("simulate", "Run a synthetic multi-stage survey");
  add_corpus(simulate, true);
  simulate->add_option("--config", o.config, "Simulation config JSON")->required();
  simulate->add_option("--stages", o.stages, "Number of stages (overrides config)");
  simulate->add_option("--quota", o.quota, "Reports per stage (overrides config)");
  simulate->add_option("--data-dir", o.data_dir, "Persist the event log here");
  add_out(simulate);

  auto* train = app.add_subcommand("train", "Fit a belief-change predictor");
  add_corpus(train, false);
  train->add_option("--predictor", o.predictor,
                    "prev_correct | prev_correct_same_task | text_ngram | external_scores")
      ->required();
  train->add_option("--reports", o.reports, "Belief reports JSONL");
  train->add_option("--test", o.test, "Labelled examples JSONL (instead of --reports)");
  train->add_option("--scores", o.scores, "External scores JSONL");
  train->add_option("--config", o.config, "Predictor config JSON");
  add_out(train);

  auto* eval = app.add_subcommand("eval-predictor", "NLL and AUC of a predictor on a test set");
  add_corpus(eval, false);
  eval->add_option("--predictor", o.predictor, "Predictor snapshot")->required();
  eval->add_option("--test", o.test, "Labelled examples JSONL");
  eval->add_option("--reports", o.reports, "Belief reports JSONL (one example per report)");
  add_out(eval);

  auto* align = app.add_subcommand("align", "Weighted accuracy and BCE against human generalization");
  add_corpus(align, true);
  align->add_option("--alpha", o.alphas, "Risk weight; repeatable (default 1 9 19 99)");
  align->add_option("--samples", o.samples, "Monte-Carlo pairs")->capture_default_str();
  align->add_flag("--exhaustive", o.exhaustive, "Use every ordered pair");
  align->add_option("--model", o.models, "Model id; repeatable (default all)");
  align->add_option("--predictor", o.predictor, "Predictor snapshot for the mixture posterior");
  align->add_option("--reports", o.reports, "Belief reports for priors and posterior means");
  align->add_option("--config", o.config, "Posterior config JSON");
  add_out(align);

  auto* dominance = app.add_subcommand("dominance", "Dominance verdict and adversarial deployments");
  add_corpus(dominance, true);
  dominance->add_option("--model-a", o.model_a, "First model")->required();
  dominance->add_option("--model-b", o.model_b, "Second model")->required();
  add_out(dominance);

  auto* calibration = app.add_subcommand("calibration", "Model accuracy by human posterior bin");
  add_corpus(calibration, true);
  calibration->add_option("--reports", o.reports, "Belief reports JSONL")->required();
  calibration->add_option("--model", o.models, "Model id; repeatable (default all)");
  add_out(calibration);

  auto* serve = app.add_subcommand("serve", "Run the survey HTTP service");
  add_corpus(serve, true);
  serve->add_option("--config", o.config, "Service config JSON");
  serve->add_option("--data-dir", o.data_dir, "Event log directory (overrides config)");
  serve->add_option("--quota", o.quota, "Reports per stage (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*ingest) cmd_ingest(o, args);
    else if (*grade) cmd_grade(o, args);
    else if (*simulate) cmd_simulate(o, args);
    else if (*train) cmd_train(o, args);
    else if (*eval) cmd_eval_predictor(o, args);
    else if (*align) cmd_align(o, args);
    else if (*dominance) cmd_dominance(o, args);
    else if (*calibration) cmd_calibration(o, args);
    else if (*serve) cmd_serve(o);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const Json::exception& e) {
    std::cerr << "error [validation]: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
