#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hgf/jsonl.hpp"
#include "test_util.hpp"

namespace {

const std::string kData = HGF_EXAMPLES_DIR;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

CliResult hgf_run(const hgf::test::TempDir& dir, const std::vector<std::string>& args) {
  std::string cmd = quote(HGF_CLI_PATH);
  for (const auto& a : args) cmd += " " + quote(a);
  const std::string out = dir.file("stdout.txt"), err = dir.file("stderr.txt");
  cmd += " >" + quote(out) + " 2>" + quote(err);
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::vector<std::string> toy(const std::string& cmd) {
  return {cmd, "--corpus", kData + "/toy_questions.jsonl", "--responses", kData + "/toy_responses.jsonl"};
}

std::vector<hgf::Json> records(const hgf::test::TempDir& dir, const std::string& out) {
  return hgf::read_jsonl_file((dir.path() / out / "records.jsonl").string());
}

TEST(Cli, UsageErrorsExitTwo) {
  hgf::test::TempDir dir;
  EXPECT_EQ(hgf_run(dir, {}).code, 2);
  EXPECT_EQ(hgf_run(dir, {"nonsense"}).code, 2);
  EXPECT_EQ(hgf_run(dir, {"grade", "--bogus"}).code, 2);
  EXPECT_EQ(hgf_run(dir, {"dominance", "--corpus", "x"}).code, 2);  // required flags missing
  auto v = toy("align");
  v.insert(v.end(), {"--alpha", "-1", "--config", kData + "/small_simulation.json", "--out", dir.file("a")});
  EXPECT_EQ(hgf_run(dir, v).code, 2);
}

TEST(Cli, HelpListsEveryFlag) {
  hgf::test::TempDir dir;
  const std::map<std::string, std::vector<std::string>> flags = {
      {"ingest", {"--corpus", "--responses", "--config", "--out", "--seed"}},
      {"grade", {"--corpus", "--responses", "--out", "--seed"}},
      {"simulate", {"--corpus", "--config", "--stages", "--quota", "--data-dir", "--out", "--seed"}},
      {"train", {"--corpus", "--predictor", "--reports", "--test", "--scores", "--config", "--out", "--seed"}},
      {"eval-predictor", {"--corpus", "--predictor", "--test", "--reports", "--out", "--seed"}},
      {"align", {"--corpus", "--responses", "--alpha", "--samples", "--exhaustive", "--model", "--predictor",
                 "--reports", "--config", "--out", "--seed"}},
      {"dominance", {"--corpus", "--responses", "--model-a", "--model-b", "--out", "--seed"}},
      {"calibration", {"--corpus", "--responses", "--reports", "--model", "--out", "--seed"}},
      {"serve", {"--corpus", "--responses", "--config", "--data-dir", "--quota"}},
  };
  const CliResult top = hgf_run(dir, {"--help"});
  EXPECT_EQ(top.code, 0);
  for (const auto& [cmd, fs] : flags) {
    EXPECT_NE(top.out.find(cmd), std::string::npos) << cmd;
    const CliResult r = hgf_run(dir, {cmd, "--help"});
    EXPECT_EQ(r.code, 0) << cmd;
    for (const auto& f : fs) EXPECT_NE(r.out.find(f), std::string::npos) << cmd << " " << f;
  }
}

TEST(Cli, InputErrorsMapToExitCodes) {
  hgf::test::TempDir dir;
  EXPECT_EQ(hgf_run(dir, {"grade", "--corpus", dir.file("missing.jsonl"), "--responses", "x"}).code, 4);
  {
    std::ofstream(dir.file("bad.jsonl")) << "{\"question_id\": 1}\n";
  }
  const CliResult bad = hgf_run(dir, {"ingest", "--corpus", dir.file("bad.jsonl"), "--out", dir.file("o")});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("line 1"), std::string::npos) << bad.err;
  {
    std::ofstream(dir.file("dup.jsonl")) << slurp(kData + "/toy_questions.jsonl") << slurp(kData + "/toy_questions.jsonl");
  }
  EXPECT_EQ(hgf_run(dir, {"ingest", "--corpus", dir.file("dup.jsonl"), "--out", dir.file("o")}).code, 2);
  auto v = toy("dominance");
  v.insert(v.end(), {"--model-a", "f1", "--model-b", "nobody", "--out", dir.file("o")});
  EXPECT_EQ(hgf_run(dir, v).code, 3);
}

TEST(Cli, IngestAndGrade) {
  hgf::test::TempDir dir;
  auto v = toy("ingest");
  v.insert(v.end(), {"--out", dir.file("ing")});
  const CliResult r = hgf_run(dir, v);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(hgf::read_jsonl_file(dir.file("ing/questions.jsonl")).size(), 3u);
  const auto manifest = hgf::Json::parse(slurp(dir.file("ing/manifest.json")));
  EXPECT_EQ(manifest["command"], "ingest");

  auto g = toy("grade");
  g.insert(g.end(), {"--out", dir.file("g")});
  ASSERT_EQ(hgf_run(dir, g).code, 0);
  std::map<std::string, double> acc;
  for (const auto& rec : records(dir, "g")) acc[rec["model_id"]] = rec["accuracy"];
  EXPECT_NEAR(acc["f1"], 2.0 / 3, 1e-12);
  EXPECT_NEAR(acc["f2"], 1.0 / 3, 1e-12);  // " 4. " normalizes to "4"
}

TEST(Cli, DominanceToyExample) {
  hgf::test::TempDir dir;
  auto v = toy("dominance");
  v.insert(v.end(), {"--model-a", "f1", "--model-b", "f2", "--out", dir.file("d")});
  const CliResult r = hgf_run(dir, v);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("A_DOMINATES"), std::string::npos);
  const auto recs = records(dir, "d");
  ASSERT_EQ(recs.size(), 5u);
  EXPECT_EQ(recs[0]["verdict"], "A_DOMINATES");
  EXPECT_EQ(recs[3]["deployment"], (hgf::Json{{"3", 1.0}}));
  EXPECT_EQ(recs[3]["performance"], 0.0);
  EXPECT_EQ(recs[4]["deployment"], (hgf::Json{{"1", 1.0}}));
  EXPECT_EQ(recs[4]["performance"], 1.0);

  auto w = toy("dominance");
  w.insert(w.end(), {"--model-a", "f2", "--model-b", "f3", "--out", dir.file("e")});
  const CliResult inc = hgf_run(dir, w);
  EXPECT_EQ(inc.code, 3);
  EXPECT_NE(inc.out.find("INCOMPARABLE"), std::string::npos);
}

TEST(Cli, AlignWithCorrectnessPosteriorScoresOne) {
  hgf::test::TempDir dir;
  {
    std::ofstream(dir.file("post.json")) << R"({"posterior": {"kind": "correctness"}})";
  }
  auto v = toy("align");
  v.insert(v.end(), {"--config", dir.file("post.json"), "--exhaustive", "--out", dir.file("a")});
  const CliResult r = hgf_run(dir, v);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("99.0%"), std::string::npos);
  const auto recs = records(dir, "a");
  ASSERT_EQ(recs.size(), 3u * 4u * 2u);
  for (const auto& rec : recs) {
    if (rec["metric"] == "weighted_accuracy") EXPECT_EQ(rec["value"], 1.0);
  }
}

TEST(Cli, SimulateIsReproducibleAndFeedsDownstreamCommands) {
  hgf::test::TempDir dir;
  const std::vector<std::string> base = {"simulate", "--config", kData + "/small_simulation.json", "--stages", "7",
                                         "--seed", "42"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", dir.file("s1")});
  b.insert(b.end(), {"--out", dir.file("s2"), "--data-dir", dir.file("log")});
  const CliResult ra = hgf_run(dir, a);
  ASSERT_EQ(ra.code, 0) << ra.err;
  const CliResult rb = hgf_run(dir, b);
  ASSERT_EQ(rb.code, 0) << rb.err;
  EXPECT_EQ(ra.out, rb.out);
  for (const char* f : {"reports.jsonl", "stages.jsonl", "records.jsonl", "questions.jsonl", "responses.jsonl"}) {
    EXPECT_EQ(slurp(dir.file(std::string("s1/") + f)), slurp(dir.file(std::string("s2/") + f))) << f;
  }
  EXPECT_EQ(hgf::read_jsonl_file(dir.file("s1/stages.jsonl")).size(), 7u);
  EXPECT_TRUE(std::filesystem::exists(dir.file("log/events.jsonl")));
  const auto manifest = hgf::Json::parse(slurp(dir.file("s1/manifest.json")));
  EXPECT_EQ(manifest["seed"], 42);
  EXPECT_EQ(manifest["details"]["stages"], 7);

  const std::string q = dir.file("s1/questions.jsonl"), resp = dir.file("s1/responses.jsonl"),
                    reports = dir.file("s1/reports.jsonl");
  const CliResult train = hgf_run(dir, {"train", "--corpus", q, "--predictor", "text_ngram", "--reports", reports,
                                  "--out", dir.file("t")});
  ASSERT_EQ(train.code, 0) << train.err;
  const CliResult eval = hgf_run(dir, {"eval-predictor", "--corpus", q, "--predictor", dir.file("t/predictor.json"),
                                 "--reports", reports, "--out", dir.file("e")});
  ASSERT_EQ(eval.code, 0) << eval.err;
  EXPECT_EQ(records(dir, "e").size(), 3u);
  const CliResult base_train = hgf_run(dir, {"train", "--corpus", q, "--predictor", "prev_correct", "--reports", reports,
                                       "--out", dir.file("b")});
  ASSERT_EQ(base_train.code, 0) << base_train.err;

  const CliResult align = hgf_run(dir, {"align", "--corpus", q, "--responses", resp, "--predictor",
                                  dir.file("t/predictor.json"), "--reports", reports, "--alpha", "1", "--alpha",
                                  "99", "--samples", "200", "--out", dir.file("al")});
  ASSERT_EQ(align.code, 0) << align.err;
  const auto recs = records(dir, "al");
  EXPECT_EQ(recs.size(), 2u * 2u * 2u);
  for (const auto& rec : recs) {
    if (rec["metric"] == "weighted_accuracy") {
      EXPECT_GE(rec["value"].get<double>(), 0.0);
      EXPECT_LE(rec["value"].get<double>(), 1.0);
    }
  }
  const CliResult cal = hgf_run(dir, {"calibration", "--corpus", q, "--responses", resp, "--reports", reports,
                                "--model", "big", "--out", dir.file("c")});
  ASSERT_EQ(cal.code, 0) << cal.err;
  std::size_t total = 0;
  for (const auto& rec : records(dir, "c")) total += rec["count"].get<std::size_t>();
  EXPECT_EQ(total, hgf::read_jsonl_file(reports).size());
  const CliResult dom = hgf_run(dir, {"dominance", "--corpus", q, "--responses", resp, "--model-a", "small",
                                "--model-b", "big", "--out", dir.file("dm")});
  ASSERT_EQ(dom.code, 0) << dom.err;
  EXPECT_NE(dom.out.find("B_DOMINATES"), std::string::npos);
}

}  // namespace
