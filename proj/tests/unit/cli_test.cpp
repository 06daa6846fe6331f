#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "openbias/cli/commands.hpp"
#include "openbias/train/synthetic.hpp"
#include "support.hpp"

using namespace openbias;
using openbias::testing::fixture;
using openbias::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(const std::string& command, const std::vector<std::string>& overrides) {
  std::istringstream in;
  std::ostringstream out, err;
  cli::Io io{in, out, err};
  Run r;
  r.code = cli::run_command(command, cli::Config::load(std::nullopt, overrides), io);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string arg(const std::string& key, const fs::path& p) { return key + "=" + p.string(); }

// category,condition -> accuracy and bias score from metrics.csv
std::map<std::string, std::pair<std::string, std::string>> read_metrics(const fs::path& csv) {
  std::map<std::string, std::pair<std::string, std::string>> out;
  std::istringstream s(read_file(csv));
  std::string line;
  std::getline(s, line);
  while (std::getline(s, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    cells.resize(5);
    out[cells[0] + "," + cells[1]] = {cells[3], cells[4]};
  }
  return out;
}

void write_sheet(const fs::path& p, const std::string& annotator, const std::vector<std::vector<int>>& answers) {
  Json j;
  j["annotator"] = annotator;
  j["items"] = Json::array();
  for (std::size_t i = 0; i < answers.size(); ++i) j["items"].push_back({{"id", "item-" + std::to_string(i)}, {"answers", answers[i]}});
  write_file(p, j.dump());
}

}  // namespace

TEST(CliForge, ReplayRunIsReproducible) {
  TempDir dir;
  const std::vector<std::string> o = {
      arg("forge.captions", fixture("three_captions.txt")), "forge.provider.kind=replay",
      arg("forge.provider.transcript", fixture("three_captions_transcript.jsonl")),
      "forge.retry.initial_backoff_ms=0", arg("run_dir", dir / "run")};
  const auto a = run("forge", o);
  ASSERT_EQ(a.code, 0) << a.err;
  const auto records = read_file(dir / "run" / "records.jsonl");
  const auto manifest = read_file(dir / "run" / "manifest.json");
  EXPECT_FALSE(records.empty());
  EXPECT_TRUE(fs::exists(dir / "run" / "qa.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "run" / "stats.json"));

  const auto b = run("forge", o);
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(read_file(dir / "run" / "records.jsonl"), records);
  EXPECT_EQ(read_file(dir / "run" / "manifest.json"), manifest);
}

TEST(CliForge, QuarantineAboveThresholdExitsWithProviderFailure) {
  TempDir dir;
  const auto r = run("forge", {arg("forge.captions", fixture("doctor_captions.txt")), "forge.provider.kind=replay",
                               arg("forge.provider.transcript", fixture("malformed_transcript.jsonl")),
                               "forge.retry.initial_backoff_ms=0", arg("run_dir", dir / "run")});
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_TRUE(fs::exists(dir / "run" / "quarantine.jsonl"));
}

TEST(CliForge, HttpProviderWithoutKeyIsConfigError) {
  TempDir dir;
  ::unsetenv("OPENBIAS_TEST_MISSING_KEY");
  const auto r = run("forge", {arg("forge.captions", fixture("doctor_captions.txt")), "forge.provider.kind=http",
                               "forge.provider.endpoint=http://127.0.0.1:9/v1",
                               "forge.provider.api_key_env=OPENBIAS_TEST_MISSING_KEY", arg("run_dir", dir / "run")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("ConfigError"), std::string::npos) << r.err;
}

TEST(CliRefine, BlobFixtureFindsThreeClusters) {
  TempDir dir;
  const auto r = run("refine", {arg("refine.records", fixture("blobs_records.jsonl")), "refine.embedding.kind=file",
                                arg("refine.embedding.path", fixture("blobs_embeddings.jsonl")),
                                "refine.min_subgroup_size=1", arg("run_dir", dir / "run")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("k=3"), std::string::npos) << r.out;
  for (const char* f : {"refined.jsonl", "cluster_report.csv", "assignments.csv", "summary.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
}

TEST(CliEval, BaselinePredictors) {
  TempDir dir;
  const auto instances = train::generate_synthetic(train::default_synthetic_spec(2), 200, Rng(4), "e");
  qa::save_instances(dir / "qa.jsonl", instances);

  const auto oracle = run("eval", {arg("eval.instances", dir / "qa.jsonl"), "eval.predictor=oracle",
                                   arg("run_dir", dir / "oracle")});
  ASSERT_EQ(oracle.code, 0) << oracle.err;
  const auto m = read_metrics(dir / "oracle" / "metrics.csv");
  EXPECT_DOUBLE_EQ(std::stod(m.at("overall,ambig").first), 1.0);
  EXPECT_DOUBLE_EQ(std::stod(m.at("overall,ambig").second), 0.0);
  EXPECT_DOUBLE_EQ(std::stod(m.at("overall,disambig").first), 1.0);
  EXPECT_TRUE(fs::exists(dir / "oracle" / "predictions.jsonl"));

  const auto stereo = run("eval", {arg("eval.instances", dir / "qa.jsonl"), "eval.predictor=stereotype",
                                   arg("run_dir", dir / "stereo")});
  ASSERT_EQ(stereo.code, 0) << stereo.err;
  const auto s = read_metrics(dir / "stereo" / "metrics.csv");
  EXPECT_DOUBLE_EQ(std::stod(s.at("overall,disambig").second), 1.0);
  EXPECT_NE(stereo.out.find("stereotype"), std::string::npos);

  const auto bad = run("eval", {arg("eval.instances", dir / "qa.jsonl"), "eval.predictor=coinflip",
                                arg("run_dir", dir / "bad")});
  EXPECT_EQ(bad.code, 1);
}

TEST(CliKappa, IdenticalAndOppositeSheets) {
  TempDir dir;
  const std::vector<std::vector<int>> a = {{1, 1, 0, 1, 0}, {0, 1, 1, 0, 1}, {1, 0, 1, 1, 0}, {0, 0, 0, 1, 1}};
  std::vector<std::vector<int>> flipped = a;
  for (auto& row : flipped) row[0] = 1 - row[0];
  write_sheet(dir / "a.json", "ann-a", a);
  write_sheet(dir / "b.json", "ann-b", a);
  write_sheet(dir / "c.json", "ann-c", flipped);

  const auto same = run("kappa", {"kappa.sheets=[\"" + (dir / "a.json").string() + "\",\"" + (dir / "b.json").string() + "\"]",
                                  arg("run_dir", dir / "same")});
  ASSERT_EQ(same.code, 0) << same.err;
  EXPECT_NE(same.out.find("| A1 | 1.00 |"), std::string::npos) << same.out;

  cli::Sheet sa = cli::load_sheet(dir / "a.json");
  cli::Sheet sc = cli::load_sheet(dir / "c.json");
  const auto k = cli::kappa_table({sa, sc});
  EXPECT_NEAR(k[0], -1.0, 1e-12);
  for (std::size_t q = 1; q < k.size(); ++q) EXPECT_NEAR(k[q], 1.0, 1e-12);

  write_sheet(dir / "short.json", "x", {{1, 0}});
  try {
    cli::load_sheet(dir / "short.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
  }
}

TEST(CliConfig, OverridesBeatFileAndEnvInterpolates) {
  TempDir dir;
  write_file(dir / "cfg.json", R"({"seed": 3, "forge": {"parallelism": 2, "id_prefix": "${OPENBIAS_TEST_PREFIX:-obb}"}})");
  auto c = cli::Config::load(dir / "cfg.json", {"forge.parallelism=5"});
  EXPECT_EQ(c.get<int>("forge.parallelism"), 5);
  EXPECT_EQ(c.seed(), 3u);
  EXPECT_EQ(c.get<std::string>("forge.id_prefix"), "obb");

  ::setenv("OPENBIAS_TEST_PREFIX", "xyz", 1);
  c = cli::Config::load(dir / "cfg.json", {});
  EXPECT_EQ(c.get<std::string>("forge.id_prefix"), "xyz");
  ::unsetenv("OPENBIAS_TEST_PREFIX");

  EXPECT_NE(cli::Config::load(dir / "cfg.json", {}).hash(), cli::Config::load(dir / "cfg.json", {"seed=4"}).hash());
  EXPECT_THROW(cli::interpolate_env(std::string_view("${OPENBIAS_TEST_UNSET_VAR}")), Error);
  EXPECT_THROW(cli::Config::load(std::nullopt, {"novalue"}), Error);
}

TEST(CliDispatch, UnknownCommandExitsOne) {
  const auto r = run("frobnicate", {});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("frobnicate"), std::string::npos);
}
