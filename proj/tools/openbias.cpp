#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "openbias/cli/commands.hpp"

namespace {

struct Flag {
  std::string key;
  std::string value;
};

// Subcommand-specific shortcuts; each becomes a key=value override.
struct Shortcut {
  const char* flag;
  const char* key;
  const char* help;
  bool json = false;
};

const std::vector<std::pair<std::string, std::vector<Shortcut>>>& shortcuts() {
  static const std::vector<std::pair<std::string, std::vector<Shortcut>>> table = {
      {"forge",
       {{"--captions", "forge.captions", "caption file (.txt lines or .jsonl with \"caption\")"},
        {"--provider", "forge.provider.kind", "replay | synthetic | http"},
        {"--transcript", "forge.provider.transcript", "replay transcript (JSONL)"},
        {"--template", "forge.template", "bias-creation prompt template (JSON)"},
        {"--threshold", "forge.quarantine_threshold", "maximum tolerated quarantine rate", true}}},
      {"refine",
       {{"--records", "refine.records", "BenchRecord JSONL"},
        {"--merge-map", "refine.merge_map", "merge map JSON"},
        {"--k-min", "refine.k_min", "smallest k", true},
        {"--k-max", "refine.k_max", "largest k", true}}},
      {"train", {{"--corpus", "data.corpus", "QAInstance JSONL"}, {"--epochs", "train.epochs", "epochs per stage", true}}},
      {"eval",
       {{"--run", "eval.run", "train run directory"},
        {"--instances", "eval.instances", "QAInstance JSONL to evaluate"},
        {"--predictor", "eval.predictor", "model | oracle | stereotype | neutral"},
        {"--checkpoint", "eval.checkpoint", "checkpoint inside the run (default: model)"}}},
      {"report", {{"--reference", "report.reference", "reference system for significance tests"}}},
      {"annotate",
       {{"--dataset", "annotate.dataset", "records or QA JSONL"},
        {"--annotator", "annotate.annotator", "annotator id"},
        {"--sample", "annotate.sample_size", "number of items", true}}},
      {"kappa", {}},
      {"gradcheck", {{"--seeds", "gradcheck.seeds", "JSON list of seeds", true}}},
      {"ablate-lambda", {{"--lambdas", "ablate_lambda.lambdas", "JSON list of lambda values", true}}},
      {"ablate-adapters", {{"--sets", "ablate_adapters.category_sets", "JSON list of category lists", true}}},
  };
  return table;
}

const std::map<std::string, std::string>& summaries() {
  static const std::map<std::string, std::string> m = {
      {"forge", "generate bias records from captions through an LLM provider"},
      {"refine", "embed, cluster and clean generated records"},
      {"train", "base fine-tune, per-category adapters, fusion"},
      {"eval", "accuracy and bias scores for a model or a baseline predictor"},
      {"report", "compare systems with paired t-tests and Bonferroni correction"},
      {"annotate", "record yes/no answers for the A1..A5 quality questions"},
      {"kappa", "per-question Cohen's kappa across annotation sheets"},
      {"gradcheck", "finite-difference check of the full model"},
      {"ablate-lambda", "one train+eval run per uniformity-loss weight"},
      {"ablate-adapters", "one train+eval run per adapter category set"},
  };
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"openbias: bias benchmark construction and adapter-fusion debiasing"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::string> config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> run_dir;
  std::optional<std::string> run_root;
  app.add_option("-c,--config", config_file, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("-s,--set", overrides, "override a config value: dotted.key=value (repeatable)");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--run-dir", run_dir, "exact output directory");
  app.add_option("--run-root", run_root, "parent directory for timestamped run directories");

  std::map<std::string, std::map<std::string, std::string>> shortcut_values;
  std::vector<std::string> sheets;
  for (const auto& [name, flags] : shortcuts()) {
    auto* sub = app.add_subcommand(name, summaries().at(name));
    for (const auto& s : flags) sub->add_option(s.flag, shortcut_values[name][s.key], s.help);
    if (name == "kappa") sub->add_option("sheets", sheets, "annotation sheets (two or more)");
  }
  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  std::vector<std::string> all = overrides;
  for (const auto& [name, flags] : shortcuts()) {
    if (name != command) continue;
    for (const auto& s : flags) {
      const auto& v = shortcut_values[name][s.key];
      if (v.empty()) continue;
      // Non-JSON shortcuts are strings even when they look like numbers.
      all.push_back(std::string(s.key) + "=" + (s.json ? v : openbias::Json(v).dump()));
    }
  }
  if (!sheets.empty()) all.push_back("kappa.sheets=" + openbias::Json(sheets).dump());
  if (seed) all.push_back("seed=" + std::to_string(*seed));
  if (run_dir) all.push_back("run_dir=" + openbias::Json(*run_dir).dump());
  if (run_root) all.push_back("run_root=" + openbias::Json(*run_root).dump());

  try {
    const auto cfg = openbias::cli::Config::load(config_file ? std::optional<std::filesystem::path>(*config_file) : std::nullopt, all);
    return openbias::cli::run_command(command, cfg);
  } catch (const openbias::Error& e) {
    std::cerr << command << ": " << openbias::to_string(e.kind()) << ": " << e.what() << "\n";
    return openbias::cli::exit_code_for(e.kind());
  }
}
