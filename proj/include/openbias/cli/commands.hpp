#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "openbias/cli/config.hpp"
#include "openbias/cli/data.hpp"
#include "openbias/forge/forge.hpp"
#include "openbias/metrics/report.hpp"
#include "openbias/metrics/stats.hpp"
#include "openbias/refine/refine.hpp"
#include "openbias/train/diagnostics.hpp"
#include "openbias/train/pipeline.hpp"

namespace openbias::cli {

// ---------------------------------------------------------------------------
// forge

inline std::vector<std::string> load_captions(const fs::path& path) {
  std::vector<std::string> out;
  if (path.extension() == ".jsonl") {
    for (const auto& j : read_jsonl(path)) {
      require(j.contains("caption") && j["caption"].is_string(), ErrorKind::ConfigError,
              path.string() + ": caption lines need a string 'caption'");
      out.push_back(j["caption"].get<std::string>());
    }
  } else {
    for (const auto& line : split_lines(read_file(path)))
      if (auto t = trim(line); !t.empty()) out.push_back(std::move(t));
  }
  return out;
}

inline std::unique_ptr<forge::LLMProvider> make_llm_provider(const Config& cfg, const std::string& key, RunDir* run) {
  const auto kind = cfg.get<std::string>(key + ".kind", "synthetic");
  if (kind == "replay") {
    const auto p = cfg.path(key + ".transcript");
    if (run) run->record_input(p);
    return forge::ReplayProvider::from_file(p);
  }
  if (kind == "synthetic") return std::make_unique<forge::SyntheticProvider>(cfg.get<std::uint64_t>(key + ".seed", cfg.seed()));
  if (kind == "http") {
    forge::HttpProvider::Config h;
    h.endpoint = cfg.get<std::string>(key + ".endpoint", "");
    h.api_key_env = cfg.get<std::string>(key + ".api_key_env", h.api_key_env);
    h.model = cfg.get<std::string>(key + ".model", h.model);
    h.response_pointer = cfg.get<std::string>(key + ".response_pointer", h.response_pointer);
    h.timeout_seconds = cfg.get<double>(key + ".timeout_seconds", h.timeout_seconds);
    h.min_interval_seconds = cfg.get<double>(key + ".min_interval_seconds", h.min_interval_seconds);
    return std::make_unique<forge::HttpProvider>(h);
  }
  fail(ErrorKind::ConfigError, "unknown provider kind '" + kind + "'");
}

inline forge::PromptTemplate template_for(const Config& cfg, const std::string& key, forge::TemplateKind kind, RunDir* run) {
  if (!cfg.has(key)) return forge::default_template(kind);
  const auto p = cfg.path(key);
  if (run) run->record_input(p);
  auto t = forge::load_template(p);
  require(t.kind == kind, ErrorKind::ConfigError,
          p.string() + " is a " + std::string(forge::to_string(t.kind)) + " template, expected " +
              std::string(forge::to_string(kind)));
  return t;
}

inline forge::RetryPolicy retry_policy(const Config& cfg) {
  forge::RetryPolicy r;
  r.max_retries = cfg.get<std::size_t>("forge.retry.max_retries", r.max_retries);
  r.initial_backoff = std::chrono::milliseconds(cfg.get<std::int64_t>("forge.retry.initial_backoff_ms", r.initial_backoff.count()));
  r.parse_retries = cfg.get<std::size_t>("forge.retry.parse_retries", r.parse_retries);
  return r;
}

/// Captions -> BenchRecord JSONL (+ quarantine, optional rewrite, QA export).
/// Fails with ProviderFailure when the quarantine rate reaches the threshold.
inline int cmd_forge(const Config& cfg, Io io = {}, const forge::SleepFn& sleep = forge::real_sleep()) {
  RunDir run("forge", cfg);
  const auto captions_path = cfg.path("forge.captions");
  run.record_input(captions_path);
  const auto captions = load_captions(captions_path);
  // Built before any request so a missing key is reported up front.
  auto provider = make_llm_provider(cfg, "forge.provider", &run);
  const auto tmpl = template_for(cfg, "forge.template", forge::TemplateKind::BiasCreation, &run);

  forge::GenerateOptions opt;
  opt.retry = retry_policy(cfg);
  opt.parallelism = cfg.get<std::size_t>("forge.parallelism", 1);
  auto result = forge::generate_records(captions, *provider, tmpl, opt, sleep);

  if (cfg.get<bool>("forge.rewrite", false)) {
    const auto rt = template_for(cfg, "forge.rewrite_template", forge::TemplateKind::SubjectiveObjective, &run);
    const auto outcomes = forge::rewrite_subjective(result.records, *provider, rt, opt.retry, sleep);
    std::vector<OrderedJson> rows;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      OrderedJson j;
      j["index"] = i;
      j["original"] = result.records[i].question;
      j["question"] = outcomes[i].record.question;
      j["classification"] = outcomes[i].classification;
      j["status"] = forge::to_string(outcomes[i].status);
      if (!outcomes[i].reason.empty()) j["reason"] = outcomes[i].reason;
      rows.push_back(std::move(j));
      result.records[i] = outcomes[i].record;
    }
    run.write("rewrite.jsonl", to_jsonl(rows));
  }

  run.write("records.jsonl", forge::records_jsonl(result.records));
  run.write("quarantine.jsonl", forge::quarantine_jsonl(result.quarantine));
  if (cfg.get<bool>("forge.emit_qa", true) && !result.records.empty()) {
    const auto qa = forge::to_qa_instances(result.records, {}, cfg.get<std::string>("forge.id_prefix", "obb"),
                                           cfg.get<std::string>("forge.language_tag", "en"));
    std::vector<OrderedJson> rows;
    for (const auto& q : qa) rows.push_back(qa::to_json(q));
    run.write("qa.jsonl", to_jsonl(rows));
  }
  const double threshold = cfg.get<double>("forge.quarantine_threshold", 0.05);
  OrderedJson stats;
  stats["captions"] = result.stats.captions;
  stats["covered"] = result.stats.covered;
  stats["records"] = result.records.size();
  stats["quarantined"] = result.stats.quarantined;
  stats["parse_retries"] = result.stats.parse_retries;
  stats["quarantine_rate"] = result.stats.quarantine_rate();
  stats["quarantine_threshold"] = threshold;
  run.write("stats.json", stats.dump(2) + "\n");
  run.note("provider", provider->identity());
  run.note("template", tmpl.fingerprint());
  run.finish();

  io.out << "forge: " << result.records.size() << " records from " << result.stats.covered << "/" << captions.size()
         << " captions, " << result.stats.quarantined << " quarantined -> " << run.path().string() << "\n";
  if (result.stats.quarantine_rate() >= threshold)
    fail(ErrorKind::ProviderFailure, "quarantine rate " + format_fixed(100.0 * result.stats.quarantine_rate(), 1) +
                                         "% is at or above the " + format_fixed(100.0 * threshold, 1) + "% threshold");
  return kSuccess;
}

// ---------------------------------------------------------------------------
// refine

inline std::unique_ptr<refine::EmbeddingProvider> make_embedding_provider(const Config& cfg, RunDir* run) {
  const auto kind = cfg.get<std::string>("refine.embedding.kind", "hash");
  if (kind == "hash")
    return std::make_unique<refine::HashEmbeddingProvider>(cfg.get<std::size_t>("refine.embedding.dimension", 64),
                                                           cfg.get<std::uint64_t>("refine.embedding.seed", 0));
  if (kind == "file") {
    const auto p = cfg.path("refine.embedding.path");
    if (run) run->record_input(p);
    return std::make_unique<refine::FileEmbeddingProvider>(p);
  }
  if (kind == "http") {
    refine::HttpEmbeddingProvider::Config h;
    h.endpoint = cfg.get<std::string>("refine.embedding.endpoint", "");
    h.api_key_env = cfg.get<std::string>("refine.embedding.api_key_env", h.api_key_env);
    h.model = cfg.get<std::string>("refine.embedding.model", h.model);
    h.dimension = cfg.get<std::size_t>("refine.embedding.dimension", h.dimension);
    h.response_pointer = cfg.get<std::string>("refine.embedding.response_pointer", h.response_pointer);
    return std::make_unique<refine::HttpEmbeddingProvider>(h);
  }
  fail(ErrorKind::ConfigError, "unknown embedding provider '" + kind + "'");
}

inline int cmd_refine(const Config& cfg, Io io = {}) {
  RunDir run("refine", cfg);
  const auto records_path = cfg.path("refine.records");
  run.record_input(records_path);
  const auto records = forge::load_records(records_path);
  auto provider = make_embedding_provider(cfg, &run);

  refine::RefineConfig rc;
  rc.seed = cfg.seed();
  rc.k_min = cfg.get<std::size_t>("refine.k_min", rc.k_min);
  rc.k_max = cfg.get<std::size_t>("refine.k_max", rc.k_max);
  rc.kmeans.restarts = cfg.get<std::size_t>("refine.restarts", rc.kmeans.restarts);
  rc.kmeans.max_iterations = cfg.get<std::size_t>("refine.max_iterations", rc.kmeans.max_iterations);
  rc.kmeans.tolerance = cfg.get<double>("refine.tolerance", rc.kmeans.tolerance);
  rc.outlier_factor = cfg.get<double>("refine.outlier_factor", rc.outlier_factor);
  rc.subcluster.min_size = cfg.get<std::size_t>("refine.min_subgroup_size", rc.subcluster.min_size);
  rc.embed_parallelism = cfg.get<std::size_t>("refine.parallelism", 1);
  if (cfg.has("refine.merge_map")) {
    const auto p = cfg.path("refine.merge_map");
    run.record_input(p);
    rc.merge_map = refine::load_merge_map(p);
  }
  const auto r = refine::refine_records(records, *provider, rc);

  run.write("refined.jsonl", forge::records_jsonl(r.refined));
  run.write("clusters_fitted.csv", refine::cluster_report_csv(r.fitted));
  run.write("cluster_report.csv", refine::cluster_report_csv(r.model));
  run.write("subgroups.csv", refine::subgroup_inventory_csv(r.subgroups));
  std::string assignments = "record,cluster,category\n";
  for (std::size_t i = 0; i < r.model.size(); ++i) {
    const int a = r.model.assignment[i];
    assignments += r.model.ids[i] + "," +
                   (a >= 0 ? std::to_string(a) + "," + refine::csv_field(r.model.names[static_cast<std::size_t>(a)])
                           : std::string(a == refine::kDropped ? "dropped," : "outlier,")) +
                   "\n";
  }
  run.write("assignments.csv", assignments);
  run.write("summary.json", refine::summary_json(r).dump(2) + "\n");
  run.note("embedding", provider->identity());
  run.finish();
  io.out << "refine: k=" << r.fitted.k() << " (silhouette " << format_fixed(r.fitted.silhouette, 4) << "), "
         << r.model.k() << " clusters after merge, kept " << r.accounting.kept << "/" << r.accounting.input
         << " -> " << run.path().string() << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------
// train / eval

inline void write_history(RunDir& run, const train::PipelineResult& r) {
  OrderedJson j;
  j["checkpoints"] = r.checkpoints;
  j["adapter_instances"] = r.adapter_instances;
  if (r.fault) {
    j["fault"] = {{"stage", r.fault->stage}, {"epoch", r.fault->epoch}, {"message", r.fault->message},
                  {"batch_ids", r.fault->batch_ids}};
  }
  run.write("train_summary.json", j.dump(2) + "\n");
}

inline void save_eval_set(const fs::path& path, const std::vector<qa::QAInstance>& instances) {
  qa::save_instances(path, instances);
}

inline int cmd_train(const Config& cfg, Io io = {}) {
  RunDir run("train", cfg);
  const auto data = load_data(cfg, &run);
  const auto pc = pipeline_config(cfg);
  const auto plan = data.plan_for(data.categories);
  const auto pd = data.pipeline_data(plan);
  const auto r = train::run_pipeline(pc, pd, run.path());
  save_eval_set(run / "eval_set.jsonl", train::eval_instances(pd));
  write_history(run, r);
  run.finish();
  io.out << "train: " << r.checkpoints.size() << " checkpoints -> " << run.path().string() << "\n";
  if (r.fault)
    fail(ErrorKind::NumericalFault, "numerical fault in " + r.fault->stage + " epoch " + std::to_string(r.fault->epoch) +
                                        ": " + r.fault->message);
  return kSuccess;
}

/// Baseline predictors for sanity checks: always gold, always the stereotyped
/// option (neutral when unannotated), always neutral.
inline metrics::PredictionLog baseline_predictions(const std::vector<qa::QAInstance>& instances, const std::string& kind) {
  metrics::PredictionLog log;
  for (const auto& q : instances) {
    std::size_t p = 0;
    if (kind == "oracle") p = qa::resolve_correct_answer(q);
    else if (kind == "stereotype") p = q.stereotyped_index.value_or(q.neutral_index);
    else if (kind == "neutral") p = q.neutral_index;
    else fail(ErrorKind::ConfigError, "unknown predictor '" + kind + "'");
    log.add(metrics::make_row(q, p));
  }
  return log;
}

inline int cmd_eval(const Config& cfg, Io io = {}) {
  RunDir run("eval", cfg);
  const auto predictor = cfg.get<std::string>("eval.predictor", "model");
  std::optional<fs::path> train_run = cfg.optional_path("eval.run");
  std::vector<qa::QAInstance> instances;
  if (cfg.has("eval.instances")) {
    const auto p = cfg.path("eval.instances");
    run.record_input(p);
    instances = qa::load_instances(p);
  } else {
    require(train_run.has_value(), ErrorKind::ConfigError, "eval needs eval.instances or eval.run");
    instances = qa::load_instances(*train_run / "eval_set.jsonl");
  }
  require(!instances.empty(), ErrorKind::EmptyInput, "no instances to evaluate");

  train::Evaluation e;
  if (predictor == "model") {
    require(train_run.has_value(), ErrorKind::ConfigError, "model predictions need eval.run");
    const auto checkpoint = *train_run / cfg.get<std::string>("eval.checkpoint", "model");
    const auto state = model::load_model(checkpoint);
    const auto tok = qa::Tokenizer::from_json(Json::parse(read_file(*train_run / "vocab.json")));
    e = train::evaluate(state, tok, instances);
  } else {
    e.log = baseline_predictions(instances, predictor);
    e.report = metrics::build_report(e.log);
  }
  train::write_evaluation(run.path(), e, cfg.get<std::string>("eval.system", predictor));
  run.finish();
  io.out << metrics::to_markdown(e.report, cfg.get<std::string>("eval.system", predictor));
  return kSuccess;
}

// ---------------------------------------------------------------------------
// report

inline metrics::PredictionLog load_system_log(const fs::path& p) {
  return metrics::load_predictions(fs::is_directory(p) ? p / "predictions.jsonl" : p);
}

/// `report.systems`: [{"name", "path"}] (or an object name -> path); paths are
/// predictions.jsonl files or directories holding one. With two or more
/// systems, paired t-tests compare `report.reference` (default: the first)
/// against the rest.
inline int cmd_report(const Config& cfg, Io io = {}) {
  RunDir run("report", cfg);
  std::vector<std::pair<std::string, fs::path>> systems;
  const auto& sys = cfg.at("report.systems");
  const fs::path base = cfg.file() ? cfg.file()->parent_path() : fs::current_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  if (sys.is_array()) {
    for (const auto& s : sys) systems.emplace_back(s.at("name").get<std::string>(), resolve(s.at("path").get<std::string>()));
  } else {
    for (const auto& [name, p] : sys.items()) systems.emplace_back(name, resolve(p.get<std::string>()));
  }
  require(!systems.empty(), ErrorKind::ConfigError, "report.systems is empty");

  std::vector<std::pair<std::string, metrics::MetricsReport>> reports;
  std::map<std::string, metrics::PredictionLog> logs;
  std::string csv = "system,category,condition,n,accuracy,bias_score\n";
  for (const auto& [name, path] : systems) {
    auto log = load_system_log(path);
    run.record_input(fs::is_directory(path) ? path / "predictions.jsonl" : path);
    auto rep = metrics::build_report(log);
    const auto body = split_lines(metrics::to_csv(rep));
    for (std::size_t i = 1; i < body.size(); ++i) csv += name + "," + body[i] + "\n";
    reports.emplace_back(name, std::move(rep));
    logs.emplace(name, std::move(log));
  }
  const int decimals = cfg.get<int>("report.decimals", 3);
  std::string md = metrics::comparison_markdown(reports, decimals);
  run.write("comparison.csv", csv);
  run.write("comparison.md", md);
  if (systems.size() >= 2) {
    const auto reference = cfg.get<std::string>("report.reference", systems.front().first);
    const auto table = metrics::significance_table(logs, reference);
    const auto sig = metrics::significance_markdown(table, reference);
    run.write("significance.md", sig);
    md += "\n" + sig;
  }
  run.finish();
  io.out << md;
  return kSuccess;
}

// ---------------------------------------------------------------------------
// annotate / kappa

inline const std::vector<std::string>& annotation_questions() {
  static const std::vector<std::string> q = {
      "A1: Is the question relevant to the context (caption)?",
      "A2: Is the bias category aligned with the type of bias probed by the question?",
      "A3: Is the answer to the question directly present in the context?",
      "A4: Are the classes appropriately aligned with the bias category in the question?",
      "A5: Does the generated answer belong to one of the classes?",
  };
  return q;
}

struct AnnotationItem {
  std::string id;
  std::string display;
};

inline std::vector<AnnotationItem> annotation_items(const fs::path& dataset) {
  std::vector<AnnotationItem> items;
  const auto rows = read_jsonl(dataset);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& j = rows[i];
    if (j.contains("bias_category") && j.contains("caption")) {
      const auto r = forge::record_from_json(j);
      std::string d = "Caption:  " + r.caption + "\nCategory: " + r.bias_category + "\nQuestion: " + r.question +
                      "\nClasses:  " + join(r.classes, ", ") + "\nPresent:  " + (r.presence_indicator ? "yes" : "no") +
                      "\nAnswer:   " + r.answer.value_or(std::string(forge::kUnknownAnswer));
      items.push_back({"record-" + std::to_string(i), std::move(d)});
    } else {
      const auto q = qa::instance_from_json(j);
      std::string d = "Context:  " + q.context + "\nCategory: " + q.category + "\nQuestion: " + q.question +
                      "\nOptions:  " + join(q.options, ", ") + "\nAnswer:   " + q.options[qa::resolve_correct_answer(q)];
      items.push_back({q.id, std::move(d)});
    }
  }
  return items;
}

/// Terminal loop: shows each sampled item and records yes/no for A1..A5.
/// Stops early (keeping completed items) when input ends.
inline int cmd_annotate(const Config& cfg, Io io = {}) {
  RunDir run("annotate", cfg);
  const auto dataset = cfg.path("annotate.dataset");
  run.record_input(dataset);
  const auto annotator = cfg.get<std::string>("annotate.annotator");
  auto items = annotation_items(dataset);
  const auto sample = cfg.get<std::size_t>("annotate.sample_size", items.size());
  Rng rng = Rng(cfg.seed()).split("annotate");
  rng.shuffle(std::span<AnnotationItem>(items));
  if (items.size() > sample) items.resize(sample);

  OrderedJson sheet;
  sheet["annotator"] = annotator;
  sheet["dataset"] = dataset.filename().string();
  sheet["questions"] = annotation_questions();
  sheet["items"] = OrderedJson::array();
  bool ended = false;
  for (std::size_t n = 0; n < items.size() && !ended; ++n) {
    io.out << "\n[" << n + 1 << "/" << items.size() << "] " << items[n].id << "\n" << items[n].display << "\n";
    std::vector<int> answers;
    for (const auto& question : annotation_questions()) {
      while (true) {
        io.out << question << " [y/n]: " << std::flush;
        std::string line;
        if (!std::getline(io.in, line)) {
          ended = true;
          break;
        }
        const auto a = to_lower(trim(line));
        if (a == "y" || a == "yes" || a == "1") answers.push_back(1);
        else if (a == "n" || a == "no" || a == "0") answers.push_back(0);
        else continue;
        break;
      }
      if (ended) break;
    }
    if (!ended) sheet["items"].push_back({{"id", items[n].id}, {"answers", answers}});
  }
  run.write("annotations-" + annotator + ".json", sheet.dump(2) + "\n");
  run.finish();
  io.out << "\nannotate: " << sheet["items"].size() << " items recorded" << (ended ? " (input ended early)" : "")
         << " -> " << run.path().string() << "\n";
  return kSuccess;
}

struct Sheet {
  std::string annotator;
  std::map<std::string, std::vector<int>> answers;
};

inline Sheet load_sheet(const fs::path& p) {
  Sheet s;
  try {
    const auto j = Json::parse(read_file(p));
    s.annotator = j.value("annotator", p.stem().string());
    for (const auto& item : j.at("items")) {
      auto a = item.at("answers").get<std::vector<int>>();
      require(a.size() == annotation_questions().size(), ErrorKind::LengthMismatch,
              p.string() + ": item needs " + std::to_string(annotation_questions().size()) + " answers");
      for (int v : a) require(v == 0 || v == 1, ErrorKind::InvariantViolation, p.string() + ": answers must be 0 or 1");
      require(s.answers.emplace(item.at("id").get<std::string>(), std::move(a)).second, ErrorKind::InvariantViolation,
              p.string() + ": duplicate item id");
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::ConfigError, p.string() + ": " + e.what());
  }
  return s;
}

/// Per-question Cohen's kappa over the items every sheet shares; with more
/// than two sheets, the mean over annotator pairs.
inline std::vector<double> kappa_table(const std::vector<Sheet>& sheets) {
  require(sheets.size() >= 2, ErrorKind::PreconditionFailed, "kappa needs at least two sheets");
  for (std::size_t s = 1; s < sheets.size(); ++s) {
    require(sheets[s].answers.size() == sheets[0].answers.size(), ErrorKind::LengthMismatch,
            "sheets cover different numbers of items");
    for (const auto& [id, _] : sheets[0].answers)
      require(sheets[s].answers.count(id) > 0, ErrorKind::LengthMismatch, "item '" + id + "' missing from a sheet");
  }
  const std::size_t nq = annotation_questions().size();
  std::vector<double> out(nq, 0.0);
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < sheets.size(); ++a)
    for (std::size_t b = a + 1; b < sheets.size(); ++b) {
      ++pairs;
      for (std::size_t q = 0; q < nq; ++q) {
        std::vector<int> x, y;
        for (const auto& [id, ans] : sheets[a].answers) {
          x.push_back(ans[q]);
          y.push_back(sheets[b].answers.at(id)[q]);
        }
        out[q] += metrics::cohens_kappa(x, y);
      }
    }
  for (double& k : out) k /= static_cast<double>(pairs);
  return out;
}

inline int cmd_kappa(const Config& cfg, Io io = {}) {
  RunDir run("kappa", cfg);
  std::vector<Sheet> sheets;
  const auto& paths = cfg.at("kappa.sheets");
  const fs::path base = cfg.file() ? cfg.file()->parent_path() : fs::current_path();
  for (const auto& p : paths) {
    fs::path path = p.get<std::string>();
    if (!path.is_absolute()) path = base / path;
    run.record_input(path);
    sheets.push_back(load_sheet(path));
  }
  const auto k = kappa_table(sheets);
  std::string csv = "question,kappa,items\n";
  std::string md = "| Question | Kappa |\n|---|---:|\n";
  for (std::size_t q = 0; q < k.size(); ++q) {
    csv += "A" + std::to_string(q + 1) + "," + format_double(k[q]) + "," + std::to_string(sheets[0].answers.size()) + "\n";
    md += "| A" + std::to_string(q + 1) + " | " + format_fixed(k[q], 2) + " |\n";
  }
  run.write("kappa.csv", csv);
  run.write("kappa.md", md);
  run.finish();
  io.out << md;
  return kSuccess;
}

// ---------------------------------------------------------------------------
// gradcheck

inline int cmd_gradcheck(const Config& cfg, Io io = {}) {
  RunDir run("gradcheck", cfg);
  train::GradCheckSetup g;
  g.d_model = cfg.get<std::size_t>("gradcheck.d_model", g.d_model);
  g.n_layers = cfg.get<std::size_t>("gradcheck.n_layers", g.n_layers);
  g.n_heads = cfg.get<std::size_t>("gradcheck.n_heads", g.n_heads);
  g.tolerance = cfg.get<double>("gradcheck.tolerance", g.tolerance);
  g.h = cfg.get<double>("gradcheck.step", g.h);
  const auto seeds = cfg.get<std::vector<std::uint64_t>>("gradcheck.seeds", {0, 1, 2, 3, 4});
  std::string csv = "seed,checked,max_rel_error,worst,passed\n";
  bool ok = true;
  for (auto seed : seeds) {
    const auto r = train::model_grad_check(seed, g);
    ok = ok && r.passed();
    csv += std::to_string(seed) + "," + std::to_string(r.checked) + "," + format_double(r.max_rel_error) + "," +
           r.worst_name + "," + (r.passed() ? "true" : "false") + "\n";
    io.out << "seed " << seed << ": " << r.checked << " gradients, max relative error " << r.max_rel_error
           << (r.passed() ? "" : " FAILED") << "\n";
  }
  run.write("gradcheck.csv", csv);
  run.finish();
  if (!ok) fail(ErrorKind::NumericalFault, "gradient check exceeded tolerance");
  return kSuccess;
}

// ---------------------------------------------------------------------------
// ablations

struct AblationRun {
  std::string name;
  train::PipelineResult result;
  train::Evaluation eval;
};

inline AblationRun train_and_evaluate(const std::string& name, const train::PipelineConfig& pc, const train::PipelineData& pd,
                                      const std::vector<qa::QAInstance>& eval_set, const fs::path& dir) {
  AblationRun a{name, train::run_pipeline(pc, pd, dir), {}};
  require(!a.result.fault.has_value(), ErrorKind::NumericalFault,
          name + ": numerical fault" + (a.result.fault ? " in " + a.result.fault->stage + ": " + a.result.fault->message : ""));
  save_eval_set(dir / "eval_set.jsonl", eval_set);
  a.eval = train::evaluate(a.result.state, a.result.tokenizer, eval_set);
  train::write_evaluation(dir / "eval", a.eval, name);
  return a;
}

inline std::string ablation_csv(const std::string& key, const std::vector<AblationRun>& runs) {
  std::string out = key + ",category,condition,n,accuracy,bias_score\n";
  for (const auto& r : runs) {
    const auto body = split_lines(metrics::to_csv(r.eval.report));
    for (std::size_t i = 1; i < body.size(); ++i) out += r.name + "," + body[i] + "\n";
  }
  return out;
}

inline std::string ablation_markdown(const std::vector<AblationRun>& runs, int decimals) {
  std::vector<std::pair<std::string, metrics::MetricsReport>> systems;
  for (const auto& r : runs) systems.emplace_back(r.name, r.eval.report);
  return metrics::comparison_markdown(systems, decimals);
}

/// One complete train + eval run directory per lambda plus a comparison
/// table with accuracy and bias score per condition.
inline int cmd_ablate_lambda(const Config& cfg, Io io = {}) {
  RunDir run("ablate-lambda", cfg);
  const auto data = load_data(cfg, &run);
  const auto lambdas = cfg.get<std::vector<double>>("ablate_lambda.lambdas", {0.1, 0.5, 0.7, 1.4});
  require(!lambdas.empty(), ErrorKind::ConfigError, "no lambda values");
  const auto plan = data.plan_for(data.categories);
  const auto pd = data.pipeline_data(plan);
  const auto eval_set = train::eval_instances(pd);
  std::vector<AblationRun> runs;
  for (double lambda : lambdas) {
    auto pc = pipeline_config(cfg);
    pc.train.lambda_kl = lambda;
    pc.train.validate();
    const std::string name = "lambda=" + format_double(lambda, 6);
    runs.push_back(train_and_evaluate(name, pc, pd, eval_set, run / ("lambda-" + format_double(lambda, 6))));
    io.out << name << " done\n";
  }
  const auto md = ablation_markdown(runs, cfg.get<int>("report.decimals", 3));
  run.write("comparison.md", md);
  run.write("comparison.csv", ablation_csv("lambda", runs));
  run.finish();
  io.out << md;
  return kSuccess;
}

/// Trains one model per category set (adapter count = set size) and evaluates
/// all of them on the instances no set trains on.
inline int cmd_ablate_adapters(const Config& cfg, Io io = {}) {
  RunDir run("ablate-adapters", cfg);
  const auto data = load_data(cfg, &run);
  std::vector<std::vector<std::string>> sets;
  if (cfg.has("ablate_adapters.category_sets")) {
    sets = cfg.get<std::vector<std::vector<std::string>>>("ablate_adapters.category_sets");
  } else {
    for (std::size_t n = 1; n <= data.categories.size(); ++n)
      sets.emplace_back(data.categories.begin(), data.categories.begin() + static_cast<std::ptrdiff_t>(n));
  }
  require(!sets.empty(), ErrorKind::ConfigError, "no category sets");

  std::vector<train::SplitPlan> plans;
  std::set<std::string> used;
  for (const auto& s : sets) {
    plans.push_back(data.plan_for(s));
    for (const auto& id : plans.back().all_train_ids()) used.insert(id);
  }
  std::vector<qa::QAInstance> eval_set;
  if (data.kind == train::ConfigKind::Config3) {
    eval_set = data.eval_corpus->instances();
  } else {
    for (const auto& q : data.corpus->instances())
      if (!used.count(q.id)) eval_set.push_back(q);
  }
  require(!eval_set.empty(), ErrorKind::PreconditionFailed, "category sets leave no held-out instances");

  std::vector<AblationRun> runs;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    auto pc = pipeline_config(cfg);
    if (sets[i].size() < 2) std::erase(pc.stages, train::Stage::Fusion);
    const std::string name = std::to_string(sets[i].size()) + " adapters (" + join(sets[i], "+") + ")";
    runs.push_back(train_and_evaluate(name, pc, data.pipeline_data(plans[i]), eval_set,
                                      run / ("set-" + std::to_string(i) + "-" + join(sets[i], "+"))));
    io.out << name << " done\n";
  }
  const auto md = ablation_markdown(runs, cfg.get<int>("report.decimals", 3));
  run.write("comparison.md", md);
  run.write("comparison.csv", ablation_csv("set", runs));
  run.finish();
  io.out << md;
  return kSuccess;
}

// ---------------------------------------------------------------------------
// dispatch

using CommandFn = std::function<int(const Config&, Io)>;

inline const std::map<std::string, CommandFn>& commands() {
  static const std::map<std::string, CommandFn> table = {
      {"forge", [](const Config& c, Io io) { return cmd_forge(c, io); }},
      {"refine", cmd_refine},
      {"train", cmd_train},
      {"eval", cmd_eval},
      {"report", cmd_report},
      {"annotate", cmd_annotate},
      {"kappa", cmd_kappa},
      {"gradcheck", cmd_gradcheck},
      {"ablate-lambda", cmd_ablate_lambda},
      {"ablate-adapters", cmd_ablate_adapters},
  };
  return table;
}

/// Runs a command and maps errors onto exit codes.
inline int run_command(const std::string& name, const Config& cfg, Io io = {}) {
  const auto it = commands().find(name);
  if (it == commands().end()) {
    io.err << "unknown command '" << name << "'\n";
    return kConfigFailure;
  }
  try {
    return it->second(cfg, io);
  } catch (const Error& e) {
    io.err << name << ": " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const Json::exception& e) {
    io.err << name << ": ConfigError: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    io.err << name << ": IoError: " << e.what() << "\n";
    return kConfigFailure;
  }
}

}  // namespace openbias::cli
