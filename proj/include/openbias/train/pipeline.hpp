#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "openbias/core/hash.hpp"
#include "openbias/metrics/report.hpp"
#include "openbias/model/model.hpp"
#include "openbias/train/split.hpp"
#include "openbias/train/stages.hpp"

namespace openbias::train {

/// Architecture knobs; the vocabulary size is taken from the tokenizer.
struct ModelSpec {
  model::BackboneConfig backbone;
  std::size_t reduction_factor = 16;
  model::Activation activation = model::Activation::Relu;
  std::optional<double> fusion_temperature;
  std::size_t hash_buckets = 16;
  std::size_t min_count = 1;
};

inline Json to_json(const ModelSpec& m) {
  Json j;
  j["backbone"] = model::to_json(m.backbone);
  j["reduction_factor"] = m.reduction_factor;
  j["activation"] = std::string(model::to_string(m.activation));
  if (m.fusion_temperature) j["fusion_temperature"] = *m.fusion_temperature;
  j["hash_buckets"] = m.hash_buckets;
  j["min_count"] = m.min_count;
  return j;
}

inline ModelSpec model_spec_from_json(const Json& j) {
  ModelSpec m;
  try {
    if (j.contains("backbone")) {
      Json b = model::to_json(m.backbone);
      b.update(j["backbone"]);
      m.backbone = model::backbone_from_json(b);
    }
    m.reduction_factor = j.value("reduction_factor", m.reduction_factor);
    if (j.contains("activation")) m.activation = model::parse_activation(j["activation"].get<std::string>());
    if (j.contains("fusion_temperature") && !j["fusion_temperature"].is_null())
      m.fusion_temperature = j["fusion_temperature"].get<double>();
    m.hash_buckets = j.value("hash_buckets", m.hash_buckets);
    m.min_count = j.value("min_count", m.min_count);
  } catch (const Json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("model config: ") + e.what());
  }
  require(m.reduction_factor >= 1, ErrorKind::ConfigError, "reduction_factor must be positive");
  return m;
}

struct PipelineConfig {
  ModelSpec model;
  TrainConfig train;
  std::vector<Stage> stages = {Stage::Base, Stage::Adapters, Stage::Fusion};
};

inline Json to_json(const PipelineConfig& c) {
  Json j;
  j["model"] = to_json(c.model);
  j["train"] = to_json(c.train);
  j["stages"] = Json::array();
  for (Stage s : c.stages) j["stages"].push_back(std::string(to_string(s)));
  return j;
}

/// Corpora for one run. `base_corpus` is the generic multiple-choice set for
/// the base stage; `corpus` supplies the per-category samples named by `plan`;
/// `eval_corpus` is the evaluation corpus for config3.
struct PipelineData {
  std::vector<qa::QAInstance> base_corpus;
  const Corpus* corpus = nullptr;
  const Corpus* eval_corpus = nullptr;
  SplitPlan plan;
};

struct PipelineResult {
  ModelState state;
  std::optional<ModelState> base_state;
  qa::Tokenizer tokenizer;
  std::vector<EpochRecord> history;
  std::vector<std::string> checkpoints;  // relative to the run directory
  std::optional<StageFault> fault;
  std::size_t adapter_instances = 0;
};

inline std::vector<qa::QAInstance> eval_instances(const PipelineData& data, const std::string& set = "eval") {
  const auto it = data.plan.eval_sets.find(set);
  if (it == data.plan.eval_sets.end()) return {};
  const Corpus* source = data.plan.config_kind == ConfigKind::Config3 ? data.eval_corpus : data.corpus;
  require(source != nullptr, ErrorKind::PreconditionFailed, "no corpus for evaluation set '" + set + "'");
  return source->select(it->second);
}

inline qa::Tokenizer build_tokenizer(const PipelineData& data, const ModelSpec& spec) {
  std::vector<std::string> texts;
  auto add = [&](const qa::QAInstance& q) {
    texts.push_back(q.context);
    texts.push_back(q.question);
    texts.insert(texts.end(), q.options.begin(), q.options.end());
  };
  for (const auto& q : data.base_corpus) add(q);
  if (data.corpus)
    for (const auto& id : data.plan.all_train_ids()) add(data.corpus->at(id));
  return qa::Tokenizer::build(texts, spec.min_count, spec.hash_buckets);
}

/// Fresh model with one adapter per train category and, for two or more
/// categories, a fusion layer over them.
inline ModelState build_model(const ModelSpec& spec, const std::vector<std::string>& categories,
                              std::size_t vocab_size, std::uint64_t seed) {
  auto backbone = spec.backbone;
  backbone.vocab_size = vocab_size;
  const Rng root(seed);
  Rng init = root.split("init/backbone");
  auto state = model::init_model(backbone, init);
  for (const auto& category : categories) {
    Rng r = root.split("init/adapter/" + category);
    model::add_adapter(state, {category, spec.reduction_factor, spec.activation}, r);
  }
  if (categories.size() >= 2) {
    Rng r = root.split("init/fusion");
    model::add_fusion(state, {categories, spec.fusion_temperature}, r);
  }
  return state;
}

namespace detail {

inline std::vector<EpochRecord> filter_history(const std::vector<EpochRecord>& h, const std::string& stage) {
  std::vector<EpochRecord> out;
  for (const auto& r : h)
    if (r.stage == stage) out.push_back(r);
  return out;
}

}  // namespace detail

/// Runs the configured stages in order (base -> adapters -> fusion). When
/// `run_dir` is given, writes:
///   config.json, split_plan.json, vocab.json
///   checkpoints/base/            full model + losses.csv
///   checkpoints/adapter-<cat>/   adapter sub-checkpoint + losses.csv
///   checkpoints/fusion/          full model + losses.csv
///   model/                       final full model
/// A NumericalFault stops the pipeline after saving the restored stage state.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, const PipelineData& data,
                                   const std::optional<std::filesystem::path>& run_dir = std::nullopt) {
  cfg.train.validate();
  PipelineResult result;
  result.tokenizer = build_tokenizer(data, cfg.model);
  const auto& categories = data.plan.train_categories;
  result.state = build_model(cfg.model, categories, result.tokenizer.vocab_size(), cfg.train.seed);

  namespace fs = std::filesystem;
  if (run_dir) {
    write_file(*run_dir / "config.json", to_json(cfg).dump(2) + "\n");
    write_file(*run_dir / "split_plan.json", to_json(data.plan).dump(2) + "\n");
    write_file(*run_dir / "vocab.json", result.tokenizer.to_json().dump(2) + "\n");
  }
  auto save_full = [&](const std::string& name, const std::vector<EpochRecord>& h) {
    result.checkpoints.push_back("checkpoints/" + name);
    if (!run_dir) return;
    const auto dir = *run_dir / "checkpoints" / name;
    model::save_model(dir, result.state);
    write_file(dir / "losses.csv", losses_csv(h));
  };

  for (Stage stage : cfg.stages) {
    StageResult r;
    switch (stage) {
      case Stage::Base: {
        model::apply_mode(result.state, model::Mode::backbone_only());
        const auto examples = encode(data.base_corpus, result.tokenizer, result.state.backbone.max_sequence_length);
        r = train_stage_base(std::move(result.state), examples, cfg.train);
        result.state = std::move(r.state);
        result.base_state = result.state;
        save_full("base", r.history);
        break;
      }
      case Stage::Adapters: {
        require(data.corpus != nullptr, ErrorKind::PreconditionFailed, "adapter stage needs a training corpus");
        r = train_stage_adapters(std::move(result.state), data.plan, *data.corpus, result.tokenizer, cfg.train);
        result.state = std::move(r.state);
        result.adapter_instances = r.instances_consumed;
        for (const auto& category : categories) {
          const std::string name = "adapter-" + category;
          result.checkpoints.push_back("checkpoints/" + name);
          if (!run_dir) continue;
          const auto dir = *run_dir / "checkpoints" / name;
          model::export_adapter(dir, result.state, category);
          write_file(dir / "losses.csv", losses_csv(detail::filter_history(r.history, name)));
        }
        break;
      }
      case Stage::Fusion: {
        require(data.corpus != nullptr, ErrorKind::PreconditionFailed, "fusion stage needs a training corpus");
        r = train_stage_fusion(std::move(result.state), data.plan, *data.corpus, result.tokenizer, cfg.train);
        result.state = std::move(r.state);
        save_full("fusion", r.history);
        break;
      }
    }
    result.history.insert(result.history.end(), r.history.begin(), r.history.end());
    if (r.fault) {
      result.fault = std::move(r.fault);
      break;
    }
  }
  if (run_dir) {
    model::save_model(*run_dir / "model", result.state);
    write_file(*run_dir / "losses.csv", [&] {
      std::string out = "stage,epoch,split,mean_loss\n";
      for (const auto& h : result.history)
        out += h.stage + "," + std::to_string(h.epoch) + "," + h.split + "," + format_double(h.mean_loss) + "\n";
      return out;
    }());
  }
  return result;
}

/// Predictions, metrics CSV and markdown for `instances` under `state`.
struct Evaluation {
  metrics::PredictionLog log;
  metrics::MetricsReport report;
};

inline Evaluation evaluate(const ModelState& state, const qa::Tokenizer& tok, const std::vector<qa::QAInstance>& instances) {
  Evaluation e;
  e.log = predict(state, encode(instances, tok, state.backbone.max_sequence_length));
  e.report = metrics::build_report(e.log);
  return e;
}

inline void write_evaluation(const std::filesystem::path& dir, const Evaluation& e, const std::string& system = "model") {
  metrics::save_predictions(dir / "predictions.jsonl", e.log);
  write_file(dir / "metrics.csv", metrics::to_csv(e.report));
  write_file(dir / "metrics.md", metrics::to_markdown(e.report, system));
}

}  // namespace openbias::train
