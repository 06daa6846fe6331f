#pragma once

#include <memory>
#include <string>
#include <vector>

#include "openbias/cli/config.hpp"
#include "openbias/train/pipeline.hpp"
#include "openbias/train/synthetic.hpp"

namespace openbias::cli {

/// Corpora plus split plan for train / eval / ablation commands. The corpora
/// live on the heap so PipelineData can point at them safely.
struct LoadedData {
  std::vector<qa::QAInstance> base;
  std::unique_ptr<train::Corpus> corpus;
  std::unique_ptr<train::Corpus> eval_corpus;
  train::ConfigKind kind = train::ConfigKind::Config1;
  std::vector<std::string> categories;
  std::size_t per_category_count = 0;
  std::uint64_t seed = 0;

  train::PipelineData pipeline_data(const train::SplitPlan& plan) const {
    train::PipelineData d;
    d.base_corpus = base;
    d.corpus = corpus.get();
    d.eval_corpus = eval_corpus.get();
    d.plan = plan;
    return d;
  }

  train::SplitPlan plan_for(const std::vector<std::string>& cats) const {
    return train::build_split(*corpus, eval_corpus.get(), kind, cats, per_category_count, seed);
  }
};

/// `data.synthetic` generates corpora in-process:
///   base corpus: disambiguated-only instances (ids "race-<n>")
///   corpus:      `count` instances over `categories` categories (ids "bbq-<n>")
///   eval corpus: optional `eval_count` instances tagged KoBBQ-format (ids "kobbq-<n>")
/// Otherwise `data.base_corpus`, `data.corpus` and `data.eval_corpus` name QAInstance JSONL files.
inline LoadedData load_data(const Config& cfg, RunDir* run = nullptr) {
  LoadedData d;
  d.seed = cfg.seed();
  d.kind = train::parse_config_kind(cfg.get<std::string>("data.split", "config1"));
  if (cfg.has("data.synthetic")) {
    auto spec = train::default_synthetic_spec(cfg.get<std::size_t>("data.synthetic.categories", 2));
    spec.stereotype_rate = cfg.get<double>("data.synthetic.stereotype_rate", spec.stereotype_rate);
    spec.ambig_fraction = cfg.get<double>("data.synthetic.ambig_fraction", spec.ambig_fraction);
    const Rng root(d.seed);
    auto base_spec = spec;
    base_spec.ambig_fraction = 0.0;
    d.base = train::generate_synthetic(base_spec, cfg.get<std::size_t>("data.synthetic.base_count", 1000),
                                       root.split("base"), "race");
    d.corpus = std::make_unique<train::Corpus>(
        train::generate_synthetic(spec, cfg.get<std::size_t>("data.synthetic.count", 1500), root.split("bbq"), "bbq"));
    if (const auto n = cfg.get<std::size_t>("data.synthetic.eval_count", 0); n > 0) {
      auto eval_spec = spec;
      eval_spec.source = qa::Source::KoBBQ;
      eval_spec.language_tag = "ko";
      d.eval_corpus = std::make_unique<train::Corpus>(train::generate_synthetic(eval_spec, n, root.split("kobbq"), "kobbq"));
    }
  } else {
    auto load = [&](const std::string& key) {
      const auto p = cfg.path(key);
      if (run) run->record_input(p);
      return qa::load_instances(p);
    };
    if (cfg.has("data.base_corpus")) d.base = load("data.base_corpus");
    d.corpus = std::make_unique<train::Corpus>(load("data.corpus"));
    if (cfg.has("data.eval_corpus")) d.eval_corpus = std::make_unique<train::Corpus>(load("data.eval_corpus"));
  }
  if (cfg.has("data.categories")) {
    d.categories = cfg.get<std::vector<std::string>>("data.categories");
  } else {
    const auto cats = d.corpus->categories();
    d.categories.assign(cats.begin(), cats.end());
  }
  d.per_category_count = cfg.get<std::size_t>("data.per_category_count", 500);
  return d;
}

inline train::PipelineConfig pipeline_config(const Config& cfg) {
  train::PipelineConfig p;
  p.model = train::model_spec_from_json(cfg.section("model"));
  Json t = cfg.section("train");
  if (!t.contains("seed")) t["seed"] = cfg.seed();
  p.train = train::train_config_from_json(t);
  if (cfg.has("stages")) {
    p.stages.clear();
    for (const auto& s : cfg.get<std::vector<std::string>>("stages")) p.stages.push_back(train::parse_stage(s));
  }
  return p;
}

}  // namespace openbias::cli
