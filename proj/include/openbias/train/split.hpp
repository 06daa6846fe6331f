#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/core/rng.hpp"
#include "openbias/core/text.hpp"
#include "openbias/qa/instance.hpp"

namespace openbias::train {

enum class ConfigKind { Config1, Config2, Config3 };

inline std::string_view to_string(ConfigKind k) {
  switch (k) {
    case ConfigKind::Config1: return "config1";
    case ConfigKind::Config2: return "config2";
    case ConfigKind::Config3: return "config3";
  }
  return "config1";
}

inline ConfigKind parse_config_kind(std::string_view s) {
  if (s == "config1") return ConfigKind::Config1;
  if (s == "config2") return ConfigKind::Config2;
  if (s == "config3") return ConfigKind::Config3;
  fail(ErrorKind::ConfigError, "unknown split kind '" + std::string(s) + "'");
}

/// Which instances train which adapter, and which instances are evaluated.
///   config1: train and eval from one BBQ-format corpus
///   config2: same over an OpenBiasBench corpus
///   config3: train from BBQ-format, eval on an entire KoBBQ-format corpus
struct SplitPlan {
  ConfigKind config_kind = ConfigKind::Config1;
  std::vector<std::string> train_categories;
  std::size_t per_category_count = 0;
  std::map<std::string, std::vector<std::string>> train_ids;  // category -> sampled ids
  std::map<std::string, std::vector<std::string>> eval_sets;  // name -> ids
  std::uint64_t seed = 0;

  std::vector<std::string> all_train_ids() const {
    std::vector<std::string> out;
    for (const auto& c : train_categories) {
      const auto& ids = train_ids.at(c);
      out.insert(out.end(), ids.begin(), ids.end());
    }
    return out;
  }

  std::size_t train_size() const {
    std::size_t n = 0;
    for (const auto& [_, ids] : train_ids) n += ids.size();
    return n;
  }
};

inline Json to_json(const SplitPlan& p) {
  Json j;
  j["config_kind"] = std::string(to_string(p.config_kind));
  j["train_categories"] = p.train_categories;
  j["per_category_count"] = p.per_category_count;
  j["seed"] = p.seed;
  j["train_ids"] = p.train_ids;
  j["eval_sets"] = p.eval_sets;
  return j;
}

inline SplitPlan split_plan_from_json(const Json& j) {
  SplitPlan p;
  p.config_kind = parse_config_kind(j.at("config_kind").get<std::string>());
  p.train_categories = j.at("train_categories").get<std::vector<std::string>>();
  p.per_category_count = j.at("per_category_count").get<std::size_t>();
  p.seed = j.value("seed", std::uint64_t{0});
  p.train_ids = j.at("train_ids").get<std::map<std::string, std::vector<std::string>>>();
  p.eval_sets = j.at("eval_sets").get<std::map<std::string, std::vector<std::string>>>();
  return p;
}

/// Id -> instance lookup over a corpus with unique ids.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<qa::QAInstance> instances) : instances_(std::move(instances)) {
    for (std::size_t i = 0; i < instances_.size(); ++i) {
      const bool inserted = index_.emplace(instances_[i].id, i).second;
      require(inserted, ErrorKind::InvariantViolation, "duplicate instance id '" + instances_[i].id + "'");
    }
  }

  const std::vector<qa::QAInstance>& instances() const { return instances_; }
  std::size_t size() const { return instances_.size(); }
  bool contains(const std::string& id) const { return index_.count(id) > 0; }

  const qa::QAInstance& at(const std::string& id) const {
    auto it = index_.find(id);
    require(it != index_.end(), ErrorKind::IndexOutOfRange, "no instance '" + id + "'");
    return instances_[it->second];
  }

  std::vector<qa::QAInstance> select(const std::vector<std::string>& ids) const {
    std::vector<qa::QAInstance> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(at(id));
    return out;
  }

  std::set<std::string> categories() const {
    std::set<std::string> out;
    for (const auto& q : instances_) out.insert(q.category);
    return out;
  }

 private:
  std::vector<qa::QAInstance> instances_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Samples `per_category_count` instances per train category without
/// replacement (seeded, stratified by category only).
/// `eval_corpus` is the KoBBQ-format corpus for config3 and ignored otherwise.
inline SplitPlan build_split(const Corpus& corpus, const Corpus* eval_corpus, ConfigKind kind,
                             const std::vector<std::string>& categories, std::size_t per_category_count,
                             std::uint64_t seed) {
  require(per_category_count >= 1, ErrorKind::ConfigError, "per_category_count must be positive");
  require(!categories.empty(), ErrorKind::ConfigError, "no train categories");
  require(std::set<std::string>(categories.begin(), categories.end()).size() == categories.size(),
          ErrorKind::ConfigError, "duplicate train category");
  if (kind == ConfigKind::Config3)
    require(eval_corpus != nullptr, ErrorKind::ConfigError, "config3 needs a KoBBQ-format evaluation corpus");

  SplitPlan plan;
  plan.config_kind = kind;
  plan.train_categories = categories;
  plan.per_category_count = per_category_count;
  plan.seed = seed;

  const Rng root(seed);
  std::set<std::string> taken;
  for (const auto& category : categories) {
    std::vector<std::string> ids;
    for (const auto& q : corpus.instances())
      if (q.category == category) ids.push_back(q.id);
    require(!ids.empty(), ErrorKind::PreconditionFailed, "category '" + category + "' not in corpus");
    require(ids.size() >= per_category_count, ErrorKind::CategoryUnderflow,
            "category '" + category + "' has " + std::to_string(ids.size()) + " instances, need " +
                std::to_string(per_category_count));
    Rng rng = root.split("split/" + category);
    rng.shuffle(std::span<std::string>(ids));
    ids.resize(per_category_count);
    taken.insert(ids.begin(), ids.end());
    plan.train_ids[category] = std::move(ids);
  }

  std::vector<std::string> eval;
  if (kind == ConfigKind::Config3) {
    for (const auto& q : eval_corpus->instances()) eval.push_back(q.id);
  } else {
    for (const auto& q : corpus.instances())
      if (!taken.count(q.id)) eval.push_back(q.id);
  }
  plan.eval_sets["eval"] = std::move(eval);
  return plan;
}

}  // namespace openbias::train
