#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/core/text.hpp"
#include "openbias/numeric/ops.hpp"
#include "openbias/qa/instance.hpp"

namespace openbias::train {

using nn::Tape;
using nn::Tensor;
using nn::Var;

/// Per-stage overrides of the shared epoch count and learning rate.
struct StageSettings {
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;
};

enum class Stage { Base, Adapters, Fusion };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Base: return "base";
    case Stage::Adapters: return "adapters";
    case Stage::Fusion: return "fusion";
  }
  return "base";
}

inline Stage parse_stage(std::string_view s) {
  if (s == "base") return Stage::Base;
  if (s == "adapters") return Stage::Adapters;
  if (s == "fusion") return Stage::Fusion;
  fail(ErrorKind::ConfigError, "unknown stage '" + std::string(s) + "'");
}

struct TrainConfig {
  double lambda_kl = 0.1;
  std::size_t epochs = 5;
  std::size_t batch_size = 16;
  /// Unset -> 1e-4 for the base stage, 1e-3 for adapter and fusion stages.
  std::optional<double> learning_rate;
  std::uint64_t seed = 0;
  /// Stop (and keep the previous epoch) when the epoch-end train loss rises by more than this.
  double early_stop_tolerance = 1e-9;
  StageSettings base;
  StageSettings adapters;
  StageSettings fusion;

  const StageSettings& settings(Stage s) const {
    return s == Stage::Base ? base : s == Stage::Adapters ? adapters : fusion;
  }

  std::size_t epochs_for(Stage s) const { return settings(s).epochs.value_or(epochs); }

  double learning_rate_for(Stage s) const {
    if (const auto& lr = settings(s).learning_rate) return *lr;
    if (learning_rate) return *learning_rate;
    return s == Stage::Base ? 1e-4 : 1e-3;
  }

  void validate() const {
    require(lambda_kl >= 0.0 && std::isfinite(lambda_kl), ErrorKind::ConfigError, "lambda_kl must be >= 0");
    require(batch_size >= 1, ErrorKind::ConfigError, "batch_size must be >= 1");
    require(early_stop_tolerance >= 0.0, ErrorKind::ConfigError, "early_stop_tolerance must be >= 0");
    for (Stage s : {Stage::Base, Stage::Adapters, Stage::Fusion}) {
      require(learning_rate_for(s) > 0.0, ErrorKind::ConfigError,
              std::string(to_string(s)) + " learning rate must be positive");
    }
  }
};

inline Json to_json(const StageSettings& s) {
  Json j = Json::object();
  if (s.epochs) j["epochs"] = *s.epochs;
  if (s.learning_rate) j["learning_rate"] = *s.learning_rate;
  return j;
}

inline StageSettings stage_settings_from_json(const Json& j) {
  StageSettings s;
  if (j.contains("epochs")) s.epochs = j["epochs"].get<std::size_t>();
  if (j.contains("learning_rate")) s.learning_rate = j["learning_rate"].get<double>();
  return s;
}

inline Json to_json(const TrainConfig& c) {
  Json j;
  j["lambda_kl"] = c.lambda_kl;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  if (c.learning_rate) j["learning_rate"] = *c.learning_rate;
  j["seed"] = c.seed;
  j["optimizer"] = "adam";
  j["early_stop_tolerance"] = c.early_stop_tolerance;
  j["base"] = to_json(c.base);
  j["adapters"] = to_json(c.adapters);
  j["fusion"] = to_json(c.fusion);
  return j;
}

/// Missing keys keep their defaults.
inline TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  try {
    c.lambda_kl = j.value("lambda_kl", c.lambda_kl);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("learning_rate") && !j["learning_rate"].is_null()) c.learning_rate = j["learning_rate"].get<double>();
    c.seed = j.value("seed", c.seed);
    c.early_stop_tolerance = j.value("early_stop_tolerance", c.early_stop_tolerance);
    require(j.value("optimizer", std::string("adam")) == "adam", ErrorKind::ConfigError, "only the adam optimizer is supported");
    if (j.contains("base")) c.base = stage_settings_from_json(j["base"]);
    if (j.contains("adapters")) c.adapters = stage_settings_from_json(j["adapters"]);
    if (j.contains("fusion")) c.fusion = stage_settings_from_json(j["fusion"]);
  } catch (const Json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

/// -log softmax(logits)[target], log-sum-exp stabilized.
inline Var ce_loss(const Var& logits, std::size_t target) {
  require(target < logits.value().size(), ErrorKind::IndexOutOfRange,
          "target " + std::to_string(target) + " outside " + std::to_string(logits.value().size()) + " logits");
  return nn::scale(nn::select(nn::log_softmax(logits), target), -1.0);
}

/// D_KL(U || softmax(z)) = sum_j (1/k) (log(1/k) - log p_j) over k >= 2 logits.
inline Var kl_uniformity_loss(const Var& logits) {
  const std::size_t k = logits.value().size();
  require(k >= 2, ErrorKind::KTooSmall, "uniformity loss needs k >= 2 non-neutral logits, got " + std::to_string(k));
  Tape& tape = *logits.tape();
  Var log_p = nn::log_softmax(logits);
  Var log_uniform = tape.constant(Tensor(log_p.value().shape(), -std::log(static_cast<double>(k))));
  return nn::mean(nn::add(log_uniform, nn::scale(log_p, -1.0)));
}

/// Disambiguated: CE against gold. Ambiguous: CE against the neutral option plus
/// lambda_kl * uniformity over the non-neutral logits. The KL term is skipped
/// entirely for disambiguated instances and when lambda_kl is 0.
inline Var combined_loss(const qa::QAInstance& q, const Var& logits, double lambda_kl) {
  require(logits.value().size() == q.options.size(), ErrorKind::ShapeMismatch,
          "instance '" + q.id + "': " + std::to_string(logits.value().size()) + " logits for " +
              std::to_string(q.options.size()) + " options");
  const std::size_t target = qa::resolve_correct_answer(q);
  Var loss = ce_loss(logits, target);
  if (q.condition == qa::Condition::Disambig || lambda_kl == 0.0) return loss;
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < q.options.size(); ++i)
    if (i != q.neutral_index) others.push_back(i);
  return nn::add(loss, nn::scale(kl_uniformity_loss(nn::gather(logits, others)), lambda_kl));
}

inline Var combined_loss(const qa::QAInstance& q, const Var& logits, const TrainConfig& cfg) {
  return combined_loss(q, logits, cfg.lambda_kl);
}

// Value-only conveniences over plain tensors.

inline double ce_loss(const Tensor& logits, std::size_t target) {
  Tape tape;
  return ce_loss(tape.constant(logits), target).item();
}

inline double kl_uniformity_loss(const Tensor& logits) {
  Tape tape;
  return kl_uniformity_loss(tape.constant(logits)).item();
}

inline double combined_loss(const qa::QAInstance& q, const Tensor& logits, double lambda_kl) {
  Tape tape;
  return combined_loss(q, tape.constant(logits), lambda_kl).item();
}

}  // namespace openbias::train
