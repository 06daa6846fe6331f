#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/core/rng.hpp"
#include "openbias/metrics/metrics.hpp"
#include "openbias/model/model.hpp"
#include "openbias/qa/candidates.hpp"
#include "openbias/qa/tokenizer.hpp"
#include "openbias/train/adam.hpp"
#include "openbias/train/loss.hpp"
#include "openbias/train/split.hpp"

namespace openbias::train {

using model::ModelState;

/// An instance together with its tokenized candidates.
struct Example {
  qa::QAInstance instance;
  std::vector<qa::CandidateSequence> candidates;
};

inline std::vector<Example> encode(const std::vector<qa::QAInstance>& instances, const qa::Tokenizer& tok,
                                   std::size_t max_sequence_length) {
  std::vector<Example> out;
  out.reserve(instances.size());
  for (const auto& q : instances) out.push_back({q, qa::format_candidates(q, tok, max_sequence_length)});
  return out;
}

struct EpochRecord {
  std::string stage;
  std::size_t epoch = 0;
  std::string split;
  double mean_loss = 0.0;
};

struct StageFault {
  std::string stage;
  std::size_t epoch = 0;
  std::string message;
  std::vector<std::string> batch_ids;
};

struct StageResult {
  ModelState state;
  std::vector<EpochRecord> history;
  std::size_t instances_consumed = 0;
  std::size_t steps = 0;
  bool early_stopped = false;
  std::optional<StageFault> fault;
};

inline Tensor logits_for(const ModelState& s, const Example& ex) { return model::forward_score(s, ex.candidates); }

/// Mean combined loss over `data` without gradients.
inline double mean_loss(const ModelState& s, const std::vector<Example>& data, double lambda_kl) {
  require(!data.empty(), ErrorKind::EmptyInput, "no examples to evaluate");
  double total = 0.0;
  for (const auto& ex : data) total += combined_loss(ex.instance, logits_for(s, ex), lambda_kl);
  return total / static_cast<double>(data.size());
}

/// Argmax over candidate logits, ties to the lowest index.
inline std::size_t predict_index(const Tensor& logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

inline metrics::PredictionLog predict(const ModelState& s, const std::vector<Example>& data) {
  metrics::PredictionLog log;
  for (const auto& ex : data) log.add(metrics::make_row(ex.instance, predict_index(logits_for(s, ex))));
  return log;
}

/// Mini-batch Adam over `data` with the active mode's trainable set.
///
/// Each epoch shuffles with a stream split from `rng` by "<label>/epoch<e>";
/// gradients within a batch accumulate in instance-id order. Epoch-end train
/// loss is recorded (epoch 0 = before training). If it rises by more than the
/// early-stop tolerance the previous epoch's parameters are kept and the stage
/// ends. A NumericalFault restores the last epoch-end parameters and records
/// the offending batch.
inline StageResult run_stage(ModelState state, const std::vector<Example>& data, const TrainConfig& cfg, Stage stage,
                             const std::string& label, const Rng& rng) {
  cfg.validate();
  StageResult result;
  const std::size_t epochs = cfg.epochs_for(stage);
  if (epochs == 0 || data.empty()) {
    result.state = std::move(state);
    return result;
  }
  result.instances_consumed = data.size();
  Adam adam(cfg.learning_rate_for(stage));
  state.params.zero_grad();

  double previous = mean_loss(state, data, cfg.lambda_kl);
  result.history.push_back({label, 0, "train", previous});
  nn::ParamStore snapshot = state.params;

  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng epoch_rng = rng.split(label + "/epoch" + std::to_string(epoch));
    epoch_rng.shuffle(std::span<std::size_t>(order));

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      std::sort(batch.begin(), batch.end(),
                [&](std::size_t a, std::size_t b) { return data[a].instance.id < data[b].instance.id; });
      try {
        const double weight = 1.0 / static_cast<double>(batch.size());
        for (std::size_t idx : batch) {
          const auto& ex = data[idx];
          Tape tape;
          Var logits = model::score_candidates(tape, state, ex.candidates);
          Var loss = combined_loss(ex.instance, logits, cfg.lambda_kl);
          tape.backward(loss, state.params, weight);
        }
        for (const auto& [name, e] : state.params.entries())
          if (e.trainable)
            require(e.grad.all_finite(), ErrorKind::NumericalFault, "non-finite gradient for " + name);
        adam.step(state.params);
        state.params.zero_grad();
        ++result.steps;
        for (const auto& [name, e] : state.params.entries())
          if (e.trainable) require(e.value.all_finite(), ErrorKind::NumericalFault, "non-finite parameter " + name);
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::NumericalFault) throw;
        StageFault fault{label, epoch, err.what(), {}};
        for (std::size_t idx : batch) fault.batch_ids.push_back(data[idx].instance.id);
        state.params = std::move(snapshot);
        state.params.zero_grad();
        result.fault = std::move(fault);
        result.state = std::move(state);
        return result;
      }
    }

    const double current = mean_loss(state, data, cfg.lambda_kl);
    result.history.push_back({label, epoch, "train", current});
    if (current > previous + cfg.early_stop_tolerance) {
      state.params = std::move(snapshot);
      result.early_stopped = true;
      break;
    }
    previous = current;
    snapshot = state.params;
  }
  state.params.zero_grad();
  result.state = std::move(state);
  return result;
}

/// Fine-tunes the backbone on a generic multiple-choice corpus.
inline StageResult train_stage_base(ModelState state, const std::vector<Example>& data, const TrainConfig& cfg) {
  require(state.mode.kind == model::Mode::Kind::BackboneOnly, ErrorKind::PreconditionFailed,
          "base stage needs backbone_only mode, model is in " + state.mode.describe());
  const Rng rng = Rng(cfg.seed).split("stage/base");
  return run_stage(std::move(state), data, cfg, Stage::Base, "base", rng);
}

/// Trains one adapter per train category on that category's sampled instances,
/// each with the backbone and every other adapter frozen.
inline StageResult train_stage_adapters(ModelState state, const SplitPlan& plan, const Corpus& corpus,
                                        const qa::Tokenizer& tok, const TrainConfig& cfg) {
  for (const auto& category : plan.train_categories)
    require(state.find_adapter(category) != nullptr, ErrorKind::UnknownAdapter,
            "no adapter for train category '" + category + "'");
  StageResult total;
  for (const auto& category : plan.train_categories) {
    const auto& ids = plan.train_ids.at(category);
    require(ids.size() == plan.per_category_count, ErrorKind::CategoryUnderflow,
            "category '" + category + "' has " + std::to_string(ids.size()) + " sampled instances, plan needs " +
                std::to_string(plan.per_category_count));
    model::apply_mode(state, model::Mode::single_adapter(category));
    const auto data = encode(corpus.select(ids), tok, state.backbone.max_sequence_length);
    const Rng rng = Rng(cfg.seed).split("stage/adapter/" + category);
    auto r = run_stage(std::move(state), data, cfg, Stage::Adapters, "adapter-" + category, rng);
    state = std::move(r.state);
    total.history.insert(total.history.end(), r.history.begin(), r.history.end());
    total.instances_consumed += r.instances_consumed;
    total.steps += r.steps;
    total.early_stopped = total.early_stopped || r.early_stopped;
    if (r.fault) {
      total.fault = std::move(r.fault);
      break;
    }
  }
  total.state = std::move(state);
  return total;
}

/// Trains the fusion layer on the union of every train category's samples.
inline StageResult train_stage_fusion(ModelState state, const SplitPlan& plan, const Corpus& corpus,
                                      const qa::Tokenizer& tok, const TrainConfig& cfg) {
  require(state.fusion.has_value() && state.fusion->adapter_names.size() >= 2, ErrorKind::FewerThanTwoAdapters,
          "fusion stage needs a fusion layer over at least two adapters");
  model::apply_mode(state, model::Mode::fusion());
  const auto data = encode(corpus.select(plan.all_train_ids()), tok, state.backbone.max_sequence_length);
  const Rng rng = Rng(cfg.seed).split("stage/fusion");
  return run_stage(std::move(state), data, cfg, Stage::Fusion, "fusion", rng);
}

inline std::string losses_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,split,mean_loss\n";
  for (const auto& r : history) out += std::to_string(r.epoch) + "," + r.split + "," + format_double(r.mean_loss) + "\n";
  return out;
}

}  // namespace openbias::train
