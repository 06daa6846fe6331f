#pragma once

#include <string>
#include <vector>

#include "openbias/model/model.hpp"
#include "openbias/numeric/gradcheck.hpp"
#include "openbias/qa/candidates.hpp"
#include "openbias/train/loss.hpp"
#include "openbias/train/synthetic.hpp"

namespace openbias::train {

struct GradCheckSetup {
  std::size_t d_model = 8;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_ffn = 16;
  std::size_t max_len = 24;
  std::size_t reduction_factor = 2;
  double lambda_kl = 0.5;
  double h = 1e-5;
  double tolerance = 1e-4;
  /// Added to every parameter so zero-initialized projections carry gradient signal.
  double jitter = 0.05;
};

/// Finite-difference check of combined_loss over one ambiguous and one
/// disambiguated instance, on a model with two adapters and fusion. Every
/// parameter is made trainable, so backbone, adapter and fusion gradients are
/// all checked.
inline nn::GradCheckReport model_grad_check(std::uint64_t seed, const GradCheckSetup& g = {}) {
  const Rng root(seed);
  auto spec = default_synthetic_spec(2);
  std::vector<qa::QAInstance> pair;
  for (const auto& q : generate_synthetic(spec, 64, root.split("data"), "gc")) {
    const bool want_ambig = pair.empty();
    if ((q.condition == qa::Condition::Ambig) == want_ambig) pair.push_back(q);
    if (pair.size() == 2) break;
  }
  require(pair.size() == 2, ErrorKind::PreconditionFailed, "could not draw both conditions");

  std::vector<std::string> texts;
  for (const auto& q : pair) {
    texts.push_back(q.context);
    texts.push_back(q.question);
    texts.insert(texts.end(), q.options.begin(), q.options.end());
  }
  const auto tok = qa::Tokenizer::build(texts, 1, 4);

  model::BackboneConfig cfg;
  cfg.vocab_size = tok.vocab_size();
  cfg.d_model = g.d_model;
  cfg.n_layers = g.n_layers;
  cfg.n_heads = g.n_heads;
  cfg.d_ffn = g.d_ffn;
  cfg.max_sequence_length = g.max_len;
  Rng init = root.split("init");
  auto state = model::init_model(cfg, init);
  const std::vector<std::string> names = {"a", "b"};
  for (const auto& n : names) model::add_adapter(state, {n, g.reduction_factor, model::Activation::Gelu}, init);
  model::add_fusion(state, {names, std::nullopt}, init);
  model::apply_mode(state, model::Mode::fusion());
  Rng jitter = root.split("jitter");
  for (auto& [name, e] : state.params.entries()) {
    e.trainable = true;
    for (double& x : e.value.data()) x += jitter.normal(0.0, g.jitter);
  }

  std::vector<std::vector<qa::CandidateSequence>> candidates;
  for (const auto& q : pair) candidates.push_back(qa::format_candidates(q, tok, cfg.max_sequence_length));

  auto& params = state.params;
  const nn::ScalarFn loss = [&](nn::Tape& tape, const nn::ParamStore&) {
    Var total;
    for (std::size_t i = 0; i < pair.size(); ++i) {
      auto logits = model::score_candidates(tape, state, candidates[i]);
      auto l = combined_loss(pair[i], logits, g.lambda_kl);
      total = i == 0 ? l : nn::add(total, l);
    }
    return total;
  };
  return nn::grad_check(loss, params, g.h, g.tolerance);
}

}  // namespace openbias::train
