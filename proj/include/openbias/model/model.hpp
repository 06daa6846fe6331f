#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/core/rng.hpp"
#include "openbias/model/config.hpp"
#include "openbias/numeric/checkpoint.hpp"
#include "openbias/numeric/ops.hpp"
#include "openbias/numeric/param_store.hpp"
#include "openbias/qa/candidates.hpp"

namespace openbias::model {

using nn::ParamStore;
using nn::Tape;
using nn::Tensor;
using nn::Var;

/// Backbone, adapter, and fusion parameters in one store plus the active mode.
///
/// Parameter names:
///   backbone.*                                    transformer + multiple-choice head
///   adapter.<name>.layer<i>.<pre|post>.{down,up}.{w,b}
///   fusion.layer<i>.<pre|post>.{query,key,value}
struct ModelState {
  BackboneConfig backbone;
  std::vector<AdapterConfig> adapters;
  std::optional<FusionConfig> fusion;
  ParamStore params;
  Mode mode;

  const AdapterConfig* find_adapter(std::string_view name) const {
    for (const auto& a : adapters)
      if (a.name == name) return &a;
    return nullptr;
  }

  double fusion_temperature() const {
    return fusion && fusion->temperature ? *fusion->temperature : std::sqrt(static_cast<double>(backbone.d_model));
  }
};

inline std::string layer_prefix(std::size_t layer) { return "layer" + std::to_string(layer) + "."; }

inline std::string adapter_prefix(std::string_view name) { return "adapter." + std::string(name) + "."; }

inline std::string adapter_site(std::string_view name, std::size_t layer, Placement p) {
  return adapter_prefix(name) + layer_prefix(layer) + std::string(to_string(p)) + ".";
}

inline std::string fusion_site(std::size_t layer, Placement p) {
  return "fusion." + layer_prefix(layer) + std::string(to_string(p)) + ".";
}

namespace detail {

inline Tensor random_tensor(nn::Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal(0.0, stddev);
  return t;
}

inline double fan_in_std(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace detail

/// Fresh backbone in backbone_only mode.
inline ModelState init_model(const BackboneConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelState s;
  s.backbone = cfg;
  const std::size_t d = cfg.d_model;
  auto& p = s.params;
  p.add("backbone.embed.token", detail::random_tensor({cfg.vocab_size, d}, 0.5, rng));
  p.add("backbone.embed.position", detail::random_tensor({cfg.max_sequence_length, d}, 0.1, rng));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string lp = "backbone." + layer_prefix(l);
    p.add(lp + "ln1.gamma", Tensor({d}, 1.0));
    p.add(lp + "ln1.beta", Tensor({d}));
    for (const char* w : {"attn.query", "attn.key", "attn.value", "attn.out"}) {
      p.add(lp + w + ".w", detail::random_tensor({d, d}, detail::fan_in_std(d), rng));
      p.add(lp + w + ".b", Tensor({d}));
    }
    p.add(lp + "ln2.gamma", Tensor({d}, 1.0));
    p.add(lp + "ln2.beta", Tensor({d}));
    p.add(lp + "ffn.in.w", detail::random_tensor({d, cfg.d_ffn}, detail::fan_in_std(d), rng));
    p.add(lp + "ffn.in.b", Tensor({cfg.d_ffn}));
    p.add(lp + "ffn.out.w", detail::random_tensor({cfg.d_ffn, d}, detail::fan_in_std(cfg.d_ffn), rng));
    p.add(lp + "ffn.out.b", Tensor({d}));
  }
  p.add("backbone.ln_final.gamma", Tensor({d}, 1.0));
  p.add("backbone.ln_final.beta", Tensor({d}));
  p.add("backbone.head.w", detail::random_tensor({d, 1}, detail::fan_in_std(d), rng));
  p.add("backbone.head.b", Tensor({1}));
  return s;
}

/// Adds a bottleneck adapter at every (layer, placement). Down-projection
/// ~ N(0, 0.01); up-projection and biases zero, so the adapter starts as identity.
inline void add_adapter(ModelState& s, const AdapterConfig& cfg, Rng& rng) {
  require(!cfg.name.empty() && cfg.name.find('.') == std::string::npos, ErrorKind::ConfigError,
          "adapter name must be non-empty and contain no '.': '" + cfg.name + "'");
  require(s.find_adapter(cfg.name) == nullptr, ErrorKind::ConfigError, "duplicate adapter '" + cfg.name + "'");
  const std::size_t d = s.backbone.d_model;
  const std::size_t b = cfg.bottleneck_dim(d);
  for (std::size_t l = 0; l < s.backbone.n_layers; ++l)
    for (Placement pl : {Placement::PreFfn, Placement::PostFfn}) {
      const auto site = adapter_site(cfg.name, l, pl);
      s.params.add(site + "down.w", detail::random_tensor({d, b}, 0.01, rng));
      s.params.add(site + "down.b", Tensor({b}));
      s.params.add(site + "up.w", Tensor({b, d}));
      s.params.add(site + "up.b", Tensor({d}));
    }
  s.adapters.push_back(cfg);
}

/// Adds a fusion layer at every (layer, placement). Value projection is zero
/// at init, so fusion output equals its input until trained.
inline void add_fusion(ModelState& s, const FusionConfig& cfg, Rng& rng) {
  require(cfg.adapter_names.size() >= 2, ErrorKind::FewerThanTwoAdapters,
          "fusion needs at least 2 adapters, got " + std::to_string(cfg.adapter_names.size()));
  require(!s.fusion, ErrorKind::ConfigError, "model already has a fusion layer");
  for (const auto& name : cfg.adapter_names)
    require(s.find_adapter(name) != nullptr, ErrorKind::UnknownAdapter, "fusion references unknown adapter '" + name + "'");
  if (cfg.temperature) require(*cfg.temperature > 0.0, ErrorKind::ConfigError, "fusion temperature must be positive");
  const std::size_t d = s.backbone.d_model;
  for (std::size_t l = 0; l < s.backbone.n_layers; ++l)
    for (Placement pl : {Placement::PreFfn, Placement::PostFfn}) {
      const auto site = fusion_site(l, pl);
      s.params.add(site + "query", detail::random_tensor({d, d}, detail::fan_in_std(d), rng));
      s.params.add(site + "key", detail::random_tensor({d, d}, detail::fan_in_std(d), rng));
      s.params.add(site + "value", Tensor({d, d}));
    }
  s.fusion = cfg;
}

/// Sets trainable flags for `mode`:
///   backbone_only  -> backbone trainable, adapters and fusion frozen
///   single_adapter -> only that adapter trainable
///   fusion         -> only fusion trainable
inline void apply_mode(ModelState& s, const Mode& mode) {
  if (mode.kind == Mode::Kind::SingleAdapter)
    require(s.find_adapter(mode.adapter) != nullptr, ErrorKind::UnknownAdapter, "no adapter '" + mode.adapter + "'");
  if (mode.kind == Mode::Kind::Fusion) {
    require(s.fusion.has_value(), ErrorKind::UnknownAdapter, "fusion mode requested but model has no fusion layer");
    for (const auto& name : s.fusion->adapter_names)
      require(s.find_adapter(name) != nullptr, ErrorKind::UnknownAdapter, "no adapter '" + name + "'");
  }
  for (auto& [name, e] : s.params.entries()) e.trainable = false;
  switch (mode.kind) {
    case Mode::Kind::BackboneOnly: s.params.set_trainable_prefix("backbone.", true); break;
    case Mode::Kind::SingleAdapter: s.params.set_trainable_prefix(adapter_prefix(mode.adapter), true); break;
    case Mode::Kind::Fusion: s.params.set_trainable_prefix("fusion.", true); break;
  }
  s.mode = mode;
}

inline ModelState set_mode(ModelState s, const Mode& mode) {
  apply_mode(s, mode);
  return s;
}

/// Handles for one adapter site on a tape.
struct AdapterParams {
  Var down_w, down_b, up_w, up_b;
  Activation activation = Activation::Relu;
};

struct FusionParams {
  Var query, key, value;
  double temperature = 1.0;
};

inline AdapterParams adapter_params(Tape& tape, const ModelState& s, const AdapterConfig& cfg, std::size_t layer,
                                    Placement pl) {
  const auto site = adapter_site(cfg.name, layer, pl);
  return {tape.param(s.params, site + "down.w"), tape.param(s.params, site + "down.b"),
          tape.param(s.params, site + "up.w"), tape.param(s.params, site + "up.b"), cfg.activation};
}

inline FusionParams fusion_params(Tape& tape, const ModelState& s, std::size_t layer, Placement pl) {
  const auto site = fusion_site(layer, pl);
  return {tape.param(s.params, site + "query"), tape.param(s.params, site + "key"), tape.param(s.params, site + "value"),
          s.fusion_temperature()};
}

/// h + act(h W_down + b_down) W_up + b_up, applied per row.
inline Var adapter_apply(const Var& h, const AdapterParams& p) {
  const auto& H = h.value();
  require(H.rank() == 2 && H.cols() == p.down_w.value().rows(), ErrorKind::ShapeMismatch,
          "adapter input " + nn::shape_string(H.shape()) + " vs down-projection " +
              nn::shape_string(p.down_w.value().shape()));
  Var z = nn::add_row(nn::matmul(h, p.down_w), p.down_b);
  z = p.activation == Activation::Relu ? nn::relu(z) : nn::gelu(z);
  return nn::add(h, nn::add_row(nn::matmul(z, p.up_w), p.up_b));
}

/// Per row t: q = h_t W_q, k_j = o_jt W_k, v_j = o_jt W_v,
/// out_t = h_t + sum_j softmax_j(q . k_j / temperature) v_j.
/// `weights_out`, when given, receives the [T, J] attention weights.
inline Var fusion_apply(const Var& h, const std::vector<Var>& adapter_outputs, const FusionParams& p,
                        Tensor* weights_out = nullptr) {
  require(adapter_outputs.size() >= 2, ErrorKind::FewerThanTwoAdapters,
          "fusion over " + std::to_string(adapter_outputs.size()) + " adapter outputs");
  for (const auto& o : adapter_outputs)
    require(o.value().shape() == h.value().shape(), ErrorKind::ShapeMismatch,
            "adapter output " + nn::shape_string(o.value().shape()) + " vs hidden " + nn::shape_string(h.value().shape()));
  Var q = nn::matmul(h, p.query);
  std::vector<Var> scores;
  std::vector<Var> values;
  for (const auto& o : adapter_outputs) {
    scores.push_back(nn::scale(nn::row_dot(q, nn::matmul(o, p.key)), 1.0 / p.temperature));
    values.push_back(nn::matmul(o, p.value));
  }
  Var weights = nn::softmax(nn::concat_cols(scores));
  if (weights_out) *weights_out = weights.value();
  Var mixed = nn::mul_col(values[0], nn::slice_cols(weights, 0, 1));
  for (std::size_t j = 1; j < values.size(); ++j)
    mixed = nn::add(mixed, nn::mul_col(values[j], nn::slice_cols(weights, j, 1)));
  return nn::add(h, mixed);
}

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout_rate > 0
};

namespace detail {

inline Var maybe_dropout(const Var& x, const ModelState& s, const ForwardOptions& opt) {
  if (!opt.training || s.backbone.dropout_rate <= 0.0) return x;
  require(opt.rng != nullptr, ErrorKind::PreconditionFailed, "dropout needs an rng");
  return nn::dropout(x, s.backbone.dropout_rate, *opt.rng);
}

inline Var attention(Tape& tape, const ModelState& s, const std::string& lp, const Var& x) {
  const auto& P = s.params;
  const std::size_t heads = s.backbone.n_heads;
  const std::size_t dh = s.backbone.d_model / heads;
  auto proj = [&](const char* name) {
    return nn::add_row(nn::matmul(x, tape.param(P, lp + name + ".w")), tape.param(P, lp + name + ".b"));
  };
  Var q = proj("attn.query");
  Var k = proj("attn.key");
  Var v = proj("attn.value");
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> ctx;
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = heads == 1 ? q : nn::slice_cols(q, h * dh, dh);
    Var kh = heads == 1 ? k : nn::slice_cols(k, h * dh, dh);
    Var vh = heads == 1 ? v : nn::slice_cols(v, h * dh, dh);
    Var a = nn::softmax(nn::scale(nn::matmul(qh, nn::transpose(kh)), inv_sqrt));
    ctx.push_back(nn::matmul(a, vh));
  }
  Var merged = heads == 1 ? ctx.front() : nn::concat_cols(ctx);
  return nn::add_row(nn::matmul(merged, tape.param(P, lp + "attn.out.w")), tape.param(P, lp + "attn.out.b"));
}

inline Var adapter_site_apply(Tape& tape, const ModelState& s, std::size_t layer, Placement pl, const Var& h) {
  switch (s.mode.kind) {
    case Mode::Kind::BackboneOnly: return h;
    case Mode::Kind::SingleAdapter: {
      const auto* cfg = s.find_adapter(s.mode.adapter);
      require(cfg != nullptr, ErrorKind::UnknownAdapter, "no adapter '" + s.mode.adapter + "'");
      return adapter_apply(h, adapter_params(tape, s, *cfg, layer, pl));
    }
    case Mode::Kind::Fusion: {
      require(s.fusion.has_value(), ErrorKind::UnknownAdapter, "fusion mode without a fusion layer");
      std::vector<Var> outs;
      for (const auto& name : s.fusion->adapter_names) {
        const auto* cfg = s.find_adapter(name);
        require(cfg != nullptr, ErrorKind::UnknownAdapter, "no adapter '" + name + "'");
        outs.push_back(adapter_apply(h, adapter_params(tape, s, *cfg, layer, pl)));
      }
      return fusion_apply(h, outs, fusion_params(tape, s, layer, pl));
    }
  }
  return h;
}

}  // namespace detail

/// Scalar score for one token sequence.
inline Var score_sequence(Tape& tape, const ModelState& s, const std::vector<qa::TokenId>& tokens,
                          const ForwardOptions& opt = {}) {
  const auto& cfg = s.backbone;
  const auto& P = s.params;
  require(!tokens.empty() && tokens.size() <= cfg.max_sequence_length, ErrorKind::ShapeMismatch,
          "sequence length " + std::to_string(tokens.size()) + " outside [1, " +
              std::to_string(cfg.max_sequence_length) + "]");
  Var x = nn::add(nn::embedding_lookup(tape.param(P, "backbone.embed.token"), tokens),
                  nn::slice_rows(tape.param(P, "backbone.embed.position"), tokens.size()));
  x = detail::maybe_dropout(x, s, opt);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string lp = "backbone." + layer_prefix(l);
    Var normed = nn::layer_norm(x, tape.param(P, lp + "ln1.gamma"), tape.param(P, lp + "ln1.beta"));
    Var attended = nn::add(x, detail::maybe_dropout(detail::attention(tape, s, lp, normed), s, opt));

    Var pre = detail::adapter_site_apply(tape, s, l, Placement::PreFfn, attended);
    Var hidden = nn::layer_norm(pre, tape.param(P, lp + "ln2.gamma"), tape.param(P, lp + "ln2.beta"));
    hidden = nn::gelu(nn::add_row(nn::matmul(hidden, tape.param(P, lp + "ffn.in.w")), tape.param(P, lp + "ffn.in.b")));
    hidden = nn::add_row(nn::matmul(hidden, tape.param(P, lp + "ffn.out.w")), tape.param(P, lp + "ffn.out.b"));
    Var ffn = nn::add(pre, detail::maybe_dropout(hidden, s, opt));

    x = detail::adapter_site_apply(tape, s, l, Placement::PostFfn, ffn);
  }
  Var final_norm = nn::layer_norm(x, tape.param(P, "backbone.ln_final.gamma"), tape.param(P, "backbone.ln_final.beta"));
  Var pooled = nn::mean_rows(final_norm);
  return nn::add_row(nn::matmul(pooled, tape.param(P, "backbone.head.w")), tape.param(P, "backbone.head.b"));
}

/// Logits over candidates (rank 1, one entry per candidate).
inline Var score_candidates(Tape& tape, const ModelState& s, std::span<const qa::CandidateSequence> candidates,
                            const ForwardOptions& opt = {}) {
  require(!candidates.empty(), ErrorKind::ShapeMismatch, "no candidates to score");
  std::vector<Var> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) scores.push_back(score_sequence(tape, s, c.tokens, opt));
  return nn::stack(scores);
}

/// Inference-only logits; softmax of the result is p(option | context, question).
inline Tensor forward_score(const ModelState& s, std::span<const qa::CandidateSequence> candidates) {
  Tape tape;
  return score_candidates(tape, s, candidates).value();
}

// Persistence: <dir>/model.json (configs + mode) alongside the numeric checkpoint.

inline Json model_json(const ModelState& s) {
  Json j;
  j["backbone"] = to_json(s.backbone);
  j["adapters"] = Json::array();
  for (const auto& a : s.adapters) j["adapters"].push_back(to_json(a));
  if (s.fusion) {
    j["fusion"] = {{"adapter_names", s.fusion->adapter_names}};
    if (s.fusion->temperature) j["fusion"]["temperature"] = *s.fusion->temperature;
  }
  j["mode"] = to_json(s.mode);
  return j;
}

inline void save_model(const std::filesystem::path& dir, const ModelState& s) {
  nn::save_params(dir, s.params);
  write_file(dir / "model.json", model_json(s).dump(2) + "\n");
}

inline ModelState load_model(const std::filesystem::path& dir) {
  const auto j = Json::parse(read_file(dir / "model.json"));
  ModelState s;
  s.backbone = backbone_from_json(j.at("backbone"));
  for (const auto& a : j.at("adapters")) s.adapters.push_back(adapter_from_json(a));
  if (j.contains("fusion")) {
    FusionConfig f;
    f.adapter_names = j["fusion"].at("adapter_names").get<std::vector<std::string>>();
    if (j["fusion"].contains("temperature")) f.temperature = j["fusion"]["temperature"].get<double>();
    s.fusion = f;
  }
  s.mode = mode_from_json(j.at("mode"));
  s.params = nn::load_params(dir);
  return s;
}

/// Writes one adapter's parameters and config as a standalone sub-checkpoint.
inline void export_adapter(const std::filesystem::path& dir, const ModelState& s, const std::string& name) {
  const auto* cfg = s.find_adapter(name);
  require(cfg != nullptr, ErrorKind::UnknownAdapter, "no adapter '" + name + "'");
  nn::save_params(dir, s.params, adapter_prefix(name));
  write_file(dir / "adapter.json", to_json(*cfg).dump(2) + "\n");
}

inline void import_adapter(const std::filesystem::path& dir, ModelState& s) {
  const auto cfg = adapter_from_json(Json::parse(read_file(dir / "adapter.json")));
  require(s.find_adapter(cfg.name) == nullptr, ErrorKind::ConfigError, "adapter '" + cfg.name + "' already present");
  auto loaded = nn::load_params(dir);
  const std::size_t expected = cfg.bottleneck_dim(s.backbone.d_model);
  for (auto& [pname, e] : loaded.entries()) {
    require(pname.rfind(adapter_prefix(cfg.name), 0) == 0, ErrorKind::ConfigError, "foreign entry '" + pname + "'");
    if (pname.size() >= 6 && pname.compare(pname.size() - 6, 6, "down.w") == 0)
      require(e.value.rows() == s.backbone.d_model && e.value.cols() == expected, ErrorKind::ShapeMismatch,
              "adapter '" + cfg.name + "' does not match backbone width");
    s.params.add(pname, e.value, false);
  }
  s.adapters.push_back(cfg);
  apply_mode(s, s.mode);
}

}  // namespace openbias::model
