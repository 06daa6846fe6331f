#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/core/text.hpp"

namespace openbias::model {

struct BackboneConfig {
  std::size_t vocab_size = 64;
  std::size_t d_model = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_ffn = 64;
  std::size_t max_sequence_length = 64;
  double dropout_rate = 0.0;

  void validate() const {
    require(vocab_size > 0 && d_model > 0 && n_layers > 0 && n_heads > 0 && d_ffn > 0 && max_sequence_length > 0,
            ErrorKind::ConfigError, "backbone dimensions must be positive");
    require(d_model % n_heads == 0, ErrorKind::ConfigError,
            "d_model " + std::to_string(d_model) + " not divisible by n_heads " + std::to_string(n_heads));
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorKind::ConfigError, "dropout_rate must be in [0,1)");
  }

  bool operator==(const BackboneConfig&) const = default;
};

enum class Activation { Relu, Gelu };
enum class Placement { PreFfn, PostFfn };

inline std::string_view to_string(Activation a) { return a == Activation::Relu ? "relu" : "gelu"; }
inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::Relu;
  if (s == "gelu") return Activation::Gelu;
  fail(ErrorKind::ConfigError, "unknown activation '" + std::string(s) + "'");
}
inline std::string_view to_string(Placement p) { return p == Placement::PreFfn ? "pre" : "post"; }

/// Bottleneck adapter inserted before and after every FFN block.
struct AdapterConfig {
  std::string name;
  std::size_t reduction_factor = 16;
  Activation activation = Activation::Relu;

  std::size_t bottleneck_dim(std::size_t d_model) const {
    return std::max<std::size_t>(1, d_model / std::max<std::size_t>(1, reduction_factor));
  }

  bool operator==(const AdapterConfig&) const = default;
};

struct FusionConfig {
  std::vector<std::string> adapter_names;
  /// Defaults to sqrt(d_model) when unset.
  std::optional<double> temperature;

  bool operator==(const FusionConfig&) const = default;
};

struct Mode {
  enum class Kind { BackboneOnly, SingleAdapter, Fusion };
  Kind kind = Kind::BackboneOnly;
  std::string adapter;

  static Mode backbone_only() { return {}; }
  static Mode single_adapter(std::string name) { return {Kind::SingleAdapter, std::move(name)}; }
  static Mode fusion() { return {Kind::Fusion, {}}; }

  std::string describe() const {
    switch (kind) {
      case Kind::BackboneOnly: return "backbone_only";
      case Kind::SingleAdapter: return "single_adapter(" + adapter + ")";
      case Kind::Fusion: return "fusion";
    }
    return "?";
  }

  bool operator==(const Mode&) const = default;
};

inline Json to_json(const BackboneConfig& c) {
  return Json{{"vocab_size", c.vocab_size}, {"d_model", c.d_model},   {"n_layers", c.n_layers},
              {"n_heads", c.n_heads},       {"d_ffn", c.d_ffn},       {"max_sequence_length", c.max_sequence_length},
              {"dropout_rate", c.dropout_rate}};
}

inline BackboneConfig backbone_from_json(const Json& j) {
  BackboneConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.d_model = j.value("d_model", c.d_model);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.d_ffn = j.value("d_ffn", c.d_ffn);
  c.max_sequence_length = j.value("max_sequence_length", c.max_sequence_length);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.validate();
  return c;
}

inline Json to_json(const AdapterConfig& a) {
  return Json{{"name", a.name}, {"reduction_factor", a.reduction_factor}, {"activation", to_string(a.activation)}};
}

inline AdapterConfig adapter_from_json(const Json& j) {
  AdapterConfig a;
  a.name = j.at("name").get<std::string>();
  a.reduction_factor = j.value("reduction_factor", a.reduction_factor);
  a.activation = parse_activation(j.value("activation", std::string("relu")));
  return a;
}

inline Json to_json(const Mode& m) {
  switch (m.kind) {
    case Mode::Kind::BackboneOnly: return Json{{"kind", "backbone_only"}};
    case Mode::Kind::SingleAdapter: return Json{{"kind", "single_adapter"}, {"adapter", m.adapter}};
    case Mode::Kind::Fusion: return Json{{"kind", "fusion"}};
  }
  return {};
}

inline Mode mode_from_json(const Json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "backbone_only") return Mode::backbone_only();
  if (kind == "single_adapter") return Mode::single_adapter(j.at("adapter").get<std::string>());
  if (kind == "fusion") return Mode::fusion();
  fail(ErrorKind::ConfigError, "unknown mode '" + kind + "'");
}

}  // namespace openbias::model
