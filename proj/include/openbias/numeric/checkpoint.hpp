#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

#include "openbias/core/error.hpp"
#include "openbias/core/hash.hpp"
#include "openbias/core/text.hpp"
#include "openbias/numeric/param_store.hpp"

namespace openbias::nn {

// Checkpoint = params.bin (little-endian f64 arrays concatenated in name order)
// plus manifest.json mapping name -> {offset (bytes), shape, trainable}.

namespace detail {

inline void append_f64_le(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline double read_f64_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

struct SerializedParams {
  std::string blob;
  OrderedJson manifest;
};

inline SerializedParams serialize(const ParamStore& store, std::string_view prefix = "") {
  SerializedParams out;
  out.manifest = OrderedJson::object();
  for (const auto& [name, e] : store.entries()) {
    if (name.compare(0, prefix.size(), prefix) != 0) continue;
    out.manifest[name] = {{"offset", out.blob.size()}, {"shape", e.value.shape()}, {"trainable", e.trainable}};
    for (double v : e.value.data()) detail::append_f64_le(out.blob, v);
  }
  return out;
}

inline ParamStore deserialize(std::string_view blob, const Json& manifest) {
  ParamStore store;
  for (const auto& [name, meta] : manifest.items()) {
    const auto offset = meta.at("offset").get<std::size_t>();
    const auto shape = meta.at("shape").get<Shape>();
    const auto count = shape_size(shape);
    require(offset + count * 8 <= blob.size(), ErrorKind::IoError, "checkpoint entry '" + name + "' exceeds blob");
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) data[i] = detail::read_f64_le(blob.data() + offset + 8 * i);
    store.add(name, Tensor(shape, std::move(data)), meta.at("trainable").get<bool>());
  }
  return store;
}

inline void save_params(const std::filesystem::path& dir, const ParamStore& store, std::string_view prefix = "") {
  auto s = serialize(store, prefix);
  write_file(dir / "params.bin", s.blob);
  write_file(dir / "manifest.json", s.manifest.dump(2) + "\n");
}

inline ParamStore load_params(const std::filesystem::path& dir) {
  const auto blob = read_file(dir / "params.bin");
  const auto manifest = Json::parse(read_file(dir / "manifest.json"));
  return deserialize(blob, manifest);
}

}  // namespace openbias::nn
