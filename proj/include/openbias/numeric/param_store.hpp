#pragma once

#include <cstring>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/core/hash.hpp"
#include "openbias/numeric/tensor.hpp"

namespace openbias::nn {

struct ParamEntry {
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

/// Named parameters with gradients and a trainable flag. Iteration is
/// lexicographic by name.
class ParamStore {
 public:
  using Map = std::map<std::string, ParamEntry, std::less<>>;

  void add(const std::string& name, Tensor value, bool trainable = true) {
    require(!entries_.count(name), ErrorKind::InvariantViolation, "duplicate parameter '" + name + "'");
    Tensor grad(value.shape());
    entries_.emplace(name, ParamEntry{std::move(value), std::move(grad), trainable});
  }

  bool contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }

  ParamEntry& at(std::string_view name) {
    auto it = entries_.find(name);
    require(it != entries_.end(), ErrorKind::IndexOutOfRange, "no parameter '" + std::string(name) + "'");
    return it->second;
  }
  const ParamEntry& at(std::string_view name) const { return const_cast<ParamStore*>(this)->at(name); }

  Map& entries() noexcept { return entries_; }
  const Map& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  void zero_grad() {
    for (auto& [_, e] : entries_) e.grad.fill(0.0);
  }

  void set_trainable_prefix(std::string_view prefix, bool trainable) {
    for (auto& [name, e] : entries_)
      if (name.compare(0, prefix.size(), prefix) == 0) e.trainable = trainable;
  }

  std::vector<std::string> names_with_prefix(std::string_view prefix) const {
    std::vector<std::string> out;
    for (const auto& [name, _] : entries_)
      if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(name);
    return out;
  }

  std::vector<std::string> trainable_names() const {
    std::vector<std::string> out;
    for (const auto& [name, e] : entries_)
      if (e.trainable) out.push_back(name);
    return out;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, e] : entries_) n += e.value.size();
    return n;
  }

  /// FNV-1a over the raw value bytes of every entry whose name has `prefix`.
  std::uint64_t checksum(std::string_view prefix = "") const {
    std::uint64_t h = kFnvOffset;
    for (const auto& [name, e] : entries_) {
      if (name.compare(0, prefix.size(), prefix) != 0) continue;
      h = fnv1a64(name, h);
      const auto bytes = e.value.data();
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size() * sizeof(double)), h);
    }
    return h;
  }

  /// Names whose value bytes differ between two stores with identical layouts.
  static std::vector<std::string> changed_names(const ParamStore& before, const ParamStore& after) {
    std::vector<std::string> out;
    for (const auto& [name, e] : after.entries_) {
      const auto& old = before.at(name).value;
      if (old.shape() != e.value.shape() ||
          std::memcmp(old.data().data(), e.value.data().data(), old.size() * sizeof(double)) != 0)
        out.push_back(name);
    }
    return out;
  }

 private:
  Map entries_;
};

}  // namespace openbias::nn
