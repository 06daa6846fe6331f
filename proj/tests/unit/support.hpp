#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "openbias/core/rng.hpp"
#include "openbias/qa/instance.hpp"

namespace openbias::testing {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(OPENBIAS_FIXTURE_DIR) / name; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("openbias-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline std::string random_word(Rng& rng, std::size_t min_len = 2, std::size_t max_len = 8) {
  const auto n = min_len + rng.below(max_len - min_len + 1);
  std::string w;
  for (std::size_t i = 0; i < n; ++i) w.push_back(static_cast<char>('a' + rng.below(26)));
  return w;
}

inline std::string random_sentence(Rng& rng, std::size_t min_words, std::size_t max_words) {
  const auto n = min_words + rng.below(max_words - min_words + 1);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + random_word(rng);
  return s;
}

/// Valid QAInstance with 2..6 options, one of them "unknown".
inline qa::QAInstance random_instance(Rng& rng, const std::string& id) {
  qa::QAInstance q;
  q.id = id;
  q.source = static_cast<qa::Source>(rng.below(4));
  q.category = random_word(rng);
  if (rng.bernoulli(0.5)) q.subgroup = random_word(rng);
  q.context = random_sentence(rng, 0, 20);
  q.question = random_sentence(rng, 1, 8) + "?";
  const auto n = 2 + rng.below(5);
  for (std::size_t i = 0; i + 1 < n; ++i) q.options.push_back("opt" + std::to_string(i) + random_word(rng));
  q.neutral_index = rng.below(n);
  q.options.insert(q.options.begin() + static_cast<std::ptrdiff_t>(q.neutral_index), "unknown");
  q.condition = rng.bernoulli(0.5) ? qa::Condition::Ambig : qa::Condition::Disambig;
  if (q.condition == qa::Condition::Ambig) {
    q.gold_index = q.neutral_index;
  } else {
    do q.gold_index = rng.below(n);
    while (q.gold_index == q.neutral_index);
  }
  if (rng.bernoulli(0.7)) {
    std::size_t s;
    do s = rng.below(n);
    while (s == q.neutral_index);
    q.stereotyped_index = s;
  }
  q.language_tag = rng.bernoulli(0.8) ? "en" : "ko";
  return q;
}

inline std::vector<double> random_logits(Rng& rng, std::size_t k, double scale = 3.0) {
  std::vector<double> v(k);
  for (auto& x : v) x = rng.normal(0.0, scale);
  return v;
}

}  // namespace openbias::testing
