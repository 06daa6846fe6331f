#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/core/hash.hpp"
#include "openbias/core/text.hpp"

namespace openbias::qa {

using TokenId = std::int32_t;

/// Word-level tokenizer: lowercases, splits on whitespace, and emits each ASCII
/// punctuation character as its own token. Out-of-vocabulary words map to one of
/// `hash_buckets` reserved ids by FNV-1a hash.
class Tokenizer {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kSep = 2;
  static constexpr TokenId kEos = 3;
  static constexpr TokenId kFirstBucket = 4;

  explicit Tokenizer(std::size_t hash_buckets = 16) : hash_buckets_(std::max<std::size_t>(hash_buckets, 1)) {}

  static std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    auto flush = [&] {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    };
    for (unsigned char c : text) {
      if (std::isspace(c)) {
        flush();
      } else if (c < 128 && std::ispunct(c)) {
        flush();
        words.emplace_back(1, static_cast<char>(c));
      } else {
        current.push_back(static_cast<char>(c < 128 ? std::tolower(c) : c));
      }
    }
    flush();
    return words;
  }

  /// Builds the vocabulary from `texts`: words with count >= min_count, ordered by
  /// descending frequency then lexicographically.
  static Tokenizer build(const std::vector<std::string>& texts, std::size_t min_count = 1,
                         std::size_t hash_buckets = 16) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : texts)
      for (auto& w : split_words(t)) ++counts[w];
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    Tokenizer tok(hash_buckets);
    for (const auto& [word, count] : ranked)
      if (count >= min_count) tok.add_word(word);
    return tok;
  }

  void add_word(const std::string& word) {
    if (ids_.count(word)) return;
    const auto id = static_cast<TokenId>(kFirstBucket + hash_buckets_ + words_.size());
    ids_.emplace(word, id);
    words_.push_back(word);
  }

  std::size_t vocab_size() const { return kFirstBucket + hash_buckets_ + words_.size(); }
  std::size_t hash_buckets() const { return hash_buckets_; }
  const std::vector<std::string>& words() const { return words_; }

  TokenId word_id(const std::string& word) const {
    if (auto it = ids_.find(word); it != ids_.end()) return it->second;
    return static_cast<TokenId>(kFirstBucket + fnv1a64(word) % hash_buckets_);
  }

  std::vector<TokenId> encode(std::string_view text) const {
    std::vector<TokenId> ids;
    for (const auto& w : split_words(text)) ids.push_back(word_id(w));
    return ids;
  }

  Json to_json() const { return Json{{"hash_buckets", hash_buckets_}, {"words", words_}}; }

  static Tokenizer from_json(const Json& j) {
    Tokenizer tok(j.at("hash_buckets").get<std::size_t>());
    for (const auto& w : j.at("words").get<std::vector<std::string>>()) tok.add_word(w);
    return tok;
  }

 private:
  std::size_t hash_buckets_;
  std::unordered_map<std::string, TokenId> ids_;
  std::vector<std::string> words_;
};

}  // namespace openbias::qa
