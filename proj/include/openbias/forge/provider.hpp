#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "openbias/core/error.hpp"
#include "openbias/core/hash.hpp"
#include "openbias/core/rng.hpp"
#include "openbias/core/text.hpp"
#include "openbias/forge/prompt.hpp"

namespace openbias::forge {

/// Text-in, text-out language model. Transport problems surface as
/// Error(ProviderFailure); malformed content is the caller's concern.
class LLMProvider {
 public:
  virtual ~LLMProvider() = default;
  virtual std::string send(const std::string& prompt) = 0;
  virtual std::string identity() const = 0;
};

/// Replays a transcript of prompt -> response pairs. Each JSONL entry has
/// "response" plus either "prompt" (exact match) or "contains" (substring).
/// Entries are consumed in file order; once every matching entry is used the
/// last one keeps being returned.
class ReplayProvider final : public LLMProvider {
 public:
  struct Entry {
    std::string prompt;
    std::string contains;
    std::string response;
  };

  explicit ReplayProvider(std::vector<Entry> entries, std::string name = "replay")
      : entries_(std::move(entries)), used_(entries_.size(), false), name_(std::move(name)) {}

  static std::unique_ptr<ReplayProvider> from_file(const std::filesystem::path& path) {
    std::vector<Entry> entries;
    for (const auto& j : read_jsonl(path)) {
      Entry e;
      e.prompt = j.value("prompt", std::string());
      e.contains = j.value("contains", std::string());
      require(j.contains("response") && j["response"].is_string(), ErrorKind::ConfigError,
              path.string() + ": replay entry without a string 'response'");
      e.response = j["response"].get<std::string>();
      require(!e.prompt.empty() || !e.contains.empty(), ErrorKind::ConfigError,
              path.string() + ": replay entry needs 'prompt' or 'contains'");
      entries.push_back(std::move(e));
    }
    return std::make_unique<ReplayProvider>(std::move(entries), "replay:" + path.filename().string() + ":" + file_hash(path));
  }

  std::string send(const std::string& prompt) override {
    std::lock_guard lock(mutex_);
    std::optional<std::size_t> last_used;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!matches(entries_[i], prompt)) continue;
      if (!used_[i]) {
        used_[i] = true;
        return entries_[i].response;
      }
      last_used = i;
    }
    if (last_used) return entries_[*last_used].response;
    fail(ErrorKind::ProviderFailure, "replay transcript has no entry for prompt");
  }

  std::string identity() const override { return name_; }

 private:
  static bool matches(const Entry& e, const std::string& prompt) {
    if (!e.prompt.empty()) return e.prompt == prompt;
    return prompt.find(e.contains) != std::string::npos;
  }

  std::vector<Entry> entries_;
  std::vector<bool> used_;
  std::string name_;
  std::mutex mutex_;
};

/// Deterministic keyword-driven stand-in for a real model. Responses depend
/// only on (prompt, seed).
class SyntheticProvider final : public LLMProvider {
 public:
  explicit SyntheticProvider(std::uint64_t seed = 0) : seed_(seed) {}

  std::string send(const std::string& prompt) override {
    Rng rng = Rng(seed_).split(prompt);
    if (prompt.find("Question:") != std::string::npos && prompt.find("modified_question") != std::string::npos)
      return rewrite_response(extract_slot_value(prompt, TemplateKind::SubjectiveObjective));
    return bias_response(extract_slot_value(prompt, TemplateKind::BiasCreation), rng);
  }

  std::string identity() const override { return "synthetic:" + std::to_string(seed_); }

 private:
  struct Lexicon {
    const char* category;
    const char* question;
    std::vector<std::string> classes;  // last entry is the neutral class
    std::vector<std::pair<std::string, std::string>> cues;  // caption word -> class
  };

  static const std::vector<Lexicon>& lexicon() {
    static const std::vector<Lexicon> lex = {
        {"Person Gender", "What is the gender of the person in the input sentence?", {"man", "woman", "unknown"},
         {{"man", "man"}, {"men", "man"}, {"boy", "man"}, {"woman", "woman"}, {"women", "woman"}, {"girl", "woman"}}},
        {"Age", "What is the age range of the person in the input sentence?", {"child", "young", "old", "unknown"},
         {{"child", "child"}, {"boy", "child"}, {"girl", "child"}, {"kid", "child"}, {"old", "old"},
          {"elderly", "old"}, {"young", "young"}}},
        {"Geographic", "What type of geographic location is described in the input sentence?",
         {"rural", "suburban", "urban", "unknown"},
         {{"city", "urban"}, {"street", "urban"}, {"farm", "rural"}, {"field", "rural"}, {"suburb", "suburban"}}},
        {"Weather", "What type of weather is described in the input sentence?",
         {"sunny", "rainy", "snowy", "cloudy", "unknown"},
         {{"sunny", "sunny"}, {"rain", "rainy"}, {"snow", "snowy"}, {"snowy", "snowy"}, {"cloudy", "cloudy"}}},
    };
    return lex;
  }

  static std::string bias_response(const std::string& caption, Rng& rng) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : caption) {
      if (std::isalpha(static_cast<unsigned char>(c))) {
        cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      } else if (!cur.empty()) {
        words.push_back(cur);
        cur.clear();
      }
    }
    if (!cur.empty()) words.push_back(cur);

    OrderedJson out;
    out["input sentence"] = caption;
    std::vector<std::string> key;
    for (const auto& w : words)
      if (w.size() > 3) key.push_back(w);
    out["key_components"] = key;
    out["biases"] = OrderedJson::array();
    for (const auto& lex : lexicon()) {
      std::optional<std::string> answer;
      for (const auto& w : words)
        for (const auto& [cue, cls] : lex.cues)
          if (!answer && w == cue) answer = cls;
      OrderedJson b;
      b["bias_category"] = lex.category;
      b["classes"] = lex.classes;
      b["question"] = lex.question;
      b["present_in_input_sentence"] = answer.has_value();
      b["likelihood"] = static_cast<double>(5 + rng.below(6)) / 10.0;
      if (answer) b["answer"] = *answer;
      out["biases"].push_back(std::move(b));
    }
    return out.dump();
  }

  static std::string rewrite_response(const std::string& question) {
    OrderedJson out;
    const auto lower = to_lower(question);
    const bool subjective = starts_with_ci(lower, "how would you describe") || lower.find("appeal") != std::string::npos ||
                            lower.find("beautiful") != std::string::npos;
    out["classification"] = subjective ? "Subjective" : "Objective";
    if (subjective) {
      std::string subject = question;
      if (auto of = lower.find(" of "); of != std::string::npos) subject = question.substr(of + 4);
      while (!subject.empty() && (subject.back() == '?' || std::isspace(static_cast<unsigned char>(subject.back()))))
        subject.pop_back();
      out["modified_question"] = "What visual features are present in " + subject + "?";
    } else {
      out["modified_question"] = question;
    }
    return out.dump();
  }

  std::uint64_t seed_;
};

/// OpenAI-compatible chat-completions endpoint. The API key is read from an
/// environment variable at construction; a missing key is a configuration
/// error raised before any request.
class HttpProvider final : public LLMProvider {
 public:
  struct Config {
    std::string endpoint;  // scheme://host[:port]/path
    std::string api_key_env = "OPENBIAS_API_KEY";
    std::string model = "gemini-1.5-flash";
    std::string response_pointer = "/choices/0/message/content";
    double timeout_seconds = 60.0;
    double min_interval_seconds = 0.0;  // simple client-side rate limit
  };

  explicit HttpProvider(Config cfg) : cfg_(std::move(cfg)) {
    require(!cfg_.endpoint.empty(), ErrorKind::ConfigError, "http provider needs an endpoint URL");
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    require(key != nullptr && *key != '\0', ErrorKind::ConfigError,
            "environment variable " + cfg_.api_key_env + " is not set");
    api_key_ = key;
    const auto scheme_end = cfg_.endpoint.find("://");
    require(scheme_end != std::string::npos, ErrorKind::ConfigError, "endpoint must be an absolute URL");
    const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
    origin_ = cfg_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    require(cfg_.endpoint.rfind("https://", 0) != 0, ErrorKind::ConfigError,
            "https endpoints need a build with OpenSSL support");
#endif
  }

  std::string send(const std::string& prompt) override {
    throttle();
    httplib::Client client(origin_);
    const auto timeout = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::duration<double>(cfg_.timeout_seconds));
    client.set_read_timeout(timeout);
    client.set_connection_timeout(timeout);
    Json body = {{"model", cfg_.model}, {"messages", Json::array({{{"role", "user"}, {"content", prompt}}})}};
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    require(static_cast<bool>(res), ErrorKind::ProviderFailure,
            "request to " + origin_ + " failed: " + httplib::to_string(res.error()));
    require(res->status == 200, ErrorKind::ProviderFailure, "provider returned HTTP " + std::to_string(res->status));
    try {
      const auto j = Json::parse(res->body);
      return j.at(Json::json_pointer(cfg_.response_pointer)).get<std::string>();
    } catch (const Json::exception& e) {
      fail(ErrorKind::ProviderFailure, std::string("unexpected provider payload: ") + e.what());
    }
  }

  std::string identity() const override { return "http:" + cfg_.endpoint + ":" + cfg_.model; }

 private:
  void throttle() {
    if (cfg_.min_interval_seconds <= 0.0) return;
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    const auto gap = std::chrono::duration<double>(cfg_.min_interval_seconds);
    if (last_ && now - *last_ < gap)
      std::this_thread::sleep_for(gap - (now - *last_));
    last_ = std::chrono::steady_clock::now();
  }

  Config cfg_;
  std::string api_key_;
  std::string origin_;
  std::string path_;
  std::mutex mutex_;
  std::optional<std::chrono::steady_clock::time_point> last_;
};

}  // namespace openbias::forge
