#pragma once

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <map>
#include <string>
#include <vector>

#include <httplib.h>

#include "openbias/core/error.hpp"
#include "openbias/core/hash.hpp"
#include "openbias/core/text.hpp"
#include "openbias/forge/record.hpp"

namespace openbias::refine {

using Vec = std::vector<double>;

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Vec embed(const std::string& text) = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string identity() const = 0;
};

/// Signed feature hashing over lowercase word unigrams and bigrams.
class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dim = 64, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {
    require(dim_ > 0, ErrorKind::ConfigError, "embedding dimension must be positive");
  }

  Vec embed(const std::string& text) override {
    Vec v(dim_, 0.0);
    std::vector<std::string> words;
    std::string cur;
    for (unsigned char c : text) {
      if (std::isalnum(c)) {
        cur.push_back(static_cast<char>(std::tolower(c)));
      } else if (!cur.empty()) {
        words.push_back(std::move(cur));
        cur.clear();
      }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    auto add = [&](const std::string& feature) {
      const std::uint64_t h = fnv1a64(std::to_string(seed_) + "\x1f" + feature);
      v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
    };
    for (std::size_t i = 0; i < words.size(); ++i) {
      add(words[i]);
      if (i + 1 < words.size()) add(words[i] + " " + words[i + 1]);
    }
    return v;
  }

  std::size_t dimension() const override { return dim_; }
  std::string identity() const override { return "hash:" + std::to_string(dim_) + ":" + std::to_string(seed_); }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Precomputed vectors from JSONL lines {"text": ..., "vector": [...]}.
class FileEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit FileEmbeddingProvider(const std::filesystem::path& path)
      : identity_("file:" + path.filename().string() + ":" + file_hash(path)) {
    for (const auto& j : read_jsonl(path)) {
      try {
        auto v = j.at("vector").get<Vec>();
        if (dim_ == 0) dim_ = v.size();
        require(v.size() == dim_ && dim_ > 0, ErrorKind::ConfigError, path.string() + ": inconsistent vector dimension");
        table_[j.at("text").get<std::string>()] = std::move(v);
      } catch (const Json::exception& e) {
        fail(ErrorKind::ConfigError, path.string() + ": " + e.what());
      }
    }
  }

  Vec embed(const std::string& text) override {
    const auto it = table_.find(text);
    require(it != table_.end(), ErrorKind::ProviderFailure, "no precomputed embedding for '" + text + "'");
    return it->second;
  }

  std::size_t dimension() const override { return dim_; }
  std::string identity() const override { return identity_; }

 private:
  std::map<std::string, Vec> table_;
  std::size_t dim_ = 0;
  std::string identity_;
};

/// OpenAI-style embeddings endpoint (POST {"model", "input"}).
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  struct Config {
    std::string endpoint;
    std::string api_key_env = "OPENBIAS_API_KEY";
    std::string model = "sentence-transformers/all-MiniLM-L6-v2";
    std::string response_pointer = "/data/0/embedding";
    std::size_t dimension = 384;
    double timeout_seconds = 60.0;
  };

  explicit HttpEmbeddingProvider(Config cfg) : cfg_(std::move(cfg)) {
    require(!cfg_.endpoint.empty(), ErrorKind::ConfigError, "http embedding provider needs an endpoint URL");
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    require(key != nullptr && *key != '\0', ErrorKind::ConfigError,
            "environment variable " + cfg_.api_key_env + " is not set");
    api_key_ = key;
    const auto scheme_end = cfg_.endpoint.find("://");
    require(scheme_end != std::string::npos, ErrorKind::ConfigError, "endpoint must be an absolute URL");
    const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
    origin_ = cfg_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);
  }

  Vec embed(const std::string& text) override {
    httplib::Client client(origin_);
    const auto timeout = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::duration<double>(cfg_.timeout_seconds));
    client.set_read_timeout(timeout);
    client.set_connection_timeout(timeout);
    const Json body = {{"model", cfg_.model}, {"input", text}};
    auto res = client.Post(path_, {{"Authorization", "Bearer " + api_key_}}, body.dump(), "application/json");
    require(static_cast<bool>(res), ErrorKind::ProviderFailure,
            "embedding request to " + origin_ + " failed: " + httplib::to_string(res.error()));
    require(res->status == 200, ErrorKind::ProviderFailure, "embedding provider returned HTTP " + std::to_string(res->status));
    try {
      auto v = Json::parse(res->body).at(Json::json_pointer(cfg_.response_pointer)).get<Vec>();
      require(v.size() == cfg_.dimension, ErrorKind::ProviderFailure, "embedding has unexpected dimension");
      return v;
    } catch (const Json::exception& e) {
      fail(ErrorKind::ProviderFailure, std::string("unexpected embedding payload: ") + e.what());
    }
  }

  std::size_t dimension() const override { return cfg_.dimension; }
  std::string identity() const override { return "http:" + cfg_.endpoint + ":" + cfg_.model; }

 private:
  Config cfg_;
  std::string api_key_;
  std::string origin_;
  std::string path_;
};

inline std::string embedding_text(const forge::BenchRecord& r) {
  return "Bias category: " + r.bias_category + " + classes: " + join(r.classes, ", ");
}

/// One vector per record, in record order. `parallelism` > 1 requires a
/// provider that is safe to call concurrently.
inline std::vector<Vec> embed_records(const std::vector<forge::BenchRecord>& records, EmbeddingProvider& provider,
                                      std::size_t parallelism = 1) {
  std::vector<Vec> out(records.size());
  auto work = [&](std::size_t i) {
    out[i] = provider.embed(embedding_text(records[i]));
    require(out[i].size() == provider.dimension(), ErrorKind::ProviderFailure, "embedding has unexpected dimension");
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(parallelism, records.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < records.size(); ++i) work(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next++; i < records.size(); i = next++) work(i);
    }));
  for (auto& f : pool) f.get();
  return out;
}

}  // namespace openbias::refine
