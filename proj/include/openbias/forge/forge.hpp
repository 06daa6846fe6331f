#pragma once

#include <chrono>
#include <functional>
#include <future>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/forge/prompt.hpp"
#include "openbias/forge/provider.hpp"
#include "openbias/forge/record.hpp"

namespace openbias::forge {

using SleepFn = std::function<void(std::chrono::milliseconds)>;

inline SleepFn real_sleep() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

/// Transport failures are retried `max_retries` times with doubling waits
/// starting at `initial_backoff` (1s, 2s, 4s by default). A response that does
/// not parse is re-requested `parse_retries` times with `json_only_suffix`
/// appended to the prompt.
struct RetryPolicy {
  std::size_t max_retries = 3;
  std::chrono::milliseconds initial_backoff{1000};
  std::size_t parse_retries = 1;
  std::string json_only_suffix = "\n\nRespond with valid JSON only.";
};

/// Sends `prompt`, retrying transport failures per `policy`.
inline std::string send_with_retry(LLMProvider& provider, const std::string& prompt, const RetryPolicy& policy,
                                   const SleepFn& sleep) {
  auto wait = policy.initial_backoff;
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      return provider.send(prompt);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ProviderFailure) throw;
      if (attempt >= policy.max_retries)
        fail(ErrorKind::ProviderFailure, "provider " + provider.identity() + " failed after " +
                                             std::to_string(attempt + 1) + " attempts: " + e.what());
      sleep(wait);
      wait *= 2;
    }
  }
}

struct GenerateOptions {
  RetryPolicy retry;
  std::size_t parallelism = 1;
  qa::NeutralAliasSet aliases;
};

struct GenerateStats {
  std::size_t captions = 0;
  std::size_t covered = 0;
  std::size_t quarantined = 0;
  std::size_t parse_retries = 0;

  double quarantine_rate() const {
    return captions == 0 ? 0.0 : static_cast<double>(quarantined) / static_cast<double>(captions);
  }
};

struct GenerateResult {
  std::vector<BenchRecord> records;
  std::vector<QuarantineEntry> quarantine;
  GenerateStats stats;
};

namespace detail {

struct CaptionOutcome {
  std::vector<BenchRecord> records;
  std::optional<QuarantineEntry> quarantine;
  std::size_t parse_retries = 0;
};

inline CaptionOutcome process_caption(const std::string& caption, LLMProvider& provider, const PromptTemplate& tmpl,
                                      const GenerateOptions& opt, const SleepFn& sleep) {
  CaptionOutcome out;
  std::string prompt = tmpl.render(caption);
  for (std::size_t attempt = 0;; ++attempt) {
    const std::string raw = send_with_retry(provider, prompt, opt.retry, sleep);
    try {
      auto parsed = parse_provider_output(raw, opt.aliases);
      for (auto& r : parsed.records) {
        r.caption = caption;
        validate(r, opt.aliases);
      }
      out.records = std::move(parsed.records);
      return out;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ParseFailure && e.kind() != ErrorKind::InvariantViolation) throw;
      if (attempt >= opt.retry.parse_retries) {
        out.quarantine = QuarantineEntry{caption, raw, e.what()};
        return out;
      }
      ++out.parse_retries;
      prompt = tmpl.render(caption) + opt.retry.json_only_suffix;
    }
  }
}

}  // namespace detail

/// Runs the bias-creation prompt over every caption. Records come out in
/// caption order regardless of `parallelism`; captions whose output never
/// parses are quarantined with the raw response.
inline GenerateResult generate_records(const std::vector<std::string>& captions, LLMProvider& provider,
                                       const PromptTemplate& tmpl, const GenerateOptions& opt = {},
                                       const SleepFn& sleep = real_sleep()) {
  require(!captions.empty(), ErrorKind::EmptyInput, "no captions to process");
  require(tmpl.kind == TemplateKind::BiasCreation, ErrorKind::ConfigError, "generate_records needs the bias_creation template");
  tmpl.validate();

  std::vector<detail::CaptionOutcome> outcomes(captions.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(opt.parallelism, captions.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < captions.size(); ++i)
      outcomes[i] = detail::process_caption(captions[i], provider, tmpl, opt, sleep);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i = next++; i < captions.size(); i = next++)
          outcomes[i] = detail::process_caption(captions[i], provider, tmpl, opt, sleep);
      }));
    for (auto& f : pool) f.get();
  }

  GenerateResult result;
  result.stats.captions = captions.size();
  for (auto& o : outcomes) {
    result.stats.parse_retries += o.parse_retries;
    if (o.quarantine) {
      ++result.stats.quarantined;
      result.quarantine.push_back(std::move(*o.quarantine));
    } else {
      ++result.stats.covered;
      for (auto& r : o.records) result.records.push_back(std::move(r));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Subjective -> objective rewriting.

enum class RewriteStatus { Unchanged, Rewritten, Rejected, ParseFailed };

inline std::string_view to_string(RewriteStatus s) {
  switch (s) {
    case RewriteStatus::Unchanged: return "unchanged";
    case RewriteStatus::Rewritten: return "rewritten";
    case RewriteStatus::Rejected: return "rejected";
    case RewriteStatus::ParseFailed: return "parse_failed";
  }
  return "unchanged";
}

struct RewriteOutcome {
  BenchRecord record;
  RewriteStatus status = RewriteStatus::Unchanged;
  std::string classification;
  std::string reason;
};

/// A rewrite is acceptable when it does not open with an auxiliary verb (so it
/// cannot be a yes/no question) and does not mention subjectivity.
inline std::optional<std::string> rewrite_problem(std::string_view question) {
  static const std::vector<std::string> auxiliaries = {
      "is",   "are",   "was",  "were",  "am",    "do",   "does",  "did",  "can",  "could", "will",
      "would", "shall", "should", "has", "have", "had", "may",  "might", "must", "isn't", "aren't",
      "doesn't", "don't", "didn't", "wasn't", "weren't", "can't", "won't"};
  const auto q = to_lower(trim(question));
  if (q.empty()) return "empty question";
  const auto first_end = q.find_first_of(" \t?,");
  const auto first = q.substr(0, first_end);
  for (const auto& aux : auxiliaries)
    if (first == aux) return "answerable with yes/no (starts with '" + aux + "')";
  if (q.find("subjective") != std::string::npos || q.find("objective") != std::string::npos)
    return "mentions subjective/objective";
  return std::nullopt;
}

/// Classifies and, if subjective, rewrites a single question. Throws
/// ParseFailure on unusable output and RewriteRejected on a bad rewrite.
inline std::pair<std::string, std::string> rewrite_question(const std::string& question, LLMProvider& provider,
                                                            const PromptTemplate& tmpl, const RetryPolicy& retry = {},
                                                            const SleepFn& sleep = real_sleep()) {
  require(tmpl.kind == TemplateKind::SubjectiveObjective, ErrorKind::ConfigError,
          "rewrite needs the subjective_objective template");
  std::string prompt = tmpl.render(question);
  Json j;
  for (std::size_t attempt = 0;; ++attempt) {
    const auto raw = send_with_retry(provider, prompt, retry, sleep);
    try {
      j = parse_relaxed(raw);
      require(j.is_object() && j.contains("classification") && j["classification"].is_string(), ErrorKind::ParseFailure,
              "missing classification");
      break;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ParseFailure || attempt >= retry.parse_retries) throw;
      prompt = tmpl.render(question) + retry.json_only_suffix;
    }
  }
  const auto cls = to_lower(trim(j["classification"].get<std::string>()));
  require(cls == "subjective" || cls == "objective", ErrorKind::ParseFailure,
          "classification '" + j["classification"].get<std::string>() + "' is neither Subjective nor Objective");
  if (cls == "objective") return {"Objective", question};
  require(j.contains("modified_question") && j["modified_question"].is_string(), ErrorKind::ParseFailure,
          "subjective question without modified_question");
  const auto rewritten = trim(j["modified_question"].get<std::string>());
  if (auto problem = rewrite_problem(rewritten)) fail(ErrorKind::RewriteRejected, *problem + ": '" + rewritten + "'");
  return {"Subjective", rewritten};
}

/// Applies rewrite_question to every record. Objective questions stay
/// byte-identical; rejected or unparseable rewrites keep the original and are
/// flagged in the outcome.
inline std::vector<RewriteOutcome> rewrite_subjective(const std::vector<BenchRecord>& records, LLMProvider& provider,
                                                      const PromptTemplate& tmpl, const RetryPolicy& retry = {},
                                                      const SleepFn& sleep = real_sleep()) {
  std::vector<RewriteOutcome> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    RewriteOutcome o{r, RewriteStatus::Unchanged, "", ""};
    try {
      auto [cls, q] = rewrite_question(r.question, provider, tmpl, retry, sleep);
      o.classification = cls;
      if (cls == "Subjective") {
        o.record.question = q;
        o.status = RewriteStatus::Rewritten;
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::RewriteRejected) {
        o.status = RewriteStatus::Rejected;
        o.classification = "Subjective";
      } else if (e.kind() == ErrorKind::ParseFailure) {
        o.status = RewriteStatus::ParseFailed;
      } else {
        throw;
      }
      o.reason = e.what();
    }
    out.push_back(std::move(o));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Presence-indicator audit.

using AnswerScorer =
    std::function<std::string(const std::string& context, const std::string& question, const std::vector<std::string>& classes)>;

struct AuditCell {
  std::size_t n = 0;
  std::size_t agree = 0;
  double agreement() const { return n == 0 ? 0.0 : static_cast<double>(agree) / static_cast<double>(n); }
};

struct AuditReport {
  AuditCell overall;
  std::map<std::string, AuditCell> by_category;
};

/// For presence-true records: how often the scorer's answer matches the stored one.
inline AuditReport audit_presence_indicators(const std::vector<BenchRecord>& records, const AnswerScorer& scorer) {
  AuditReport report;
  for (const auto& r : records) {
    if (!r.presence_indicator || !r.answer) continue;
    const bool agree = normalize_label(scorer(r.caption, r.question, r.classes)) == normalize_label(*r.answer);
    for (AuditCell* cell : {&report.overall, &report.by_category[r.bias_category]}) {
      ++cell->n;
      cell->agree += agree;
    }
  }
  return report;
}

inline std::string audit_csv(const AuditReport& report) {
  std::string out = "category,n,agree,agreement\n";
  for (const auto& [cat, cell] : report.by_category)
    out += "\"" + cat + "\"," + std::to_string(cell.n) + "," + std::to_string(cell.agree) + "," +
           format_double(cell.agreement()) + "\n";
  out += "overall," + std::to_string(report.overall.n) + "," + std::to_string(report.overall.agree) + "," +
         format_double(report.overall.agreement()) + "\n";
  return out;
}

}  // namespace openbias::forge
