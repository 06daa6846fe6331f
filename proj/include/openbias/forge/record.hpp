#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/core/hash.hpp"
#include "openbias/core/text.hpp"
#include "openbias/qa/instance.hpp"

namespace openbias::forge {

/// One structured bias row for a caption: caption i, key components K_i, bias
/// category b, classes C, question Q, presence indicator P, likelihood L and
/// answer A.
struct BenchRecord {
  std::string caption;
  std::vector<std::string> key_components;
  std::string bias_category;
  std::vector<std::string> classes;
  std::string question;
  bool presence_indicator = false;
  double likelihood = 0.0;
  std::optional<std::string> answer;

  bool operator==(const BenchRecord&) const = default;
};

inline constexpr std::string_view kUnknownAnswer = "unknown";

/// Index of `answer` in `classes` (trimmed, case-insensitive), if any.
inline std::optional<std::size_t> class_index(const std::vector<std::string>& classes, std::string_view answer) {
  const auto key = normalize_label(answer);
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (normalize_label(classes[i]) == key) return i;
  return std::nullopt;
}

inline void validate(const BenchRecord& r, const qa::NeutralAliasSet& aliases = {}) {
  auto bad = [&](const std::string& why) { fail(ErrorKind::InvariantViolation, "record '" + r.bias_category + "': " + why); };
  if (trim(r.bias_category).empty()) bad("empty bias category");
  if (trim(r.question).empty()) bad("empty question");
  if (r.classes.size() < 2) bad("needs at least two classes");
  if (!(r.likelihood >= 0.0 && r.likelihood <= 1.0)) bad("likelihood out of range");
  if (r.presence_indicator) {
    if (!r.answer) bad("answer required");
    if (!class_index(r.classes, *r.answer)) bad("answer '" + *r.answer + "' not among classes");
  } else if (r.answer && !aliases.matches(*r.answer)) {
    bad("presence is false but answer '" + *r.answer + "' is not a neutral alias");
  }
}

inline OrderedJson to_json(const BenchRecord& r) {
  OrderedJson j;
  j["caption"] = r.caption;
  j["key_components"] = r.key_components;
  j["bias_category"] = r.bias_category;
  j["classes"] = r.classes;
  j["question"] = r.question;
  j["presence_indicator"] = r.presence_indicator;
  j["likelihood"] = r.likelihood;
  if (r.answer) j["answer"] = *r.answer;
  return j;
}

inline BenchRecord record_from_json(const Json& j) {
  BenchRecord r;
  try {
    r.caption = j.at("caption").get<std::string>();
    r.key_components = j.value("key_components", std::vector<std::string>{});
    r.bias_category = j.at("bias_category").get<std::string>();
    r.classes = j.at("classes").get<std::vector<std::string>>();
    r.question = j.at("question").get<std::string>();
    r.presence_indicator = j.at("presence_indicator").get<bool>();
    r.likelihood = j.at("likelihood").get<double>();
    if (j.contains("answer") && !j["answer"].is_null()) r.answer = j["answer"].get<std::string>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::ParseFailure, std::string("bench record: ") + e.what());
  }
  validate(r);
  return r;
}

inline std::vector<BenchRecord> load_records(const std::filesystem::path& path) {
  std::vector<BenchRecord> out;
  for (const auto& j : read_jsonl(path)) out.push_back(record_from_json(j));
  return out;
}

inline std::string records_jsonl(const std::vector<BenchRecord>& records) {
  std::vector<OrderedJson> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  return to_jsonl(rows);
}

inline void save_records(const std::filesystem::path& path, const std::vector<BenchRecord>& records) {
  write_file(path, records_jsonl(records));
}

struct QuarantineEntry {
  std::string caption;
  std::string raw_response;
  std::string reason;
};

inline OrderedJson to_json(const QuarantineEntry& q) {
  OrderedJson j;
  j["caption"] = q.caption;
  j["raw_response"] = q.raw_response;
  j["reason"] = q.reason;
  return j;
}

inline std::string quarantine_jsonl(const std::vector<QuarantineEntry>& entries) {
  std::vector<OrderedJson> rows;
  for (const auto& q : entries) rows.push_back(to_json(q));
  return to_jsonl(rows);
}

// ---------------------------------------------------------------------------
// Tolerant extraction of provider output.

namespace detail {

inline bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

/// Rewrites the text outside string literals: drops trailing commas before
/// '}' or ']', and maps the bare words True/False/None/NaN to JSON literals.
inline std::string relax_json(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  bool in_string = false;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const char c = in[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < in.size()) out.push_back(in[++i]);
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    if (c == ',') {
      std::size_t k = i + 1;
      while (k < in.size() && std::isspace(static_cast<unsigned char>(in[k]))) ++k;
      if (k < in.size() && (in[k] == '}' || in[k] == ']')) continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) && (i == 0 || !is_ident(in[i - 1]))) {
      std::size_t k = i;
      while (k < in.size() && is_ident(in[k])) ++k;
      const auto word = in.substr(i, k - i);
      const char* replacement = word == "True"    ? "true"
                                : word == "False" ? "false"
                                : word == "None" || word == "NaN" || word == "nan" ? "null"
                                                                                    : nullptr;
      if (replacement) {
        out += replacement;
        i = k - 1;
        continue;
      }
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

/// Locates the JSON object in a provider response: strips a Markdown code
/// fence if present, then takes the outermost {...} span. Returns the byte
/// offset of the object within `raw` alongside its text.
inline std::pair<std::size_t, std::string> extract_json_object(std::string_view raw) {
  std::size_t base = 0;
  std::string_view body = raw;
  if (auto fence = body.find("```"); fence != std::string_view::npos) {
    auto start = body.find('\n', fence);
    auto close = start == std::string_view::npos ? std::string_view::npos : body.find("```", start);
    if (close != std::string_view::npos) {
      base = start + 1;
      body = body.substr(start + 1, close - start - 1);
    }
  }
  const auto open = body.find('{');
  const auto close = body.rfind('}');
  require(open != std::string_view::npos && close != std::string_view::npos && close > open, ErrorKind::ParseFailure,
          "offset " + std::to_string(base) + ": no JSON object in response");
  return {base + open, std::string(body.substr(open, close - open + 1))};
}

inline Json parse_relaxed(std::string_view raw) {
  const auto [offset, text] = extract_json_object(raw);
  try {
    return Json::parse(detail::relax_json(text));
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::ParseFailure, "offset " + std::to_string(offset + e.byte) + ": malformed JSON (" + e.what() + ")");
  }
}

/// Caption-level fields of one provider response.
struct ProviderOutput {
  std::string input_sentence;
  std::vector<std::string> key_components;
  std::vector<BenchRecord> records;
};

namespace detail {

inline const Json* find_key(const Json& j, std::initializer_list<const char*> keys) {
  for (const char* k : keys)
    if (j.contains(k)) return &j[k];
  return nullptr;
}

inline bool parse_bool(const Json& v, const std::string& where) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const auto s = to_lower(trim(v.get<std::string>()));
    if (s == "true" || s == "yes") return true;
    if (s == "false" || s == "no") return false;
  }
  if (v.is_number_integer()) return v.get<long>() != 0;
  fail(ErrorKind::ParseFailure, where + ": presence indicator is not a boolean");
}

inline double parse_likelihood(const Json& v, const std::string& where) {
  double x = std::nan("");
  if (v.is_number()) x = v.get<double>();
  else if (v.is_string()) {
    try {
      x = std::stod(v.get<std::string>());
    } catch (const std::exception&) {
    }
  }
  require(std::isfinite(x), ErrorKind::ParseFailure, where + ": likelihood is not a number");
  require(x >= 0.0 && x <= 1.0, ErrorKind::ParseFailure, where + ": likelihood out of range (" + format_double(x, 6) + ")");
  return x;
}

}  // namespace detail

/// Parses one bias-creation response. Missing or null answers on
/// presence-false entries stay absent; "NaN"-style answers become "unknown".
/// Out-of-range likelihoods are rejected, never clamped.
inline ProviderOutput parse_provider_output(std::string_view raw, const qa::NeutralAliasSet& aliases = {}) {
  const auto [offset, _] = extract_json_object(raw);
  const Json j = parse_relaxed(raw);
  const std::string at = "offset " + std::to_string(offset);
  require(j.is_object(), ErrorKind::ParseFailure, at + ": response is not a JSON object");

  ProviderOutput out;
  try {
    if (const Json* s = detail::find_key(j, {"input sentence", "input_sentence", "input"}); s && s->is_string())
      out.input_sentence = s->get<std::string>();
    if (const Json* k = detail::find_key(j, {"key_components", "key components"}); k && !k->is_null())
      out.key_components = k->get<std::vector<std::string>>();
    const Json* biases = detail::find_key(j, {"biases"});
    require(biases && biases->is_array(), ErrorKind::ParseFailure, at + ": missing 'biases' array");

    for (std::size_t b = 0; b < biases->size(); ++b) {
      const Json& e = (*biases)[b];
      const std::string where = at + ": biases[" + std::to_string(b) + "]";
      require(e.is_object(), ErrorKind::ParseFailure, where + " is not an object");
      BenchRecord r;
      r.key_components = out.key_components;
      const Json* cat = detail::find_key(e, {"bias_category", "bias category"});
      require(cat && cat->is_string(), ErrorKind::ParseFailure, where + ": bias_category required");
      r.bias_category = trim(cat->get<std::string>());
      const Json* classes = detail::find_key(e, {"classes", "bias_classes"});
      require(classes && classes->is_array(), ErrorKind::ParseFailure, where + ": classes required");
      for (const auto& c : *classes) {
        require(c.is_string(), ErrorKind::ParseFailure, where + ": class is not a string");
        r.classes.push_back(trim(c.get<std::string>()));
      }
      require(r.classes.size() >= 2, ErrorKind::ParseFailure, where + ": at least two classes required");
      const Json* q = detail::find_key(e, {"question"});
      require(q && q->is_string() && !trim(q->get<std::string>()).empty(), ErrorKind::ParseFailure,
              where + ": question required");
      r.question = trim(q->get<std::string>());
      const Json* p = detail::find_key(e, {"present_in_input_sentence", "presence_indicator"});
      require(p != nullptr, ErrorKind::ParseFailure, where + ": present_in_input_sentence required");
      r.presence_indicator = detail::parse_bool(*p, where);
      const Json* l = detail::find_key(e, {"likelihood", "likelihood_score"});
      require(l != nullptr, ErrorKind::ParseFailure, where + ": likelihood required");
      r.likelihood = detail::parse_likelihood(*l, where);

      const Json* a = detail::find_key(e, {"answer"});
      std::optional<std::string> answer;
      if (a && a->is_string()) answer = trim(a->get<std::string>());
      else if (a && a->is_number()) answer = a->dump();
      const bool nan_like = a && (a->is_null() || (answer && (to_lower(*answer) == "nan" || answer->empty())));
      if (r.presence_indicator) {
        require(answer && !nan_like, ErrorKind::ParseFailure, where + ": answer required");
        require(class_index(r.classes, *answer).has_value(), ErrorKind::ParseFailure,
                where + ": answer '" + *answer + "' not among classes");
        r.answer = answer;
      } else if (nan_like) {
        r.answer = std::string(kUnknownAnswer);
      } else if (answer) {
        require(aliases.matches(*answer), ErrorKind::ParseFailure,
                where + ": presence false but answer '" + *answer + "' is not a neutral alias");
        r.answer = answer;
      }
      out.records.push_back(std::move(r));
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::ParseFailure, at + ": " + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Records -> QA instances.

/// caption -> context, classes (+ "unknown" when no class is neutral) ->
/// options. Presence true gives a disambiguated instance with the answer as
/// gold; presence false an ambiguous one with the neutral option as gold.
inline std::vector<qa::QAInstance> to_qa_instances(const std::vector<BenchRecord>& records,
                                                   const qa::NeutralAliasSet& aliases = {},
                                                   const std::string& id_prefix = "obb",
                                                   const std::string& language_tag = "en") {
  std::vector<qa::QAInstance> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    qa::QAInstance q;
    q.id = id_prefix + "-" + std::to_string(i);
    q.source = qa::Source::OpenBiasBench;
    q.category = r.bias_category;
    q.context = r.caption;
    q.question = r.question;
    q.language_tag = language_tag;
    q.options = r.classes;
    std::size_t neutral_count = 0;
    for (const auto& c : q.options) neutral_count += aliases.matches(c);
    if (neutral_count == 0) q.options.emplace_back(kUnknownAnswer);
    q.neutral_index = qa::detect_neutral_option(q.options, aliases, q.id);
    if (r.presence_indicator) {
      const auto idx = r.answer ? class_index(q.options, *r.answer) : std::nullopt;
      require(idx.has_value(), ErrorKind::AnswerNotInClasses,
              "record " + std::to_string(i) + ": answer '" + r.answer.value_or("") + "' not among classes");
      q.condition = qa::Condition::Disambig;
      q.gold_index = *idx;
    } else {
      q.condition = qa::Condition::Ambig;
      q.gold_index = q.neutral_index;
    }
    qa::validate(q);
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace openbias::forge
