#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/core/text.hpp"

namespace openbias::qa {

enum class Source { BBQ, OpenBiasBench, KoBBQ, Synthetic };
enum class Condition { Ambig, Disambig };

inline std::string_view to_string(Source s) {
  switch (s) {
    case Source::BBQ: return "BBQ";
    case Source::OpenBiasBench: return "OpenBiasBench";
    case Source::KoBBQ: return "KoBBQ-format";
    case Source::Synthetic: return "synthetic";
  }
  return "synthetic";
}

inline Source parse_source(std::string_view s) {
  if (s == "BBQ") return Source::BBQ;
  if (s == "OpenBiasBench") return Source::OpenBiasBench;
  if (s == "KoBBQ-format" || s == "KoBBQ") return Source::KoBBQ;
  if (s == "synthetic") return Source::Synthetic;
  fail(ErrorKind::ParseFailure, "unknown source '" + std::string(s) + "'");
}

inline std::string_view to_string(Condition c) { return c == Condition::Ambig ? "ambig" : "disambig"; }

inline Condition parse_condition(std::string_view s) {
  if (s == "ambig") return Condition::Ambig;
  if (s == "disambig") return Condition::Disambig;
  fail(ErrorKind::ParseFailure, "unknown condition '" + std::string(s) + "'");
}

/// One multiple-choice bias question. `options` holds n group answers plus
/// exactly one neutral ("unknown"-family) answer at `neutral_index`.
struct QAInstance {
  std::string id;
  Source source = Source::Synthetic;
  std::string category;
  std::optional<std::string> subgroup;
  std::string context;
  Condition condition = Condition::Ambig;
  std::string question;
  std::vector<std::string> options;
  std::size_t neutral_index = 0;
  std::size_t gold_index = 0;
  std::optional<std::size_t> stereotyped_index;
  std::string language_tag = "en";

  bool operator==(const QAInstance&) const = default;
};

/// Throws InvariantViolation naming the instance when any invariant fails.
inline void validate(const QAInstance& q) {
  auto bad = [&](const std::string& why) { fail(ErrorKind::InvariantViolation, "instance '" + q.id + "': " + why); };
  if (q.options.size() < 2) bad("needs at least 2 options");
  if (q.neutral_index >= q.options.size()) bad("neutral_index out of range");
  if (q.gold_index >= q.options.size()) bad("gold_index out of range");
  if (q.condition == Condition::Ambig && q.gold_index != q.neutral_index)
    bad("ambiguous instance must have the neutral option as gold");
  if (q.condition == Condition::Disambig && q.gold_index == q.neutral_index)
    bad("disambiguated instance must not have the neutral option as gold");
  if (q.stereotyped_index) {
    if (*q.stereotyped_index >= q.options.size()) bad("stereotyped_index out of range");
    if (*q.stereotyped_index == q.neutral_index) bad("stereotyped_index equals neutral_index");
  }
}

/// Case-insensitive set of neutral-answer aliases.
class NeutralAliasSet {
 public:
  NeutralAliasSet()
      : NeutralAliasSet({"unknown", "cannot answer", "not enough information", "cannot be determined",
                         "not answerable"}) {}

  explicit NeutralAliasSet(const std::vector<std::string>& aliases) {
    for (const auto& a : aliases) aliases_.insert(normalize_label(a));
    require(!aliases_.empty(), ErrorKind::InvariantViolation, "neutral alias set must be non-empty");
  }

  bool matches(std::string_view text) const { return aliases_.count(normalize_label(text)) > 0; }
  const std::set<std::string>& aliases() const { return aliases_; }

  /// Loads a JSON array of strings, e.g. a per-language alias file.
  static NeutralAliasSet from_json(const Json& j) { return NeutralAliasSet(j.get<std::vector<std::string>>()); }

 private:
  std::set<std::string> aliases_;
};

inline std::size_t resolve_correct_answer(const QAInstance& q) {
  if (q.condition == Condition::Ambig) {
    require(q.gold_index == q.neutral_index, ErrorKind::InvariantViolation,
            "instance '" + q.id + "': ambiguous gold differs from neutral option");
    return q.neutral_index;
  }
  validate(q);
  return q.gold_index;
}

/// Index of the option named `answer` (case-insensitive after normalization).
inline std::size_t option_index(const QAInstance& q, std::string_view answer) {
  const auto want = normalize_label(answer);
  for (std::size_t i = 0; i < q.options.size(); ++i)
    if (normalize_label(q.options[i]) == want) return i;
  fail(ErrorKind::InvariantViolation, "instance '" + q.id + "': answer '" + std::string(answer) + "' not among options");
}

inline std::size_t detect_neutral_option(const std::vector<std::string>& options, const NeutralAliasSet& aliases,
                                         std::string_view instance_id = "") {
  std::optional<std::size_t> found;
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (!aliases.matches(options[i])) continue;
    require(!found, ErrorKind::MultipleNeutralOptions,
            "instance '" + std::string(instance_id) + "': options " + std::to_string(*found) + " and " +
                std::to_string(i) + " are both neutral");
    found = i;
  }
  require(found.has_value(), ErrorKind::NoNeutralOption,
          "instance '" + std::string(instance_id) + "': no option matches a neutral alias");
  return *found;
}

// JSONL schema: keys exactly {id, source, category, subgroup?, context, condition,
// question, options, neutral_index, gold_index, stereotyped_index?, language_tag}.

inline OrderedJson to_json(const QAInstance& q) {
  OrderedJson j;
  j["id"] = q.id;
  j["source"] = std::string(to_string(q.source));
  j["category"] = q.category;
  if (q.subgroup) j["subgroup"] = *q.subgroup;
  j["context"] = q.context;
  j["condition"] = std::string(to_string(q.condition));
  j["question"] = q.question;
  j["options"] = q.options;
  j["neutral_index"] = q.neutral_index;
  j["gold_index"] = q.gold_index;
  if (q.stereotyped_index) j["stereotyped_index"] = *q.stereotyped_index;
  j["language_tag"] = q.language_tag;
  return j;
}

inline QAInstance instance_from_json(const Json& j) {
  static const std::set<std::string> kAllowed = {"id",      "source",     "category",      "subgroup",
                                                 "context", "condition",  "question",      "options",
                                                 "neutral_index", "gold_index", "stereotyped_index", "language_tag"};
  require(j.is_object(), ErrorKind::ParseFailure, "instance must be a JSON object");
  for (const auto& [key, _] : j.items())
    require(kAllowed.count(key) > 0, ErrorKind::ParseFailure, "unexpected key '" + key + "'");
  QAInstance q;
  try {
    q.id = j.at("id").get<std::string>();
    q.source = parse_source(j.at("source").get<std::string>());
    q.category = j.at("category").get<std::string>();
    if (j.contains("subgroup") && !j["subgroup"].is_null()) q.subgroup = j["subgroup"].get<std::string>();
    q.context = j.at("context").get<std::string>();
    q.condition = parse_condition(j.at("condition").get<std::string>());
    q.question = j.at("question").get<std::string>();
    q.options = j.at("options").get<std::vector<std::string>>();
    q.neutral_index = j.at("neutral_index").get<std::size_t>();
    q.gold_index = j.at("gold_index").get<std::size_t>();
    if (j.contains("stereotyped_index") && !j["stereotyped_index"].is_null())
      q.stereotyped_index = j["stereotyped_index"].get<std::size_t>();
    q.language_tag = j.at("language_tag").get<std::string>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::ParseFailure, std::string("instance: ") + e.what());
  }
  validate(q);
  return q;
}

inline std::vector<QAInstance> load_instances(const std::filesystem::path& path) {
  std::vector<QAInstance> out;
  for (const auto& row : read_jsonl(path)) out.push_back(instance_from_json(row));
  return out;
}

inline void save_instances(const std::filesystem::path& path, const std::vector<QAInstance>& instances) {
  std::vector<OrderedJson> rows;
  rows.reserve(instances.size());
  for (const auto& q : instances) rows.push_back(to_json(q));
  write_file(path, to_jsonl(rows));
}

/// Loads a BBQ-style row without an explicit neutral index: the neutral option is
/// detected from `aliases` and the answer given by `label` (gold option index).
inline QAInstance instance_from_unflagged_json(const Json& j, const NeutralAliasSet& aliases) {
  Json full = j;
  const auto id = j.value("id", std::string{});
  const auto options = j.at("options").get<std::vector<std::string>>();
  full["neutral_index"] = detect_neutral_option(options, aliases, id);
  return instance_from_json(full);
}

}  // namespace openbias::qa
