#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/core/text.hpp"
#include "openbias/metrics/metrics.hpp"
#include "openbias/metrics/stats.hpp"

namespace openbias::metrics {

inline constexpr std::string_view kOverall = "overall";

struct ReportRow {
  std::string category;
  Condition condition = Condition::Ambig;
  std::size_t n = 0;
  std::size_t correct = 0;
  std::optional<double> accuracy;    // absent when n = 0
  std::optional<double> bias_score;  // s_amb for ambiguous rows, s_dis for disambiguated rows
};

/// Per (category x condition) accuracy and bias score, ordered by category then
/// condition, followed by the two "overall" aggregate rows.
struct MetricsReport {
  std::vector<ReportRow> rows;

  const ReportRow* find(std::string_view category, Condition c) const {
    for (const auto& r : rows)
      if (r.category == category && r.condition == c) return &r;
    return nullptr;
  }
};

namespace detail {

inline bool fully_annotated(const PredictionLog& log, const Filter& f) {
  for (const auto& r : log.rows())
    if (f.matches(r) && !r.stereotyped_index) return false;
  return true;
}

inline ReportRow report_row(const PredictionLog& log, std::optional<std::string> category, Condition c) {
  Filter f{category, c};
  const auto counts = accuracy_counts(log, f);
  ReportRow row;
  row.category = category.value_or(std::string(kOverall));
  row.condition = c;
  row.n = counts.denominator;
  row.correct = counts.numerator;
  if (counts.denominator > 0) row.accuracy = counts.value();
  if (counts.denominator > 0 && fully_annotated(log, f)) {
    const auto bs = bbq_bias_score(log, f);
    row.bias_score = c == Condition::Ambig ? bs.s_amb : bs.s_dis;
  }
  return row;
}

inline std::string optional_cell(const std::optional<double>& v, int decimals = -1) {
  if (!v) return "";
  return decimals < 0 ? format_double(*v) : format_fixed(*v, decimals);
}

}  // namespace detail

inline MetricsReport build_report(const PredictionLog& log) {
  MetricsReport report;
  for (const auto& category : log.categories())
    for (Condition c : {Condition::Ambig, Condition::Disambig})
      report.rows.push_back(detail::report_row(log, category, c));
  for (Condition c : {Condition::Ambig, Condition::Disambig})
    report.rows.push_back(detail::report_row(log, std::nullopt, c));
  return report;
}

/// category,condition,n,accuracy,bias_score (empty cell = absent).
inline std::string to_csv(const MetricsReport& report) {
  std::string out = "category,condition,n,accuracy,bias_score\n";
  for (const auto& r : report.rows) {
    out += r.category + "," + std::string(qa::to_string(r.condition)) + "," + std::to_string(r.n) + "," +
           detail::optional_cell(r.accuracy) + "," + detail::optional_cell(r.bias_score) + "\n";
  }
  return out;
}

/// One column group (Amb Acc, Amb BS, Disamb Acc, Disamb BS) per system, one
/// row per category.
inline std::string comparison_markdown(const std::vector<std::pair<std::string, MetricsReport>>& systems,
                                       int decimals = 3) {
  require(!systems.empty(), ErrorKind::EmptyInput, "no systems to compare");
  std::vector<std::string> categories;
  for (const auto& [_, report] : systems)
    for (const auto& r : report.rows)
      if (std::find(categories.begin(), categories.end(), r.category) == categories.end())
        categories.push_back(r.category);
  std::stable_partition(categories.begin(), categories.end(), [](const std::string& c) { return c != kOverall; });

  std::string out = "| Category |";
  for (const auto& [name, _] : systems) out += " " + name + " Amb Acc | " + name + " Amb BS | " + name +
                                               " Disamb Acc | " + name + " Disamb BS |";
  out += "\n|---|";
  for (std::size_t i = 0; i < systems.size(); ++i) out += "---:|---:|---:|---:|";
  out += "\n";
  for (const auto& category : categories) {
    out += "| " + category + " |";
    for (const auto& [_, report] : systems) {
      for (Condition c : {Condition::Ambig, Condition::Disambig}) {
        const auto* r = report.find(category, c);
        out += " " + (r ? detail::optional_cell(r->accuracy, decimals) : std::string()) + " |";
        out += " " + (r ? detail::optional_cell(r->bias_score, decimals) : std::string()) + " |";
      }
    }
    out += "\n";
  }
  return out;
}

inline std::string to_markdown(const MetricsReport& report, const std::string& system = "model", int decimals = 3) {
  return comparison_markdown({{system, report}}, decimals);
}

struct SignificanceRow {
  std::string category;
  Condition condition = Condition::Ambig;
  std::size_t n = 0;
  std::map<std::string, double> mean_accuracy;  // system -> mu
  std::map<std::string, TTestResult> tests;     // other system -> reference vs other
  std::map<std::string, double> bonferroni;     // other system -> corrected p
};

/// Paired t-tests of `reference` against every other system on instance-level
/// correctness, per (category x condition) group. Each comparison is one
/// family of size = number of groups for the Bonferroni correction.
/// All logs must cover the same instance ids.
inline std::vector<SignificanceRow> significance_table(const std::map<std::string, PredictionLog>& logs,
                                                       const std::string& reference) {
  require(logs.count(reference) == 1, ErrorKind::PreconditionFailed, "no predictions for system '" + reference + "'");
  require(logs.size() >= 2, ErrorKind::PreconditionFailed, "significance testing needs at least two systems");

  std::map<std::string, std::map<std::string, const PredictionRow*>> by_id;
  for (const auto& [system, log] : logs)
    for (const auto& r : log.rows()) by_id[system][r.instance_id] = &r;
  const auto& ref_rows = by_id.at(reference);
  for (const auto& [system, rows] : by_id) {
    require(rows.size() == ref_rows.size(), ErrorKind::LengthMismatch,
            "system '" + system + "' has " + std::to_string(rows.size()) + " predictions, '" + reference + "' has " +
                std::to_string(ref_rows.size()));
    for (const auto& [id, _] : ref_rows)
      require(rows.count(id) == 1, ErrorKind::LengthMismatch, "system '" + system + "' lacks instance '" + id + "'");
  }

  std::vector<SignificanceRow> table;
  for (const auto& category : logs.at(reference).categories()) {
    for (Condition c : {Condition::Ambig, Condition::Disambig}) {
      std::vector<std::string> ids;
      for (const auto& [id, r] : ref_rows)
        if (r->category == category && r->condition == c) ids.push_back(id);
      if (ids.empty()) continue;
      SignificanceRow row;
      row.category = category;
      row.condition = c;
      row.n = ids.size();
      std::map<std::string, std::vector<double>> correct;
      for (const auto& [system, rows] : by_id) {
        auto& v = correct[system];
        for (const auto& id : ids) v.push_back(rows.at(id)->correct() ? 1.0 : 0.0);
        double sum = 0.0;
        for (double x : v) sum += x;
        row.mean_accuracy[system] = sum / static_cast<double>(v.size());
      }
      for (const auto& [system, v] : correct) {
        if (system == reference || ids.size() < 2) continue;
        row.tests[system] = paired_ttest(correct.at(reference), v);
      }
      table.push_back(std::move(row));
    }
  }

  for (const auto& [system, _] : logs) {
    if (system == reference) continue;
    std::vector<double> ps;
    for (const auto& row : table)
      if (row.tests.count(system)) ps.push_back(row.tests.at(system).p_two_sided);
    const auto corrected = bonferroni(ps, ps.size());
    std::size_t k = 0;
    for (auto& row : table)
      if (row.tests.count(system)) row.bonferroni[system] = corrected[k++];
  }
  return table;
}

/// Columns: category, context, mu per system, then t, p and Bonferroni-corrected
/// p for reference vs each other system.
inline std::string significance_markdown(const std::vector<SignificanceRow>& table, const std::string& reference) {
  if (table.empty()) return "";
  std::vector<std::string> systems, others;
  for (const auto& [s, _] : table.front().mean_accuracy) {
    systems.push_back(s);
    if (s != reference) others.push_back(s);
  }
  std::string out = "| Category | Context |";
  for (const auto& s : systems) out += " mu " + s + " |";
  for (const auto& s : others) out += " t (" + reference + " vs " + s + ") | p | Bonf. p |";
  out += "\n|---|---|";
  for (std::size_t i = 0; i < systems.size() + 3 * others.size(); ++i) out += "---:|";
  out += "\n";
  for (const auto& row : table) {
    out += "| " + row.category + " | " + std::string(qa::to_string(row.condition)) + " |";
    for (const auto& s : systems) out += " " + format_fixed(row.mean_accuracy.at(s), 3) + " |";
    for (const auto& s : others) {
      if (!row.tests.count(s)) {
        out += " | | |";
        continue;
      }
      const auto& t = row.tests.at(s);
      out += " " + format_fixed(t.t, 3) + " | " + format_double(t.p_two_sided, 6) + " | " +
             format_double(row.bonferroni.at(s), 6) + " |";
    }
    out += "\n";
  }
  return out;
}

}  // namespace openbias::metrics
