#pragma once

#include <map>
#include <string>
#include <vector>

#include "openbias/forge/record.hpp"
#include "openbias/refine/cluster.hpp"
#include "openbias/refine/embedding.hpp"

namespace openbias::refine {

struct RefineConfig {
  std::size_t k_min = 2;
  std::size_t k_max = 8;
  std::uint64_t seed = 0;
  KMeansOptions kmeans;
  double outlier_factor = 1.5;
  MergeMap merge_map;
  SubclusterOptions subcluster;
  std::size_t embed_parallelism = 1;
};

/// Every input record ends up in exactly one of `kept` or the dropped sets.
struct Accounting {
  std::size_t input = 0;
  std::size_t outliers = 0;
  std::size_t reassigned = 0;
  std::size_t dropped_outliers = 0;
  std::size_t dropped_subcluster = 0;
  std::size_t kept = 0;

  std::size_t dropped() const { return dropped_outliers + dropped_subcluster; }
  bool balanced() const { return input == kept + dropped() && outliers == reassigned + dropped_outliers; }
};

struct RefineResult {
  ClusterModel fitted;
  ClusterModel model;  // after outlier removal, merging and reassignment
  std::vector<forge::BenchRecord> refined;
  std::vector<Subgroup> subgroups;
  Accounting accounting;
};

/// Most frequent bias category among a cluster's members; ties go to the
/// lexicographically smallest name.
inline void name_clusters(ClusterModel& m, const std::vector<forge::BenchRecord>& records) {
  for (std::size_t c = 0; c < m.k(); ++c) {
    std::map<std::string, std::size_t> votes;
    for (auto i : m.members(c)) ++votes[records[i].bias_category];
    std::size_t best = 0;
    for (const auto& [name, n] : votes)
      if (n > best) {
        best = n;
        m.names[c] = name;
      }
  }
}

inline RefineResult refine_records(const std::vector<forge::BenchRecord>& records, EmbeddingProvider& provider,
                                   const RefineConfig& cfg) {
  require(!records.empty(), ErrorKind::EmptyInput, "no records to refine");
  const auto vectors = embed_records(records, provider, cfg.embed_parallelism);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < records.size(); ++i) ids.push_back(std::to_string(i));
  const std::size_t k_max = std::min(cfg.k_max, records.size() - 1);
  require(cfg.k_min >= 2 && cfg.k_min <= k_max, ErrorKind::PreconditionFailed,
          "k range [" + std::to_string(cfg.k_min) + ", " + std::to_string(cfg.k_max) + "] is empty for " +
              std::to_string(records.size()) + " records");
  std::vector<std::size_t> ks;
  for (std::size_t k = cfg.k_min; k <= k_max; ++k) ks.push_back(k);

  RefineResult r;
  r.fitted = kmeans_silhouette(ids, vectors, ks, cfg.seed, cfg.kmeans);
  name_clusters(r.fitted, records);
  auto split = remove_outliers(r.fitted, cfg.outlier_factor);
  auto merged = merge_clusters(std::move(split.model), cfg.merge_map);
  auto re = reassign_outliers(std::move(merged));
  r.model = std::move(re.model);

  std::vector<std::vector<std::string>> classes;
  for (const auto& rec : records) classes.push_back(rec.classes);
  auto sub = subcluster(r.model, classes, cfg.subcluster);

  std::vector<int> final_cluster(records.size(), -1);
  for (const auto& g : sub.subgroups)
    for (auto i : g.members) final_cluster[i] = static_cast<int>(g.cluster);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (final_cluster[i] < 0) continue;
    auto rec = records[i];
    rec.bias_category = r.model.names[static_cast<std::size_t>(final_cluster[i])];
    r.refined.push_back(std::move(rec));
  }
  r.subgroups = std::move(sub.subgroups);

  auto& a = r.accounting;
  a.input = records.size();
  a.outliers = split.outliers.size();
  a.reassigned = re.reassigned.size();
  a.dropped_outliers = re.dropped.size();
  a.dropped_subcluster = sub.dropped.size();
  a.kept = r.refined.size();
  require(a.balanced(), ErrorKind::InvariantViolation, "refinement lost track of records");
  return r;
}

inline OrderedJson to_json(const Accounting& a) {
  OrderedJson j;
  j["input"] = a.input;
  j["outliers"] = a.outliers;
  j["reassigned"] = a.reassigned;
  j["dropped_outliers"] = a.dropped_outliers;
  j["dropped_subcluster"] = a.dropped_subcluster;
  j["kept"] = a.kept;
  j["balanced"] = a.balanced();
  return j;
}

inline OrderedJson summary_json(const RefineResult& r) {
  OrderedJson j;
  j["k"] = r.fitted.k();
  j["silhouette"] = r.fitted.silhouette;
  j["clusters_after_merge"] = r.model.k();
  j["subgroups"] = r.subgroups.size();
  j["accounting"] = to_json(r.accounting);
  return j;
}

}  // namespace openbias::refine
