#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/core/rng.hpp"
#include "openbias/core/text.hpp"
#include "openbias/refine/embedding.hpp"

namespace openbias::refine {

inline constexpr int kOutlier = -1;
inline constexpr int kDropped = -2;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Vec unit(const Vec& v) {
  const double n = std::sqrt(dot(v, v));
  require(n > 0.0 && std::isfinite(n), ErrorKind::DegenerateData, "cannot normalize a zero or non-finite vector");
  Vec out(v);
  for (double& x : out) x /= n;
  return out;
}

/// 1 - cos(a, b).
inline double cosine_distance(const Vec& a, const Vec& b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 1.0;
  return std::max(0.0, 1.0 - dot(a, b) / (na * nb));
}

inline double squared_euclidean(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct DistanceStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  double max = 0.0;
  std::size_t n = 0;

  double threshold(double factor = 1.5) const { return mean + factor * stddev; }
};

inline DistanceStats distance_stats(std::span<const double> d) {
  DistanceStats s;
  s.n = d.size();
  if (d.empty()) return s;
  for (double x : d) s.mean += x;
  s.mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (double x : d) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(d.size()));
  s.max = *std::max_element(d.begin(), d.end());
  return s;
}

/// True for distances strictly above mean + factor * population stddev.
inline std::vector<bool> outlier_mask(std::span<const double> distances, double factor = 1.5) {
  const auto s = distance_stats(distances);
  const double t = s.threshold(factor);
  const double slack = 1e-12 * std::max(1.0, std::abs(t));
  std::vector<bool> out(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i) out[i] = distances[i] > t + slack;
  return out;
}

/// Points are stored unit-normalized; cluster geometry is cosine distance
/// implemented as Euclidean distance between unit vectors.
struct ClusterModel {
  std::vector<std::string> ids;
  std::vector<Vec> points;
  std::vector<int> assignment;  // cluster index, kOutlier or kDropped
  std::vector<Vec> centroids;
  std::vector<std::string> names;
  std::vector<DistanceStats> stats;
  double silhouette = 0.0;
  std::vector<double> point_silhouette;  // fit-time values
  double inertia = 0.0;

  std::size_t k() const { return centroids.size(); }
  std::size_t size() const { return ids.size(); }

  double distance_to(std::size_t point, std::size_t cluster) const {
    return cosine_distance(points[point], centroids[cluster]);
  }

  std::vector<std::size_t> members(std::size_t cluster) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] == static_cast<int>(cluster)) out.push_back(i);
    return out;
  }

  std::size_t count(int label) const {
    return static_cast<std::size_t>(std::count(assignment.begin(), assignment.end(), label));
  }

  void refresh_stats() {
    stats.assign(k(), {});
    for (std::size_t c = 0; c < k(); ++c) {
      std::vector<double> d;
      for (auto i : members(c)) d.push_back(distance_to(i, c));
      stats[c] = distance_stats(d);
    }
  }

  void recompute_centroids() {
    for (std::size_t c = 0; c < k(); ++c) {
      const auto m = members(c);
      if (m.empty()) continue;
      Vec mean(points[m.front()].size(), 0.0);
      for (auto i : m)
        for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += points[i][d];
      for (double& x : mean) x /= static_cast<double>(m.size());
      centroids[c] = std::move(mean);
    }
  }

  /// Sum of fit-time silhouettes of the cluster's members over all points, so
  /// the contributions add up to the overall silhouette.
  double silhouette_contribution(std::size_t cluster) const {
    double s = 0.0;
    for (auto i : members(cluster)) s += point_silhouette[i];
    return size() == 0 ? 0.0 : s / static_cast<double>(size());
  }
};

/// Per-point silhouette under cosine distance. Singleton clusters score 0.
inline std::vector<double> silhouette_values(const std::vector<Vec>& points, const std::vector<int>& labels, std::size_t k) {
  const std::size_t n = points.size();
  std::vector<std::size_t> sizes(k, 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  std::vector<double> out(n, 0.0);
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(labels[i]);
    if (sizes[own] <= 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sums[static_cast<std::size_t>(labels[j])] += cosine_distance(points[i], points[j]);
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c)
      if (c != own && sizes[c] > 0) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    const double m = std::max(a, b);
    out[i] = m > 0.0 ? (b - a) / m : 0.0;
  }
  return out;
}

struct KMeansOptions {
  std::size_t restarts = 5;
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;
};

namespace detail {

struct KMeansRun {
  std::vector<int> labels;
  std::vector<Vec> centroids;
  double inertia = 0.0;
};

inline std::size_t nearest(const Vec& p, const std::vector<Vec>& centroids) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_euclidean(p, centroids[c]);
    if (d < bd) {
      bd = d;
      best = c;
    }
  }
  return best;
}

inline KMeansRun kmeans_once(const std::vector<Vec>& pts, std::size_t k, Rng rng, const KMeansOptions& opt) {
  const std::size_t n = pts.size();
  KMeansRun run;
  // k-means++ seeding
  run.centroids.push_back(pts[rng.below(n)]);
  std::vector<double> d2(n);
  while (run.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = squared_euclidean(pts[i], run.centroids[nearest(pts[i], run.centroids)]);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (pick = 0; pick + 1 < n && (r -= d2[pick]) > 0.0; ++pick) {
      }
      while (d2[pick] == 0.0 && pick + 1 < n) ++pick;
    } else {
      pick = rng.below(n);
    }
    run.centroids.push_back(pts[pick]);
  }

  run.labels.assign(n, 0);
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) run.labels[i] = static_cast<int>(nearest(pts[i], run.centroids));
    std::vector<Vec> next(k, Vec(pts.front().size(), 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(run.labels[i]);
      ++counts[c];
      for (std::size_t d = 0; d < next[c].size(); ++d) next[c][d] += pts[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Re-seed an empty cluster at the point farthest from its centroid.
        std::size_t far = 0;
        double fd = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = squared_euclidean(pts[i], run.centroids[static_cast<std::size_t>(run.labels[i])]);
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        next[c] = pts[far];
        continue;
      }
      for (double& x : next[c]) x /= static_cast<double>(counts[c]);
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(squared_euclidean(next[c], run.centroids[c])));
    run.centroids = std::move(next);
    if (shift <= opt.tolerance) break;
  }
  for (std::size_t i = 0; i < n; ++i) run.labels[i] = static_cast<int>(nearest(pts[i], run.centroids));
  run.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    run.inertia += squared_euclidean(pts[i], run.centroids[static_cast<std::size_t>(run.labels[i])]);
  return run;
}

}  // namespace detail

/// Best-inertia k-means++ fit for a single k; restarts are ordered by
/// (inertia, restart index).
inline ClusterModel kmeans_fit(const std::vector<std::string>& ids, const std::vector<Vec>& unit_points, std::size_t k,
                               std::uint64_t seed, const KMeansOptions& opt = {}) {
  const Rng root(seed);
  std::optional<detail::KMeansRun> best;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, opt.restarts); ++r) {
    auto run = detail::kmeans_once(unit_points, k, root.split("k" + std::to_string(k) + "/restart" + std::to_string(r)), opt);
    if (!best || run.inertia < best->inertia) best = std::move(run);
  }
  ClusterModel m;
  m.ids = ids;
  m.points = unit_points;
  m.assignment = best->labels;
  m.centroids = best->centroids;
  m.inertia = best->inertia;
  for (std::size_t c = 0; c < k; ++c) m.names.push_back("cluster-" + std::to_string(c));
  m.point_silhouette = silhouette_values(m.points, m.assignment, k);
  double s = 0.0;
  for (double x : m.point_silhouette) s += x;
  m.silhouette = s / static_cast<double>(m.size());
  m.refresh_stats();
  return m;
}

/// Fits every k in `k_range` and keeps the one with the highest mean
/// silhouette, preferring the smaller k on ties.
inline ClusterModel kmeans_silhouette(std::vector<std::string> ids, const std::vector<Vec>& vectors,
                                      std::vector<std::size_t> k_range, std::uint64_t seed,
                                      const KMeansOptions& opt = {}) {
  const std::size_t n = vectors.size();
  require(!k_range.empty(), ErrorKind::PreconditionFailed, "empty k range");
  std::sort(k_range.begin(), k_range.end());
  k_range.erase(std::unique(k_range.begin(), k_range.end()), k_range.end());
  require(k_range.front() >= 2, ErrorKind::PreconditionFailed, "k must be at least 2");
  require(n >= k_range.back() + 1, ErrorKind::PreconditionFailed,
          "need at least " + std::to_string(k_range.back() + 1) + " vectors for k=" + std::to_string(k_range.back()));
  if (ids.empty())
    for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  require(ids.size() == n, ErrorKind::LengthMismatch, "ids and vectors differ in length");

  std::vector<Vec> pts;
  pts.reserve(n);
  for (const auto& v : vectors) {
    require(v.size() == vectors.front().size(), ErrorKind::ShapeMismatch, "vectors differ in dimension");
    pts.push_back(unit(v));
  }
  bool all_same = true;
  for (std::size_t i = 1; i < n && all_same; ++i) all_same = squared_euclidean(pts[i], pts[0]) == 0.0;
  require(!all_same, ErrorKind::DegenerateData, "all vectors are identical");

  std::optional<ClusterModel> best;
  for (std::size_t k : k_range) {
    auto m = kmeans_fit(ids, pts, k, seed, opt);
    if (!best || m.silhouette > best->silhouette) best = std::move(m);
  }
  return std::move(*best);
}

struct OutlierSplit {
  ClusterModel model;
  std::vector<std::string> kept;
  std::vector<std::string> outliers;
};

/// Marks members farther than mean + 1.5 sigma from their centroid as
/// outliers. Centroids stay put; distance statistics are recomputed.
inline OutlierSplit remove_outliers(ClusterModel model, double factor = 1.5) {
  OutlierSplit out;
  for (std::size_t c = 0; c < model.k(); ++c) {
    const auto m = model.members(c);
    std::vector<double> d;
    for (auto i : m) d.push_back(model.distance_to(i, c));
    const auto mask = outlier_mask(d, factor);
    for (std::size_t j = 0; j < m.size(); ++j)
      if (mask[j]) model.assignment[m[j]] = kOutlier;
  }
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (model.assignment[i] >= 0) out.kept.push_back(model.ids[i]);
    else if (model.assignment[i] == kOutlier) out.outliers.push_back(model.ids[i]);
  }
  model.refresh_stats();
  out.model = std::move(model);
  return out;
}

struct MergeEntry {
  std::string target;
  std::vector<std::size_t> sources;
};

struct MergeMap {
  std::vector<MergeEntry> merges;
};

inline MergeMap merge_map_from_json(const Json& j) {
  MergeMap m;
  try {
    for (const auto& e : j.at("merges")) {
      MergeEntry entry{e.at("target").get<std::string>(), e.at("sources").get<std::vector<std::size_t>>()};
      require(!trim(entry.target).empty(), ErrorKind::ConfigError, "merge target must be named");
      require(!entry.sources.empty(), ErrorKind::ConfigError, "merge '" + entry.target + "' has no sources");
      m.merges.push_back(std::move(entry));
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("merge map: ") + e.what());
  }
  return m;
}

inline MergeMap load_merge_map(const std::filesystem::path& path) {
  try {
    return merge_map_from_json(Json::parse(read_file(path)));
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
}

inline Json to_json(const MergeMap& m) {
  Json j;
  j["merges"] = Json::array();
  for (const auto& e : m.merges) j["merges"].push_back({{"target", e.target}, {"sources", e.sources}});
  return j;
}

/// Each merge entry becomes one cluster named after its target and placed at
/// the position of its lowest source id; untouched clusters keep their names.
inline ClusterModel merge_clusters(ClusterModel model, const MergeMap& map) {
  const std::size_t k = model.k();
  std::vector<int> group(k, -1);
  for (std::size_t g = 0; g < map.merges.size(); ++g) {
    require(!map.merges[g].sources.empty(), ErrorKind::InvariantViolation,
            "merge '" + map.merges[g].target + "' has no sources");
    for (auto s : map.merges[g].sources) {
      require(s < k, ErrorKind::UnknownClusterId, "cluster id " + std::to_string(s) + " does not exist");
      require(group[s] < 0, ErrorKind::DuplicateSource, "cluster id " + std::to_string(s) + " appears twice");
      group[s] = static_cast<int>(g);
    }
  }
  if (map.merges.empty()) return model;

  std::vector<int> remap(k, -1);
  std::vector<int> group_index(map.merges.size(), -1);
  std::vector<Vec> centroids;
  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> sources_of;
  for (std::size_t c = 0; c < k; ++c) {
    if (group[c] < 0) {
      remap[c] = static_cast<int>(names.size());
      names.push_back(model.names[c]);
      sources_of.push_back({c});
    } else if (group_index[group[c]] < 0) {
      group_index[group[c]] = static_cast<int>(names.size());
      remap[c] = group_index[group[c]];
      names.push_back(map.merges[group[c]].target);
      sources_of.push_back({c});
    } else {
      remap[c] = group_index[group[c]];
      sources_of[remap[c]].push_back(c);
    }
  }
  for (const auto& src : sources_of) {
    Vec mean(model.centroids[src.front()].size(), 0.0);
    for (auto s : src)
      for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += model.centroids[s][d];
    for (double& x : mean) x /= static_cast<double>(src.size());
    centroids.push_back(std::move(mean));
  }
  for (int& a : model.assignment)
    if (a >= 0) a = remap[static_cast<std::size_t>(a)];
  model.centroids = std::move(centroids);
  model.names = std::move(names);
  model.recompute_centroids();
  model.refresh_stats();
  return model;
}

struct Reassignment {
  ClusterModel model;
  std::vector<std::string> reassigned;
  std::vector<std::string> dropped;
};

/// An outlier joins its nearest cluster when it is closer than that cluster's
/// farthest current member; otherwise it is dropped. Maxima are taken before
/// any reassignment so the result does not depend on outlier order.
inline Reassignment reassign_outliers(ClusterModel model) {
  Reassignment out;
  const auto stats = model.stats;
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (model.assignment[i] != kOutlier) continue;
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < model.k(); ++c) {
      const double d = model.distance_to(i, c);
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    if (model.k() > 0 && stats[best].n > 0 && bd < stats[best].max) {
      model.assignment[i] = static_cast<int>(best);
      out.reassigned.push_back(model.ids[i]);
    } else {
      model.assignment[i] = kDropped;
      out.dropped.push_back(model.ids[i]);
    }
  }
  model.refresh_stats();
  out.model = std::move(model);
  return out;
}

struct Subgroup {
  std::size_t cluster = 0;
  std::string category;
  std::string key;
  std::vector<std::size_t> members;  // point indices
};

struct SubclusterOptions {
  std::size_t min_size = 5;
  double cap_factor = 1.5;  // cap = cluster mean + cap_factor * sigma
};

struct SubclusterResult {
  std::vector<Subgroup> subgroups;
  std::vector<std::string> dropped;
};

/// Canonical key for a class-label set: normalized, deduplicated, sorted.
inline std::string class_set_key(const std::vector<std::string>& classes) {
  std::set<std::string> s;
  for (const auto& c : classes) s.insert(normalize_label(c));
  return join(std::vector<std::string>(s.begin(), s.end()), "|");
}

/// Groups each cluster's members by class-label set. Groups smaller than
/// `min_size` join the nearest large sibling (by group-centroid distance) if it
/// lies within the cluster's cap, else they are dropped.
inline SubclusterResult subcluster(const ClusterModel& model, const std::vector<std::vector<std::string>>& classes,
                                   const SubclusterOptions& opt = {}) {
  require(classes.size() == model.size(), ErrorKind::LengthMismatch, "class labels and points differ in length");
  SubclusterResult out;
  auto centroid = [&](const std::vector<std::size_t>& m) {
    Vec c(model.points[m.front()].size(), 0.0);
    for (auto i : m)
      for (std::size_t d = 0; d < c.size(); ++d) c[d] += model.points[i][d];
    for (double& x : c) x /= static_cast<double>(m.size());
    return c;
  };
  for (std::size_t c = 0; c < model.k(); ++c) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (auto i : model.members(c)) groups[class_set_key(classes[i])].push_back(i);
    std::vector<Subgroup> large;
    std::vector<Subgroup> small;
    for (auto& [key, m] : groups)
      (m.size() >= opt.min_size ? large : small).push_back({c, model.names[c], key, std::move(m)});
    std::vector<Vec> large_centroids;
    for (const auto& g : large) large_centroids.push_back(centroid(g.members));
    const double cap = model.stats[c].threshold(opt.cap_factor);
    for (const auto& g : small) {
      const Vec gc = centroid(g.members);
      std::optional<std::size_t> best;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < large.size(); ++j) {
        const double d = cosine_distance(gc, large_centroids[j]);
        if (d < bd) {
          bd = d;
          best = j;
        }
      }
      if (best && bd <= cap) {
        auto& target = large[*best].members;
        target.insert(target.end(), g.members.begin(), g.members.end());
      } else {
        for (auto i : g.members) out.dropped.push_back(model.ids[i]);
      }
    }
    for (auto& g : large) {
      std::sort(g.members.begin(), g.members.end());
      out.subgroups.push_back(std::move(g));
    }
  }
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string cluster_report_csv(const ClusterModel& m) {
  std::string out = "cluster_id,category_name,size,silhouette_contribution\n";
  for (std::size_t c = 0; c < m.k(); ++c)
    out += std::to_string(c) + "," + csv_field(m.names[c]) + "," + std::to_string(m.members(c).size()) + "," +
           format_double(m.silhouette_contribution(c)) + "\n";
  return out;
}

inline std::string subgroup_inventory_csv(const std::vector<Subgroup>& subgroups) {
  std::string out = "category,subgroup_key,count\n";
  for (const auto& g : subgroups)
    out += csv_field(g.category) + "," + csv_field(g.key) + "," + std::to_string(g.members.size()) + "\n";
  return out;
}

}  // namespace openbias::refine
