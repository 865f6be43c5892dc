#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flavoraxis/axes.hpp"
#include "flavoraxis/corpus.hpp"
#include "flavoraxis/error.hpp"
#include "flavoraxis/parallel.hpp"
#include "flavoraxis/random.hpp"
#include "flavoraxis/stats.hpp"

namespace flavoraxis::culture {

using stats::StatResult;

// Tag file. Every key of `tags` is a pool member; an empty list marks a pool
// member with no distinctive cuisine.
struct CuisineTags {
  std::string pool_spec;
  std::vector<std::string> clusters;
  std::map<std::string, std::vector<std::string>> tags;
};

inline CuisineTags cuisine_tags_from_json(const nlohmann::json& j) {
  CuisineTags t;
  try {
    t.pool_spec = j.value("pool_spec", std::string());
    t.clusters = j.at("clusters").get<std::vector<std::string>>();
    for (const auto& [name, v] : j.at("tags").items()) t.tags[name] = v.get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("cuisine tags: ") + e.what());
  }
  if (t.clusters.empty()) throw DataError("cuisine tags: empty cluster catalog");
  if (t.clusters.size() > 64) throw DataError("cuisine tags: at most 64 clusters supported");
  for (std::size_t i = 0; i < t.clusters.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (t.clusters[i] == t.clusters[k]) throw DataError("cuisine tags: duplicate cluster " + t.clusters[i]);
    }
  }
  for (const auto& [name, list] : t.tags) {
    for (const auto& c : list) {
      if (std::find(t.clusters.begin(), t.clusters.end(), c) == t.clusters.end()) {
        throw DataError("cuisine tags: " + name + " has unknown cuisine '" + c + "'");
      }
    }
  }
  return t;
}

inline nlohmann::ordered_json to_json(const CuisineTags& t) {
  nlohmann::ordered_json j;
  j["pool_spec"] = t.pool_spec;
  j["clusters"] = t.clusters;
  auto tags = nlohmann::ordered_json::object();
  for (const auto& [name, list] : t.tags) tags[name] = list;
  j["tags"] = tags;
  return j;
}

inline CuisineTags load_cuisine_tags(const std::string& path) {
  const auto content = text::read_file(path);
  try {
    return cuisine_tags_from_json(nlohmann::json::parse(content));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

using Mask = std::uint64_t;

// Tags resolved against a matrix: pool rows in matrix order with a bitmask of
// cuisine indices per row.
struct Pool {
  std::vector<std::string> clusters;
  std::vector<std::size_t> rows;
  std::vector<Mask> masks;

  std::size_t size() const { return rows.size(); }
};

inline Pool resolve_pool(const EmbeddingMatrix& m, const CuisineTags& tags) {
  std::vector<std::pair<std::size_t, Mask>> pts;
  for (const auto& [name, list] : tags.tags) {
    const auto row = m.find_name(name);
    if (!row) throw DataError("cuisine tags: unknown entity " + name);
    Mask mask = 0;
    for (const auto& c : list) {
      const auto at = std::find(tags.clusters.begin(), tags.clusters.end(), c) - tags.clusters.begin();
      mask |= Mask{1} << at;
    }
    pts.emplace_back(*row, mask);
  }
  std::sort(pts.begin(), pts.end());
  Pool p;
  p.clusters = tags.clusters;
  for (auto& [r, mask] : pts) {
    p.rows.push_back(r);
    p.masks.push_back(mask);
  }
  return p;
}

inline Pool subset(const Pool& p, std::span<const std::size_t> idx) {
  Pool s;
  s.clusters = p.clusters;
  for (auto i : idx) {
    s.rows.push_back(p.rows[i]);
    s.masks.push_back(p.masks[i]);
  }
  return s;
}

// Unit-normalized copies of every matrix row, shared by the kNN routines.
class UnitRows {
 public:
  explicit UnitRows(const EmbeddingMatrix& m) : dim_(m.dim()), data_(m.size() * m.dim()) {
    for (std::size_t r = 0; r < m.size(); ++r) {
      const auto v = m.row(r);
      const double len = norm(v);
      if (len == 0.0) throw InvalidArgument("zero-norm vector for id " + std::to_string(m.entity(r).id));
      for (std::size_t d = 0; d < dim_; ++d) data_[r * dim_ + d] = v[d] / len;
    }
  }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }
  double cos(std::size_t a, std::size_t b) const { return clamp_unit(dot(row(a), row(b))); }

 private:
  std::size_t dim_;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// kNN purity

struct CuisinePurity {
  std::string cuisine;
  std::size_t n = 0;
  double purity = 0.0;
  double baseline = 0.0;
  double lift = 0.0;
};

struct PurityReport {
  std::size_t k = 0;
  std::size_t pool_size = 0;
  std::vector<CuisinePurity> cuisines;
  double mean_purity = 0.0;
  double mean_lift = 0.0;
  std::vector<std::string> notes;
};

// purity / (n_c / N_pool)
inline double lift(double purity, std::size_t n_c, std::size_t pool_size) {
  return purity / (static_cast<double>(n_c) / static_cast<double>(pool_size));
}

namespace detail {

// Per-query purity for each tagged pool member (NaN for untagged members).
// Neighbours are ranked by cosine, ties broken by ascending id.
inline std::vector<double> query_purity(const EmbeddingMatrix& m, const UnitRows& unit, const Pool& pool,
                                        std::size_t k, unsigned workers) {
  const std::size_t n = pool.size();
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::size_t> tagged;
  for (std::size_t i = 0; i < n; ++i) {
    if (pool.masks[i]) tagged.push_back(i);
  }
  parallel_for(tagged.size(), workers, [&](std::size_t t) {
    const std::size_t q = tagged[t];
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != q) cand.emplace_back(unit.cos(pool.rows[q], pool.rows[j]), j);
    }
    auto closer = [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return m.entity(pool.rows[a.second]).id < m.entity(pool.rows[b.second]).id;
    };
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(), closer);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < k; ++r) hits += (pool.masks[cand[r].second] & pool.masks[q]) ? 1 : 0;
    out[q] = static_cast<double>(hits) / static_cast<double>(k);
  });
  return out;
}

// Purity report over a pool; cuisines with no member are skipped when
// `allow_empty`, otherwise rejected.
inline PurityReport purity_report(const EmbeddingMatrix& m, const UnitRows& unit, const Pool& pool, std::size_t k,
                                  bool allow_empty, unsigned workers) {
  if (k == 0) throw InvalidArgument("knn_purity: k must be at least 1");
  if (k >= pool.size()) {
    throw InvalidArgument("knn_purity: k=" + std::to_string(k) + " must be below pool size " +
                          std::to_string(pool.size()));
  }
  const auto qp = query_purity(m, unit, pool, k, workers);
  PurityReport rep;
  rep.k = k;
  rep.pool_size = pool.size();
  double sum_p = 0.0, sum_l = 0.0;
  for (std::size_t c = 0; c < pool.clusters.size(); ++c) {
    const Mask bit = Mask{1} << c;
    CuisinePurity cp;
    cp.cuisine = pool.clusters[c];
    double total = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool.masks[i] & bit) {
        ++cp.n;
        total += qp[i];
      }
    }
    if (cp.n == 0) {
      if (!allow_empty) throw InvalidArgument("knn_purity: cuisine " + cp.cuisine + " has no members in the pool");
      rep.notes.push_back("cuisine " + cp.cuisine + " absent from pool");
      continue;
    }
    cp.purity = total / static_cast<double>(cp.n);
    cp.baseline = static_cast<double>(cp.n) / static_cast<double>(pool.size());
    cp.lift = cp.purity / cp.baseline;
    sum_p += cp.purity;
    sum_l += cp.lift;
    rep.cuisines.push_back(cp);
  }
  if (rep.cuisines.empty()) throw InvalidArgument("knn_purity: no tagged entities in pool");
  rep.mean_purity = sum_p / static_cast<double>(rep.cuisines.size());
  rep.mean_lift = sum_l / static_cast<double>(rep.cuisines.size());
  return rep;
}

}  // namespace detail

inline PurityReport knn_purity(const EmbeddingMatrix& m, const CuisineTags& tags, std::size_t k,
                               unsigned workers = 1) {
  const UnitRows unit(m);
  return detail::purity_report(m, unit, resolve_pool(m, tags), k, false, workers);
}

struct CuisineInterval {
  std::string cuisine;
  std::size_t present = 0;  // iterations in which the cuisine had members
  double n_mean = 0.0;
  stats::ResampleSummary purity;
  stats::ResampleSummary lift;
};

struct SubsampledPurity {
  std::size_t k = 0;
  std::size_t pool_size = 0;
  std::size_t target_size = 0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::vector<CuisineInterval> cuisines;
  stats::ResampleSummary mean_purity;
  stats::ResampleSummary mean_lift;
};

// Pool subsampled without replacement to target_size on every iteration
// (substream (seed, i)); per-cuisine means and percentile 95% intervals.
inline SubsampledPurity subsampled_purity(const EmbeddingMatrix& m, const CuisineTags& tags, std::size_t target_size,
                                          std::size_t iterations, std::size_t k, Seed seed, unsigned workers = 1) {
  if (iterations < 2) throw InvalidArgument("subsampled_purity: need at least 2 iterations");
  const auto pool = resolve_pool(m, tags);
  if (target_size > pool.size()) {
    throw InvalidArgument("subsampled_purity: target " + std::to_string(target_size) + " exceeds pool of " +
                          std::to_string(pool.size()));
  }
  const UnitRows unit(m);
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto reports = stats::map_subsamples(
      std::span<const std::size_t>(idx), target_size, iterations,
      [&](std::span<const std::size_t> pick) { return detail::purity_report(m, unit, subset(pool, pick), k, true, 1); },
      seed, workers);

  SubsampledPurity out;
  out.k = k;
  out.pool_size = pool.size();
  out.target_size = target_size;
  out.iterations = iterations;
  out.seed = seed.master;
  std::vector<double> mp, ml;
  for (const auto& r : reports) {
    mp.push_back(r.mean_purity);
    ml.push_back(r.mean_lift);
  }
  out.mean_purity = stats::summarize(mp);
  out.mean_lift = stats::summarize(ml);
  for (const auto& c : pool.clusters) {
    CuisineInterval ci;
    ci.cuisine = c;
    std::vector<double> p, l;
    double n_total = 0.0;
    for (const auto& r : reports) {
      for (const auto& cp : r.cuisines) {
        if (cp.cuisine != c) continue;
        p.push_back(cp.purity);
        l.push_back(cp.lift);
        n_total += static_cast<double>(cp.n);
      }
    }
    ci.present = p.size();
    if (!p.empty()) {
      ci.n_mean = n_total / static_cast<double>(p.size());
      ci.purity = p.size() >= 2 ? stats::summarize(p) : stats::ResampleSummary{p[0], 0.0, p[0], p[0], p};
      ci.lift = l.size() >= 2 ? stats::summarize(l) : stats::ResampleSummary{l[0], 0.0, l[0], l[0], l};
    }
    out.cuisines.push_back(std::move(ci));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Intra-cluster similarity

struct IntraCuisine {
  std::string cuisine;
  std::size_t n = 0;
  double mean = 0.0;
};

struct IntraReport {
  std::vector<IntraCuisine> cuisines;
  std::vector<std::string> excluded;
  double overall_mean = 0.0;  // arithmetic mean over evaluated cuisines
  double global_baseline = 0.0;
  std::size_t pool_size = 0;
  std::vector<std::string> notes;
};

inline IntraReport intra_cluster_similarity(const EmbeddingMatrix& m, const CuisineTags& tags) {
  const auto pool = resolve_pool(m, tags);
  if (pool.size() < 2) throw InvalidArgument("intra_cluster_similarity: pool needs at least 2 entities");
  const UnitRows unit(m);
  IntraReport rep;
  rep.pool_size = pool.size();
  double sum = 0.0;
  for (std::size_t c = 0; c < pool.clusters.size(); ++c) {
    const Mask bit = Mask{1} << c;
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool.masks[i] & bit) members.push_back(pool.rows[i]);
    }
    if (members.size() < 2) {
      rep.excluded.push_back(pool.clusters[c]);
      rep.notes.push_back("cuisine " + pool.clusters[c] + " has " + std::to_string(members.size()) +
                          " members; excluded");
      continue;
    }
    double s = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        s += unit.cos(members[i], members[j]);
        ++pairs;
      }
    }
    rep.cuisines.push_back({pool.clusters[c], members.size(), s / static_cast<double>(pairs)});
    sum += rep.cuisines.back().mean;
  }
  if (rep.cuisines.empty()) throw InvalidArgument("intra_cluster_similarity: no cuisine has 2 or more members");
  rep.overall_mean = sum / static_cast<double>(rep.cuisines.size());
  double g = 0.0;
  std::size_t gp = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      g += unit.cos(pool.rows[i], pool.rows[j]);
      ++gp;
    }
  }
  rep.global_baseline = g / static_cast<double>(gp);
  return rep;
}

// Wilcoxon signed-rank on per-cuisine (a - b), one-sided a > b, over the
// cuisines present in both.
inline StatResult paired_by_cuisine(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  std::vector<double> d;
  for (const auto& [c, x] : a) {
    auto it = b.find(c);
    if (it != b.end()) d.push_back(x - it->second);
  }
  if (d.empty()) throw InvalidArgument("paired comparison: no cuisine in common");
  return stats::wilcoxon_signed_rank(d, stats::Sidedness::one_sided);
}

inline std::map<std::string, double> by_cuisine(const IntraReport& r) {
  std::map<std::string, double> out;
  for (const auto& c : r.cuisines) out[c.cuisine] = c.mean;
  return out;
}

inline std::map<std::string, double> by_cuisine(const PurityReport& r) {
  std::map<std::string, double> out;
  for (const auto& c : r.cuisines) out[c.cuisine] = c.purity;
  return out;
}

// ---------------------------------------------------------------------------
// Distance to cuisine centroid

struct CentroidDistanceResult {
  StatResult mann_whitney;
  double cohens_d = 0.0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

// 1 - cos(vector, own-cuisine centroid) for every (member, cuisine) pair of
// cuisines with at least 2 members. Centroids are means of the raw vectors.
inline std::vector<double> centroid_distances(const EmbeddingMatrix& m, const CuisineTags& tags) {
  const auto pool = resolve_pool(m, tags);
  std::vector<double> out;
  for (std::size_t c = 0; c < pool.clusters.size(); ++c) {
    const Mask bit = Mask{1} << c;
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool.masks[i] & bit) members.push_back(pool.rows[i]);
    }
    if (members.size() < 2) continue;
    const auto centroid = mean_of_rows(m, members);
    for (auto r : members) out.push_back(1.0 - cosine(m.row(r), centroid));
  }
  return out;
}

// Compares side a against side b. U and d are computed on (b, a), so a
// positive d means side a sits closer to its centroids.
inline CentroidDistanceResult centroid_distance_test(const EmbeddingMatrix& ma, const CuisineTags& ta,
                                                     const EmbeddingMatrix& mb, const CuisineTags& tb) {
  const auto da = centroid_distances(ma, ta);
  const auto db = centroid_distances(mb, tb);
  if (da.empty() || db.empty()) {
    throw InvalidArgument("centroid_distance_test: side " + std::string(da.empty() ? "a" : "b") +
                          " has no cuisine with 2 or more tagged members");
  }
  CentroidDistanceResult r;
  r.mann_whitney = stats::mann_whitney_u(db, da, stats::Sidedness::two_sided);
  r.mean_a = stats::mean(da);
  r.mean_b = stats::mean(db);
  r.n_a = da.size();
  r.n_b = db.size();
  if (da == db) {
    r.cohens_d = 0.0;
  } else {
    r.cohens_d = stats::cohens_d(db, da);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Cuisine profiles

struct ProfileTable {
  std::vector<std::string> cuisines;
  std::vector<std::string> axes;
  std::vector<std::vector<double>> values;  // [cuisine][axis]
  std::vector<StatResult> axis_p;
  std::size_t permutations = 0;
  std::uint64_t seed = 0;
  std::string statistic = "population variance of cuisine-centroid projections";
};

namespace detail {

// Unit-normalized centroid per cuisine over tagged rows.
inline std::vector<std::vector<double>> unit_centroids(const EmbeddingMatrix& m, std::span<const std::size_t> rows,
                                                       std::span<const Mask> masks, std::size_t clusters) {
  std::vector<std::vector<double>> sums(clusters, std::vector<double>(m.dim(), 0.0));
  std::vector<std::size_t> counts(clusters, 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto v = m.row(rows[i]);
    for (std::size_t c = 0; c < clusters; ++c) {
      if (!(masks[i] & (Mask{1} << c))) continue;
      ++counts[c];
      for (std::size_t d = 0; d < v.size(); ++d) sums[c][d] += v[d];
    }
  }
  for (std::size_t c = 0; c < clusters; ++c) {
    const double len = norm(sums[c]);
    if (len == 0.0) throw InvalidArgument("cuisine centroid has zero norm");
    for (double& x : sums[c]) x /= len;
  }
  return sums;
}

}  // namespace detail

// Projection of each L2-normalized cuisine centroid onto each unit axis. Per
// axis p: tag sets are shuffled among tagged entities (substream (seed, i) for
// shuffle i, shared across axes) and the statistic is the variance of the
// cuisine projections, one-sided greater.
inline ProfileTable cuisine_profiles(const EmbeddingMatrix& m, const CuisineTags& tags,
                                     const std::vector<axes::Axis>& axis_list, std::size_t num_perm, Seed seed,
                                     unsigned workers = 1) {
  if (axis_list.empty()) throw InvalidArgument("cuisine_profiles: no axes");
  for (const auto& a : axis_list) {
    if (a.direction.size() != m.dim()) throw InvalidArgument("cuisine_profiles: axis " + a.name + " has wrong D");
  }
  const auto pool = resolve_pool(m, tags);
  std::vector<std::size_t> rows;
  std::vector<Mask> masks;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool.masks[i]) {
      rows.push_back(pool.rows[i]);
      masks.push_back(pool.masks[i]);
    }
  }
  const std::size_t nc = pool.clusters.size();
  for (std::size_t c = 0; c < nc; ++c) {
    const auto count = std::count_if(masks.begin(), masks.end(), [&](Mask x) { return x & (Mask{1} << c); });
    if (count < 2) {
      throw InvalidArgument("cuisine_profiles: cuisine " + pool.clusters[c] + " has " + std::to_string(count) +
                            " members (< 2)");
    }
  }
  auto project_all = [&](std::span<const Mask> ms) {
    const auto cents = detail::unit_centroids(m, rows, ms, nc);
    std::vector<std::vector<double>> v(nc, std::vector<double>(axis_list.size()));
    for (std::size_t c = 0; c < nc; ++c) {
      for (std::size_t a = 0; a < axis_list.size(); ++a) v[c][a] = dot(cents[c], axis_list[a].direction);
    }
    return v;
  };
  auto statistic = [&](std::span<const Mask> ms) {
    const auto v = project_all(ms);
    std::vector<double> out(axis_list.size());
    std::vector<double> col(nc);
    for (std::size_t a = 0; a < axis_list.size(); ++a) {
      for (std::size_t c = 0; c < nc; ++c) col[c] = v[c][a];
      out[a] = stats::population_variance(col);
    }
    return out;
  };
  ProfileTable t;
  t.cuisines = pool.clusters;
  for (const auto& a : axis_list) t.axes.push_back(a.name);
  t.values = project_all(masks);
  t.axis_p = stats::permutation_p_multi(masks, statistic, num_perm, seed, stats::Sidedness::one_sided, workers);
  t.permutations = num_perm;
  t.seed = seed.master;
  return t;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string purity_csv(const PurityReport& r) {
  std::string s = "cuisine,n,purity,baseline,lift\n";
  for (const auto& c : r.cuisines) {
    s += text::csv_escape(c.cuisine) + "," + std::to_string(c.n) + "," + text::fixed(c.purity, 6) + "," +
         text::fixed(c.baseline, 6) + "," + text::fixed(c.lift, 6) + "\n";
  }
  s += "mean,," + text::fixed(r.mean_purity, 6) + ",," + text::fixed(r.mean_lift, 6) + "\n";
  return s;
}

inline std::string subsampled_csv(const SubsampledPurity& r) {
  std::string s = "cuisine,iterations_present,n_mean,purity_mean,purity_ci_low,purity_ci_high,lift_mean,lift_ci_low,"
                  "lift_ci_high\n";
  for (const auto& c : r.cuisines) {
    s += text::csv_escape(c.cuisine) + "," + std::to_string(c.present) + "," + text::fixed(c.n_mean, 3) + "," +
         text::fixed(c.purity.mean, 6) + "," + text::fixed(c.purity.ci_low, 6) + "," +
         text::fixed(c.purity.ci_high, 6) + "," + text::fixed(c.lift.mean, 6) + "," + text::fixed(c.lift.ci_low, 6) +
         "," + text::fixed(c.lift.ci_high, 6) + "\n";
  }
  s += "mean," + std::to_string(r.iterations) + ",," + text::fixed(r.mean_purity.mean, 6) + "," +
       text::fixed(r.mean_purity.ci_low, 6) + "," + text::fixed(r.mean_purity.ci_high, 6) + "," +
       text::fixed(r.mean_lift.mean, 6) + "," + text::fixed(r.mean_lift.ci_low, 6) + "," +
       text::fixed(r.mean_lift.ci_high, 6) + "\n";
  return s;
}

inline std::string intra_csv(const IntraReport& r) {
  std::string s = "cuisine,n,mean_similarity\n";
  for (const auto& c : r.cuisines) {
    s += text::csv_escape(c.cuisine) + "," + std::to_string(c.n) + "," + text::fixed(c.mean, 6) + "\n";
  }
  s += "mean,," + text::fixed(r.overall_mean, 6) + "\n";
  s += "global_baseline," + std::to_string(r.pool_size) + "," + text::fixed(r.global_baseline, 6) + "\n";
  return s;
}

inline std::string profiles_csv(const ProfileTable& t) {
  std::string s = "cuisine";
  for (const auto& a : t.axes) s += "," + text::csv_escape(a);
  s += "\n";
  for (std::size_t c = 0; c < t.cuisines.size(); ++c) {
    s += text::csv_escape(t.cuisines[c]);
    for (double v : t.values[c]) s += "," + text::fixed(v, 6);
    s += "\n";
  }
  s += "p_value";
  for (const auto& p : t.axis_p) s += "," + text::fixed(p.p_value, 6);
  s += "\n";
  return s;
}

inline nlohmann::ordered_json to_json(const PurityReport& r) {
  nlohmann::ordered_json j;
  j["k"] = r.k;
  j["pool_size"] = r.pool_size;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& c : r.cuisines) {
    rows.push_back({{"cuisine", c.cuisine}, {"n", c.n}, {"purity", c.purity}, {"baseline", c.baseline},
                    {"lift", c.lift}});
  }
  j["cuisines"] = rows;
  j["mean_purity"] = r.mean_purity;
  j["mean_lift"] = r.mean_lift;
  j["notes"] = r.notes;
  return j;
}

inline nlohmann::ordered_json to_json(const SubsampledPurity& r) {
  auto summary = [](const stats::ResampleSummary& s) {
    return nlohmann::ordered_json{{"mean", s.mean}, {"sd", s.sd}, {"ci95", {s.ci_low, s.ci_high}}};
  };
  nlohmann::ordered_json j;
  j["k"] = r.k;
  j["pool_size"] = r.pool_size;
  j["target_size"] = r.target_size;
  j["iterations"] = r.iterations;
  j["seed"] = r.seed;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& c : r.cuisines) {
    nlohmann::ordered_json cj{{"cuisine", c.cuisine}, {"iterations_present", c.present}, {"n_mean", c.n_mean}};
    if (c.present) {
      cj["purity"] = summary(c.purity);
      cj["lift"] = summary(c.lift);
    }
    rows.push_back(cj);
  }
  j["cuisines"] = rows;
  j["mean_purity"] = summary(r.mean_purity);
  j["mean_lift"] = summary(r.mean_lift);
  return j;
}

inline nlohmann::ordered_json to_json(const IntraReport& r) {
  nlohmann::ordered_json j;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& c : r.cuisines) rows.push_back({{"cuisine", c.cuisine}, {"n", c.n}, {"mean", c.mean}});
  j["cuisines"] = rows;
  j["overall_mean"] = r.overall_mean;
  j["global_baseline"] = r.global_baseline;
  j["pool_size"] = r.pool_size;
  j["excluded"] = r.excluded;
  j["notes"] = r.notes;
  return j;
}

inline nlohmann::ordered_json to_json(const ProfileTable& t) {
  nlohmann::ordered_json j;
  j["axes"] = t.axes;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < t.cuisines.size(); ++c) {
    rows.push_back({{"cuisine", t.cuisines[c]}, {"projections", t.values[c]}});
  }
  j["cuisines"] = rows;
  auto ps = nlohmann::ordered_json::array();
  for (std::size_t a = 0; a < t.axes.size(); ++a) {
    ps.push_back({{"axis", t.axes[a]}, {"variance", t.axis_p[a].statistic}, {"p_value", t.axis_p[a].p_value}});
  }
  j["permutation"] = {{"n", t.permutations}, {"seed", t.seed}, {"statistic", t.statistic}, {"axes", ps}};
  return j;
}

inline nlohmann::ordered_json to_json(const CentroidDistanceResult& r) {
  nlohmann::ordered_json j;
  j["mean_distance_a"] = r.mean_a;
  j["mean_distance_b"] = r.mean_b;
  j["n_a"] = r.n_a;
  j["n_b"] = r.n_b;
  j["mann_whitney"] = axes::to_json(r.mann_whitney);
  j["cohens_d"] = r.cohens_d;
  return j;
}

}  // namespace flavoraxis::culture
