#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
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

namespace flavoraxis::crossval {

using axes::AxisKind;

enum class Metric { spearman_rho, cohens_d };

inline std::string to_string(Metric m) { return m == Metric::spearman_rho ? "spearman_rho" : "cohens_d"; }

struct CVConfig {
  std::size_t k = 10;
  std::size_t repeats = 20;
  Seed seed{0};
  // Defaults follow the label kind when unset.
  std::optional<AxisKind> kind;
  std::optional<Metric> metric;
  axes::AxisOptions options;
  unsigned workers = 1;
};

struct FoldResult {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::optional<double> value;
  std::string skip_reason;
};

struct CVReport {
  std::string dimension;
  AxisKind kind = AxisKind::ordinal_pole;
  Metric metric = Metric::spearman_rho;
  std::size_t k = 0;
  std::size_t repeats = 0;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::vector<FoldResult> folds;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  double in_sample = 0.0;
  double mean_fold_size = 0.0;
  bool high_variance = false;
  std::vector<std::string> notes;
};

// Mean test-fold size below which per-fold metrics are too noisy to read
// individually.
inline constexpr double kHighVarianceFoldSize = 10.0;

// Contiguous blocks of a seeded permutation of [0, n). The first n % k folds
// get one extra element.
inline std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k, Stream& rng) {
  if (k < 2) throw InvalidArgument("crossval: k must be at least 2");
  if (k > n) throw InvalidArgument("crossval: k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  std::vector<std::vector<std::size_t>> folds(k);
  const std::size_t base = n / k, extra = n % k;
  std::size_t at = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    folds[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(at), perm.begin() + static_cast<std::ptrdiff_t>(at + size));
    at += size;
  }
  return folds;
}

namespace detail {

// Metric on (labels, projections); nullopt + reason when the fold cannot
// support it.
inline std::optional<double> fold_metric(Metric metric, const std::vector<double>& values,
                                         const std::vector<double>& proj, std::string& reason) {
  if (metric == Metric::spearman_rho) {
    if (values.size() < 3) {
      reason = "test fold has " + std::to_string(values.size()) + " entities (< 3)";
      return std::nullopt;
    }
    if (!stats::has_two_distinct(values)) {
      reason = "test fold has a single label value";
      return std::nullopt;
    }
    if (!stats::has_two_distinct(proj)) {
      reason = "test projections are constant";
      return std::nullopt;
    }
    return stats::spearman(values, proj).statistic;
  }
  std::vector<double> yes, no;
  for (std::size_t i = 0; i < proj.size(); ++i) (values[i] == 1.0 ? yes : no).push_back(proj[i]);
  if (yes.size() < 2 || no.size() < 2) {
    reason = "test class sizes yes=" + std::to_string(yes.size()) + " no=" + std::to_string(no.size()) + " (< 2)";
    return std::nullopt;
  }
  try {
    return stats::cohens_d(yes, no);
  } catch (const InvalidArgument& e) {
    reason = e.what();
    return std::nullopt;
  }
}

}  // namespace detail

// Repeated k-fold evaluation. For each repeat r the cohort is permuted with
// substream (seed, r); each fold's axis is built from the other folds only and
// the metric is computed over every held-out entity.
inline CVReport cv_evaluate(const EmbeddingMatrix& m, const LabelSet& labels, const CVConfig& cfg) {
  if (cfg.repeats < 1) throw InvalidArgument("crossval: repeats must be at least 1");
  auto opt = cfg.options;
  const AxisKind kind = cfg.kind ? *cfg.kind : (opt.force_tercile ? AxisKind::tercile_centroid
                                                                   : axes::default_axis_kind(labels.kind));
  if (kind == AxisKind::tercile_centroid) opt.force_tercile = true;
  const Metric metric = cfg.metric ? *cfg.metric
                                   : (kind == AxisKind::binary_centroid ? Metric::cohens_d : Metric::spearman_rho);
  const auto c = axes::resolve(m, labels, opt);
  if (cfg.k > c.size()) {
    throw InvalidArgument("crossval: k=" + std::to_string(cfg.k) + " exceeds n=" + std::to_string(c.size()));
  }

  CVReport rep;
  rep.dimension = labels.dimension;
  rep.kind = kind;
  rep.metric = metric;
  rep.k = cfg.k;
  rep.repeats = cfg.repeats;
  rep.seed = cfg.seed.master;
  rep.n = c.size();
  rep.notes = c.notes;

  // Full-data axis: validates preconditions and gives the in-sample metric.
  std::vector<std::size_t> all(c.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  {
    const auto axis = axes::build_axis_from(m, c, all, kind);
    std::string reason;
    const auto v = detail::fold_metric(metric, c.values, axes::project_rows(m, axis, c.rows), reason);
    if (!v) throw InvalidArgument(labels.dimension + ": in-sample metric undefined: " + reason);
    rep.in_sample = *v;
  }

  std::vector<std::vector<FoldResult>> per_repeat(cfg.repeats);
  parallel_for(cfg.repeats, cfg.workers, [&](std::size_t r) {
    Stream rng(cfg.seed, r);
    const auto folds = make_folds(c.size(), cfg.k, rng);
    std::vector<char> in_test(c.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
      FoldResult fr;
      fr.repeat = r;
      fr.fold = f;
      std::fill(in_test.begin(), in_test.end(), 0);
      for (auto i : folds[f]) in_test[i] = 1;
      std::vector<std::size_t> train;
      for (std::size_t i = 0; i < c.size(); ++i) {
        if (!in_test[i]) train.push_back(i);
      }
      fr.n_train = train.size();
      fr.n_test = folds[f].size();
      std::optional<axes::Axis> axis;
      try {
        axis = axes::build_axis_from(m, c, train, kind);
      } catch (const InvalidArgument& e) {
        fr.skip_reason = std::string("training fold: ") + e.what();
      }
      if (axis) {
        std::vector<std::size_t> rows;
        std::vector<double> values;
        for (auto i : folds[f]) {
          rows.push_back(c.rows[i]);
          values.push_back(c.values[i]);
        }
        fr.value = detail::fold_metric(metric, values, axes::project_rows(m, *axis, rows), fr.skip_reason);
      }
      per_repeat[r].push_back(std::move(fr));
    }
  });

  std::vector<double> values;
  for (auto& fs : per_repeat) {
    for (auto& fr : fs) {
      if (fr.value) values.push_back(*fr.value);
      rep.folds.push_back(std::move(fr));
    }
  }
  rep.evaluated = values.size();
  rep.skipped = rep.folds.size() - values.size();
  if (values.empty()) throw InvalidArgument(labels.dimension + ": every fold was skipped");
  rep.mean = stats::mean(values);
  rep.sd = std::sqrt(stats::population_variance(values));
  rep.mean_fold_size = static_cast<double>(c.size()) / static_cast<double>(cfg.k);
  rep.high_variance = rep.mean_fold_size < kHighVarianceFoldSize;
  if (rep.high_variance) {
    rep.notes.push_back("mean test fold size " + text::fixed(rep.mean_fold_size, 1) + " < " +
                        text::fixed(kHighVarianceFoldSize, 0) + ": per-fold metrics are high variance");
  }
  rep.notes.push_back("held-out metric computed over all test entities, pole members included");
  return rep;
}

inline nlohmann::ordered_json to_json(const CVReport& r) {
  nlohmann::ordered_json j;
  j["dimension"] = r.dimension;
  j["axis_kind"] = axes::to_string(r.kind);
  j["metric"] = to_string(r.metric);
  j["k"] = r.k;
  j["repeats"] = r.repeats;
  j["seed"] = r.seed;
  j["n"] = r.n;
  j["mean"] = r.mean;
  j["sd"] = r.sd;
  j["in_sample"] = r.in_sample;
  j["evaluated"] = r.evaluated;
  j["skipped"] = r.skipped;
  j["mean_fold_size"] = r.mean_fold_size;
  j["high_variance"] = r.high_variance;
  auto folds = nlohmann::ordered_json::array();
  for (const auto& f : r.folds) {
    nlohmann::ordered_json fj;
    fj["repeat"] = f.repeat;
    fj["fold"] = f.fold;
    fj["n_train"] = f.n_train;
    fj["n_test"] = f.n_test;
    if (f.value) fj["value"] = *f.value;
    else fj["skipped"] = f.skip_reason;
    folds.push_back(fj);
  }
  j["folds"] = folds;
  j["notes"] = r.notes;
  return j;
}

inline std::string folds_csv(const CVReport& r) {
  std::string s = "repeat,fold,n_train,n_test,value,skip_reason\n";
  for (const auto& f : r.folds) {
    s += std::to_string(f.repeat) + "," + std::to_string(f.fold) + "," + std::to_string(f.n_train) + "," +
         std::to_string(f.n_test) + "," + (f.value ? text::round_trip(*f.value) : std::string()) + "," +
         text::csv_escape(f.skip_reason) + "\n";
  }
  return s;
}

}  // namespace flavoraxis::crossval
