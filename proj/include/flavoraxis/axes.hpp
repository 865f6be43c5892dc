#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "flavoraxis/corpus.hpp"
#include "flavoraxis/error.hpp"
#include "flavoraxis/random.hpp"
#include "flavoraxis/stats.hpp"

namespace flavoraxis::axes {

using stats::StatResult;

enum class AxisKind { ordinal_pole, binary_centroid, tercile_centroid };

inline std::string to_string(AxisKind k) {
  switch (k) {
    case AxisKind::ordinal_pole: return "ordinal_pole";
    case AxisKind::binary_centroid: return "binary_centroid";
    case AxisKind::tercile_centroid: return "tercile_centroid";
  }
  return "?";
}

inline AxisKind axis_kind_from(const std::string& s) {
  if (s == "ordinal" || s == "ordinal_pole") return AxisKind::ordinal_pole;
  if (s == "binary" || s == "binary_centroid") return AxisKind::binary_centroid;
  if (s == "tercile" || s == "tercile_centroid") return AxisKind::tercile_centroid;
  throw InvalidArgument("unknown axis kind '" + s + "'");
}

inline AxisKind default_axis_kind(LabelKind k) {
  switch (k) {
    case LabelKind::ordinal: return AxisKind::ordinal_pole;
    case LabelKind::binary: return AxisKind::binary_centroid;
    case LabelKind::numeric: return AxisKind::tercile_centroid;
    default: throw InvalidArgument("no axis kind for " + to_string(k) + " labels");
  }
}

struct PoleSpec {
  std::string low_definition;
  std::string high_definition;
  std::vector<std::int64_t> low_ids;
  std::vector<std::int64_t> high_ids;
  // Tercile cuts: the low pole is sorted positions [0, low_cut), the high
  // pole is [high_cut, n).
  std::optional<std::size_t> low_cut;
  std::optional<std::size_t> high_cut;
};

struct Axis {
  std::string name;
  std::vector<double> direction;
  AxisKind kind = AxisKind::ordinal_pole;
  PoleSpec poles;
  std::string provenance = "full";
};

struct AxisOptions {
  // For numeric labels: keep values > 0 only and use log10(value).
  bool log10 = false;
  // Build a tercile axis even for ordinal labels (latitude, Scoville levels).
  bool force_tercile = false;
};

// Labels resolved against a matrix: one numeric value per labeled row.
// Ordinal values are level ranks, binary values are 1 (yes) / 0 (no).
struct Cohort {
  std::string dimension;
  LabelKind kind = LabelKind::ordinal;
  std::size_t levels = 0;
  std::vector<std::string> scale;
  std::vector<std::size_t> rows;
  std::vector<double> values;
  std::vector<std::string> notes;

  std::size_t size() const { return rows.size(); }
};

// Rows follow matrix order so every downstream computation is deterministic.
inline Cohort resolve(const EmbeddingMatrix& m, const LabelSet& labels, const AxisOptions& opt = {}) {
  Cohort c;
  c.dimension = labels.dimension;
  c.kind = labels.kind;
  c.scale = labels.scale;
  c.levels = labels.scale.size();
  if (labels.kind != LabelKind::ordinal && labels.kind != LabelKind::binary && labels.kind != LabelKind::numeric) {
    throw InvalidArgument(labels.dimension + ": axes need ordinal, binary or numeric labels");
  }
  std::vector<std::pair<std::size_t, double>> pts;
  std::size_t dropped = 0;
  for (const auto& [name, v] : labels.labels) {
    auto row = m.find_name(name);
    if (!row) throw DataError(labels.dimension + ": label for unknown entity " + name);
    double x = labels.numeric_value(v);
    if (opt.log10 && labels.kind == LabelKind::numeric) {
      if (!(x > 0.0)) {
        ++dropped;
        continue;
      }
      x = std::log10(x);
    }
    pts.emplace_back(*row, x);
  }
  std::sort(pts.begin(), pts.end());
  for (auto& [r, x] : pts) {
    c.rows.push_back(r);
    c.values.push_back(x);
  }
  if (dropped) c.notes.push_back("excluded " + std::to_string(dropped) + " non-positive values before log10");
  if (!labels.excluded.empty()) c.notes.push_back("excluded " + std::to_string(labels.excluded.size()) + " N/A labels");
  return c;
}

// Labels restricted to entities present in `m`.
inline LabelSet restrict_labels(const LabelSet& labels, const EmbeddingMatrix& m) {
  LabelSet out = labels;
  out.labels.clear();
  for (const auto& [name, v] : labels.labels) {
    if (m.find_name(name)) out.labels.emplace(name, v);
  }
  return out;
}

namespace detail {

inline std::vector<double> centroid(const EmbeddingMatrix& m, const std::vector<std::size_t>& rows) {
  return mean_of_rows(m, rows);
}

inline std::string level_name(const Cohort& c, std::size_t level) {
  return level < c.scale.size() ? c.scale[level] : std::to_string(level);
}

}  // namespace detail

// Axis from the cohort members selected by `members` (indices into the cohort).
// Used for full-data axes and for training folds alike.
inline Axis build_axis_from(const EmbeddingMatrix& m, const Cohort& c, std::span<const std::size_t> members,
                            AxisKind kind) {
  Axis axis;
  axis.name = c.dimension;
  axis.kind = kind;
  std::vector<std::size_t> low_rows, high_rows;
  auto take = [&](std::size_t idx, bool high) {
    (high ? high_rows : low_rows).push_back(c.rows[idx]);
    (high ? axis.poles.high_ids : axis.poles.low_ids).push_back(m.entity(c.rows[idx]).id);
  };
  switch (kind) {
    case AxisKind::ordinal_pole: {
      if (c.kind != LabelKind::ordinal) throw InvalidArgument(c.dimension + ": ordinal axis needs ordinal labels");
      const double top = static_cast<double>(c.levels - 1);
      for (auto i : members) {
        if (c.values[i] == 0.0) take(i, false);
        else if (c.values[i] == top) take(i, true);
      }
      axis.poles.low_definition = "level " + detail::level_name(c, 0);
      axis.poles.high_definition = "level " + detail::level_name(c, c.levels - 1);
      break;
    }
    case AxisKind::binary_centroid: {
      if (c.kind != LabelKind::binary) throw InvalidArgument(c.dimension + ": binary axis needs yes/no labels");
      for (auto i : members) take(i, c.values[i] == 1.0);
      axis.poles.low_definition = "no";
      axis.poles.high_definition = "yes";
      break;
    }
    case AxisKind::tercile_centroid: {
      if (members.size() < 6) {
        throw InvalidArgument(c.dimension + ": tercile axis needs at least 6 values, got " +
                              std::to_string(members.size()));
      }
      std::vector<std::size_t> order(members.begin(), members.end());
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (c.values[a] != c.values[b]) return c.values[a] < c.values[b];
        return m.entity(c.rows[a]).id < m.entity(c.rows[b]).id;
      });
      const std::size_t t = order.size() / 3;
      for (std::size_t k = 0; k < t; ++k) take(order[k], false);
      for (std::size_t k = order.size() - t; k < order.size(); ++k) take(order[k], true);
      axis.poles.low_cut = t;
      axis.poles.high_cut = order.size() - t;
      axis.poles.low_definition = "bottom tercile (" + std::to_string(t) + " of " + std::to_string(order.size()) + ")";
      axis.poles.high_definition = "top tercile (" + std::to_string(t) + " of " + std::to_string(order.size()) + ")";
      break;
    }
  }
  if (low_rows.empty() || high_rows.empty()) {
    throw InvalidArgument(c.dimension + ": empty pole (" + std::to_string(low_rows.size()) + " low, " +
                          std::to_string(high_rows.size()) + " high)");
  }
  const auto lo = detail::centroid(m, low_rows);
  const auto hi = detail::centroid(m, high_rows);
  axis.direction.resize(m.dim());
  for (std::size_t d = 0; d < m.dim(); ++d) axis.direction[d] = hi[d] - lo[d];
  const double len = norm(axis.direction);
  if (!(len > 0.0)) throw InvalidArgument(c.dimension + ": pole centroids are identical");
  for (double& x : axis.direction) x /= len;
  return axis;
}

inline Axis build_axis(const EmbeddingMatrix& m, const LabelSet& labels, AxisKind kind, const AxisOptions& opt = {}) {
  const auto c = resolve(m, labels, opt);
  std::vector<std::size_t> all(c.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return build_axis_from(m, c, all, kind);
}

inline std::vector<double> project_rows(const EmbeddingMatrix& m, const Axis& axis, std::span<const std::size_t> rows) {
  if (axis.direction.size() != m.dim()) {
    throw InvalidArgument("project: axis dimension " + std::to_string(axis.direction.size()) +
                          " does not match embeddings dimension " + std::to_string(m.dim()));
  }
  std::vector<double> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(dot(m.row(r), axis.direction));
  return out;
}

struct ProjectionSet {
  std::string axis;
  std::map<std::int64_t, double> values;
};

inline ProjectionSet project(const EmbeddingMatrix& m, const Axis& axis, std::span<const std::int64_t> ids) {
  ProjectionSet ps{axis.name, {}};
  std::vector<std::size_t> rows;
  for (auto id : ids) rows.push_back(m.require_id(id));
  const auto p = project_rows(m, axis, rows);
  for (std::size_t i = 0; i < ids.size(); ++i) ps.values[ids[i]] = p[i];
  return ps;
}

// ---------------------------------------------------------------------------
// Dimension evaluation

struct DimensionReport {
  std::string dimension;
  std::string analysis;
  std::size_t n = 0;
  std::size_t n_low = 0;
  std::size_t n_high = 0;
  std::optional<StatResult> spearman;
  std::optional<StatResult> mann_whitney;
  std::optional<double> cohens_d;
  std::optional<Axis> axis;
  std::vector<std::string> notes;
};

inline std::size_t distinct_count(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

inline DimensionReport evaluate_ordinal(const EmbeddingMatrix& m, const LabelSet& labels, const AxisOptions& opt = {}) {
  const auto c = resolve(m, labels, opt);
  if (c.size() < 3) throw InvalidArgument(labels.dimension + ": need at least 3 labeled entities");
  if (distinct_count(c.values) < 2) throw InvalidArgument(labels.dimension + ": need at least 2 distinct levels");
  std::vector<std::size_t> all(c.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto kind = opt.force_tercile ? AxisKind::tercile_centroid : AxisKind::ordinal_pole;
  DimensionReport r;
  r.dimension = labels.dimension;
  r.analysis = kind == AxisKind::ordinal_pole ? "ordinal" : "tercile";
  r.axis = build_axis_from(m, c, all, kind);
  r.n = c.size();
  r.n_low = r.axis->poles.low_ids.size();
  r.n_high = r.axis->poles.high_ids.size();
  const auto p = project_rows(m, *r.axis, c.rows);
  r.spearman = stats::spearman(c.values, p);
  r.notes = c.notes;
  return r;
}

inline DimensionReport evaluate_binary(const EmbeddingMatrix& m, const LabelSet& labels) {
  const auto c = resolve(m, labels);
  if (c.kind != LabelKind::binary) throw InvalidArgument(labels.dimension + ": binary evaluation needs yes/no labels");
  std::vector<std::size_t> all(c.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto yes_count = static_cast<std::size_t>(std::count(c.values.begin(), c.values.end(), 1.0));
  if (yes_count < 2 || c.size() - yes_count < 2) {
    throw InvalidArgument(labels.dimension + ": each class needs at least 2 members (yes=" + std::to_string(yes_count) +
                          ", no=" + std::to_string(c.size() - yes_count) + ")");
  }
  DimensionReport r;
  r.dimension = labels.dimension;
  r.analysis = "binary";
  r.axis = build_axis_from(m, c, all, AxisKind::binary_centroid);
  r.n = c.size();
  r.n_low = c.size() - yes_count;
  r.n_high = yes_count;
  const auto p = project_rows(m, *r.axis, c.rows);
  std::vector<double> yes, no;
  for (std::size_t i = 0; i < p.size(); ++i) (c.values[i] == 1.0 ? yes : no).push_back(p[i]);
  r.mann_whitney = stats::mann_whitney_u(yes, no);
  r.cohens_d = stats::cohens_d(yes, no);
  r.notes = c.notes;
  return r;
}

// Tercile axis from measured values; Spearman of values vs projection.
inline DimensionReport evaluate_tercile(const EmbeddingMatrix& m, const LabelSet& labels, const AxisOptions& opt = {}) {
  AxisOptions o = opt;
  o.force_tercile = true;
  const auto c = resolve(m, labels, o);
  if (distinct_count(c.values) < 2) throw InvalidArgument(labels.dimension + ": need at least 2 distinct values");
  std::vector<std::size_t> all(c.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  DimensionReport r;
  r.dimension = labels.dimension;
  r.analysis = "tercile";
  r.axis = build_axis_from(m, c, all, AxisKind::tercile_centroid);
  r.n = c.size();
  r.n_low = r.axis->poles.low_ids.size();
  r.n_high = r.axis->poles.high_ids.size();
  const auto p = project_rows(m, *r.axis, c.rows);
  r.spearman = stats::spearman(c.values, p);
  r.notes = c.notes;
  return r;
}

// Dispatch on label kind: ordinal -> evaluate_ordinal, binary -> evaluate_binary,
// numeric -> evaluate_tercile.
inline DimensionReport evaluate(const EmbeddingMatrix& m, const LabelSet& labels, const AxisOptions& opt = {}) {
  switch (labels.kind) {
    case LabelKind::ordinal: return evaluate_ordinal(m, labels, opt);
    case LabelKind::binary: return evaluate_binary(m, labels);
    case LabelKind::numeric: return evaluate_tercile(m, labels, opt);
    default: throw InvalidArgument(labels.dimension + ": cannot evaluate " + to_string(labels.kind) + " labels");
  }
}

// Axis from classifier labels, Spearman of the projection against measured
// values over the entities that have a measurement.
inline DimensionReport evaluate_measured(const EmbeddingMatrix& m, const LabelSet& axis_labels,
                                         const LabelSet& measured, const AxisOptions& opt = {}) {
  if (measured.kind != LabelKind::numeric) throw InvalidArgument(measured.dimension + ": measurements must be numeric");
  const auto kind = opt.force_tercile ? AxisKind::tercile_centroid : default_axis_kind(axis_labels.kind);
  const auto axis = build_axis(m, axis_labels, kind, opt);
  AxisOptions mopt;
  const auto c = resolve(m, measured, mopt);
  if (c.size() < 3) throw InvalidArgument(measured.dimension + ": need at least 3 measured entities");
  DimensionReport r;
  r.dimension = axis_labels.dimension + "~" + measured.dimension;
  r.analysis = "measured";
  r.axis = axis;
  r.n = c.size();
  r.n_low = axis.poles.low_ids.size();
  r.n_high = axis.poles.high_ids.size();
  r.spearman = stats::spearman(c.values, project_rows(m, axis, c.rows));
  r.notes = c.notes;
  return r;
}

// Permutation test of the whole evaluation: each shuffle reassigns labels
// across the labeled rows, rebuilds the axis and recomputes the metric (rho for
// ordinal/tercile, d for binary). One-sided greater, because an axis built from
// the same labels always leans toward a positive in-sample metric.
inline StatResult permutation_test(const EmbeddingMatrix& m, const LabelSet& labels, std::size_t num_shuffles,
                                   Seed seed, const AxisOptions& opt = {}, unsigned workers = 1) {
  const auto c = resolve(m, labels, opt);
  const auto kind = opt.force_tercile ? AxisKind::tercile_centroid : default_axis_kind(labels.kind);
  std::vector<std::size_t> all(c.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto metric = [&](std::span<const double> values) {
    Cohort s = c;
    s.values.assign(values.begin(), values.end());
    const auto axis = build_axis_from(m, s, all, kind);
    const auto p = project_rows(m, axis, s.rows);
    if (kind == AxisKind::binary_centroid) {
      std::vector<double> yes, no;
      for (std::size_t i = 0; i < p.size(); ++i) (s.values[i] == 1.0 ? yes : no).push_back(p[i]);
      return stats::cohens_d(yes, no);
    }
    return stats::spearman(s.values, p).statistic;
  };
  return stats::permutation_p(c.values, metric, num_shuffles, seed, stats::Sidedness::one_sided, workers);
}

// ---------------------------------------------------------------------------
// Per-entity categorical delta

struct CategoricalDeltaReport {
  std::string dimension;
  std::vector<std::pair<std::string, double>> deltas;
  std::optional<StatResult> wilcoxon;
  std::optional<double> cohens_d;
  std::vector<std::string> excluded;
  std::vector<std::string> notes;
};

// delta_i = mean cosine to the other members of i's group minus mean cosine to
// labeled entities outside the group. Entities whose group is a singleton are
// excluded. Wilcoxon is one-sided (deltas > 0); d is the one-sample variant.
inline CategoricalDeltaReport categorical_delta(const EmbeddingMatrix& m, const LabelSet& groups) {
  if (groups.kind != LabelKind::categorical) throw InvalidArgument(groups.dimension + ": categorical labels required");
  std::vector<std::size_t> rows;
  std::vector<std::string> group_of;
  std::vector<std::pair<std::size_t, std::string>> pts;
  for (const auto& [name, v] : groups.labels) {
    auto r = m.find_name(name);
    if (!r) throw DataError(groups.dimension + ": label for unknown entity " + name);
    pts.emplace_back(*r, std::get<std::string>(v));
  }
  std::sort(pts.begin(), pts.end());
  std::map<std::string, std::size_t> sizes;
  for (auto& [r, g] : pts) {
    rows.push_back(r);
    group_of.push_back(g);
    ++sizes[g];
  }
  const std::size_t n = rows.size();
  std::vector<std::vector<double>> unit(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto v = m.row(rows[i]);
    const double len = norm(v);
    if (len == 0.0) throw InvalidArgument("categorical_delta: zero-norm vector for " + m.entity(rows[i]).name);
    unit[i].assign(v.begin(), v.end());
    for (double& x : unit[i]) x /= len;
  }
  CategoricalDeltaReport rep;
  rep.dimension = groups.dimension;
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[group_of[i]] < 2) {
      rep.excluded.push_back(m.entity(rows[i]).name);
      continue;
    }
    any = true;
    double within = 0.0, cross = 0.0;
    std::size_t nw = 0, nc = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double c = clamp_unit(dot(unit[i], unit[j]));
      if (group_of[j] == group_of[i]) {
        within += c;
        ++nw;
      } else {
        cross += c;
        ++nc;
      }
    }
    if (nc == 0) throw InvalidArgument("categorical_delta: all entities share one group");
    rep.deltas.emplace_back(m.entity(rows[i]).name, within / nw - cross / nc);
  }
  if (!any) throw InvalidArgument("categorical_delta: every group is a singleton");
  if (!rep.excluded.empty()) {
    rep.notes.push_back("excluded " + std::to_string(rep.excluded.size()) + " entities in singleton groups");
  }
  std::vector<double> d;
  for (auto& [name, x] : rep.deltas) d.push_back(x);
  try {
    rep.wilcoxon = stats::wilcoxon_signed_rank(d, stats::Sidedness::one_sided);
  } catch (const InvalidArgument& e) {
    rep.notes.push_back(std::string("no signed-rank test: ") + e.what());
  }
  try {
    rep.cohens_d = stats::cohens_d_one_sample(d);
  } catch (const InvalidArgument& e) {
    rep.notes.push_back(std::string("no effect size: ") + e.what());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Axis geometry

// Classical MDS: double-centre the squared dissimilarities and keep the top
// `dims` eigenvectors scaled by sqrt(eigenvalue). Each eigenvector's sign is
// fixed so its largest-magnitude component is positive.
inline std::vector<std::vector<double>> classical_mds(const std::vector<std::vector<double>>& dissimilarity,
                                                      std::size_t dims = 2) {
  const std::size_t n = dissimilarity.size();
  Eigen::MatrixXd d2(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (dissimilarity[i].size() != n) throw InvalidArgument("classical_mds: matrix must be square");
    for (std::size_t j = 0; j < n; ++j) d2(i, j) = dissimilarity[i][j] * dissimilarity[i][j];
  }
  const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  const Eigen::MatrixXd b = -0.5 * j * d2 * j;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
  std::vector<std::vector<double>> coords(n, std::vector<double>(dims, 0.0));
  for (std::size_t k = 0; k < dims && k < n; ++k) {
    const Eigen::Index col = static_cast<Eigen::Index>(n - 1 - k);
    const double lambda = std::max(0.0, es.eigenvalues()(col));
    Eigen::VectorXd v = es.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    for (std::size_t i = 0; i < n; ++i) coords[i][k] = v(static_cast<Eigen::Index>(i)) * std::sqrt(lambda);
  }
  return coords;
}

struct PartialRow {
  std::string axis;
  std::size_t n = 0;
  double raw_rho = 0.0;
  double partial_rho = 0.0;
  double partial_p = 1.0;
};

struct GeometryReport {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cosines;
  std::vector<std::vector<double>> layout;
  std::vector<PartialRow> partial;
  std::string dissimilarity = "1 - cos";
};

struct GeometryInput {
  Axis axis;
  std::optional<LabelSet> labels;
  AxisOptions options;
};

inline GeometryReport axis_geometry(const EmbeddingMatrix& m, const std::vector<GeometryInput>& inputs) {
  if (inputs.size() < 2) throw InvalidArgument("axis_geometry: need at least 2 axes");
  const std::size_t k = inputs.size();
  GeometryReport g;
  g.cosines.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    if (inputs[i].axis.direction.size() != m.dim()) throw InvalidArgument("axis_geometry: axes must share D");
    g.names.push_back(inputs[i].axis.name);
    g.cosines[i][i] = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double c = cosine(inputs[i].axis.direction, inputs[j].axis.direction);
      g.cosines[i][j] = c;
      g.cosines[j][i] = c;
    }
  }
  std::vector<std::vector<double>> diss(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) diss[i][j] = i == j ? 0.0 : 1.0 - g.cosines[i][j];
  }
  g.layout = classical_mds(diss, 2);

  for (std::size_t i = 0; i < k; ++i) {
    const auto& in = inputs[i];
    if (!in.labels || (in.labels->kind != LabelKind::ordinal && in.labels->kind != LabelKind::numeric)) continue;
    const auto c = resolve(m, *in.labels, in.options);
    const auto target = project_rows(m, in.axis, c.rows);
    std::vector<std::vector<double>> covariates;
    for (std::size_t j = 0; j < k; ++j) {
      if (j != i) covariates.push_back(project_rows(m, inputs[j].axis, c.rows));
    }
    const auto resid = stats::residualize(target, covariates);
    PartialRow row;
    row.axis = in.axis.name;
    row.n = c.size();
    row.raw_rho = stats::spearman(c.values, target).statistic;
    const auto partial = stats::spearman(c.values, resid);
    row.partial_rho = partial.statistic;
    row.partial_p = partial.p_value;
    g.partial.push_back(row);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Paired similarity

struct PairedSimilarity {
  std::vector<double> cosines;
  double mean = 0.0;
  double baseline = 0.0;
  double lift = 0.0;
  std::size_t baseline_pairs = 0;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kBaselinePairsPerPair = 100;

inline PairedSimilarity paired_similarity(const EmbeddingMatrix& m,
                                          const std::vector<std::pair<std::int64_t, std::int64_t>>& pairs, Seed seed) {
  if (pairs.empty()) throw InvalidArgument("paired_similarity: empty pair list");
  if (m.size() < 2) throw InvalidArgument("paired_similarity: need at least 2 entities");
  PairedSimilarity r;
  r.seed = seed.master;
  for (const auto& [a, b] : pairs) r.cosines.push_back(cosine(m.row(m.require_id(a)), m.row(m.require_id(b))));
  r.mean = stats::mean(r.cosines);
  Stream rng(seed, 0);
  const std::size_t draws = pairs.size() * kBaselinePairsPerPair;
  double sum = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto a = rng.below(m.size());
    auto b = rng.below(m.size() - 1);
    if (b >= a) ++b;
    sum += cosine(m.row(a), m.row(b));
  }
  r.baseline = sum / static_cast<double>(draws);
  r.baseline_pairs = draws;
  r.lift = r.mean / r.baseline;
  return r;
}

// ---------------------------------------------------------------------------
// Pole axis / perpendicular plane in 3D coordinates

using Vec3 = std::array<double, 3>;

struct PolePlaneProjection {
  Vec3 origin{};  // savoury centroid
  Vec3 axis{};    // unit vector toward the sweet centroid
  Vec3 basis_u{};
  Vec3 basis_v{};
  std::map<std::int64_t, double> along;
  std::map<std::int64_t, std::array<double, 2>> planar;
};

namespace detail {

inline double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline Vec3 cross3(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline Vec3 unit3(Vec3 a) {
  const double l = std::sqrt(dot3(a, a));
  for (double& x : a) x /= l;
  return a;
}

inline Vec3 centroid3(const std::map<std::int64_t, Vec3>& coords, const std::vector<std::int64_t>& ids) {
  Vec3 c{0, 0, 0};
  for (auto id : ids) {
    auto it = coords.find(id);
    if (it == coords.end()) throw DataError("pole_plane_projection: no coordinates for id " + std::to_string(id));
    for (int d = 0; d < 3; ++d) c[d] += it->second[d];
  }
  for (double& x : c) x /= static_cast<double>(ids.size());
  return c;
}

}  // namespace detail

inline PolePlaneProjection pole_plane_projection(const std::map<std::int64_t, Vec3>& coords,
                                                 const std::vector<std::int64_t>& sweet_ids,
                                                 const std::vector<std::int64_t>& savoury_ids) {
  if (sweet_ids.empty() || savoury_ids.empty()) throw InvalidArgument("pole_plane_projection: empty pole set");
  const Vec3 sweet = detail::centroid3(coords, sweet_ids);
  const Vec3 savoury = detail::centroid3(coords, savoury_ids);
  Vec3 diff{sweet[0] - savoury[0], sweet[1] - savoury[1], sweet[2] - savoury[2]};
  if (detail::dot3(diff, diff) == 0.0) throw InvalidArgument("pole_plane_projection: pole centroids coincide");
  PolePlaneProjection p;
  p.origin = savoury;
  p.axis = detail::unit3(diff);
  // Reference direction: the coordinate axis least aligned with the pole axis.
  std::size_t ref = 0;
  for (std::size_t d = 1; d < 3; ++d) {
    if (std::abs(p.axis[d]) < std::abs(p.axis[ref])) ref = d;
  }
  Vec3 e{0, 0, 0};
  e[ref] = 1.0;
  p.basis_u = detail::unit3(detail::cross3(p.axis, e));
  p.basis_v = detail::cross3(p.axis, p.basis_u);
  for (const auto& [id, x] : coords) {
    const Vec3 rel{x[0] - savoury[0], x[1] - savoury[1], x[2] - savoury[2]};
    p.along[id] = detail::dot3(rel, p.axis);
    p.planar[id] = {detail::dot3(rel, p.basis_u), detail::dot3(rel, p.basis_v)};
  }
  return p;
}

// CSV `id,x,y,z`.
inline std::map<std::int64_t, Vec3> parse_coords3d(std::string_view csv) {
  std::map<std::int64_t, Vec3> out;
  const auto rows = text::lines(csv);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto f = text::csv_fields(rows[i]);
    const std::string where = "coords line " + std::to_string(i + 1);
    if (f.size() != 4) throw DataError(where + ": expected id,x,y,z");
    auto id = text::parse_int(f[0]);
    auto x = text::parse_double(f[1]), y = text::parse_double(f[2]), z = text::parse_double(f[3]);
    if (!id || !x || !y || !z) throw DataError(where + ": unparseable value");
    if (!out.emplace(*id, Vec3{*x, *y, *z}).second) throw DataError(where + ": duplicate id");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subset / complement split

// Evaluates `labels` (or, with `measured`, the labels' axis against the
// measurements) separately on the subset and its complement. Axes are rebuilt
// on each side.
inline std::pair<DimensionReport, DimensionReport> subset_report(const EmbeddingMatrix& m, const LabelSet& labels,
                                                                 const std::optional<LabelSet>& measured,
                                                                 const std::set<std::int64_t>& subset,
                                                                 const AxisOptions& opt = {}) {
  std::vector<std::size_t> in, out;
  for (std::size_t r = 0; r < m.size(); ++r) (subset.count(m.entity(r).id) ? in : out).push_back(r);
  auto run = [&](const std::vector<std::size_t>& rows, const char* side) {
    const auto sub = m.select(rows);
    try {
      auto rep = measured ? evaluate_measured(sub, restrict_labels(labels, sub), restrict_labels(*measured, sub), opt)
                          : evaluate(sub, restrict_labels(labels, sub), opt);
      rep.notes.push_back(std::string(side) + " of " + std::to_string(m.size()) + " entities: " +
                          std::to_string(rows.size()));
      return rep;
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(std::string(side) + ": " + e.what());
    }
  };
  return {run(in, "subset"), run(out, "complement")};
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json to_json(const StatResult& s) {
  nlohmann::ordered_json j;
  j["statistic"] = s.statistic;
  j["p_value"] = s.p_value;
  j["n"] = s.n;
  if (s.m) j["m"] = s.m;
  j["method"] = stats::to_string(s.method);
  j["sidedness"] = stats::to_string(s.sidedness);
  if (!s.notes.empty()) j["notes"] = s.notes;
  return j;
}

inline nlohmann::ordered_json to_json(const Axis& a, bool with_direction = false) {
  nlohmann::ordered_json j;
  j["name"] = a.name;
  j["kind"] = to_string(a.kind);
  j["provenance"] = a.provenance;
  j["low"] = {{"definition", a.poles.low_definition}, {"ids", a.poles.low_ids}};
  j["high"] = {{"definition", a.poles.high_definition}, {"ids", a.poles.high_ids}};
  if (a.poles.low_cut) j["tercile_cuts"] = {*a.poles.low_cut, *a.poles.high_cut};
  if (with_direction) j["direction"] = a.direction;
  return j;
}

inline nlohmann::ordered_json to_json(const DimensionReport& r) {
  nlohmann::ordered_json j;
  j["dimension"] = r.dimension;
  j["analysis"] = r.analysis;
  j["n"] = r.n;
  j["n_low"] = r.n_low;
  j["n_high"] = r.n_high;
  if (r.spearman) j["spearman"] = to_json(*r.spearman);
  if (r.mann_whitney) j["mann_whitney"] = to_json(*r.mann_whitney);
  if (r.cohens_d) j["cohens_d"] = *r.cohens_d;
  if (r.axis) j["axis"] = to_json(*r.axis);
  j["notes"] = r.notes;
  return j;
}

inline std::string dimension_csv_header() {
  return "dimension,analysis,n,n_low,n_high,rho,rho_p,U,U_p,cohens_d\n";
}

inline std::string dimension_csv_row(const DimensionReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? text::round_trip(*v) : std::string(); };
  std::string s = text::csv_escape(r.dimension) + "," + r.analysis + "," + std::to_string(r.n) + "," +
                  std::to_string(r.n_low) + "," + std::to_string(r.n_high) + ",";
  s += opt(r.spearman ? std::optional<double>(r.spearman->statistic) : std::nullopt) + ",";
  s += opt(r.spearman ? std::optional<double>(r.spearman->p_value) : std::nullopt) + ",";
  s += opt(r.mann_whitney ? std::optional<double>(r.mann_whitney->statistic) : std::nullopt) + ",";
  s += opt(r.mann_whitney ? std::optional<double>(r.mann_whitney->p_value) : std::nullopt) + ",";
  s += opt(r.cohens_d) + "\n";
  return s;
}

inline nlohmann::ordered_json to_json(const CategoricalDeltaReport& r) {
  nlohmann::ordered_json j;
  j["dimension"] = r.dimension;
  j["analysis"] = "categorical_delta";
  j["n"] = r.deltas.size();
  if (r.wilcoxon) j["wilcoxon"] = to_json(*r.wilcoxon);
  if (r.cohens_d) j["cohens_d"] = *r.cohens_d;
  auto d = nlohmann::ordered_json::object();
  for (const auto& [name, x] : r.deltas) d[name] = x;
  j["deltas"] = d;
  j["excluded"] = r.excluded;
  j["notes"] = r.notes;
  return j;
}

inline nlohmann::ordered_json to_json(const GeometryReport& g) {
  nlohmann::ordered_json j;
  j["axes"] = g.names;
  j["cosines"] = g.cosines;
  j["layout"] = g.layout;
  j["dissimilarity"] = g.dissimilarity;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& p : g.partial) {
    rows.push_back({{"axis", p.axis}, {"n", p.n}, {"raw_rho", p.raw_rho}, {"partial_rho", p.partial_rho},
                    {"partial_p", p.partial_p}});
  }
  j["partial"] = rows;
  return j;
}

inline std::string geometry_matrix_csv(const GeometryReport& g) {
  std::string s = "axis";
  for (const auto& n : g.names) s += "," + text::csv_escape(n);
  s += "\n";
  for (std::size_t i = 0; i < g.names.size(); ++i) {
    s += text::csv_escape(g.names[i]);
    for (double c : g.cosines[i]) s += "," + text::fixed(c, 6);
    s += "\n";
  }
  return s;
}

}  // namespace flavoraxis::axes
