#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "flavoraxis/axes.hpp"
#include "flavoraxis/synth.hpp"
#include "test_util.hpp"

using namespace flavoraxis;
using namespace flavoraxis::axes;

namespace {

LabelSet ordinal(const std::string& dim, std::vector<std::string> scale,
                 std::vector<std::pair<std::string, std::string>> pts) {
  LabelSet ls;
  ls.dimension = dim;
  ls.kind = LabelKind::ordinal;
  ls.scale = std::move(scale);
  for (auto& [n, v] : pts) ls.labels.emplace(n, v);
  return ls;
}

LabelSet binary(const std::string& dim, std::vector<std::pair<std::string, bool>> pts) {
  LabelSet ls;
  ls.dimension = dim;
  ls.kind = LabelKind::binary;
  for (auto& [n, v] : pts) ls.labels.emplace(n, std::string(v ? "yes" : "no"));
  return ls;
}

LabelSet numeric(const std::string& dim, const std::vector<double>& values, std::int64_t first_id = 1) {
  LabelSet ls;
  ls.dimension = dim;
  ls.kind = LabelKind::numeric;
  for (std::size_t i = 0; i < values.size(); ++i) {
    ls.labels.emplace("e" + std::to_string(first_id + static_cast<std::int64_t>(i)), values[i]);
  }
  return ls;
}

double dist2(const std::vector<double>& a, const std::vector<double>& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]));
}

}  // namespace

TEST(Axis, OrdinalPoleDirectionIsUnitCentroidDifference) {
  auto m = testutil::matrix_from_rows({{0, 0, 1}, {0, 2, 1}, {1, 1, 0}, {4, 0, 1}, {2, 2, 1}});
  auto ls = ordinal("sweet", {"none", "low", "high"},
                    {{"e1", "none"}, {"e2", "none"}, {"e3", "low"}, {"e4", "high"}, {"e5", "high"}});
  auto axis = build_axis(m, ls, AxisKind::ordinal_pole);
  // Centroids (0,1,1) and (3,1,1): direction +x.
  EXPECT_NEAR(axis.direction[0], 1.0, 1e-15);
  EXPECT_NEAR(axis.direction[1], 0.0, 1e-15);
  EXPECT_EQ(axis.poles.low_ids, (std::vector<std::int64_t>{1, 2}));
  EXPECT_EQ(axis.poles.high_ids, (std::vector<std::int64_t>{4, 5}));
  EXPECT_EQ(axis.poles.low_definition, "level none");
}

TEST(Axis, ProjectionIsRawDotProduct) {
  auto m = testutil::matrix_from_rows({{3, 4}, {-6, 8}});
  Axis a{"x", {0.6, 0.8}, AxisKind::ordinal_pole, {}, "full"};
  std::vector<std::size_t> rows{0, 1};
  auto p = project_rows(m, a, rows);
  EXPECT_DOUBLE_EQ(p[0], 5.0);
  EXPECT_DOUBLE_EQ(p[1], 2.8);
  Axis wrong{"y", {1, 0, 0}, AxisKind::ordinal_pole, {}, "full"};
  EXPECT_THROW(project_rows(m, wrong, rows), InvalidArgument);
}

TEST(Axis, EmptyPoleIsInvalidArgument) {
  auto m = testutil::matrix_from_rows({{0, 1}, {1, 0}, {1, 1}});
  auto ls = ordinal("s", {"a", "b", "c"}, {{"e1", "a"}, {"e2", "b"}, {"e3", "b"}});
  EXPECT_THROW(build_axis(m, ls, AxisKind::ordinal_pole), InvalidArgument);
}

TEST(Axis, UnknownEntityIsDataError) {
  auto m = testutil::matrix_from_rows({{0, 1}, {1, 0}});
  auto ls = ordinal("s", {"a", "b"}, {{"e1", "a"}, {"ghost", "b"}});
  EXPECT_THROW(build_axis(m, ls, AxisKind::ordinal_pole), DataError);
}

TEST(Axis, TercileCutsAndIdTieBreak) {
  // Nine values with a three-way tie at the bottom; ids break ties.
  std::vector<double> vals{5, 1, 1, 1, 3, 9, 7, 8, 2};
  std::vector<std::vector<double>> rows;
  for (double v : vals) rows.push_back({v, 1.0});
  auto m = testutil::matrix_from_rows(rows);
  auto axis = build_axis(m, numeric("x", vals), AxisKind::tercile_centroid);
  EXPECT_EQ(*axis.poles.low_cut, 3u);
  EXPECT_EQ(*axis.poles.high_cut, 6u);
  EXPECT_EQ(axis.poles.low_ids, (std::vector<std::int64_t>{2, 3, 4}));
  EXPECT_EQ(axis.poles.high_ids, (std::vector<std::int64_t>{7, 8, 6}));
  EXPECT_THROW(build_axis(testutil::matrix_from_rows({{1}, {2}, {3}, {4}, {5}}), numeric("x", {1, 2, 3, 4, 5}),
                          AxisKind::tercile_centroid),
               InvalidArgument);
}

TEST(Axis, Log10DropsNonPositiveWithNote) {
  std::vector<double> vals{0, 10, 100, 1000, 1e4, 1e5, 1e6, 0};
  std::vector<std::vector<double>> rows;
  for (double v : vals) rows.push_back({std::log10(v + 1), 1.0});
  auto m = testutil::matrix_from_rows(rows);
  AxisOptions opt;
  opt.log10 = true;
  auto c = resolve(m, numeric("scoville", vals), opt);
  EXPECT_EQ(c.size(), 6u);
  EXPECT_DOUBLE_EQ(c.values[0], 1.0);
  ASSERT_EQ(c.notes.size(), 1u);
  auto r = evaluate(m, numeric("scoville", vals), opt);
  EXPECT_EQ(r.analysis, "tercile");
  EXPECT_DOUBLE_EQ(r.spearman->statistic, 1.0);
}

TEST(Evaluate, BinaryEffectSignIsYesMinusNo) {
  auto m = testutil::matrix_from_rows({{2, 0}, {2.5, 0.1}, {3, 0}, {0, 1}, {0.2, 1}, {0.1, 0.9}});
  auto ls = binary("fatty", {{"e1", true}, {"e2", true}, {"e3", true}, {"e4", false}, {"e5", false}, {"e6", false}});
  auto r = evaluate(m, ls);
  EXPECT_EQ(r.analysis, "binary");
  EXPECT_GT(*r.cohens_d, 0.0);
  EXPECT_EQ(r.mann_whitney->statistic, 9.0);
  EXPECT_EQ(r.n_high, 3u);
  // Independent d from projections computed here.
  std::vector<double> yes, no;
  for (std::size_t i = 0; i < 6; ++i) (i < 3 ? yes : no).push_back(dot(m.row(i), r.axis->direction));
  EXPECT_NEAR(*r.cohens_d, stats::cohens_d(yes, no), 1e-12);
}

TEST(Evaluate, BinaryNeedsTwoPerClass) {
  auto m = testutil::matrix_from_rows({{1, 0}, {0, 1}, {1, 1}});
  EXPECT_THROW(evaluate(m, binary("b", {{"e1", true}, {"e2", false}, {"e3", false}})), InvalidArgument);
}

TEST(Evaluate, PlantedGradientRecovered) {
  synth::GradientSpec spec;
  spec.per_level = 60;
  spec.dim = 100;
  auto g = synth::planted_gradient(spec, Seed{41});
  auto r = evaluate(g.matrix, g.labels);
  EXPECT_GE(r.spearman->statistic, 0.9);
  EXPECT_EQ(r.n, 300u);
  EXPECT_GT(cosine(r.axis->direction, g.direction), 0.9);
}

TEST(Evaluate, MeasuredUsesClassifierAxis) {
  synth::GradientSpec spec;
  spec.per_level = 30;
  spec.dim = 40;
  auto g = synth::planted_gradient(spec, Seed{2});
  LabelSet measured;
  measured.dimension = "sugars";
  measured.kind = LabelKind::numeric;
  for (const auto& [name, v] : g.labels.labels) {
    if (name.back() % 2) measured.labels.emplace(name, g.labels.numeric_value(v) * 3.0 + 0.5);
  }
  auto r = evaluate_measured(g.matrix, g.labels, measured);
  EXPECT_EQ(r.dimension, "planted~sugars");
  EXPECT_EQ(r.n, measured.size());
  EXPECT_GT(r.spearman->statistic, 0.9);
}

TEST(Permutation, PlantedVersusShuffled) {
  synth::GradientSpec spec;
  spec.per_level = 20;
  spec.dim = 30;
  auto g = synth::planted_gradient(spec, Seed{5});
  auto real = permutation_test(g.matrix, g.labels, 99, Seed{6});
  EXPECT_DOUBLE_EQ(real.p_value, 0.01);
  auto again = permutation_test(g.matrix, g.labels, 99, Seed{6}, {}, 3);
  EXPECT_EQ(real.p_value, again.p_value);
  EXPECT_EQ(real.statistic, again.statistic);
}

TEST(CategoricalDelta, HandComputedDeltas) {
  // Two tight groups along orthogonal axes plus a singleton.
  auto m = testutil::matrix_from_rows({{1, 0, 0}, {1, 0.1, 0}, {0, 1, 0}, {0.1, 1, 0}, {0, 0, 1}});
  LabelSet ls;
  ls.dimension = "family";
  ls.kind = LabelKind::categorical;
  ls.labels = {{"e1", std::string("A")}, {"e2", std::string("A")}, {"e3", std::string("B")},
               {"e4", std::string("B")}, {"e5", std::string("C")}};
  auto r = categorical_delta(m, ls);
  ASSERT_EQ(r.deltas.size(), 4u);
  EXPECT_EQ(r.excluded, std::vector<std::string>{"e5"});
  auto cs = [&](int a, int b) { return cosine(m.row(a), m.row(b)); };
  const double d1 = cs(0, 1) - (cs(0, 2) + cs(0, 3) + cs(0, 4)) / 3;
  EXPECT_NEAR(r.deltas[0].second, d1, 1e-12);
  EXPECT_EQ(r.wilcoxon->statistic, 10.0);
  EXPECT_NEAR(r.wilcoxon->p_value, 1.0 / 16.0, 1e-15);
}

TEST(Geometry, TriangleMdsReproducesDissimilarities) {
  // Three unit axes with cosines 0.2, 0.1, -0.1.
  Eigen::Matrix3d g;
  g << 1, 0.2, 0.1, 0.2, 1, -0.1, 0.1, -0.1, 1;
  Eigen::LLT<Eigen::Matrix3d> llt(g);
  const Eigen::Matrix3d l = llt.matrixL();
  std::vector<GeometryInput> in;
  for (int i = 0; i < 3; ++i) {
    Axis a{"a" + std::to_string(i), {l(i, 0), l(i, 1), l(i, 2)}, AxisKind::ordinal_pole, {}, "full"};
    in.push_back({a, std::nullopt, {}});
  }
  auto m = testutil::random_matrix(10, 3, 1);
  auto rep = axis_geometry(m, in);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(rep.cosines[i][j], g(i, j), 1e-12);
      EXPECT_NEAR(dist2(rep.layout[i], rep.layout[j]), i == j ? 0.0 : 1.0 - g(i, j), 1e-6);
    }
  }
}

TEST(Geometry, PartialEqualsRawForOrthogonalCovariates) {
  // Target projections are antisymmetric around the middle row, covariate
  // projections symmetric, so centered covariates are orthogonal to the target.
  const std::size_t n = 120;
  Stream rng(Seed{9}, 0);
  std::vector<double> t(n), s1(n), s2(n), label(n);
  for (std::size_t i = 0; i < n / 2; ++i) {
    t[i] = -(1.0 + static_cast<double>(i) + rng.uniform() * 0.5);
    t[n - 1 - i] = -t[i];
    s1[i] = s1[n - 1 - i] = rng.normal();
    s2[i] = s2[n - 1 - i] = rng.normal();
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back({t[i], s1[i], s2[i]});
    label[i] = t[i] + rng.normal() * 20.0;
  }
  auto m = testutil::matrix_from_rows(rows);
  std::vector<GeometryInput> in{
      {Axis{"target", {1, 0, 0}, AxisKind::tercile_centroid, {}, "full"}, numeric("target", label), {}},
      {Axis{"c1", {0, 1, 0}, AxisKind::tercile_centroid, {}, "full"}, std::nullopt, {}},
      {Axis{"c2", {0, 0, 1}, AxisKind::tercile_centroid, {}, "full"}, std::nullopt, {}}};
  auto rep = axis_geometry(m, in);
  ASSERT_EQ(rep.partial.size(), 1u);
  EXPECT_LT(rep.partial[0].raw_rho, 0.95);
  EXPECT_NEAR(rep.partial[0].partial_rho, rep.partial[0].raw_rho, 1e-9);
}

TEST(Geometry, NeedsTwoAxes) {
  auto m = testutil::random_matrix(5, 2, 1);
  EXPECT_THROW(axis_geometry(m, {{Axis{"a", {1, 0}, AxisKind::ordinal_pole, {}, "full"}, std::nullopt, {}}}),
               InvalidArgument);
}

TEST(PairedSimilarity, LiftIsMeanOverSeededBaseline) {
  auto m = testutil::matrix_from_rows({{1, 0.1}, {1, 0}, {0, 1}, {0.1, 1}, {1, 1}});
  auto r = paired_similarity(m, {{1, 2}, {3, 4}}, Seed{3});
  const double mean = (cosine(m.row(0), m.row(1)) + cosine(m.row(2), m.row(3))) / 2;
  EXPECT_NEAR(r.mean, mean, 1e-15);
  EXPECT_EQ(r.baseline_pairs, 200u);
  EXPECT_NEAR(r.lift, r.mean / r.baseline, 1e-15);
  EXPECT_EQ(paired_similarity(m, {{1, 2}, {3, 4}}, Seed{3}).baseline, r.baseline);
  EXPECT_THROW(paired_similarity(m, {{1, 99}}, Seed{3}), DataError);
}

TEST(PolePlane, AxisAndPerpendicularBasis) {
  std::map<std::int64_t, Vec3> coords{{1, {0, 0, 0}}, {2, {2, 0, 0}}, {3, {4, 0, 0}}, {4, {4, 2, 0}}, {5, {1, 1, 1}}};
  auto p = pole_plane_projection(coords, {3, 4}, {1, 2});
  // savoury centroid (1,0,0), sweet centroid (4,1,0).
  EXPECT_NEAR(p.origin[0], 1.0, 1e-15);
  const double len = std::sqrt(10.0);
  EXPECT_NEAR(p.axis[0], 3 / len, 1e-15);
  EXPECT_NEAR(p.axis[1], 1 / len, 1e-15);
  EXPECT_NEAR(detail::dot3(p.axis, p.basis_u), 0.0, 1e-15);
  EXPECT_NEAR(detail::dot3(p.axis, p.basis_v), 0.0, 1e-15);
  EXPECT_NEAR(detail::dot3(p.basis_u, p.basis_v), 0.0, 1e-15);
  for (const auto& [id, x] : coords) {
    const Vec3 rel{x[0] - 1, x[1], x[2]};
    const auto& pl = p.planar.at(id);
    const double back = p.along.at(id) * p.along.at(id) + pl[0] * pl[0] + pl[1] * pl[1];
    EXPECT_NEAR(back, detail::dot3(rel, rel), 1e-12);
  }
  EXPECT_THROW(pole_plane_projection(coords, {}, {1}), InvalidArgument);
  EXPECT_THROW(pole_plane_projection(coords, {1}, {1}), InvalidArgument);
}

TEST(Coords, ParseErrors) {
  EXPECT_EQ(parse_coords3d("id,x,y,z\n1,0,0,0\n2,1,2,3\n").size(), 2u);
  EXPECT_THROW(parse_coords3d("id,x,y,z\n1,0,0\n"), DataError);
  EXPECT_THROW(parse_coords3d("id,x,y,z\n1,0,0,0\n1,1,1,1\n"), DataError);
}

TEST(Subset, RebuildsAxisOnEachSide) {
  synth::GradientSpec spec;
  spec.per_level = 20;
  spec.dim = 20;
  auto g = synth::planted_gradient(spec, Seed{8});
  std::set<std::int64_t> subset;
  for (std::int64_t id = 1; id <= 100; id += 2) subset.insert(id);
  auto [in, out] = subset_report(g.matrix, g.labels, std::nullopt, subset);
  EXPECT_EQ(in.n, 50u);
  EXPECT_EQ(out.n, 50u);
  EXPECT_GT(in.spearman->statistic, 0.8);
  EXPECT_GT(out.spearman->statistic, 0.8);
}
