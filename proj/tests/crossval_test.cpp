#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "flavoraxis/crossval.hpp"
#include "flavoraxis/synth.hpp"
#include "test_util.hpp"

using namespace flavoraxis;
using namespace flavoraxis::crossval;

namespace {

synth::PlantedGradient small_gradient(std::uint64_t seed, double snr = 10.0) {
  synth::GradientSpec spec;
  spec.per_level = 24;
  spec.dim = 40;
  spec.snr = snr;
  return synth::planted_gradient(spec, Seed{seed});
}

}  // namespace

TEST(Folds, PartitionWithBalancedSizes) {
  for (std::size_t n : {10u, 11u, 37u}) {
    for (std::size_t k : {2u, 3u, 10u}) {
      Stream rng(Seed{n * 31 + k}, 0);
      const auto folds = make_folds(n, k, rng);
      ASSERT_EQ(folds.size(), k);
      std::multiset<std::size_t> all;
      std::size_t lo = n, hi = 0;
      for (const auto& f : folds) {
        all.insert(f.begin(), f.end());
        lo = std::min(lo, f.size());
        hi = std::max(hi, f.size());
      }
      EXPECT_EQ(all.size(), n);
      EXPECT_EQ(std::set<std::size_t>(all.begin(), all.end()).size(), n);
      EXPECT_LE(hi - lo, 1u);
      EXPECT_EQ(folds.front().size(), hi);
    }
  }
  Stream rng(Seed{1}, 0);
  EXPECT_THROW(make_folds(3, 4, rng), InvalidArgument);
  EXPECT_THROW(make_folds(3, 1, rng), InvalidArgument);
}

TEST(CrossVal, FoldValueUsesTrainingAxisOnly) {
  const auto g = small_gradient(3);
  CVConfig cfg;
  cfg.k = 5;
  cfg.repeats = 2;
  cfg.seed = Seed{77};
  const auto rep = cv_evaluate(g.matrix, g.labels, cfg);
  ASSERT_EQ(rep.folds.size(), 10u);

  // Rebuild repeat 1, fold 2 by hand.
  const auto c = axes::resolve(g.matrix, g.labels);
  Stream rng(cfg.seed, 1);
  const auto folds = make_folds(c.size(), 5, rng);
  std::set<std::size_t> test(folds[2].begin(), folds[2].end());
  std::vector<double> lo(g.matrix.dim()), hi(g.matrix.dim());
  double nlo = 0, nhi = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (test.count(i)) continue;
    auto row = g.matrix.row(c.rows[i]);
    if (c.values[i] == 0) {
      for (std::size_t d = 0; d < row.size(); ++d) lo[d] += row[d];
      ++nlo;
    } else if (c.values[i] == 4) {
      for (std::size_t d = 0; d < row.size(); ++d) hi[d] += row[d];
      ++nhi;
    }
  }
  std::vector<double> dir(g.matrix.dim());
  for (std::size_t d = 0; d < dir.size(); ++d) dir[d] = hi[d] / nhi - lo[d] / nlo;
  std::vector<double> vals, proj;
  for (auto i : folds[2]) {
    vals.push_back(c.values[i]);
    proj.push_back(dot(g.matrix.row(c.rows[i]), dir));
  }
  const auto& fr = rep.folds[5 + 2];
  ASSERT_EQ(fr.repeat, 1u);
  ASSERT_EQ(fr.fold, 2u);
  ASSERT_TRUE(fr.value);
  EXPECT_NEAR(*fr.value, stats::spearman(vals, proj).statistic, 1e-12);
  EXPECT_EQ(fr.n_test + fr.n_train, c.size());
}

TEST(CrossVal, DeterministicAcrossWorkerCounts) {
  const auto g = small_gradient(4, 3.0);
  CVConfig cfg;
  cfg.k = 4;
  cfg.repeats = 6;
  cfg.seed = Seed{12};
  const auto a = cv_evaluate(g.matrix, g.labels, cfg);
  cfg.workers = 3;
  const auto b = cv_evaluate(g.matrix, g.labels, cfg);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(folds_csv(a), folds_csv(b));
  cfg.seed = Seed{13};
  EXPECT_NE(folds_csv(cv_evaluate(g.matrix, g.labels, cfg)), folds_csv(a));
}

TEST(CrossVal, StrongSignalSurvivesAndShrinks) {
  const auto g = small_gradient(5);
  CVConfig cfg;
  cfg.k = 10;
  cfg.repeats = 5;
  const auto rep = cv_evaluate(g.matrix, g.labels, cfg);
  EXPECT_GT(rep.mean, 0.85);
  EXPECT_GE(rep.in_sample, rep.mean);
  EXPECT_EQ(rep.evaluated + rep.skipped, 50u);
  double m = 0;
  for (const auto& f : rep.folds) m += *f.value;
  EXPECT_NEAR(rep.mean, m / 50, 1e-12);
}

TEST(CrossVal, SmallFoldsFlaggedAndSkippedWithReasons) {
  const auto g = small_gradient(6);
  // 120 entities, k = 60: two per fold, every fold skipped for Spearman.
  CVConfig cfg;
  cfg.k = 60;
  cfg.repeats = 1;
  EXPECT_THROW(cv_evaluate(g.matrix, g.labels, cfg), InvalidArgument);
  cfg.k = 30;
  const auto rep = cv_evaluate(g.matrix, g.labels, cfg);
  EXPECT_TRUE(rep.high_variance);
  for (const auto& f : rep.folds) {
    if (!f.value) EXPECT_FALSE(f.skip_reason.empty());
  }
  cfg.k = 500;
  EXPECT_THROW(cv_evaluate(g.matrix, g.labels, cfg), InvalidArgument);
}

TEST(CrossVal, BinaryDefaultsToCohensD) {
  auto g = small_gradient(7);
  LabelSet bin;
  bin.dimension = "high_half";
  bin.kind = LabelKind::binary;
  for (const auto& [name, v] : g.labels.labels) {
    bin.labels.emplace(name, std::string(g.labels.numeric_value(v) >= 3 ? "yes" : "no"));
  }
  CVConfig cfg;
  cfg.k = 5;
  cfg.repeats = 2;
  const auto rep = cv_evaluate(g.matrix, bin, cfg);
  EXPECT_EQ(rep.metric, Metric::cohens_d);
  EXPECT_EQ(rep.kind, axes::AxisKind::binary_centroid);
  EXPECT_GT(rep.mean, 1.0);
}

TEST(CrossVal, SdIsPopulationSd) {
  const auto g = small_gradient(8, 2.0);
  CVConfig cfg;
  cfg.k = 3;
  cfg.repeats = 3;
  const auto rep = cv_evaluate(g.matrix, g.labels, cfg);
  double ss = 0;
  for (const auto& f : rep.folds) ss += (*f.value - rep.mean) * (*f.value - rep.mean);
  EXPECT_NEAR(rep.sd, std::sqrt(ss / rep.folds.size()), 1e-12);
}
