#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "flavoraxis/culture.hpp"
#include "flavoraxis/synth.hpp"
#include "test_util.hpp"

using namespace flavoraxis;
using namespace flavoraxis::culture;

namespace {

// Brute-force purity: full sort of every other pool member by (cosine desc, id asc).
std::map<std::string, double> oracle_purity(const EmbeddingMatrix& m, const CuisineTags& tags, std::size_t k) {
  std::vector<std::string> names;
  for (const auto& [n, l] : tags.tags) names.push_back(n);
  auto shares = [&](const std::string& a, const std::string& b) {
    for (const auto& x : tags.tags.at(a)) {
      for (const auto& y : tags.tags.at(b)) {
        if (x == y) return true;
      }
    }
    return false;
  };
  std::map<std::string, double> sum, count;
  for (const auto& q : names) {
    if (tags.tags.at(q).empty()) continue;
    const auto qr = m.row(m.require_name(q));
    std::vector<std::tuple<double, std::int64_t, std::string>> others;
    for (const auto& o : names) {
      if (o == q) continue;
      const auto r = m.require_name(o);
      others.emplace_back(-cosine(qr, m.row(r)), m.entity(r).id, o);
    }
    std::sort(others.begin(), others.end());
    double hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += shares(q, std::get<2>(others[i])) ? 1 : 0;
    for (const auto& c : tags.tags.at(q)) {
      sum[c] += hits / static_cast<double>(k);
      count[c] += 1;
    }
  }
  std::map<std::string, double> out;
  for (const auto& [c, s] : sum) out[c] = s / count[c];
  return out;
}

synth::ClusterCorpus clusters(std::size_t n, std::size_t dim, std::uint64_t seed) {
  synth::ClusterSpec spec;
  spec.n = n;
  spec.dim = dim;
  return synth::gaussian_clusters(spec, Seed{seed});
}

}  // namespace

TEST(Lift, ArithmeticAnchor) {
  EXPECT_NEAR(lift(0.589, 27, 589), 0.589 * 589 / 27, 1e-12);
  EXPECT_NEAR(lift(0.589, 27, 589), 12.8, 0.05);
  EXPECT_DOUBLE_EQ(lift(0.5, 10, 20), 1.0);
}

TEST(Purity, MatchesBruteForceWithMultiTagsAndUntaggedMembers) {
  auto m = testutil::random_matrix(40, 6, 21);
  CuisineTags tags;
  tags.clusters = {"A", "B", "C"};
  Stream rng(Seed{22}, 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::vector<std::string> t;
    for (const auto& c : tags.clusters) {
      if (rng.uniform() < 0.4) t.push_back(c);
    }
    tags.tags[m.entity(i).name] = t;
  }
  for (std::size_t k : {1u, 3u, 7u}) {
    const auto rep = knn_purity(m, tags, k, 2);
    const auto oracle = oracle_purity(m, tags, k);
    ASSERT_EQ(rep.cuisines.size(), oracle.size());
    for (const auto& c : rep.cuisines) {
      EXPECT_NEAR(c.purity, oracle.at(c.cuisine), 1e-12) << c.cuisine << " k=" << k;
      EXPECT_NEAR(c.lift, c.purity * 40.0 / static_cast<double>(c.n), 1e-12);
    }
  }
}

TEST(Purity, TiesBrokenByAscendingId) {
  // Query e1 has three neighbours at identical cosine; k = 1 must pick e2.
  auto m = testutil::matrix_from_rows({{1, 0}, {1, 1}, {1, -1}, {1, 1}});
  CuisineTags tags;
  tags.clusters = {"A", "B"};
  tags.tags = {{"e1", {"A"}}, {"e2", {"A"}}, {"e3", {"B"}}, {"e4", {"B"}}};
  const auto rep = knn_purity(m, tags, 1);
  // e1 -> e2 (A, hit); e2 -> e4 (B, miss); e3 -> e1 (miss); e4 -> e2 (miss).
  EXPECT_DOUBLE_EQ(rep.cuisines[0].purity, 0.5);
  EXPECT_DOUBLE_EQ(rep.cuisines[1].purity, 0.0);
}

TEST(Purity, Errors) {
  auto m = testutil::random_matrix(5, 3, 1);
  CuisineTags tags;
  tags.clusters = {"A", "B"};
  tags.tags = {{"e1", {"A"}}, {"e2", {"A"}}, {"e3", {"B"}}};
  EXPECT_THROW(knn_purity(m, tags, 3), InvalidArgument);
  tags.tags["ghost"] = {"A"};
  EXPECT_THROW(knn_purity(m, tags, 1), DataError);
  EXPECT_THROW(cuisine_tags_from_json(nlohmann::json::parse(R"({"clusters": ["A"], "tags": {"x": ["Z"]}})")),
               DataError);
  EXPECT_THROW(cuisine_tags_from_json(nlohmann::json::parse(R"({"clusters": ["A", "A"], "tags": {}})")), DataError);
}

TEST(Purity, PlantedClustersAreRecovered) {
  const auto c = clusters(140, 50, 3);
  const auto rep = knn_purity(c.matrix, c.tags, 10);
  ASSERT_EQ(rep.cuisines.size(), 7u);
  for (const auto& cp : rep.cuisines) {
    EXPECT_GE(cp.purity, 0.9) << cp.cuisine;
    EXPECT_GT(cp.lift, 5.0) << cp.cuisine;
  }
  const auto rnd = knn_purity(c.matrix, synth::random_tags(c.tags, Seed{4}), 10);
  EXPECT_GT(rnd.mean_lift, 0.6);
  EXPECT_LT(rnd.mean_lift, 1.4);
}

TEST(Subsampled, DeterministicAndWorkerIndependent) {
  const auto c = clusters(140, 30, 5);
  const auto a = subsampled_purity(c.matrix, c.tags, 70, 20, 5, Seed{9}, 1);
  const auto b = subsampled_purity(c.matrix, c.tags, 70, 20, 5, Seed{9}, 3);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(subsampled_csv(a), subsampled_csv(b));
  const auto d = subsampled_purity(c.matrix, c.tags, 70, 20, 5, Seed{10}, 1);
  EXPECT_NE(to_json(a).dump(), to_json(d).dump());
  EXPECT_LE(a.mean_purity.ci_low, a.mean_purity.mean);
  EXPECT_THROW(subsampled_purity(c.matrix, c.tags, 141, 5, 5, Seed{9}), InvalidArgument);
}

TEST(Intra, HandComputedMeansAndExclusions) {
  auto m = testutil::matrix_from_rows({{1, 0}, {1, 1}, {0, 1}, {-1, 1}});
  CuisineTags tags;
  tags.clusters = {"A", "B", "C"};
  tags.tags = {{"e1", {"A"}}, {"e2", {"A", "B"}}, {"e3", {"B"}}, {"e4", {"C"}}};
  const auto r = intra_cluster_similarity(m, tags);
  ASSERT_EQ(r.cuisines.size(), 2u);
  EXPECT_NEAR(r.cuisines[0].mean, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(r.cuisines[1].mean, std::sqrt(0.5), 1e-15);
  EXPECT_EQ(r.excluded, std::vector<std::string>{"C"});
  // Six pairs: 0.7071, 0, -0.7071, 0.7071, 0, 0.7071.
  EXPECT_NEAR(r.global_baseline, 2 * std::sqrt(0.5) / 6, 1e-15);
}

TEST(CentroidDistance, TighterSideGetsPositiveD) {
  const auto tight = clusters(70, 20, 6);
  synth::ClusterSpec loose_spec;
  loose_spec.n = 70;
  loose_spec.dim = 20;
  loose_spec.spread = 2.0;
  const auto loose = synth::gaussian_clusters(loose_spec, Seed{6});
  const auto r = centroid_distance_test(tight.matrix, tight.tags, loose.matrix, loose.tags);
  EXPECT_LT(r.mean_a, r.mean_b);
  EXPECT_GT(r.cohens_d, 0.0);
  EXPECT_LT(r.mann_whitney.p_value, 1e-6);
  EXPECT_EQ(r.n_a, 70u);
}

TEST(Profiles, CentroidProjectionsAndPermutation) {
  const auto c = clusters(140, 20, 7);
  // Axis toward cluster C0's mean: C0 stands out, so variance is significant.
  std::vector<std::size_t> rows0;
  for (std::size_t i = 0; i < c.assignment.size(); ++i) {
    if (c.assignment[i] == 0) rows0.push_back(i);
  }
  auto dir = mean_of_rows(c.matrix, rows0);
  const double len = norm(dir);
  for (double& x : dir) x /= len;
  axes::Axis a{"c0", dir, axes::AxisKind::binary_centroid, {}, "full"};
  const auto t = cuisine_profiles(c.matrix, c.tags, {a}, 99, Seed{1});
  auto cent = mean_of_rows(c.matrix, rows0);
  EXPECT_NEAR(t.values[0][0], dot(cent, dir) / norm(cent), 1e-12);
  EXPECT_DOUBLE_EQ(t.axis_p[0].p_value, 0.01);
  const auto again = cuisine_profiles(c.matrix, c.tags, {a}, 99, Seed{1}, 4);
  EXPECT_EQ(to_json(t).dump(), to_json(again).dump());
}

TEST(Paired, ByCuisineUsesCommonCuisinesOnly) {
  std::map<std::string, double> a{{"A", 0.5}, {"B", 0.6}, {"C", 0.9}}, b{{"A", 0.4}, {"B", 0.5}, {"D", 0.1}};
  const auto r = paired_by_cuisine(a, b);
  EXPECT_EQ(r.n, 2u);
  EXPECT_DOUBLE_EQ(r.p_value, 0.25);
  EXPECT_THROW(paired_by_cuisine({{"X", 1.0}}, {{"Y", 1.0}}), InvalidArgument);
}
