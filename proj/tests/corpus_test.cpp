#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "flavoraxis/corpus.hpp"
#include "test_util.hpp"

using namespace flavoraxis;

namespace {

double brute_cosine(std::span<const double> a, std::span<const double> b) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<long double>(a[i]) * b[i];
    aa += static_cast<long double>(a[i]) * a[i];
    bb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(ab / std::sqrt(aa * bb));
}

}  // namespace

TEST(Embeddings, ParsesHeaderAndRows) {
  auto m = parse_embeddings("id\tname\tv1\tv2\n3\tbasil\t1\t0\n7\tmint\t0.5\t-2\n");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.dim(), 2u);
  EXPECT_EQ(m.entity(1).name, "mint");
  EXPECT_EQ(*m.find_id(3), 0u);
  EXPECT_EQ(*m.find_name("mint"), 1u);
  EXPECT_DOUBLE_EQ(m.row(1)[1], -2.0);
}

TEST(Embeddings, RejectsDimensionMismatchWithLine) {
  try {
    parse_embeddings("id\tname\tv1\tv2\n1\ta\t1\t2\n2\tb\t1\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Embeddings, RejectsNonFinite) {
  EXPECT_THROW(parse_embeddings("id\tname\tv1\n1\ta\tnan\n"), DataError);
  EXPECT_THROW(parse_embeddings("id\tname\tv1\n1\ta\tinf\n"), DataError);
  EXPECT_THROW(parse_embeddings("id\tname\tv1\n1\ta\tabc\n"), DataError);
}

TEST(Embeddings, RejectsDuplicateIdsAndNames) {
  EXPECT_THROW(parse_embeddings("id\tname\tv1\n1\ta\t1\n1\tb\t2\n"), DataError);
  EXPECT_THROW(parse_embeddings("id\tname\tv1\n1\ta\t1\n2\ta\t2\n"), DataError);
}

TEST(Embeddings, RejectsBadHeader) { EXPECT_THROW(parse_embeddings("name\tid\tv1\n"), DataError); }

TEST(Embeddings, FormatRoundTripsBitExact) {
  auto m = testutil::random_matrix(12, 5, 3);
  auto back = parse_embeddings(format_embeddings(m));
  ASSERT_EQ(back.size(), m.size());
  for (std::size_t r = 0; r < m.size(); ++r) {
    EXPECT_EQ(back.entity(r).id, m.entity(r).id);
    for (std::size_t d = 0; d < m.dim(); ++d) EXPECT_EQ(back.row(r)[d], m.row(r)[d]);
  }
}

TEST(Embeddings, MissingFileNamesPath) {
  try {
    load_embeddings("/nonexistent/emb.tsv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/emb.tsv"), std::string::npos);
  }
}

TEST(Cosine, ZeroVectorIsAnError) {
  std::vector<double> a{0, 0}, b{1, 0};
  EXPECT_THROW(cosine(a, b), InvalidArgument);
}

TEST(Pairwise, CountIsNChooseTwo) {
  for (std::size_t n : {0u, 1u, 2u, 3u, 17u}) {
    auto m = testutil::random_matrix(n, 4, n + 1);
    EXPECT_EQ(pairwise(m).rows.size(), n < 2 ? 0 : n * (n - 1) / 2);
  }
}

TEST(Pairwise, ThousandThirtyTwoEntitiesGive531996Rows) {
  auto m = testutil::random_matrix(1032, 8, 11);
  const auto t = pairwise(m);
  EXPECT_EQ(t.rows.size(), 531996u);
}

TEST(Pairwise, MatchesBruteForceAndIsSymmetricOrdered) {
  auto m = testutil::random_matrix(40, 9, 5, 100);
  const auto t = pairwise(m, 3);
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  std::pair<std::int64_t, std::int64_t> prev{-1, -1};
  for (const auto& r : t.rows) {
    ASSERT_LT(r.id_a, r.id_b);
    ASSERT_TRUE(seen.insert({r.id_a, r.id_b}).second);
    ASSERT_LT(prev, std::make_pair(r.id_a, r.id_b));
    prev = {r.id_a, r.id_b};
    const double c = brute_cosine(m.row(m.require_id(r.id_a)), m.row(m.require_id(r.id_b)));
    EXPECT_NEAR(r.cosine, c, 1e-12);
    EXPECT_LE(std::abs(r.cosine), 1.0);
  }
}

TEST(Pairwise, WorkerCountDoesNotChangeOutput) {
  auto m = testutil::random_matrix(60, 6, 9);
  EXPECT_EQ(format_pairs_csv(pairwise(m, 1)), format_pairs_csv(pairwise(m, 4)));
}

TEST(Pairwise, ScaleInvariant) {
  auto m = testutil::random_matrix(20, 6, 13);
  const auto a = pairwise(m), b = pairwise(m.scaled(37.5));
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_NEAR(a.rows[i].cosine, b.rows[i].cosine, 1e-12);
}

TEST(Labels, OrdinalWithMissingTokens) {
  auto ls = labels_from_json(nlohmann::json::parse(R"({
    "dimension": "sweet", "kind": "ordinal", "scale": ["none", "low", "high"],
    "labels": {"a": "low", "b": "N/A", "c": "high", "d": "none"}})"));
  EXPECT_EQ(ls.size(), 3u);
  ASSERT_EQ(ls.excluded, std::vector<std::string>{"b"});
  EXPECT_EQ(ls.numeric_value(ls.labels.at("c")), 2.0);
}

TEST(Labels, OffScaleValueIsRejected) {
  EXPECT_THROW(labels_from_json(nlohmann::json::parse(
                   R"({"dimension": "s", "kind": "ordinal", "scale": ["a", "b"], "labels": {"x": "c"}})")),
               DataError);
}

TEST(Labels, BinaryAcceptsBooleansAndStrings) {
  auto ls = labels_from_json(nlohmann::json::parse(
      R"({"dimension": "fatty", "kind": "binary", "labels": {"a": true, "b": "No", "c": "N/A"}})"));
  EXPECT_EQ(std::get<std::string>(ls.labels.at("a")), "yes");
  EXPECT_EQ(std::get<std::string>(ls.labels.at("b")), "no");
  EXPECT_EQ(ls.excluded.size(), 1u);
}

TEST(Labels, NumericRoundTrip) {
  LabelSet ls;
  ls.dimension = "scoville";
  ls.kind = LabelKind::numeric;
  ls.units = "SHU";
  ls.labels = {{"a", 0.0}, {"b", 2500.0}};
  ls.excluded = {"c"};
  auto back = labels_from_json(nlohmann::json::parse(labels_to_json(ls).dump()));
  EXPECT_EQ(back.units, ls.units);
  EXPECT_EQ(back.excluded, ls.excluded);
  EXPECT_EQ(std::get<double>(back.labels.at("b")), 2500.0);
}

TEST(Labels, UnknownKindIsDataError) {
  EXPECT_THROW(labels_from_json(nlohmann::json::parse(R"({"dimension": "s", "kind": "fuzzy", "labels": {}})")),
               DataError);
}
