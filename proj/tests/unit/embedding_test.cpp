#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "erasekit/embedding.hpp"
#include "support.hpp"

using namespace erasekit;
using testing_support::make_space;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

}  // namespace

TEST(Cosine, ClosedForms) {
  EXPECT_DOUBLE_EQ(cosine(vec({1, 0}), vec({1, 0})), 1.0);
  EXPECT_DOUBLE_EQ(cosine(vec({1, 0}), vec({0, 1})), 0.0);
  EXPECT_NEAR(cosine(vec({1, 1}), vec({1, 0})), 0.70710678, 1e-8);
}

TEST(Cosine, ZeroVectorIsAnError) {
  EXPECT_THROW(cosine(vec({0, 0}), vec({1, 0})), Error);
  EXPECT_THROW(cosine(vec({1, 0}), vec({0, 0})), Error);
}

TEST(Cosine, LengthMismatchIsAnError) { EXPECT_THROW(cosine(vec({1, 0}), vec({1, 0, 0})), Error); }

TEST(Cosine, StaysInRangeForParallelVectors) {
  const Vector u = vec({0.1, 0.2, 0.3});
  const double c = cosine(u, u * 3.0);
  EXPECT_LE(c, 1.0);
  EXPECT_NEAR(c, 1.0, 1e-15);
}

TEST(Knn, ReturnsMostSimilarFirst) {
  const auto space = make_space({{"a", {1, 0}}, {"b", {0.8, 0.6}}, {"c", {0, 1}}});
  EXPECT_EQ(knn(space, OccurrenceKey::type("a"), 1), std::vector<OccurrenceKey>{OccurrenceKey::type("b")});
  EXPECT_EQ(knn(space, OccurrenceKey::type("a"), 2),
            (std::vector<OccurrenceKey>{OccurrenceKey::type("b"), OccurrenceKey::type("c")}));
}

TEST(Knn, TiesGoToEarlierEntry) {
  const auto space = make_space({{"q", {1, 0}}, {"x", {0, 1}}, {"y", {0.5, 0.5}}, {"z", {0.5, 0.5}}});
  const auto nn = knn(space, OccurrenceKey::type("q"), 2);
  EXPECT_EQ(nn[0].surface, "y");
  EXPECT_EQ(nn[1].surface, "z");
}

TEST(Knn, TooLargeKIsAnError) {
  const auto space = make_space({{"a", {1, 0}}, {"b", {0, 1}}});
  EXPECT_THROW(knn(space, OccurrenceKey::type("a"), 2), Error);
  EXPECT_THROW(knn(space, OccurrenceKey::type("a"), 0), Error);
}

TEST(Knn, UnknownQueryIsUnresolved) {
  const auto space = make_space({{"a", {1, 0}}, {"b", {0, 1}}});
  EXPECT_THROW(knn(space, OccurrenceKey::type("zzz"), 1), UnresolvedError);
}

TEST(NeighborIndex, MatchesBruteForceAndIgnoresThreadCount) {
  std::mt19937_64 rng(11);
  const auto m = testing_support::gaussian_matrix(300, 8, rng);
  std::vector<OccurrenceKey> keys;
  for (int i = 0; i < 300; ++i) keys.push_back(OccurrenceKey::type("w" + std::to_string(i)));
  const EmbeddingSpace space(keys, m);
  const NeighborIndex index(space);
  std::vector<std::size_t> queries(300);
  for (std::size_t i = 0; i < 300; ++i) queries[i] = i;

  const auto one = index.search_batch(queries, 10, {}, 1);
  const auto four = index.search_batch(queries, 10, {}, 4);
  EXPECT_EQ(one, four);

  for (std::size_t q : {0u, 57u, 299u}) {
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t j = 0; j < 300; ++j)
      if (j != q) scored.emplace_back(-cosine(space.vector(q), space.vector(j)), j);
    std::sort(scored.begin(), scored.end());
    for (std::size_t r = 0; r < 10; ++r) EXPECT_EQ(one[q][r], scored[r].second);
  }
}

TEST(NeighborIndex, CandidateMaskRestrictsResults) {
  const auto space = make_space({{"a", {1, 0}}, {"b", {0.9, 0.1}}, {"c", {0.5, 0.5}}, {"d", {0, 1}}});
  const NeighborIndex index(space);
  const auto nn = index.search(0, 1, {true, false, true, true});
  ASSERT_EQ(nn.size(), 1u);
  EXPECT_EQ(nn[0], 2u);
}

TEST(OccurrenceKey, EncodeDecodeRoundTrip) {
  const OccurrenceKey occ{"walked", "s-12", 3};
  EXPECT_EQ(occ.encode(), "walked##s-12##3");
  EXPECT_EQ(OccurrenceKey::decode(occ.encode()), occ);
  EXPECT_EQ(OccurrenceKey::decode("walked"), OccurrenceKey::type("walked"));
  EXPECT_THROW(OccurrenceKey::decode("a##b"), Error);
  EXPECT_THROW(OccurrenceKey::decode("a##s##x"), Error);
}

TEST(EmbeddingSpace, RejectsBrokenInvariants) {
  Matrix m(2, 2);
  m << 1, 0, 0, 1;
  EXPECT_THROW(EmbeddingSpace({OccurrenceKey::type("a"), OccurrenceKey::type("a")}, m), Error);
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(EmbeddingSpace({OccurrenceKey::type("a"), OccurrenceKey::type("b")}, m), Error);
  EXPECT_THROW(EmbeddingSpace({OccurrenceKey::type("a")}, Matrix::Zero(2, 2)), Error);
  EXPECT_THROW(EmbeddingSpace({OccurrenceKey::type("a##b"), OccurrenceKey::type("c")}, Matrix::Zero(2, 2)), Error);
}

TEST(EmbeddingSpace, FindSurfaceListsOccurrences) {
  Matrix m = Matrix::Identity(3, 3);
  const EmbeddingSpace space({{"the", "1", 0}, {"cat", "1", 1}, {"the", "2", 0}}, m);
  EXPECT_EQ(space.find_surface("the"), (std::vector<std::size_t>{0, 2}));
  EXPECT_TRUE(space.find_surface("dog").empty());
}

TEST(MeanVector, Averages) {
  const std::vector<Vector> vs = {vec({1, 0}), vec({0, 1})};
  EXPECT_TRUE(mean_vector(vs).isApprox(vec({0.5, 0.5})));
  EXPECT_THROW(mean_vector(std::span<const Vector>{}), Error);
}

TEST(VectorFile, RoundTripIsExact) {
  TempDir dir;
  std::mt19937_64 rng(5);
  const auto m = testing_support::gaussian_matrix(20, 7, rng);
  std::vector<OccurrenceKey> keys;
  for (int i = 0; i < 20; ++i) keys.push_back({"tok" + std::to_string(i % 6), "s" + std::to_string(i / 6), std::size_t(i)});
  keys[3] = OccurrenceKey::type("typeword");
  const EmbeddingSpace space(keys, m * 1e-3);
  write_vectors(space, dir / "v.vec");
  const auto back = read_vectors(dir / "v.vec");
  EXPECT_EQ(back.keys(), space.keys());
  EXPECT_EQ((back.vectors() - space.vectors()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(VectorFile, ParseErrorsCarryLineNumbers) {
  TempDir dir;
  auto expect_line = [&](const std::string& content, std::size_t line) {
    write_file(dir / "bad.vec", content);
    try {
      read_vectors(dir / "bad.vec");
      ADD_FAILURE() << "no error for:\n" << content;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), line) << e.what();
    }
  };
  expect_line("2\n", 1);
  expect_line("2 2\na 1 0\nb 1\n", 3);
  expect_line("2 2\na 1 0\na 0 1\n", 3);
  expect_line("2 2\na 1 0\nb 0 x\n", 3);
  expect_line("3 2\na 1 0\nb 0 1\n", 3);
  expect_line("1 2\na 1 0\nb 0 1\n", 3);
}

TEST(VectorFile, ToleratesCrlf) {
  TempDir dir;
  write_file(dir / "v.vec", "1 2\r\nfoo 0.5 -1\r\n");
  const auto space = read_vectors(dir / "v.vec");
  EXPECT_EQ(space.size(), 1u);
  EXPECT_DOUBLE_EQ(space.vectors()(0, 1), -1.0);
}
