#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "erasekit/deod.hpp"
#include "support.hpp"

using namespace erasekit;
using testing_support::make_space;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

using Four = std::array<Vector, 4>;

Vector unit(Eigen::Index d, Eigen::Index axis) {
  Vector v = Vector::Zero(d);
  v(axis) = 1.0;
  return v;
}

Four random_four(std::mt19937_64& rng, Eigen::Index d) {
  const auto m = testing_support::gaussian_matrix(4, d, rng);
  Four out;
  for (int i = 0; i < 4; ++i) out[static_cast<std::size_t>(i)] = m.row(i).transpose().normalized();
  return out;
}

MorphLexicon walk_lexicon() {
  return MorphLexicon({{"walk", "walked", "V;PST"},
                       {"hike", "hiked", "V;PST"},
                       {"stroll", "strolled", "V;PST"},
                       {"bump", "bumped", "V;PST"},
                       {"stroll", "strolling", "V;PTCP"}});
}

EmbeddingSpace walk_space() {
  return make_space({{"walked", {1, 0, 0, 0}},
                     {"hiked", {0.9, 0.3, 0, 0}},
                     {"strolled", {0.85, 0, 0.4, 0}},
                     {"strolling", {0.5, 0, 0.8, 0.2}},
                     {"bumped", {0, 0, 0, 1}}});
}

/// Lemmas l0..l{n-1}, each inflected under every tag, with random vectors.
struct RandomLexicon {
  MorphLexicon lexicon;
  EmbeddingSpace space;
};

RandomLexicon random_lexicon(std::size_t lemmas, std::size_t tags, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<LexEntry> entries;
  std::vector<OccurrenceKey> keys;
  for (std::size_t l = 0; l < lemmas; ++l)
    for (std::size_t t = 0; t < tags; ++t) {
      const std::string form = "l" + std::to_string(l) + "t" + std::to_string(t);
      entries.push_back({"l" + std::to_string(l), form, "T" + std::to_string(t)});
      keys.push_back(OccurrenceKey::type(form));
    }
  const auto rows = static_cast<Eigen::Index>(keys.size());
  return {MorphLexicon(std::move(entries)), EmbeddingSpace(std::move(keys), testing_support::gaussian_matrix(rows, 8, rng))};
}

Quadruple quad(const std::string& a, const std::string& s, const std::string& m, const std::string& o) {
  return {a, s, {m, "", "T", "U"}, o, "T"};
}

}  // namespace

TEST(ScoreQuadruple, ClosedForm) {
  const Vector u = unit(3, 0), v = unit(3, 1);
  const Four four = {u, u, u, v};
  const auto r = score_quadruple(four);
  EXPECT_EQ(r.predicted(), 3u);
  EXPECT_NEAR(r.scores[3], 1.0, 1e-15);
  EXPECT_NEAR(r.scores[0], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(r.position_of(3), 0u);
}

TEST(ScoreQuadruple, IdenticalVectorsFallBackToFieldOrder) {
  const Vector u = Vector::Ones(3);
  const Four four = {u, u, u, u};
  const auto r = score_quadruple(four);
  EXPECT_EQ(r.order, (std::array<std::size_t, 4>{0, 1, 2, 3}));
}

TEST(ScoreQuadruple, ZeroVectorIsAnError) {
  const Four four = {unit(2, 0), unit(2, 1), Vector::Zero(2), unit(2, 0)};
  EXPECT_THROW(score_quadruple(four), Error);
}

TEST(ScoreQuadruple, RandomVectorsPickEachItemEvenly) {
  std::mt19937_64 rng(42);
  std::array<int, 4> wins{};
  for (int t = 0; t < 10000; ++t) ++wins[score_quadruple(random_four(rng, 16)).predicted()];
  for (int w : wins) {
    EXPECT_GE(w / 10000.0, 0.23);
    EXPECT_LE(w / 10000.0, 0.27);
  }
}

TEST(ScoreQuadruple, PermutationAndScaleInvariant) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int t = 0; t < 200; ++t) {
    const Four four = random_four(rng, 5);
    const auto base = score_quadruple(four);
    std::array<std::size_t, 4> perm = {0, 1, 2, 3};
    std::shuffle(perm.begin(), perm.end(), rng);
    Four moved;
    for (std::size_t i = 0; i < 4; ++i) moved[i] = four[perm[i]] * scale(rng);
    const auto r = score_quadruple(moved);
    for (std::size_t p = 0; p < 4; ++p) EXPECT_EQ(perm[r.order[p]], base.order[p]);
  }
}

TEST(ScoreDataset, ClosedFormPatterns) {
  const auto space = make_space({{"a", {1, 0}}, {"b", {1, 0}}, {"c", {1, 0}}, {"d", {0, 1}}});
  const std::vector<Quadruple> sem = {quad("a", "b", "c", "d")};
  const auto s = score_dataset(sem, space);
  EXPECT_DOUBLE_EQ(s.sem_hard, 100.0);
  EXPECT_DOUBLE_EQ(s.sem_opp, 100.0);
  EXPECT_DOUBLE_EQ(s.morph_hard, 0.0);

  // The odd word sits at the sibling slot; the sem outlier ties with the rest
  // and lands last by field order.
  const std::vector<Quadruple> second = {quad("a", "d", "b", "c")};
  const auto t = score_dataset(second, space);
  EXPECT_DOUBLE_EQ(t.sem_hard, 0.0);
  EXPECT_NEAR(t.sem_opp, 100.0 * (1 - 3.0 / 3), 1e-12);

  const auto op1 = make_space({{"a", {0, 1}}, {"b", {1, 0}}, {"c", {1, 0.1}}, {"d", {1, 0.2}}});
  const std::vector<Quadruple> one = {quad("a", "c", "d", "b")};  // b ranks second behind a
  const auto o = score_dataset(one, op1);
  EXPECT_DOUBLE_EQ(o.sem_hard, 0.0);
  EXPECT_NEAR(o.sem_opp, 200.0 / 3.0, 1e-12);
}

TEST(ScoreDataset, InvariantsOnRandomQuadruples) {
  std::mt19937_64 rng(3);
  std::vector<OccurrenceKey> keys;
  for (int i = 0; i < 40; ++i) keys.push_back(OccurrenceKey::type("w" + std::to_string(i)));
  const EmbeddingSpace space(keys, testing_support::gaussian_matrix(40, 6, rng));
  std::uniform_int_distribution<int> pick(0, 39);
  std::vector<Quadruple> quads;
  for (int t = 0; t < 300; ++t) {
    std::set<int> ids;
    while (ids.size() < 4) ids.insert(pick(rng));
    std::vector<int> v(ids.begin(), ids.end());
    std::shuffle(v.begin(), v.end(), rng);
    auto w = [&](int i) { return "w" + std::to_string(v[static_cast<std::size_t>(i)]); };
    quads.push_back(quad(w(0), w(1), w(2), w(3)));
  }
  quads.push_back(quad("w0", "w1", "w2", "missing"));
  const auto s = score_dataset(quads, space);
  EXPECT_EQ(s.n, 300u);
  EXPECT_EQ(s.skipped, 1u);
  EXPECT_LE(s.sem_hard + s.morph_hard, 100.0);
  EXPECT_GE(s.sem_opp, s.sem_hard);
  EXPECT_GE(s.morph_opp, s.morph_hard);
  for (double p : {s.sem_hard, s.morph_hard, s.sem_opp, s.morph_opp}) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 100.0);
  }
}

TEST(ScoreDataset, NothingScorableIsAnError) {
  const auto space = make_space({{"a", {1, 0}}});
  const std::vector<Quadruple> quads = {quad("a", "b", "c", "d")};
  EXPECT_THROW(score_dataset(quads, space), Error);
}

TEST(LemmaSkyline, SharedLemmaCollapsesTheMorphOutlier) {
  const auto lexicon = walk_lexicon();
  const auto space = make_space({{"walk", {1, 0, 0}}, {"stroll", {0.8, 0.6, 0}}, {"bump", {0, 0, 1}}, {"hike", {0.9, 0, 0.2}}});
  // strolling and strolled share a lemma, so both get the same vector.
  const std::vector<Quadruple> quads = {quad("walked", "strolled", "strolling", "bumped")};
  const auto s = lemma_skyline(quads, space, lexicon);
  EXPECT_DOUBLE_EQ(s.morph_hard, 0.0);
  EXPECT_DOUBLE_EQ(s.sem_hard, 100.0);
  const std::vector<Quadruple> unknown = {quad("walked", "strolled", "strolling", "jumped")};
  EXPECT_THROW(lemma_skyline(unknown, space, lexicon), Error);
}

TEST(LemmaSkyline, AmbiguousFormsWarnOnce) {
  const MorphLexicon lexicon({{"a", "x", "T"}, {"b", "x", "U"}, {"c", "y", "T"}, {"d", "z", "T"}, {"e", "w", "T"}});
  const auto space = make_space({{"a", {1, 0}}, {"b", {0, 1}}, {"c", {1, 0.1}}, {"d", {1, 0.2}}, {"e", {0, 1}}});
  const std::vector<Quadruple> quads = {quad("x", "y", "z", "w"), quad("y", "x", "z", "w")};
  Diagnostics diag;
  lemma_skyline(quads, space, lexicon, &diag);
  EXPECT_EQ(diag.warnings().size(), 1u);
}

TEST(GenerateQuadruples, WorkedExample) {
  const auto lexicon = walk_lexicon();
  const auto space = walk_space();
  GenerationConfig cfg;
  cfg.exclude_same_lemma = true;
  int with_walked = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    cfg.seed = seed;
    for (const auto& q : generate_quadruples(lexicon, space, 1, cfg)) {
      if (q.anchor != "walked") continue;
      ++with_walked;
      EXPECT_EQ(q.surfaces(), (std::array<std::string, 4>{"walked", "hiked", "strolling", "bumped"}));
      EXPECT_EQ(q.shared_tag, "V;PST");
      EXPECT_EQ(q.morph_outlier.lemma, "stroll");
      EXPECT_EQ(q.morph_outlier.target_tag, "V;PTCP");
    }
  }
  EXPECT_GT(with_walked, 0);
}

TEST(GenerateQuadruples, DegenerateLexiconIsAnError) {
  const MorphLexicon lexicon({{"a", "a1", "T"}, {"b", "b1", "T"}, {"c", "c1", "T"}, {"d", "d1", "T"}});
  const auto space = make_space({{"a1", {1, 0}}, {"b1", {0, 1}}, {"c1", {1, 1}}, {"d1", {1, -1}}});
  EXPECT_THROW(generate_quadruples(lexicon, space, 1), Error);
}

TEST(GenerateQuadruples, DeterministicAndInvariantSatisfying) {
  const auto [lexicon, space] = random_lexicon(30, 3, 5);
  GenerationConfig cfg;
  cfg.seed = 11;
  const auto quads = generate_quadruples(lexicon, space, 60, cfg);
  ASSERT_EQ(quads.size(), 60u);
  const auto again = generate_quadruples(lexicon, space, 60, cfg);
  std::set<std::array<std::string, 4>> distinct;
  for (std::size_t i = 0; i < quads.size(); ++i) {
    const auto& q = quads[i];
    EXPECT_EQ(q.surfaces(), again[i].surfaces());
    EXPECT_TRUE(lexicon.has(q.anchor, q.shared_tag));
    EXPECT_TRUE(lexicon.has(q.sibling, q.shared_tag));
    EXPECT_TRUE(lexicon.has(q.sem_outlier, q.shared_tag));
    EXPECT_NE(q.morph_outlier.target_tag, q.shared_tag);
    EXPECT_TRUE(lexicon.has(q.morph_outlier.surface, q.morph_outlier.target_tag));
    EXPECT_FALSE(lexicon.has(q.morph_outlier.surface, q.shared_tag));
    const auto lemmas = lexicon.lemmas_of(q.morph_outlier.surface);
    EXPECT_NE(std::find(lemmas.begin(), lemmas.end(), q.morph_outlier.lemma), lemmas.end());
    // Same-lemma forms are excluded by default.
    EXPECT_NE(lexicon.first_lemma(q.sibling), lexicon.first_lemma(q.anchor));
    EXPECT_NE(q.morph_outlier.lemma, *lexicon.first_lemma(q.anchor));
    auto s = q.surfaces();
    EXPECT_EQ(std::set<std::string>(s.begin(), s.end()).size(), 4u);
    std::sort(s.begin(), s.end());
    EXPECT_TRUE(distinct.insert(s).second);
  }
}

TEST(GenerateQuadruples, SiblingIsAmongTheTwoNearest) {
  const auto [lexicon, space] = random_lexicon(20, 2, 9);
  const auto quads = generate_quadruples(lexicon, space, 30);
  for (const auto& q : quads) {
    const Vector a = space.vector(*space.find(OccurrenceKey::type(q.anchor)));
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& e : lexicon.entries())
      if (e.tag == q.shared_tag && e.form != q.anchor && e.lemma != *lexicon.first_lemma(q.anchor))
        scored.emplace_back(-cosine(a, space.vector(*space.find(OccurrenceKey::type(e.form)))), e.form);
    std::sort(scored.begin(), scored.end());
    EXPECT_TRUE(q.sibling == scored[0].second || q.sibling == scored[1].second) << q.anchor;
    // The replaced word is the other one.
    const auto& replaced = q.sibling == scored[0].second ? scored[1].second : scored[0].second;
    EXPECT_EQ(*lexicon.first_lemma(replaced), q.morph_outlier.lemma);
    // The semantic outlier comes from the less similar half of the rest.
    const auto pos = std::find_if(scored.begin(), scored.end(), [&](const auto& p) { return p.second == q.sem_outlier; });
    const auto rest = scored.size() - 2;
    EXPECT_GE(static_cast<std::size_t>(pos - scored.begin()), 2 + rest - (rest + 1) / 2);
  }
}

TEST(GenerateQuadruples, BudgetExhaustionReportsProgress) {
  const auto [lexicon, space] = random_lexicon(6, 2, 1);
  GenerationConfig cfg;
  cfg.retry_budget = 400;
  try {
    generate_quadruples(lexicon, space, 5000, cfg);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("of 5000 quadruples"), std::string::npos) << e.what();
  }
}

TEST(QuadrupleFile, RoundTripAndErrors) {
  TempDir dir;
  const auto [lexicon, space] = random_lexicon(15, 3, 2);
  const auto quads = generate_quadruples(lexicon, space, 20);
  write_quadruples(quads, dir / "q.tsv");
  const auto back = read_quadruples(dir / "q.tsv");
  ASSERT_EQ(back.size(), quads.size());
  for (std::size_t i = 0; i < quads.size(); ++i) {
    EXPECT_EQ(back[i].surfaces(), quads[i].surfaces());
    EXPECT_EQ(back[i].shared_tag, quads[i].shared_tag);
    EXPECT_EQ(back[i].morph_outlier.target_tag, quads[i].morph_outlier.target_tag);
  }
  write_file(dir / "bad.tsv", "a\tb\tc\td\tT\n");
  EXPECT_THROW(read_quadruples(dir / "bad.tsv"), ParseError);
  write_file(dir / "empty.tsv", "a\t\tc\td\tT\tU\n");
  EXPECT_THROW(read_quadruples(dir / "empty.tsv"), ParseError);
}
