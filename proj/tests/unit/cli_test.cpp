#include <gtest/gtest.h>

#include <fmt/format.h>

#include <random>

#include "erasekit/erasure.hpp"
#include "erasekit/report.hpp"
#include "support.hpp"

using namespace erasekit;
using testing_support::read_file;
using testing_support::run_cli;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

/// 200 words whose first coordinate carries gender, plus five pairs.
void write_gender_fixture(const TempDir& dir) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::string vec = "210 6\n";
  auto row = [&](const std::string& word, double gender) {
    vec += word + fmt::format(" {:.17g}", gender);
    for (int j = 1; j < 6; ++j) vec += fmt::format(" {:.17g}", g(rng));
    vec += '\n';
  };
  for (int i = 0; i < 200; ++i) row("w" + std::to_string(i), (i % 2 ? -1.0 : 1.0) * (0.5 + std::abs(g(rng))));
  std::string pairs;
  for (int i = 0; i < 5; ++i) {
    row("f" + std::to_string(i), 2.0);
    row("m" + std::to_string(i), -2.0);
    pairs += fmt::format("f{}\tm{}\n", i, i);
  }
  write_file(dir / "space.vec", vec);
  write_file(dir / "pairs.tsv", pairs);
}

std::string path(const TempDir& dir, const std::string& name) { return "'" + (dir / name).string() + "'"; }

}  // namespace

TEST(Cli, MissingRequiredFlagIsAUsageError) {
  TempDir dir;
  const auto r = run_cli("tagbias --pairs x --tags-out y --out rep", dir.path());
  EXPECT_EQ(r.exit_code, 2) << r.output;
  EXPECT_NE(r.output.find("--vectors"), std::string::npos) << r.output;
}

TEST(Cli, UnknownSubcommandAndHelp) {
  EXPECT_EQ(run_cli("frobnicate").exit_code, 2);
  EXPECT_EQ(run_cli("--help").exit_code, 0);
  EXPECT_EQ(run_cli("erase --help").exit_code, 0);
}

TEST(Cli, ComputationErrorExitsOne) {
  TempDir dir;
  write_file(dir / "v.vec", "4 2\na 1 0\nb -1 0\nc 0.5 1\nd -0.5 1\n");
  write_file(dir / "pairs.tsv", "a\tb\n");
  const auto r = run_cli("tagbias --vectors v.vec --pairs pairs.tsv --k 3 --tags-out t.tsv --out rep", dir.path());
  EXPECT_EQ(r.exit_code, 1) << r.output;
  EXPECT_NE(r.output.find("at least 6 entries"), std::string::npos) << r.output;
}

TEST(Cli, UnresolvedWordsAreListed) {
  TempDir dir;
  write_file(dir / "v.vec", "2 2\nx 1 0\ny 0 1\n");
  write_file(dir / "a.txt", "x\n");
  write_file(dir / "b.txt", "zzz\n");
  write_file(dir / "xs.txt", "x\n");
  write_file(dir / "ys.txt", "y\n");
  const auto r = run_cli("weat --before v.vec --x-words xs.txt --y-words ys.txt --attr-a a.txt --attr-b b.txt --out rep",
                         dir.path());
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("missing: zzz"), std::string::npos) << r.output;
}

TEST(Cli, DeodEvalOnClosedFormFixture) {
  TempDir dir;
  write_file(dir / "v.vec", "4 2\na 1 0\nb 1 0\nc 1 0\nd 0 1\n");
  write_file(dir / "q.tsv", "a\tb\tc\td\tT\tU\n");
  const auto r = run_cli("deod_eval --quadruples q.tsv --vectors v.vec --out rep", dir.path());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto report = Json::parse(read_file(dir / "rep.json"));
  EXPECT_EQ(report["command"], "deod_eval");
  EXPECT_EQ(report["metrics"][0]["metric"], "sem_hard");
  EXPECT_DOUBLE_EQ(report["metrics"][0]["value"].get<double>(), 100.0);
  EXPECT_NE(read_file(dir / "rep.tsv").find("sem_hard\t100\tNA"), std::string::npos);
}

TEST(Cli, VariantsAgreeOnOneProperty) {
  TempDir dir;
  write_gender_fixture(dir);
  ASSERT_EQ(run_cli("tagbias --vectors space.vec --pairs pairs.tsv --k 80 --tags-out tags.tsv --out tag", dir.path())
                .exit_code,
            0);
  for (const char* v : {"regressive", "non_regressive"}) {
    const auto r = run_cli(fmt::format("erase --vectors space.vec --tags tags.tsv --variant {} --seed 4 "
                                       "--projection-out {}.proj --projected-out {}.vec --out {}",
                                       v, v, v, v),
                           dir.path());
    ASSERT_EQ(r.exit_code, 0) << r.output;
  }
  const auto reg = load_projection(dir / "regressive.proj");
  const auto non = load_projection(dir / "non_regressive.proj");
  EXPECT_LE((reg.matrix - non.matrix).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(reg.mode, ProjectionMode::regressive);
  EXPECT_EQ(non.mode, ProjectionMode::non_regressive);

  // Gender is gone from the projected vectors as far as a fresh probe can tell.
  const auto report = Json::parse(read_file(dir / "regressive.json"));
  std::map<std::string, double> metrics;
  for (const auto& m : report["metrics"]) metrics[m["metric"]] = m["value"].get<double>();
  EXPECT_GE(metrics["gender.accuracy_before"], 0.9);
  EXPECT_LE(metrics["gender.accuracy_after"], metrics["gender.majority"] + 0.15);

  const auto after = run_cli("knnbias --tags tags.tsv --before space.vec --after regressive.vec --k-neighbors 10 --out knn",
                             dir.path());
  EXPECT_EQ(after.exit_code, 0) << after.output;
}

TEST(Cli, ReportRegeneratedFromConfigIsIdentical) {
  TempDir first, second;
  write_gender_fixture(first);
  const std::string args = fmt::format(
      "tagbias --vectors {} --pairs {} --k 40 --tags-out tags.tsv --seed 9 --out rep", path(first, "space.vec"),
      path(first, "pairs.tsv"));
  ASSERT_EQ(run_cli(args, first.path()).exit_code, 0);
  std::filesystem::copy_file(first / "rep.json", second / "config.json");
  const auto r = run_cli("tagbias --config config.json", second.path());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(strip_timestamp(read_file(first / "rep.json")), strip_timestamp(read_file(second / "rep.json")));
  EXPECT_EQ(read_file(first / "rep.tsv"), read_file(second / "rep.tsv"));
  EXPECT_EQ(read_file(first / "tags.tsv"), read_file(second / "tags.tsv"));
}

TEST(Cli, ConfigFileRules) {
  TempDir dir;
  write_gender_fixture(dir);
  // Flags win over config values; booleans come through as JSON bools.
  write_file(dir / "c.json", fmt::format(R"({{"vectors": {}, "pairs": "pairs.tsv", "k": 3, "by-type": true,
                                            "tags-out": "t.tsv", "out": "from_config"}})",
                                         Json((dir / "space.vec").string()).dump()));
  const auto r = run_cli("tagbias --config c.json --k 5 --out from_flags", dir.path());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto report = Json::parse(read_file(dir / "from_flags.json"));
  EXPECT_EQ(report["config"]["k"], 5);
  EXPECT_EQ(report["config"]["by-type"], true);
  EXPECT_EQ(report["config"]["pairs"], "pairs.tsv");

  write_file(dir / "bad.json", R"({"vectors": "space.vec", "colour": "blue"})");
  const auto unknown = run_cli("tagbias --config bad.json --out x", dir.path());
  EXPECT_EQ(unknown.exit_code, 2);
  EXPECT_NE(unknown.output.find("colour"), std::string::npos) << unknown.output;

  const auto wrong = run_cli("weat --config from_flags.json --out y", dir.path());
  EXPECT_EQ(wrong.exit_code, 2) << wrong.output;
}

TEST(Cli, ApplyMatchesLibraryProjection) {
  TempDir dir;
  write_file(dir / "v.vec", "2 2\na 1 2\nb -3 4\n");
  write_file(dir / "p.txt", "1 0\n0 0\n");
  const auto r = run_cli("apply --vectors v.vec --projection p.txt --output out.vec --out rep", dir.path());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto out = read_vectors(dir / "out.vec");
  EXPECT_DOUBLE_EQ(out.vectors()(1, 0), -3.0);
  EXPECT_DOUBLE_EQ(out.vectors()(1, 1), 0.0);
}
