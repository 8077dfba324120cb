#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"
#include "mbvge/mixture.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace mbvge;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mbvge_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  static std::string slurp(const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  static void write(const std::string& p, const std::string& text) { std::ofstream(p) << text; }

  static std::vector<std::string> set1_flags() {
    return {"--p", "0.3", "--a1", "1", "--a2", "1.2", "--a3", "1", "--l1", "1",
            "--b1", "1", "--b2", "1.4", "--b3", "2", "--l2", "0.5"};
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_F(CliTest, SampleIsReproducible) {
  const auto args = concat({"sample", "--n", "5", "--seed", "3"}, set1_flags());
  ASSERT_EQ(run(concat(args, {"--out", path("a.csv")})), 0) << err_.str();
  ASSERT_EQ(run(concat(args, {"--out", path("b.csv")})), 0) << err_.str();
  const std::string a = slurp(path("a.csv"));
  EXPECT_EQ(a, slurp(path("b.csv")));
  EXPECT_EQ(a.substr(0, a.find('\n')), "x1,x2,region,label");
  const auto table = cli::read_csv(path("a.csv"));
  EXPECT_EQ(table.rows.size(), 5u);
  EXPECT_TRUE(fs::exists(path("a.csv.manifest.json")));
}

TEST_F(CliTest, SampleRoundTripsThroughCsv) {
  ASSERT_EQ(run(concat({"sample", "--n", "50", "--out", path("s.csv")}, set1_flags())), 0);
  const auto pairs = cli::read_pairs(path("s.csv"));
  ASSERT_EQ(pairs.size(), 50u);
  for (const auto& p : pairs) {
    EXPECT_GT(p.x1, 0.0);
    EXPECT_GT(p.x2, 0.0);
  }
}

TEST_F(CliTest, InvalidWeightIsUsageError) {
  auto args = concat({"sample", "--n", "5", "--out", path("x.csv")}, set1_flags());
  args[6] = "1.5";
  EXPECT_EQ(run(args), 2);
  EXPECT_NE(err_.str().find("p must lie in (0,1)"), std::string::npos) << err_.str();
}

TEST_F(CliTest, DensityGridMatchesLibrary) {
  ASSERT_EQ(run(concat({"density-grid", "--xmin", "0.5", "--xmax", "1.5", "--steps", "3", "--out",
                        path("g.csv")},
                       set1_flags())),
            0)
      << err_.str();
  const auto table = cli::read_csv(path("g.csv"));
  ASSERT_EQ(table.rows.size(), 9u);
  EXPECT_EQ(table.header, (std::vector<std::string>{"x1", "x2", "density"}));
  const auto m = oracle::set1();
  for (const auto& row : table.rows) {
    const double x1 = std::stod(row[0]);
    const double x2 = std::stod(row[1]);
    const double f = std::stod(row[2]);
    double expected = 0;
    if (x1 == x2) {
      expected = m.p() * std::exp(bvge_log_density(m.comp0(), Region::Lower, x1, x2)) +
                 (1 - m.p()) * std::exp(bvge_log_density(m.comp1(), Region::Lower, x1, x2));
    } else {
      expected = mix_density(m, BVGEPair::classified(x1, x2)).value;
    }
    EXPECT_NEAR(f, expected, 1e-14 * expected);
  }
  const auto diag = cli::read_csv(path("g.csv.diag.csv"));
  ASSERT_EQ(diag.rows.size(), 3u);
  const double y = std::stod(diag.rows[1][0]);
  EXPECT_NEAR(std::stod(diag.rows[1][1]),
              mix_density(m, BVGEPair::classified(y, y)).value, 1e-14);
}

TEST_F(CliTest, DensityGridSymmetricParameters) {
  const std::vector<std::string> sym = {"--p", "0.5", "--a1", "1", "--a2", "1", "--a3", "1",
                                        "--l1", "1", "--b1", "2", "--b2", "2", "--b3", "0.5",
                                        "--l2", "2"};
  ASSERT_EQ(run(concat({"density-grid", "--xmax", "2", "--steps", "5", "--out", path("g.csv")}, sym)),
            0);
  const auto table = cli::read_csv(path("g.csv"));
  std::map<std::pair<std::string, std::string>, std::string> cells;
  for (const auto& row : table.rows) cells[{row[0], row[1]}] = row[2];
  for (const auto& [key, value] : cells) EXPECT_EQ(value, (cells[{key.second, key.first}]));
}

TEST_F(CliTest, MalformedDataNamesLine) {
  std::string text = "x1,x2\n";
  for (int i = 0; i < 15; ++i) text += "1.0,2.0\n";
  text += "1.0,abc\n";
  write(path("bad.csv"), text);
  EXPECT_EQ(run({"fit", "--data", path("bad.csv"), "--out", path("f.json")}), 2);
  EXPECT_NE(err_.str().find("line 17"), std::string::npos) << err_.str();
}

TEST_F(CliTest, AllTiesIsModelInadequacy) {
  write(path("ties.csv"), "x1,x2\n1,1\n2,2\n3,3\n");
  EXPECT_EQ(run({"fit", "--data", path("ties.csv"), "--out", path("f.json")}), 1);
  EXPECT_NE(err_.str().find("model inadequacy"), std::string::npos);
}

TEST_F(CliTest, FitWithIterationCap) {
  ASSERT_EQ(run(concat({"sample", "--n", "200", "--out", path("s.csv")}, set1_flags())), 0);
  ASSERT_EQ(run({"fit", "--data", path("s.csv"), "--max-iter", "1", "--out", path("f.json")}), 0)
      << err_.str();
  const auto j = nlohmann::json::parse(slurp(path("f.json")));
  EXPECT_FALSE(j["converged"].get<bool>());
  EXPECT_EQ(j["iterations"].get<int>(), 1);
  EXPECT_EQ(j["stop_reason"], "iteration_cap");
  EXPECT_EQ(j["data"]["n"].get<int>(), 200);
  EXPECT_EQ(j["loglik_trace"].size(), 2u);
}

TEST_F(CliTest, ReplayReproducesFit) {
  ASSERT_EQ(run(concat({"sample", "--n", "150", "--out", path("s.csv")}, set1_flags())), 0);
  ASSERT_EQ(run({"fit", "--data", path("s.csv"), "--max-iter", "50", "--out", path("f.json")}), 0);
  const std::string first = slurp(path("f.json"));
  ASSERT_EQ(run({"replay", path("f.json.manifest.json")}), 0) << err_.str();
  EXPECT_EQ(slurp(path("f.json")), first);
}

TEST_F(CliTest, ReplayRefusesChangedInput) {
  ASSERT_EQ(run(concat({"sample", "--n", "150", "--out", path("s.csv")}, set1_flags())), 0);
  ASSERT_EQ(run({"fit", "--data", path("s.csv"), "--max-iter", "5", "--out", path("f.json")}), 0);
  write(path("s.csv"), "x1,x2\n1,2\n2,1\n");
  EXPECT_NE(run({"replay", path("f.json.manifest.json")}), 0);
}

TEST_F(CliTest, SimstudySmoke) {
  write(path("cfg.json"), R"({"truth": {"p": 0.3, "alpha1": 1, "alpha2": 1.2, "alpha3": 1,
    "lambda1": 1, "beta1": 1, "beta2": 1.4, "beta3": 2, "lambda2": 0.5},
    "n": 100, "replications": 2, "seed": 5, "em": {"max_iter": 200}})");
  ASSERT_EQ(run({"simstudy", "--config", path("cfg.json"), "--out-dir", path("study"), "--threads",
                 "1"}),
            0)
      << err_.str();
  const auto reps = cli::read_csv(path("study/replications.csv"));
  EXPECT_EQ(reps.rows.size(), 2u);
  const auto summary = nlohmann::json::parse(slurp(path("study/summary.json")));
  EXPECT_EQ(summary["parameters"].size(), 9u);
  EXPECT_EQ(summary["replications"].get<int>(), 2);
  EXPECT_TRUE(fs::exists(path("study/manifest.json")));
}

TEST_F(CliTest, SimstudyRejectsUnknownKey) {
  write(path("cfg.json"), R"({"truth": {"p": 0.3, "alpha1": 1, "alpha2": 1.2, "alpha3": 1,
    "lambda1": 1, "beta1": 1, "beta2": 1.4, "beta3": 2, "lambda2": 0.5}, "reps": 3})");
  EXPECT_EQ(run({"simstudy", "--config", path("cfg.json"), "--out-dir", path("study")}), 2);
}

TEST_F(CliTest, DependenceJson) {
  const std::vector<std::string> single = {"--p", "0.5", "--a1", "1", "--a2", "1", "--a3", "1",
                                           "--l1", "1", "--b1", "1", "--b2", "1", "--b3", "1",
                                           "--l2", "1"};
  ASSERT_EQ(run(concat({"dependence", "--out", path("d.json")}, single)), 0) << err_.str();
  const auto j = nlohmann::json::parse(slurp(path("d.json")));
  for (const char* key : {"kendall_tau", "spearman_rho", "upper_tail"}) {
    ASSERT_TRUE(j.contains(key)) << key;
    EXPECT_TRUE(j[key].contains("verbatim"));
    EXPECT_TRUE(j[key].contains("verbatim_in_range"));
    EXPECT_TRUE(j[key].contains("numeric"));
  }
  EXPECT_NEAR(j["kendall_tau"]["numeric"].get<double>(), 1.0 / 3.0, 1e-5);
  EXPECT_NEAR(j["upper_tail"]["numeric"].get<double>(), 0.5, 1e-6);
  EXPECT_EQ(j["lower_tail"]["value"].get<double>(), 0.0);
}

TEST_F(CliTest, UnknownSubcommandIsUsageError) {
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({"fit", "--data", path("missing.csv"), "--out", path("f.json")}), 2);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678, 2.5}) {
    EXPECT_EQ(std::stod(cli::format_double(v)), v);
  }
  EXPECT_EQ(cli::format_double(0.5), "0.5");
}
