#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  std::string cmd = std::string(PMC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("pmc_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string out(const std::string& sub) const { return "--output-dir " + (dir_ / sub).string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, UnknownFlagIsUsageError) { EXPECT_EQ(run("simulate-em --no-such-flag"), 2); }

TEST_F(Cli, MissingSubcommandIsUsageError) { EXPECT_EQ(run(""), 2); }

TEST_F(Cli, ValidationErrorExitCode) {
  EXPECT_EQ(run(out("a") + " matrices --models min:0.3,0.3"), 3);
  EXPECT_EQ(run(out("b") + " bounds --model bogus:1"), 3);
}

TEST_F(Cli, VerifyPassesAndMutationFails) {
  EXPECT_EQ(run(out("ok") + " verify --a3 --n 6"), 0);
  EXPECT_EQ(run(out("bad") + " verify --a3 --n 6 --mutate biased-pick"), 1);
}

TEST_F(Cli, SimulateEmTwiceIdentical) {
  ASSERT_EQ(run(out("r1") + " --seed 42 simulate-em --m-stop 300 --chains 2"), 0);
  ASSERT_EQ(run(out("r2") + " --seed 42 simulate-em --m-stop 300 --chains 2"), 0);
  auto a = slurp(dir_ / "r1" / "simulate-em.csv");
  EXPECT_EQ(a.substr(0, a.find('\n')), "chain_id,m,j_count,e_m,seed");
  EXPECT_EQ(a, slurp(dir_ / "r2" / "simulate-em.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "r1" / "simulate-em.manifest.json"));
}

TEST_F(Cli, ManifestRerunAcrossWorkers) {
  ASSERT_EQ(run(out("m1") + " --workers 1 --seed 7 --format json variance --n-grid 60,120 --replicates 20"), 0);
  ASSERT_EQ(run(out("m2") + " --workers 4 --config " + (dir_ / "m1" / "variance.manifest.json").string()), 0);
  EXPECT_EQ(slurp(dir_ / "m1" / "variance.json"), slurp(dir_ / "m2" / "variance.json"));
}

TEST_F(Cli, ConfigPrecedence) {
  {
    std::ofstream cfg(dir_ / "cfg.json");
    cfg << R"({"m-stop": 200, "chains": 1, "seed": 3})";
  }
  ASSERT_EQ(run(out("c") + " simulate-em --config " + (dir_ / "cfg.json").string() + " --m-stop 100"), 0);
  auto csv = slurp(dir_ / "c" / "simulate-em.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);  // header + m = 100
  auto manifest = slurp(dir_ / "c" / "simulate-em.manifest.json");
  EXPECT_NE(manifest.find("\"seed\": 3"), std::string::npos);

  {
    std::ofstream bad(dir_ / "bad.json");
    bad << R"({"no-such-key": 1})";
  }
  EXPECT_EQ(run(out("d") + " simulate-em --config " + (dir_ / "bad.json").string()), 3);
}

TEST_F(Cli, AlignPrintsScore) {
  ASSERT_EQ(run(out("al") + " align 1101 1001"), 0);
  auto csv = slurp(dir_ / "al" / "align.csv");
  EXPECT_NE(csv.find("score,3\n"), std::string::npos);
  EXPECT_EQ(run(out("al2") + " align 110 1001"), 3);
}
