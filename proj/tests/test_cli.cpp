#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>
#include <algorithm>
#include <unistd.h>
#include <sys/wait.h>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const int status = std::system((std::string(INDIFF_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("indiff_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(Cli, SimulateIsDeterministic) {
  const auto d = scratch("det");
  write(d / "cfg.yaml", "tree:\n  steps: 5\nengine:\n  scheme: euler\n  paths: 20\nstrategy:\n  kind: constant\n  position: [0.5]\n");
  ASSERT_EQ(run("simulate --config " + (d / "cfg.yaml").string() + " --seed 3 --out " + (d / "a").string()), 0);
  ASSERT_EQ(run("simulate --config " + (d / "cfg.yaml").string() + " --seed 3 --out " + (d / "b").string()), 0);
  const auto a = slurp(d / "a" / "paths.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(d / "b" / "paths.csv"));
  EXPECT_EQ(a.rfind("# indiff-paths v1", 0), 0u);
  ASSERT_EQ(run("simulate --config " + (d / "cfg.yaml").string() + " --seed 4 --out " + (d / "c").string()), 0);
  EXPECT_NE(a, slurp(d / "c" / "paths.csv"));
  fs::remove_all(d);
}

TEST(Cli, ZeroStrategyHasZeroCashAndGain) {
  const auto d = scratch("zero");
  write(d / "cfg.yaml", "tree:\n  steps: 4\nstrategy:\n  kind: zero\n");
  ASSERT_EQ(run("simulate --config " + (d / "cfg.yaml").string() + " --out " + d.string()), 0);
  std::ifstream in(d / "paths.csv");
  std::string line;
  std::getline(in, line);  // version
  std::getline(in, line);  // header
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  const auto X = std::find(cols.begin(), cols.end(), "X") - cols.begin();
  const auto V = std::find(cols.begin(), cols.end(), "V") - cols.begin();
  ASSERT_LT(static_cast<std::size_t>(V), cols.size());
  int rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) f.push_back(c);
    EXPECT_EQ(std::stod(f[static_cast<std::size_t>(X)]), 0.0);
    EXPECT_LT(std::abs(std::stod(f[static_cast<std::size_t>(V)])), 1e-10);
    ++rows;
  }
  EXPECT_EQ(rows, 31);
  fs::remove_all(d);
}

TEST(Cli, ExitCodes) {
  const auto d = scratch("codes");
  write(d / "bad.yaml", "tree:\n  stepz: 4\n");
  EXPECT_EQ(run("simulate --config " + (d / "bad.yaml").string()), 2);
  EXPECT_EQ(run("simulate --config " + (d / "missing.yaml").string()), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("verify --suite conjugacy"), 0);
  EXPECT_EQ(run("verify --suite martingale --corrupt probabilities"), 1);
  EXPECT_EQ(run("verify --suite nope"), 2);
  EXPECT_EQ(run("pareto --v 0.5,0.5 --x 1"), 0);
  EXPECT_EQ(run("pareto --v 0.5 --x 1"), 2);
  EXPECT_EQ(run("dump-tree --steps 3 --out " + d.string()), 0);
  EXPECT_TRUE(fs::exists(d / "tree.csv"));
  fs::remove_all(d);
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  const auto d = scratch("env");
  write(d / "cfg.yaml", "tree:\n  steps: 3\n");
  const std::string cmd = "INDIFF_OUT=" + (d / "envout").string() + " " + INDIFF_CLI + " simulate --config " +
                          (d / "cfg.yaml").string() + " > /dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(d / "envout" / "paths.csv"));
  EXPECT_TRUE(fs::exists(d / "envout" / "meta.json"));
  fs::remove_all(d);
}

TEST(Cli, BachelierWritesComparison) {
  const auto d = scratch("bach");
  ASSERT_EQ(run("bachelier --paths 40 --steps 64 --out " + d.string()), 0);
  const auto csv = slurp(d / "bachelier.csv");
  EXPECT_EQ(csv.rfind("# indiff-bachelier v1", 0), 0u);
  fs::remove_all(d);
}
