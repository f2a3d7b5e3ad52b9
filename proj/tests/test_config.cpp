#include <map>

#include <gtest/gtest.h>

#include "indiff/config.hpp"
#include "indiff/errors.hpp"
#include "indiff/experiment.hpp"
#include "indiff/verify.hpp"

using namespace indiff;

namespace {

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

std::string error_key(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST(Config, ParsesAllBlocks) {
  const auto c = parse_config(R"(
panel:
  makers:
    - {kind: exponential, gamma: 2}
    - {kind: sum_exponential, weights: [1, 1], rates: [0.5, 2]}
  lambda0: [1, 3]
tree:
  steps: 5
  horizon: 2
  dim: 1
  sigma0: "0.5*B"
  psi: ["B", "1 + B^2"]
strategy:
  kind: table
  rebalance: [0, 2]
  table: [[1, 0], [0, -1]]
engine:
  scheme: euler
  paths: 12
  seed: 99
output:
  directory: results
bachelier:
  sigma: 0.3
  steps: 64
)");
  EXPECT_EQ(c.panel.makers.size(), 2u);
  EXPECT_EQ(c.tree.spec.steps, 5);
  EXPECT_EQ(c.tree.psi.size(), 2u);
  EXPECT_EQ(c.strategy.kind, StrategyKind::table);
  EXPECT_EQ(c.engine.scheme, Scheme::euler);
  EXPECT_EQ(c.engine.seed, 99u);
  EXPECT_EQ(c.output.directory, "results");
  EXPECT_DOUBLE_EQ(c.bachelier.params.sigma, 0.3);
  EXPECT_EQ(make_lattice(c.tree).claims(), 2);
  const auto w = initial_weights(c.panel);
  EXPECT_DOUBLE_EQ(w[1], 0.75);
}

TEST(Config, ErrorsCarryKeyAndLine) {
  EXPECT_EQ(error_line("tree:\n  steps: 4\n  colour: red\n"), 3);
  EXPECT_EQ(error_key("tree:\n  steps: 4\n  colour: red\n"), "tree.colour");
  EXPECT_EQ(error_key("tree:\n  steps: -1\n"), "tree.steps");
  EXPECT_EQ(error_key("tree:\n  steps: many\n"), "tree.steps");
  EXPECT_EQ(error_key("panel:\n  makers:\n    - {kind: cubic}\n"), "panel.makers[0].kind");
  EXPECT_EQ(error_key("tree:\n  sigma0: \"1 +\"\n"), "tree.sigma0");
  EXPECT_EQ(error_key("strategy:\n  kind: table\n  rebalance: [0, 9]\n  table: [[1], [2]]\n"), "strategy.rebalance");
  EXPECT_EQ(error_key("engine:\n  tolerance: 0\n"), "engine.tolerance");
  EXPECT_EQ(error_key("panel:\n  makers:\n    - {kind: exponential, gamma: 4}\n  c: 2\n"), "panel.c");
  EXPECT_EQ(error_key("nonsense: 1\n"), "nonsense");
  EXPECT_GT(error_line("tree: [unclosed\n"), 0);
  EXPECT_THROW(load_config("/nonexistent/file.yaml"), ConfigError);
}

TEST(Config, DefaultIsValid) {
  const auto c = default_config();
  EXPECT_NO_THROW(make_panel(c.panel));
  EXPECT_NO_THROW(make_lattice(c.tree));
}

TEST(Verify, DefaultSuitesPass) {
  auto c = default_config();
  VerifyOptions o;
  o.probes = 6;
  for (const auto& name : {"gradient", "martingale", "conjugacy", "roundtrip", "bounds"}) {
    const auto r = run_verify(c, name, o);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_TRUE(r[0].passed) << name << " " << r[0].max_deviation << " " << r[0].detail;
  }
  EXPECT_THROW(run_verify(c, "nope", o), std::invalid_argument);
}

TEST(Verify, ExponentialBoundsReportRange) {
  auto c = parse_config("panel:\n  makers:\n    - {kind: exponential, gamma: 0.5}\n    - {kind: exponential, gamma: 2}\n");
  VerifyOptions o;
  o.probes = 10;
  const auto r = run_verify(c, "bounds", o);
  EXPECT_TRUE(r[0].passed) << r[0].detail;
  EXPECT_NE(r[0].detail.find("eigenvalues"), std::string::npos);
}

TEST(Verify, EverySuiteHasAFailingCorruption) {
  auto c = default_config();
  c.bachelier.paths = 50;
  c.bachelier.steps = 64;
  VerifyOptions o;
  o.probes = 4;
  std::map<std::string, bool> caught;
  for (auto k : {Corruption::probabilities, Corruption::sign, Corruption::tolerance}) {
    o.corruption = k;
    for (const auto& r : run_verify(c, "all", o))
      if (!r.passed) caught[r.name] = true;
  }
  for (const auto& name : suite_names()) EXPECT_TRUE(caught[name]) << name;

  o.corruption = Corruption::probabilities;
  EXPECT_FALSE(run_verify(c, "martingale", o)[0].passed);
  EXPECT_EQ(parse_corruption("sign"), Corruption::sign);
  EXPECT_THROW(parse_corruption("gamma-rays"), std::invalid_argument);
}
