#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "indiff/bachelier.hpp"
#include "indiff/lattice.hpp"
#include "indiff/utility.hpp"

namespace indiff {

struct PanelConfig {
  std::vector<UtilitySpec> makers;
  std::vector<double> lambda0;  // empty: uniform
  std::optional<double> c;      // declared bound constant; checked against the makers
};

struct TreeConfig {
  LatticeSpec spec;
  std::string sigma0 = "0";
  std::vector<std::string> psi{"B"};
};

enum class StrategyKind { zero, constant, simple, table, expression };

struct StrategyConfig {
  StrategyKind kind = StrategyKind::zero;
  std::vector<double> position;             // constant
  std::vector<int> rebalance;               // simple / table / expression levels
  std::vector<std::vector<double>> table;   // one row per rebalance level
  std::vector<std::string> expression;      // one per claim, in t and B
};

enum class Scheme { simple, euler };

struct EngineConfig {
  Scheme scheme = Scheme::simple;
  int paths = 0;             // 0: every history of the lattice
  std::uint64_t seed = 1;
  double tolerance = 1e-10;
  int max_iterations = 100;
  double explode_ratio = 1e-10;
  bool compute_gain = true;
  int threads = 1;
};

struct OutputConfig {
  std::string directory = "out";
};

struct BachelierConfig {
  BachelierParams params;
  int steps = 512;
  int paths = 10000;
  double q = 1.0;
};

struct ExperimentConfig {
  PanelConfig panel;
  TreeConfig tree;
  StrategyConfig strategy;
  EngineConfig engine;
  OutputConfig output;
  BachelierConfig bachelier;
  std::string source;  // file name, for diagnostics and metadata
};

/// Parses the YAML experiment file; errors carry the key and line.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<string>");
/// Default experiment used when no file is given.
ExperimentConfig default_config();

MakerPanel make_panel(const PanelConfig& cfg);
Lattice make_lattice(const TreeConfig& cfg);

}  // namespace indiff
