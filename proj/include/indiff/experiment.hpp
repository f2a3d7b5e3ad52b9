#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "indiff/config.hpp"
#include "indiff/strategy.hpp"

namespace indiff {

const char* version();

SimpleStrategy make_strategy(const StrategyConfig& cfg, int claims);
/// The same positions as a process for the Euler engine: the value chosen at
/// a node is the most recent decision on its history.
PositionProcess make_position_process(const StrategyConfig& cfg, int claims);
Vector initial_weights(const PanelConfig& cfg);

struct RunSummary {
  std::string csv_path;
  std::string meta_path;
  std::int64_t rows = 0;
  int exploded_paths = 0;
  double max_preservation = 0.0;
  double martingale = 0.0;
  double wall_seconds = 0.0;
};

/// Runs the configured engine and writes paths.csv and meta.json into
/// config.output.directory.
RunSummary run_simulate(const ExperimentConfig& config);

struct BachelierSummary {
  int paths = 0;
  int steps = 0;
  double mean_gain_error = 0.0;
  double gain_threshold = 0.0;   // 2% of gamma sigma^2 T / 2
  double price_engine = 0.0;
  double price_closed = 0.0;
  double price_rel_error = 0.0;
  double kernel_engine = 0.0;    // K at the root for the configured q
  double kernel_closed = 0.0;
  double wall_seconds = 0.0;
  bool passed() const { return mean_gain_error < gain_threshold && price_rel_error < 0.01; }
};

/// Euler paths of the indirect-utility SDE on the matched lattice against
/// the closed forms. When csv is non-null one row per path is written.
BachelierSummary run_bachelier(const BachelierConfig& cfg, std::uint64_t seed, int threads,
                               std::ostream* csv = nullptr);

/// Per-node CSV of every history of the lattice (refuses large trees).
void dump_tree(const TreeConfig& cfg, std::ostream& out);

}  // namespace indiff
