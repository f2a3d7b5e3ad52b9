#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "indiff/config.hpp"

namespace indiff {

/// Seeded corruptions used as negative controls: each suite must fail on at
/// least one of them.
enum class Corruption { none, probabilities, sign, tolerance };

struct VerifyOptions {
  int probes = 20;
  std::uint64_t seed = 1;
  Corruption corruption = Corruption::none;
};

struct SuiteResult {
  std::string name;
  int probes = 0;
  double max_deviation = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::string detail;
};

const std::vector<std::string>& suite_names();

/// Runs one suite by name, or every suite for "all". Throws
/// std::invalid_argument for unknown names.
std::vector<SuiteResult> run_verify(const ExperimentConfig& config, const std::string& suite,
                                    const VerifyOptions& options = {});

Corruption parse_corruption(const std::string& name);

}  // namespace indiff
