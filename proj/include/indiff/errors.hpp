#pragma once

#include <stdexcept>
#include <string>

namespace indiff {

/// Argument outside the mathematical domain of an operation (e.g. a
/// non-positive marginal utility, a non-negative indirect utility).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative solver failed to meet its tolerance. The message carries
/// the last residual and iteration count.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what + " (residual=" + std::to_string(residual) +
                           ", iterations=" + std::to_string(iterations) + ")"),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// Inconsistent scenario tree (probabilities, increments, payoffs).
class TreeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration problem; `key` names the offending entry, `line` is 1-based
/// or 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, int line, const std::string& what)
      : std::runtime_error(format(key, line, what)), key_(key), line_(line) {}

  const std::string& key() const noexcept { return key_; }
  int line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& key, int line, const std::string& what) {
    std::string out = "config";
    if (line > 0) out += ":" + std::to_string(line);
    if (!key.empty()) out += " [" + key + "]";
    return out + ": " + what;
  }

  std::string key_;
  int line_;
};

}  // namespace indiff
