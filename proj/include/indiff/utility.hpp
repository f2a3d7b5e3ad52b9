#pragma once

#include <span>
#include <vector>

namespace indiff {

enum class UtilityKind { exponential, sum_exponential };

/// A market maker's utility for terminal wealth,
///
///   u(x) = -sum_i (w_i / g_i) exp(-g_i x),    w_i > 0, g_i > 0.
///
/// The exponential family is the single-term case with w = 1, so that
/// u(x) = -exp(-g x) / g and u'(0) = 1. Every member is strictly increasing,
/// strictly concave, negative and tends to 0 at +infinity; its absolute risk
/// aversion is a convex combination of the rates g_i and therefore lies in
/// [min g, max g].
class UtilitySpec {
 public:
  static UtilitySpec exponential(double gamma);
  static UtilitySpec sum_exponential(std::vector<double> weights, std::vector<double> rates);

  UtilityKind kind() const noexcept { return kind_; }
  bool is_exponential() const noexcept { return kind_ == UtilityKind::exponential; }
  /// Risk aversion of an exponential utility; the first rate otherwise.
  double gamma() const noexcept { return rates_.front(); }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> rates() const noexcept { return rates_; }

  double value(double x) const;
  double marginal(double x) const;
  double second_derivative(double x) const;
  double risk_aversion(double x) const;
  double risk_tolerance(double x) const { return 1.0 / risk_aversion(x); }

  /// Solves u'(x) = y. Throws DomainError for y <= 0.
  double inverse_marginal(double y) const;

  /// Smallest c >= 1 with 1/c <= a(x) <= c for all x.
  double bound_constant() const;

 private:
  UtilitySpec(UtilityKind kind, std::vector<double> weights, std::vector<double> rates);

  UtilityKind kind_;
  std::vector<double> weights_;
  std::vector<double> rates_;
};

double eval_utility(const UtilitySpec& spec, double x);
double marginal(const UtilitySpec& spec, double x);
double second_derivative(const UtilitySpec& spec, double x);
double risk_aversion(const UtilitySpec& spec, double x);
double inverse_marginal(const UtilitySpec& spec, double y);

/// The ordered family of market makers and the common constant c of the
/// risk-aversion bounds.
class MakerPanel {
 public:
  explicit MakerPanel(std::vector<UtilitySpec> makers);

  int size() const noexcept { return static_cast<int>(makers_.size()); }
  const UtilitySpec& operator[](int m) const { return makers_[static_cast<std::size_t>(m)]; }
  std::span<const UtilitySpec> makers() const noexcept { return makers_; }

  double bound_constant() const noexcept { return c_; }
  bool all_exponential() const noexcept { return all_exponential_; }
  /// Aggregate risk tolerance sum_m 1/g_m; meaningful for exponential panels.
  double aggregate_tolerance() const noexcept { return aggregate_tolerance_; }

 private:
  std::vector<UtilitySpec> makers_;
  double c_ = 1.0;
  bool all_exponential_ = true;
  double aggregate_tolerance_ = 0.0;
};

}  // namespace indiff
