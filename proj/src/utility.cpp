#include "indiff/utility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "indiff/errors.hpp"

namespace indiff {

UtilitySpec::UtilitySpec(UtilityKind kind, std::vector<double> weights, std::vector<double> rates)
    : kind_(kind), weights_(std::move(weights)), rates_(std::move(rates)) {
  if (weights_.empty() || weights_.size() != rates_.size())
    throw std::invalid_argument("utility: weights and rates must be non-empty and of equal length");
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i]))
      throw std::invalid_argument("utility: weights must be positive");
    if (!(rates_[i] > 0.0) || !std::isfinite(rates_[i]))
      throw std::invalid_argument("utility: rates must be positive");
  }
}

UtilitySpec UtilitySpec::exponential(double gamma) {
  return UtilitySpec(UtilityKind::exponential, {1.0}, {gamma});
}

UtilitySpec UtilitySpec::sum_exponential(std::vector<double> weights, std::vector<double> rates) {
  return UtilitySpec(UtilityKind::sum_exponential, std::move(weights), std::move(rates));
}

double UtilitySpec::value(double x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < rates_.size(); ++i) s += weights_[i] / rates_[i] * std::exp(-rates_[i] * x);
  return -s;
}

double UtilitySpec::marginal(double x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < rates_.size(); ++i) s += weights_[i] * std::exp(-rates_[i] * x);
  return s;
}

double UtilitySpec::second_derivative(double x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < rates_.size(); ++i)
    s += weights_[i] * rates_[i] * std::exp(-rates_[i] * x);
  return -s;
}

double UtilitySpec::risk_aversion(double x) const {
  if (rates_.size() == 1) return rates_[0];
  // Factor out the largest exponent so that neither sum overflows.
  double top = -std::numeric_limits<double>::infinity();
  for (double g : rates_) top = std::max(top, -g * x);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < rates_.size(); ++i) {
    const double e = weights_[i] * std::exp(-rates_[i] * x - top);
    num += rates_[i] * e;
    den += e;
  }
  return num / den;
}

double UtilitySpec::inverse_marginal(double y) const {
  if (!(y > 0.0)) throw DomainError("inverse_marginal: y must be positive, got " + std::to_string(y));
  if (rates_.size() == 1) return std::log(weights_[0] / y) / rates_[0];

  // u' is strictly decreasing; grow a bracket geometrically from x = 0.
  const double target = std::log(y);
  auto phi = [&](double x) { return std::log(marginal(x)) - target; };
  double lo = 0.0;
  double hi = 0.0;
  double step = 1.0;
  if (phi(0.0) > 0.0) {
    hi = step;
    while (phi(hi) > 0.0) {
      lo = hi;
      step *= 2.0;
      hi += step;
      if (step > 1e6) throw NumericError("inverse_marginal: bracket expansion failed", phi(hi), 0);
    }
  } else {
    lo = -step;
    while (phi(lo) < 0.0) {
      hi = lo;
      step *= 2.0;
      lo -= step;
      if (step > 1e6) throw NumericError("inverse_marginal: bracket expansion failed", phi(lo), 0);
    }
  }
  for (int it = 0; it < 200 && hi - lo > 1e-3 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid) > 0.0 ? lo : hi) = mid;
  }
  // Newton polish on log u': d/dx log u'(x) = -a(x).
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 50; ++it) {
    const double f = phi(x);
    if (f == 0.0) break;
    (f > 0.0 ? lo : hi) = x;
    double next = x + f / risk_aversion(x);
    if (next < lo || next > hi) next = 0.5 * (lo + hi);
    const bool done = std::abs(next - x) <= 1e-15 * (1.0 + std::abs(x));
    x = next;
    if (done) break;
  }
  return x;
}

double UtilitySpec::bound_constant() const {
  const auto [lo, hi] = std::minmax_element(rates_.begin(), rates_.end());
  return std::max({*hi, 1.0 / *lo, 1.0});
}

double eval_utility(const UtilitySpec& spec, double x) { return spec.value(x); }
double marginal(const UtilitySpec& spec, double x) { return spec.marginal(x); }
double second_derivative(const UtilitySpec& spec, double x) { return spec.second_derivative(x); }
double risk_aversion(const UtilitySpec& spec, double x) { return spec.risk_aversion(x); }
double inverse_marginal(const UtilitySpec& spec, double y) { return spec.inverse_marginal(y); }

MakerPanel::MakerPanel(std::vector<UtilitySpec> makers) : makers_(std::move(makers)) {
  if (makers_.empty()) throw std::invalid_argument("panel: at least one market maker is required");
  for (const auto& u : makers_) {
    c_ = std::max(c_, u.bound_constant());
    all_exponential_ = all_exponential_ && u.is_exponential();
    aggregate_tolerance_ += 1.0 / u.gamma();
  }
}

}  // namespace indiff
