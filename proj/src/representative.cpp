#include "indiff/representative.hpp"

#include <cmath>
#include <string>

#include "indiff/errors.hpp"

namespace indiff {
namespace {

constexpr int kMaxIterations = 200;
constexpr double kRelativeTolerance = 1e-12;

// phi(l) = sum_m I_m(e^l / v^m) - x is strictly decreasing in l = log y with
// phi'(l) = -sum_m t_m(x^m).
struct Foc {
  const MakerPanel& panel;
  const Vector& v;
  double x;
  Vector split;

  double operator()(double l) {
    const double y = std::exp(l);
    double s = -x;
    for (int m = 0; m < panel.size(); ++m) {
      split[m] = panel[m].inverse_marginal(y / v[m]);
      s += split[m];
    }
    return s;
  }
  double slope() const {
    double t = 0.0;
    for (int m = 0; m < panel.size(); ++m) t += panel[m].risk_tolerance(split[m]);
    return -t;
  }
};

double solve_log_marginal(const MakerPanel& panel, const Vector& v, double x, Vector& split,
                          int& iterations) {
  const int M = panel.size();
  Foc phi{panel, v, x, Vector(M)};

  double y0 = 0.0;
  for (int m = 0; m < M; ++m) y0 += v[m] * panel[m].marginal(x / M);
  const double l0 = std::log(y0 / M);

  double width = std::log(2.0);
  double lo = l0 - width;
  double hi = l0 + width;
  double f_lo = phi(lo);
  double f_hi = phi(hi);
  int expansions = 0;
  while (!(f_lo >= 0.0 && f_hi <= 0.0)) {
    width *= 2.0;
    if (++expansions > 60)
      throw NumericError("representative_utility: bracket expansion failed", std::min(f_lo, -f_hi),
                         expansions);
    lo = l0 - width;
    hi = l0 + width;
    f_lo = phi(lo);
    f_hi = phi(hi);
  }

  double l = 0.5 * (lo + hi);
  double f = phi(l);
  bool converged = false;
  for (int it = 0; it < kMaxIterations; ++it) {
    ++iterations;
    if (f > 0.0)
      lo = l;
    else
      hi = l;
    double next = l - f / phi.slope();
    if (!(next >= lo && next <= hi)) next = 0.5 * (lo + hi);
    const double step = next - l;
    l = next;
    f = phi(l);
    if (converged) break;  // one polishing step after the tolerance is met
    if (std::abs(step) <= kRelativeTolerance || f == 0.0) converged = true;
  }
  if (!converged)
    throw NumericError("representative_utility: root-find did not converge", f, iterations);
  split = phi.split;
  return l;
}

}  // namespace

Representative representative_utility(const MakerPanel& panel, const Vector& v, double x,
                                      SolveMode mode) {
  const int M = panel.size();
  if (v.size() != M) throw std::invalid_argument("representative_utility: weight dimension mismatch");
  for (int m = 0; m < M; ++m)
    if (!(v[m] > 0.0)) throw DomainError("representative_utility: weights must be positive");

  Representative out;
  out.split.resize(M);
  if (M == 1) {
    out.split[0] = x;
    out.y = v[0] * panel[0].marginal(x);
  } else if (panel.all_exponential() && mode == SolveMode::automatic) {
    // x^m = log(v^m / y) / g_m, summing to x gives log y in closed form.
    const double tol = panel.aggregate_tolerance();
    double s = 0.0;
    for (int m = 0; m < M; ++m) s += std::log(v[m]) / panel[m].gamma();
    const double log_y = (s - x) / tol;
    out.y = std::exp(log_y);
    for (int m = 0; m < M; ++m) out.split[m] = (std::log(v[m]) - log_y) / panel[m].gamma();
  } else {
    const double l = solve_log_marginal(panel, v, x, out.split, out.iterations);
    out.y = std::exp(l);
  }

  out.tolerance.resize(M);
  out.r_v.resize(M);
  out.r = 0.0;
  double total_tolerance = 0.0;
  for (int m = 0; m < M; ++m) {
    out.r_v[m] = panel[m].value(out.split[m]);
    out.r += v[m] * out.r_v[m];
    out.tolerance[m] = panel[m].risk_tolerance(out.split[m]);
    total_tolerance += out.tolerance[m];
  }

  const double y = out.y;
  out.r_xx = -y / total_tolerance;
  out.r_vx.resize(M);
  out.r_vv.resize(M, M);
  for (int l = 0; l < M; ++l) {
    out.r_vx[l] = y * out.tolerance[l] / (v[l] * total_tolerance);
    for (int m = 0; m < M; ++m) {
      const double delta = l == m ? 1.0 : 0.0;
      out.r_vv(l, m) =
          y * out.tolerance[l] * (delta - out.tolerance[m] / total_tolerance) / (v[l] * v[m]);
    }
  }
  return out;
}

RepresentativeGradient representative_gradient(const MakerPanel& panel, const Vector& v, double x) {
  const auto rep = representative_utility(panel, v, x);
  return {rep.r_v, rep.y};
}

Vector pareto_allocation(const MakerPanel& panel, const PrimalPoint& a, double sigma) {
  return representative_utility(panel, a.v, sigma).split;
}

Vector weights_from_allocation(const MakerPanel& panel, const Vector& allocation) {
  const int M = panel.size();
  if (allocation.size() != M)
    throw std::invalid_argument("weights_from_allocation: allocation dimension mismatch");
  Vector lambda(M);
  for (int m = 0; m < M; ++m) {
    if (!std::isfinite(allocation[m]))
      throw DomainError("weights_from_allocation: allocation entries must be finite");
    lambda[m] = 1.0 / panel[m].marginal(allocation[m]);
  }
  return lambda / lambda.sum();
}

}  // namespace indiff
