#include "indiff/bachelier.hpp"

#include <cmath>
#include <stdexcept>

namespace indiff {

void BachelierParams::validate() const {
  if (!(gamma > 0.0)) throw std::invalid_argument("bachelier: gamma must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("bachelier: sigma must be positive");
  if (!(T > 0.0)) throw std::invalid_argument("bachelier: T must be positive");
}

double bachelier_N0(const BachelierParams& p, double q) {
  const double k = p.kappa(q);
  return -std::exp(-p.gamma * (p.b + q * (p.s + p.mu * p.T)) + 0.5 * k * k * p.T) / p.gamma;
}

double bachelier_N(const BachelierParams& p, double q, double t, double Bt) {
  const double k = p.kappa(q);
  return bachelier_N0(p, q) * std::exp(-k * Bt - 0.5 * k * k * t);
}

double bachelier_F(const BachelierParams& p, double v, double x, double q, double t, double Bt) {
  return v * std::exp(-p.gamma * x) * bachelier_N(p, q, t, Bt);
}

double bachelier_K(const BachelierParams& p, double u, double q) { return -p.kappa(q) * u; }

double bachelier_price(const BachelierParams& p, double t, double Bt) { return p.s + p.mu * t + p.sigma * Bt; }

double bachelier_gain(const BachelierParams& p, std::span<const double> Q, std::span<const double> times,
                      std::span<const double> B) {
  if (times.size() != Q.size() + 1 || B.size() != times.size())
    throw std::invalid_argument("bachelier_gain: Q, time and Brownian grids do not match");
  double v = 0.0;
  for (std::size_t k = 0; k < Q.size(); ++k) {
    const double dt = times[k + 1] - times[k];
    const double dS = bachelier_price(p, times[k + 1], B[k + 1]) - bachelier_price(p, times[k], B[k]);
    v += -Q[k] * dS - 0.5 * p.gamma * p.sigma * p.sigma * Q[k] * Q[k] * dt;
  }
  return v;
}

double bachelier_indifference_price(const BachelierParams& p, double q) {
  return -q * p.s + 0.5 * p.gamma * p.sigma * p.sigma * q * q * p.T;
}

MakerPanel bachelier_panel(const BachelierParams& p) {
  p.validate();
  return MakerPanel({UtilitySpec::exponential(p.gamma)});
}

Lattice bachelier_lattice(const BachelierParams& p, int steps) {
  p.validate();
  LatticeSpec spec;
  spec.steps = steps;
  spec.horizon = p.T;
  spec.dim = 1;
  const double sdt = std::sqrt(p.T / steps);
  std::vector<double> sigma0(static_cast<std::size_t>(steps) + 1);
  std::vector<double> psi(sigma0.size());
  for (int j = 0; j <= steps; ++j) {
    const double B = (2.0 * j - steps) * sdt;
    sigma0[static_cast<std::size_t>(j)] = p.b + p.mu / (p.gamma * p.sigma) * B;
    psi[static_cast<std::size_t>(j)] = p.s + p.mu * p.T + p.sigma * B;
  }
  return Lattice(spec, std::move(sigma0), std::move(psi));
}

}  // namespace indiff
