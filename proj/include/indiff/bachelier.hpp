#pragma once

#include <span>

#include "indiff/lattice.hpp"
#include "indiff/types.hpp"
#include "indiff/utility.hpp"

namespace indiff {

/// One exponential market maker with endowment Sigma0 = b + mu/(gamma sigma) B_T
/// and one claim psi = s + mu T + sigma B_T.
struct BachelierParams {
  double gamma = 1.0;
  double b = 0.0;
  double mu = 0.1;
  double sigma = 0.2;
  double s = 10.0;
  double T = 1.0;

  void validate() const;  // throws std::invalid_argument
  double kappa(double q) const { return mu / sigma + gamma * sigma * q; }
};

/// N_0(q) = -E[exp(-gamma (Sigma0 + q psi))] / gamma, in closed form.
double bachelier_N0(const BachelierParams& p, double q);
/// N_t(q) = N_0(q) exp(-kappa B_t - kappa^2 t / 2).
double bachelier_N(const BachelierParams& p, double q, double t, double Bt);
/// F(v, x, q, t) = v exp(-gamma x) N_t(q).
double bachelier_F(const BachelierParams& p, double v, double x, double q, double t, double Bt);
double bachelier_K(const BachelierParams& p, double u, double q);
double bachelier_price(const BachelierParams& p, double t, double Bt);

/// Left-point sums of -Q dS - gamma sigma^2 / 2 Q^2 dt. Q[k] is held on
/// (t_k, t_{k+1}]; times and B share the grid of Q.size() + 1 points.
double bachelier_gain(const BachelierParams& p, std::span<const double> Q, std::span<const double> times,
                      std::span<const double> B);

/// Cash xi with E[u(Sigma0 + xi + q psi)] = E[u(Sigma0)]: -q s + gamma sigma^2 q^2 T / 2.
double bachelier_indifference_price(const BachelierParams& p, double q);

MakerPanel bachelier_panel(const BachelierParams& p);
Lattice bachelier_lattice(const BachelierParams& p, int steps);

}  // namespace indiff
