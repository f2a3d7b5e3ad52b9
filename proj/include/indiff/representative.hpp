#pragma once

#include "indiff/types.hpp"
#include "indiff/utility.hpp"

namespace indiff {

/// How the first-order condition sum_m I_m(y / v^m) = x is solved.
/// `automatic` uses the closed form available for all-exponential panels;
/// `root_find` always runs the scalar root-finder (used to cross-check).
enum class SolveMode { automatic, root_find };

/// Value, optimal split and analytic first/second derivatives of the
/// representative market maker's utility
///
///   r(v, x) = sup_{x^1 + ... + x^M = x} sum_m v^m u_m(x^m).
///
/// With t_m the risk tolerance at the optimal split and T = sum_m t_m,
///   r_v^m = u_m(x^m),  r_x = y,  r_xx = -y / T,
///   r_{v^m x} = y t_m / (v^m T),
///   r_{v^l v^m} = y t_l (delta_lm - t_m / T) / (v^l v^m).
struct Representative {
  double r = 0.0;
  Vector split;       // optimal allocation x^m
  double y = 0.0;     // common marginal value v^m u_m'(x^m) = dr/dx
  Vector tolerance;   // t_m(x^m)
  Vector r_v;
  Matrix r_vv;
  Vector r_vx;
  double r_xx = 0.0;
  int iterations = 0;
};

Representative representative_utility(const MakerPanel& panel, const Vector& v, double x,
                                      SolveMode mode = SolveMode::automatic);

struct RepresentativeGradient {
  Vector d_v;
  double d_x = 0.0;
};

RepresentativeGradient representative_gradient(const MakerPanel& panel, const Vector& v, double x);

/// Pareto allocation pi(a) in the state where the total endowment equals
/// `sigma`: the optimal split of `sigma` under weights a.v.
Vector pareto_allocation(const MakerPanel& panel, const PrimalPoint& a, double sigma);

/// Simplex-normalised weights lambda^m proportional to 1 / u_m'(alpha^m).
Vector weights_from_allocation(const MakerPanel& panel, const Vector& allocation);

}  // namespace indiff
