#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace indiff {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Element of A = (0,inf)^M x R x R^J: weights, cash and stock position held
/// collectively by the market makers.
struct PrimalPoint {
  Vector v;
  double x = 0.0;
  Vector q;
};

/// Element of B = (-inf,0)^M x (0,inf) x R^J: indirect utilities, marginal
/// utility scale and stock position.
struct DualPoint {
  Vector u;
  double y = 1.0;
  Vector q;
};

/// A node of the recombining lattice: time level and flat index of the
/// up-move counts (one count per Brownian dimension).
struct NodeRef {
  int level = 0;
  std::int64_t index = 0;

  friend bool operator==(const NodeRef&, const NodeRef&) = default;
};

/// Scales a positive vector onto the open simplex.
inline Vector normalize_simplex(const Vector& v) { return v / v.sum(); }

}  // namespace indiff
