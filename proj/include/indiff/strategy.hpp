#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "indiff/path_tree.hpp"
#include "indiff/saddle.hpp"

namespace indiff {

/// Called at a path-tree node; returns the position for the interval that
/// starts at this node, or nothing to keep the current one. Deciding at
/// the node for the following interval makes positions predictable.
using PositionRule = std::function<std::optional<Vector>(const PathTree&, std::int64_t node)>;

/// A simple strategy: positions theta_n held on (tau_{n-1}, tau_n], with
/// the rebalance times restricted to lattice times (plus any node
/// predicate the rule encodes). The position at time 0 is not charged.
struct SimpleStrategy {
  PositionRule rule;

  /// Rebalances at the listed levels to theta(level, B, t).
  static SimpleStrategy on_grid(std::vector<int> levels,
                                std::function<Vector(int level, const Vector& B, double t)> theta);
  static SimpleStrategy constant(const Vector& q);
};

/// State reported left-continuously at a path-tree node: the primal point
/// in force on the interval ending at the node.
struct NodeState {
  Vector U;
  Vector W;
  double X = 0.0;
  double V = 0.0;
  bool has_V = false;
  Vector Q;
  bool rebalanced = false;
  double preservation = 0.0;  // |F_v(zeta_new, node) - U|_inf after a rebalance
  bool exploded = false;
};

struct ExplosionReport {
  bool exploded = false;
  std::int64_t node = -1;
  double time = 0.0;
};

struct MarketStatePath {
  std::vector<NodeState> states;  // indexed like the path tree; empty U past an explosion
  ExplosionReport explosion;
  double max_preservation = 0.0;
  // max over nodes of |sum_e p_e U_child - U| (complete trees, no rebalance
  // in between for the forward induction; every node for the Euler scheme)
  double martingale = 0.0;
};

struct EngineOptions {
  bool compute_gain = true;     // V = -G(U, 1, 0) at inner nodes (leaves use the closed form)
  bool check_martingale = true;
  double explode_ratio = 1e-10; // explosion when max U^m > -ratio |U_0|_inf
};

MarketStatePath execute_simple(const ConjugateSolver& solver, const PathTree& tree, const Vector& lambda0,
                               const SimpleStrategy& strategy, const EngineOptions& options = {});

/// Max over rebalance nodes of the utility-preservation residual.
double utility_preservation_residual(const MarketStatePath& path);

/// dH/dv at the saddle point of (u, 1, q), using simplex-normalised weights.
Matrix kernel_K(const ConjugateSolver& solver, const Vector& u, const Vector& q, NodeRef node,
                const SaddleResult* warm = nullptr);

/// Position process for the Euler engine: the position chosen at a node for
/// the interval that follows it. The root's own position is 0.
using PositionProcess = std::function<Vector(const PathTree&, std::int64_t node)>;

MarketStatePath simulate_sde(const ConjugateSolver& solver, const PathTree& tree, const Vector& U0,
                             const PositionProcess& Q, const EngineOptions& options = {});

struct StateRecovery {
  Vector W;
  double X = 0.0;
  double V = 0.0;
};
StateRecovery state_from_U(const ConjugateSolver& solver, const Vector& U, const Vector& Q, NodeRef node);

/// The cash-balance sandwich lower <= G(-1, 1, Q) - X <= upper.
struct CashBounds {
  double lower = 0.0;
  double middle = 0.0;
  double upper = 0.0;
  bool holds(double tol = 1e-9) const { return lower - tol <= middle && middle <= upper + tol; }
};
CashBounds cash_bounds(const ConjugateSolver& solver, const Vector& U, double X, const Vector& Q,
                       NodeRef node, double c);

/// E[r(lambda0, Sigma0)] and E[r(lambda0, Sigma0 - V_T)] over the leaves of a
/// complete path tree.
struct NoArbitrageReport {
  double before = 0.0;
  double after = 0.0;
  double max_abs_gain = 0.0;
};
NoArbitrageReport no_arbitrage(const MakerPanel& panel, const PathTree& tree, const MarketStatePath& path,
                               const Vector& lambda0);

}  // namespace indiff
