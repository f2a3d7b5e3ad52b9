#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "indiff/expression.hpp"
#include "indiff/types.hpp"

namespace indiff {

struct LatticeSpec {
  int steps = 4;          // N
  double horizon = 1.0;   // T
  int dim = 1;            // d
  double p_up = 0.5;      // per-dimension up probability
  // Skips the moment checks so that corrupted trees can be built for
  // negative controls.
  bool validate = true;
};

/// Recombining binomial lattice driven by a d-dimensional random walk with
/// increments +-sqrt(dt) per dimension. A node at level k is the vector of
/// up-move counts (j_1..j_d), 0 <= j_i <= k, flattened as sum j_i (k+1)^i.
/// Each node has 2^d children. Leaves carry the endowment Sigma0 and the
/// claim payoffs psi_1..psi_J, stored structure-of-arrays.
class Lattice {
 public:
  /// sigma0 has one entry per leaf; psi is J blocks of leaf_count entries.
  Lattice(const LatticeSpec& spec, std::vector<double> sigma0, std::vector<double> psi);

  static Lattice from_expressions(const LatticeSpec& spec, const std::string& sigma0,
                                  const std::vector<std::string>& psi);

  const LatticeSpec& spec() const noexcept { return spec_; }
  int steps() const noexcept { return spec_.steps; }
  int dim() const noexcept { return spec_.dim; }
  int claims() const noexcept { return claims_; }
  double dt() const noexcept { return dt_; }
  double time(int level) const noexcept { return level * dt_; }

  std::int64_t nodes_at(int level) const;
  std::int64_t leaf_count() const noexcept { return leaves_; }
  NodeRef root() const noexcept { return {0, 0}; }
  bool is_leaf(NodeRef n) const noexcept { return n.level == spec_.steps; }
  bool contains(NodeRef n) const noexcept;

  int child_count() const noexcept { return 1 << spec_.dim; }
  NodeRef child(NodeRef n, int edge) const;
  double edge_probability(int edge) const;
  Vector edge_increment(int edge) const;

  std::vector<int> up_counts(NodeRef n) const;
  NodeRef from_counts(int level, std::span<const int> counts) const;
  Vector brownian(NodeRef n) const;
  /// Leaf index of a level-N node.
  std::int64_t leaf_index(NodeRef n) const;

  std::span<const double> sigma0() const noexcept { return sigma0_; }
  std::span<const double> psi(int j) const;
  std::span<const double> psi() const noexcept { return psi_; }

  /// Binomial weights of the leaves reachable from n, in the order given by
  /// reachable_leaves. For d = 1 the leaves are the contiguous range
  /// [first, first + count).
  void reachable(NodeRef n, std::vector<std::int64_t>& leaves, std::vector<double>& weights) const;
  struct Span {
    std::int64_t first;
    std::span<const double> weights;
  };
  Span reachable_span(NodeRef n) const;  // d = 1 only

  /// Max over nodes of |sum p_e dB_e| and |sum p_e dB_e dB_e^T - dt I|.
  struct MomentReport {
    double mean_error = 0.0;
    double variance_error = 0.0;
    double probability_error = 0.0;
  };
  MomentReport moment_errors() const;

 private:
  void check_node(NodeRef n) const;

  LatticeSpec spec_;
  double dt_ = 0.0;
  double sqrt_dt_ = 0.0;
  int claims_ = 0;
  std::int64_t leaves_ = 0;
  std::vector<double> sigma0_;
  std::vector<double> psi_;
  // rows_[n] = binomial(n, l) p^l (1-p)^(n-l), l = 0..n, built by Pascal
  // recursion so that a node's row is exactly the p-mix of its children's.
  std::vector<std::vector<double>> rows_;
};

}  // namespace indiff
