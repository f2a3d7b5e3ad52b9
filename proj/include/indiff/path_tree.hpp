#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "indiff/lattice.hpp"

namespace indiff {

/// A non-recombining tree over a lattice: each node is one history of
/// Brownian moves. Strategy state is path dependent, so engines walk this
/// tree while field values come from the recombining lattice. Nodes are
/// stored breadth first.
struct PathNode {
  NodeRef lattice;
  std::int64_t parent = -1;
  int edge = -1;              // edge taken from the parent
  double probability = 1.0;   // probability of the whole history
  std::int64_t first_child = -1;
  int child_count = 0;
};

class PathTree {
 public:
  /// Every history of the lattice; refuses trees above max_nodes.
  static PathTree full(const Lattice& lattice, std::int64_t max_nodes = std::int64_t{1} << 22);
  /// A single history following the given edges.
  static PathTree chain(const Lattice& lattice, std::span<const int> edges);
  static PathTree sample(const Lattice& lattice, std::mt19937_64& rng);

  const Lattice& lattice() const noexcept { return *lattice_; }
  std::int64_t size() const noexcept { return static_cast<std::int64_t>(nodes_.size()); }
  const PathNode& operator[](std::int64_t i) const { return nodes_[static_cast<std::size_t>(i)]; }
  int level(std::int64_t i) const { return (*this)[i].lattice.level; }
  bool is_leaf(std::int64_t i) const { return (*this)[i].child_count == 0; }
  /// True when every lattice edge of a non-terminal node is present.
  bool complete() const noexcept { return complete_; }
  /// Indices of the nodes along the history ending at i, root first.
  std::vector<std::int64_t> history(std::int64_t i) const;

 private:
  explicit PathTree(const Lattice& lattice) : lattice_(&lattice) {}

  const Lattice* lattice_;
  std::vector<PathNode> nodes_;
  bool complete_ = false;
};

}  // namespace indiff
