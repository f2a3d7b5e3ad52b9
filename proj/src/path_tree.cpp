#include "indiff/path_tree.hpp"

#include <algorithm>
#include <cmath>

#include "indiff/errors.hpp"

namespace indiff {

PathTree PathTree::full(const Lattice& lattice, std::int64_t max_nodes) {
  const double E = lattice.child_count();
  const double total = E == 1.0 ? lattice.steps() + 1.0
                                : (std::pow(E, lattice.steps() + 1) - 1.0) / (E - 1.0);
  if (total > static_cast<double>(max_nodes))
    throw TreeError("path tree: " + std::to_string(static_cast<long long>(total)) +
                    " histories exceed the limit of " + std::to_string(max_nodes) + " nodes");

  PathTree t(lattice);
  t.complete_ = true;
  t.nodes_.reserve(static_cast<std::size_t>(total));
  t.nodes_.push_back({lattice.root(), -1, -1, 1.0, -1, 0});
  for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
    const PathNode n = t.nodes_[i];
    if (lattice.is_leaf(n.lattice)) continue;
    t.nodes_[i].first_child = static_cast<std::int64_t>(t.nodes_.size());
    t.nodes_[i].child_count = lattice.child_count();
    for (int e = 0; e < lattice.child_count(); ++e)
      t.nodes_.push_back({lattice.child(n.lattice, e), static_cast<std::int64_t>(i), e,
                          n.probability * lattice.edge_probability(e), -1, 0});
  }
  return t;
}

PathTree PathTree::chain(const Lattice& lattice, std::span<const int> edges) {
  if (static_cast<int>(edges.size()) != lattice.steps())
    throw TreeError("path tree: a history needs one edge per step");
  PathTree t(lattice);
  t.complete_ = false;
  t.nodes_.reserve(edges.size() + 1);
  t.nodes_.push_back({lattice.root(), -1, -1, 1.0, -1, 0});
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const int e = edges[k];
    auto& parent = t.nodes_.back();
    parent.first_child = static_cast<std::int64_t>(k) + 1;
    parent.child_count = 1;
    const PathNode next{lattice.child(parent.lattice, e), static_cast<std::int64_t>(k), e,
                        parent.probability * lattice.edge_probability(e), -1, 0};
    t.nodes_.push_back(next);
  }
  return t;
}

PathTree PathTree::sample(const Lattice& lattice, std::mt19937_64& rng) {
  std::vector<int> edges(static_cast<std::size_t>(lattice.steps()));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (auto& e : edges) {
    e = 0;
    for (int i = 0; i < lattice.dim(); ++i)
      if (uni(rng) < lattice.spec().p_up) e |= 1 << i;
  }
  return chain(lattice, edges);
}

std::vector<std::int64_t> PathTree::history(std::int64_t i) const {
  std::vector<std::int64_t> out;
  for (; i >= 0; i = (*this)[i].parent) out.push_back(i);
  std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace indiff
