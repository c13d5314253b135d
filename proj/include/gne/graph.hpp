#pragma once

#include "gne/core.hpp"

#include <utility>
#include <vector>

namespace gne {

/// Undirected communication graph over the agents, with the cost-dependency
/// sets N_i^J. Indices are 0-based.
class CommGraph {
 public:
  CommGraph() = default;
  CommGraph(Index agents, std::vector<std::pair<Index, Index>> edges);

  Index size() const { return n_; }
  const std::vector<std::pair<Index, Index>>& edges() const { return edges_; }
  /// N_i^λ, sorted ascending.
  const std::vector<Index>& neighbors(Index i) const { return nbrs_[static_cast<size_t>(i)]; }
  Index degree(Index i) const { return static_cast<Index>(neighbors(i).size()); }
  Index max_degree() const;
  /// N_i^J, sorted ascending, never contains i.
  const std::vector<Index>& cost_dependencies(Index i) const {
    return deps_[static_cast<size_t>(i)];
  }
  void set_cost_dependencies(Index i, std::vector<Index> deps);

  bool adjacent(Index i, Index j) const;
  Mat laplacian() const;
  bool connected() const;
  /// Second-smallest Laplacian eigenvalue.
  double algebraic_connectivity() const;
  double laplacian_max_eigenvalue() const;

  /// Connectivity, N_i^J ⊆ N_i^λ; throws ValidationError with evidence.
  void validate() const;

 private:
  Index n_ = 0;
  std::vector<std::pair<Index, Index>> edges_;
  std::vector<std::vector<Index>> nbrs_;
  std::vector<std::vector<Index>> deps_;
};

}  // namespace gne
