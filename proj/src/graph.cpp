#include "gne/graph.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

namespace gne {

CommGraph::CommGraph(Index agents, std::vector<std::pair<Index, Index>> edges)
    : n_(agents), nbrs_(static_cast<size_t>(agents)), deps_(static_cast<size_t>(agents)) {
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n_ || b >= n_) {
      throw Error(ErrorKind::Validation, "graph edge references an unknown agent");
    }
    if (a == b) throw Error(ErrorKind::Validation, "graph self-loops are not allowed");
    if (a > b) std::swap(a, b);
    if (adjacent(a, b)) continue;
    edges_.emplace_back(a, b);
    nbrs_[static_cast<size_t>(a)].push_back(b);
    nbrs_[static_cast<size_t>(b)].push_back(a);
  }
  for (auto& list : nbrs_) std::sort(list.begin(), list.end());
  std::sort(edges_.begin(), edges_.end());
}

Index CommGraph::max_degree() const {
  Index best = 0;
  for (Index i = 0; i < n_; ++i) best = std::max(best, degree(i));
  return best;
}

void CommGraph::set_cost_dependencies(Index i, std::vector<Index> deps) {
  deps.erase(std::remove(deps.begin(), deps.end(), i), deps.end());
  std::sort(deps.begin(), deps.end());
  deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
  deps_[static_cast<size_t>(i)] = std::move(deps);
}

bool CommGraph::adjacent(Index i, Index j) const {
  const auto& list = nbrs_[static_cast<size_t>(i)];
  return std::find(list.begin(), list.end(), j) != list.end();
}

Mat CommGraph::laplacian() const {
  Mat lap = Mat::Zero(n_, n_);
  for (auto [a, b] : edges_) {
    lap(a, b) -= 1.0;
    lap(b, a) -= 1.0;
    lap(a, a) += 1.0;
    lap(b, b) += 1.0;
  }
  return lap;
}

bool CommGraph::connected() const {
  if (n_ <= 1) return true;
  std::vector<char> seen(static_cast<size_t>(n_), 0);
  std::queue<Index> frontier;
  frontier.push(0);
  seen[0] = 1;
  Index count = 1;
  while (!frontier.empty()) {
    const Index u = frontier.front();
    frontier.pop();
    for (Index v : neighbors(u)) {
      if (!seen[static_cast<size_t>(v)]) {
        seen[static_cast<size_t>(v)] = 1;
        ++count;
        frontier.push(v);
      }
    }
  }
  return count == n_;
}

double CommGraph::algebraic_connectivity() const {
  if (n_ <= 1) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> eig(laplacian(), Eigen::EigenvaluesOnly);
  return eig.eigenvalues()[1];
}

double CommGraph::laplacian_max_eigenvalue() const {
  if (n_ == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> eig(laplacian(), Eigen::EigenvaluesOnly);
  return eig.eigenvalues()[n_ - 1];
}

void CommGraph::validate() const {
  if (!connected()) throw Error(ErrorKind::Validation, "graph not connected");
  for (Index i = 0; i < n_; ++i) {
    for (Index j : cost_dependencies(i)) {
      if (!adjacent(i, j)) {
        std::ostringstream os;
        os << "cost dependency of agent " << i + 1 << " on agent " << j + 1
           << " is not a communication edge (N_i^J must be contained in N_i^lambda)";
        throw Error(ErrorKind::Validation, os.str());
      }
    }
  }
}

}  // namespace gne
