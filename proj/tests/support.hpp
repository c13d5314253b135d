#pragma once

#include "gne/game_io.hpp"
#include "gne/hsdm.hpp"
#include "gne/oracle.hpp"

#include <string>
#include <vector>

namespace gne::testing {

inline std::string fixture(const std::string& name) { return std::string(GNE_FIXTURE_DIR) + "/" + name; }

inline const std::vector<std::string>& game_fixtures() {
  static const std::vector<std::string> names = {"projection2.json", "quadratic3.json",
                                                 "nonlinear2.json", "balance3.json"};
  return names;
}

/// F ≡ 0 game: boxes, random coupling rows with a feasible interior point, a
/// diagonal x-only selection with the reference pushed outside the feasible set.
inline GameSpec random_projection_game(Rng& rng, Index agents, Index dim, Index m) {
  GameSpec g;
  g.m = m;
  const Index n = agents * dim;
  Vec x0 = uniform_vector(rng, n, 0.2, 0.4);
  Mat a = Mat::Zero(m, n);
  for (Index r = 0; r < m; ++r) a.row(r) = uniform_vector(rng, n, 0.2, 1.0).transpose();
  const Vec slack = uniform_vector(rng, m, 0.05, 0.3);
  const Vec rhs = a * x0 + slack;
  for (Index i = 0; i < agents; ++i) {
    AgentSpec ag;
    ag.dim = dim;
    ag.cost = CostForm::quadratic({{i, SpMat(dim, dim)}}, Vec::Zero(dim));
    ag.set = LocalSet(Box{Vec::Zero(dim), Vec::Ones(dim)});
    const Mat ai = a.middleCols(i * dim, dim);
    ag.g = ConstraintForm::affine(ai.sparseView(), rhs / static_cast<double>(agents));
    g.agents.push_back(std::move(ag));
  }
  std::vector<std::pair<Index, Index>> edges;
  for (Index i = 0; i + 1 < agents; ++i) edges.emplace_back(i, i + 1);
  g.graph = CommGraph(agents, edges);
  g.slater_point = x0;
  std::vector<Index> dims(static_cast<size_t>(agents), dim);
  const Layout layout(dims, m);
  Vec w = Vec::Zero(layout.size()), ref = Vec::Zero(layout.size());
  w.head(n) = uniform_vector(rng, n, 0.5, 2.0);
  ref.head(n) = uniform_vector(rng, n, 0.6, 1.2);
  g.selection = SelectionFunction::diagonal(layout, w, ref);
  g.finalize();
  return g;
}

/// Strongly monotone quadratic game with random coupling (N agents, dim 1–2).
inline GameSpec random_strong_game(Rng& rng, Index agents, Index dim, Index m) {
  GameSpec g;
  g.m = m;
  const Index n = agents * dim;
  auto rand_mat = [&](double scale) {
    const Vec v = uniform_vector(rng, n * n, -scale, scale);
    return Mat(Eigen::Map<const Mat>(v.data(), n, n));
  };
  Mat s = rand_mat(0.3);
  Mat k = rand_mat(0.5);
  Mat mm = s * s.transpose() + Mat::Identity(n, n) + (k - k.transpose());
  // keep cross terms between neighbors only (path graph)
  for (Index i = 0; i < agents; ++i) {
    for (Index j = 0; j < agents; ++j) {
      if (std::abs(i - j) > 1) mm.block(i * dim, j * dim, dim, dim).setZero();
    }
  }
  // the own blocks must be symmetric
  for (Index i = 0; i < agents; ++i) {
    Mat b = mm.block(i * dim, i * dim, dim, dim);
    mm.block(i * dim, i * dim, dim, dim) = 0.5 * (b + b.transpose());
  }
  const Mat sym = 0.5 * (mm + mm.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  if (es.eigenvalues()[0] < 0.2) mm += (0.2 - es.eigenvalues()[0]) * Mat::Identity(n, n);
  const Vec c = uniform_vector(rng, n, -2.0, 2.0);
  Mat a = Mat::Zero(m, n);
  for (Index r = 0; r < m; ++r) a.row(r) = uniform_vector(rng, n, -1.0, 1.0).transpose();
  const Vec rhs = uniform_vector(rng, m, 0.1, 0.5);
  for (Index i = 0; i < agents; ++i) {
    AgentSpec ag;
    ag.dim = dim;
    std::vector<CostBlock> blocks;
    for (Index j = std::max<Index>(0, i - 1); j <= std::min(agents - 1, i + 1); ++j) {
      blocks.push_back({j, SpMat(mm.block(i * dim, j * dim, dim, dim).sparseView())});
    }
    ag.cost = CostForm::quadratic(std::move(blocks), c.segment(i * dim, dim));
    ag.set = LocalSet(Box{Vec::Constant(dim, -2.0), Vec::Constant(dim, 2.0)});
    ag.g = ConstraintForm::affine(SpMat(a.middleCols(i * dim, dim).sparseView()),
                                  rhs / static_cast<double>(agents));
    g.agents.push_back(std::move(ag));
  }
  std::vector<std::pair<Index, Index>> edges;
  for (Index i = 0; i + 1 < agents; ++i) edges.emplace_back(i, i + 1);
  g.graph = CommGraph(agents, edges);
  g.slater_point = Vec::Zero(n);
  std::vector<Index> dims(static_cast<size_t>(agents), dim);
  const Layout layout(dims, m);
  g.selection = SelectionFunction::diagonal(layout, Vec::Ones(layout.size()), Vec::Zero(layout.size()));
  g.finalize();
  return g;
}

}  // namespace gne::testing
