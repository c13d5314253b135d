#include "gne/game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gne {

void StateReader::check(Index j, bool primal) const {
  if (!graph_ || j == owner_) return;
  const auto& allowed = primal ? graph_->cost_dependencies(owner_) : graph_->neighbors(owner_);
  if (!std::binary_search(allowed.begin(), allowed.end(), j)) {
    std::ostringstream os;
    os << "agent " << owner_ << " read " << (primal ? "x" : "dual") << " block of agent " << j;
    throw Error(ErrorKind::LocalityViolation, os.str());
  }
}

Vec StateReader::x(Index j) const {
  check(j, true);
  return w_.segment(layout_.x_offset(j), layout_.dim(j));
}

Vec StateReader::lambda(Index j) const {
  check(j, false);
  return w_.segment(layout_.lambda_offset(j), layout_.coupling());
}

Vec StateReader::nu(Index j) const {
  check(j, false);
  return w_.segment(layout_.nu_offset(j), layout_.coupling());
}

CostForm CostForm::quadratic(std::vector<CostBlock> blocks, Vec c) {
  CostForm f;
  f.kind = Kind::Quadratic;
  std::sort(blocks.begin(), blocks.end(),
            [](const CostBlock& a, const CostBlock& b) { return a.agent < b.agent; });
  for (auto& blk : blocks) blk.m.makeCompressed();
  f.blocks = std::move(blocks);
  f.c = std::move(c);
  return f;
}

CostForm CostForm::blackbox(Gradient gradient, Value value, std::vector<Index> deps) {
  CostForm f;
  f.kind = Kind::Blackbox;
  f.gradient = std::move(gradient);
  f.value = std::move(value);
  f.deps = std::move(deps);
  return f;
}

ConstraintForm ConstraintForm::affine(SpMat a, Vec b) {
  ConstraintForm g;
  g.kind = Kind::Affine;
  a.makeCompressed();
  g.a = std::move(a);
  g.b = std::move(b);
  return g;
}

ConstraintForm ConstraintForm::quad(SpMat d, SpMat a, Vec b) {
  ConstraintForm g;
  g.kind = Kind::Quad;
  d.makeCompressed();
  a.makeCompressed();
  g.d = std::move(d);
  g.a = std::move(a);
  g.b = std::move(b);
  return g;
}

ConstraintForm ConstraintForm::none(Index m, Index n) {
  return affine(SpMat(m, n), Vec::Zero(m));
}

Vec ConstraintForm::value(const Vec& x) const {
  Vec v = a * x - b;
  if (kind == Kind::Quad) v += 0.5 * (d * x.cwiseProduct(x));
  return v;
}

Vec ConstraintForm::jacobian_t(const Vec& x, const Vec& y) const {
  Vec out = a.transpose() * y;
  if (kind == Kind::Quad) out += x.cwiseProduct(d.transpose() * y);
  return out;
}

SpMat ConstraintForm::jacobian(const Vec& x) const {
  if (kind == Kind::Affine) return a;
  SpMat j = a;
  j += SpMat(d * x.asDiagonal());
  return j;
}

bool GameSpec::affine() const {
  return std::all_of(agents.begin(), agents.end(),
                     [](const AgentSpec& ag) { return ag.g.is_affine(); });
}

namespace {

void fail(const std::string& msg) { throw Error(ErrorKind::Validation, msg); }

std::string agent_tag(Index i) {
  std::ostringstream os;
  os << "agent " << i + 1 << ": ";
  return os.str();
}

struct Components {
  std::vector<std::vector<Index>> groups;
};

// connected components of the sparsity pattern of a square sparse matrix
// (treated as undirected)
Components pattern_components(const SpMat& a) {
  const Index n = a.rows();
  std::vector<Index> parent(static_cast<size_t>(n));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index v) {
    while (parent[static_cast<size_t>(v)] != v) {
      parent[static_cast<size_t>(v)] = parent[static_cast<size_t>(parent[static_cast<size_t>(v)])];
      v = parent[static_cast<size_t>(v)];
    }
    return v;
  };
  for (Index r = 0; r < n; ++r) {
    for (SpMat::InnerIterator it(a, r); it; ++it) {
      if (it.value() == 0.0) continue;
      const Index u = find(r), v = find(it.col());
      if (u != v) parent[static_cast<size_t>(std::max(u, v))] = std::min(u, v);
    }
  }
  std::vector<std::vector<Index>> by_root(static_cast<size_t>(n));
  for (Index k = 0; k < n; ++k) by_root[static_cast<size_t>(find(k))].push_back(k);
  Components out;
  for (auto& g : by_root) {
    if (!g.empty()) out.groups.push_back(std::move(g));
  }
  return out;
}

Mat dense_block(const SpMat& a, const std::vector<Index>& idx) {
  const Index s = static_cast<Index>(idx.size());
  Mat out = Mat::Zero(s, s);
  std::vector<Index> pos(static_cast<size_t>(a.rows()), -1);
  for (Index t = 0; t < s; ++t) pos[static_cast<size_t>(idx[static_cast<size_t>(t)])] = t;
  for (Index t = 0; t < s; ++t) {
    for (SpMat::InnerIterator it(a, idx[static_cast<size_t>(t)]); it; ++it) {
      const Index c = pos[static_cast<size_t>(it.col())];
      if (c >= 0) out(t, c) = it.value();
    }
  }
  return out;
}

// sup{η ≥ 0 : S − η MᵀM ⪰ 0}; +inf when M = 0, 0 when not cocoercive
double cocoercivity_modulus(const Mat& m) {
  if (m.norm() == 0.0) return INFINITY;
  const Mat s = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(s, Eigen::EigenvaluesOnly);
  const double smax = es.eigenvalues().maxCoeff();
  const double scale = std::max(1.0, m.norm());
  if ((m - m.transpose()).norm() <= 1e-14 * scale) {
    return es.eigenvalues().minCoeff() >= -1e-12 * scale ? 1.0 / smax : 0.0;
  }
  if (smax <= 0.0) return 0.0;
  const Mat mtm = m.transpose() * m;
  auto ok = [&](double eta) {
    Eigen::SelfAdjointEigenSolver<Mat> e(s - eta * mtm, Eigen::EigenvaluesOnly);
    return e.eigenvalues().minCoeff() >= -1e-12 * scale;
  };
  double lo = 0.0, hi = 1.0 / smax;
  if (!ok(1e-12 * hi)) return 0.0;
  if (ok(hi)) return hi;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

void GameSpec::finalize(std::uint64_t seed, bool strict) {
  if (agents.empty()) fail("game has no agents");
  if (m < 0) fail("coupling dimension must be >= 0");
  std::vector<Index> dims;
  for (const auto& ag : agents) dims.push_back(ag.dim);
  layout_ = Layout(dims, m);
  report_ = AssumptionReport{};
  const Index n_agents = size();

  if (graph.size() == 0 && n_agents == 1) graph = CommGraph(1, {});
  if (graph.size() != n_agents) fail("graph agent count differs from the agent list");

  for (Index i = 0; i < n_agents; ++i) {
    const auto& ag = agents[static_cast<size_t>(i)];
    const std::string tag = agent_tag(i);
    if (ag.set.dim() != ag.dim) fail(tag + "local set dimension differs from dim");
    ag.set.validate();
    if (ag.ell.kind == ProxForm::Kind::L1Weighted) {
      if (ag.ell.weights.size() != ag.dim || (ag.ell.weights.array() < 0).any()) {
        fail(tag + "l1 weights must be non-negative with length dim");
      }
    }
    if (ag.ell.kind == ProxForm::Kind::IndicatorBox && ag.ell.box.size() != ag.dim) {
      fail(tag + "indicator box has wrong length");
    }
    if ((ag.ell.kind == ProxForm::Kind::L1Weighted || ag.ell.kind == ProxForm::Kind::IndicatorBox) &&
        !ag.set.is_box()) {
      fail(tag + "l1 and indicator terms need a plain box local set");
    }
    std::vector<Index> deps;
    if (ag.cost.kind == CostForm::Kind::Quadratic) {
      if (ag.cost.c.size() != ag.dim) fail(tag + "cost offset c has wrong length");
      Index prev = -1;
      for (const auto& blk : ag.cost.blocks) {
        if (blk.agent < 0 || blk.agent >= n_agents) fail(tag + "cost block references unknown agent");
        if (blk.agent == prev) fail(tag + "duplicate cost block");
        prev = blk.agent;
        if (blk.m.rows() != ag.dim || blk.m.cols() != agents[static_cast<size_t>(blk.agent)].dim) {
          fail(tag + "cost block has wrong shape");
        }
        if (blk.agent == i) {
          const Mat mii = Mat(blk.m);
          const double scale = std::max(1.0, mii.norm());
          if ((mii - mii.transpose()).norm() > 1e-12 * scale) {
            fail(tag + "own cost block M_ii must be symmetric");
          }
          Eigen::SelfAdjointEigenSolver<Mat> es(mii, Eigen::EigenvaluesOnly);
          if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
            std::ostringstream os;
            os << tag << "own cost block M_ii is not positive semidefinite (min eigenvalue "
               << es.eigenvalues().minCoeff() << ")";
            fail(os.str());
          }
        } else if (blk.m.nonZeros() > 0) {
          deps.push_back(blk.agent);
        }
      }
    } else {
      if (!ag.cost.gradient) fail(tag + "blackbox cost has no gradient oracle");
      deps = ag.cost.deps;
    }
    graph.set_cost_dependencies(i, deps);

    const auto& g = ag.g;
    if (g.a.rows() != m || g.a.cols() != ag.dim || g.b.size() != m) {
      fail(tag + "constraint g has wrong shape (expected m x dim and b of length m)");
    }
    if (g.kind == ConstraintForm::Kind::Quad) {
      if (g.d.rows() != m || g.d.cols() != ag.dim) fail(tag + "constraint D has wrong shape");
      for (Index r = 0; r < g.d.rows(); ++r) {
        for (SpMat::InnerIterator it(g.d, r); it; ++it) {
          if (it.value() < 0.0) fail(tag + "constraint D must be non-negative (convex g)");
        }
      }
    }
  }

  report_.connected = graph.connected();
  if (!report_.connected) fail("graph not connected");
  graph.validate();
  report_.algebraic_connectivity = graph.algebraic_connectivity();
  report_.affine = affine();

  if (selection.layout().size() == 0 && selection.layout().agents() == 0) {
    selection = SelectionFunction::zero(layout_);
  } else if (!(selection.layout() == layout_)) {
    fail("selection function layout does not match the game");
  }

  Rng rng(seed);
  check_monotonicity(rng, strict);

  if (slater_point) {
    report_.slater_supplied = true;
    const Vec& xs = *slater_point;
    if (xs.size() != layout_.primal()) fail("slater_point has wrong length");
    bool ok = true;
    for (Index i = 0; i < n_agents; ++i) {
      ok = ok && agents[static_cast<size_t>(i)].set.contains(x_block(xs, layout_, i), 1e-9);
    }
    ok = ok && (m == 0 || coupling_value(*this, xs).maxCoeff() < 0.0);
    report_.slater_ok = ok;
    if (!ok) report_.warnings.push_back("supplied slater_point is not strictly feasible");
  } else if (m > 0) {
    report_.warnings.push_back("no slater_point supplied; constraint qualification unchecked");
  }
}

void GameSpec::check_monotonicity(Rng& rng, bool strict) {
  const bool all_quadratic =
      std::all_of(agents.begin(), agents.end(),
                  [](const AgentSpec& ag) { return ag.cost.kind == CostForm::Kind::Quadratic; });
  if (all_quadratic) {
    const SpMat mfull = pseudogradient_matrix(*this);
    const SpMat sym = 0.5 * (SpMat(mfull.transpose()) + mfull);
    SpMat pattern = SpMat(mfull.transpose()) + mfull;
    const auto comps = pattern_components(pattern);
    double lmin = INFINITY, eta = INFINITY, lf = 0.0;
    Vec witness;
    for (const auto& group : comps.groups) {
      const Mat s = dense_block(sym, group);
      const Mat mc = dense_block(mfull, group);
      Eigen::SelfAdjointEigenSolver<Mat> es(s);
      if (es.eigenvalues()[0] < lmin) {
        lmin = es.eigenvalues()[0];
        witness = Vec::Zero(layout_.primal());
        for (size_t t = 0; t < group.size(); ++t) {
          witness[group[t]] = es.eigenvectors()(static_cast<Index>(t), 0);
        }
      }
      if (mc.norm() > 0.0) {
        Eigen::JacobiSVD<Mat> svd(mc);
        lf = std::max(lf, svd.singularValues()[0]);
        eta = std::min(eta, cocoercivity_modulus(mc));
      }
    }
    report_.monotonicity_method = "eigendecomposition of sym(M)";
    report_.monotonicity_margin = lmin;
    report_.monotone = lmin >= -1e-10;
    report_.lipschitz_f = lf;
    if (eta > 0.0) report_.cocoercivity = eta;
    if (!report_.monotone) {
      report_.monotonicity_witness = std::make_pair(witness, Vec(Vec::Zero(witness.size())));
    }
  } else {
    report_.monotonicity_method = "sampled probe (1000 pairs)";
    double worst = INFINITY;
    Vec lo(layout_.primal()), hi(layout_.primal());
    for (Index i = 0; i < size(); ++i) {
      x_block(lo, layout_, i) = agents[static_cast<size_t>(i)].set.box().lo;
      x_block(hi, layout_, i) = agents[static_cast<size_t>(i)].set.box().hi;
    }
    for (int p = 0; p < 1000; ++p) {
      const Vec u = uniform_vector(rng, lo, hi);
      const Vec v = uniform_vector(rng, lo, hi);
      const double d2 = (u - v).squaredNorm();
      if (d2 == 0.0) continue;
      const double ratio = (pseudogradient(*this, u) - pseudogradient(*this, v)).dot(u - v) / d2;
      if (ratio < worst) {
        worst = ratio;
        if (ratio < -1e-10) report_.monotonicity_witness = std::make_pair(u, v);
      }
    }
    report_.monotonicity_margin = worst;
    report_.monotone = worst >= -1e-10;
    if (declared_lf) report_.lipschitz_f = declared_lf;
  }
  if (declared_lf) report_.lipschitz_f = declared_lf;
  if (declared_eta) report_.cocoercivity = declared_eta;
  if (!report_.monotone && strict) {
    std::ostringstream os;
    os << "pseudogradient not monotone (" << report_.monotonicity_method
       << ", margin " << report_.monotonicity_margin << ")";
    throw Error(ErrorKind::Validation, os.str());
  }
}

Vec GameSpec::initial_state() const {
  Vec w = Vec::Zero(layout_.size());
  for (Index i = 0; i < size(); ++i) {
    x_block(w, layout_, i) = agents[static_cast<size_t>(i)].set.interior_point();
  }
  return w;
}

Vec pseudogradient_block(const GameSpec& game, Index i, const BlockReader& reader) {
  const auto& ag = game.agents[static_cast<size_t>(i)];
  if (ag.cost.kind == CostForm::Kind::Quadratic) {
    Vec out = ag.cost.c;
    for (const auto& blk : ag.cost.blocks) {
      if (blk.m.nonZeros() == 0) continue;
      out += blk.m * reader.x(blk.agent);
    }
    return out;
  }
  const Layout& layout = game.layout();
  Vec full = Vec::Zero(layout.primal());
  x_block(full, layout, i) = reader.x(i);
  for (Index j : game.graph.cost_dependencies(i)) x_block(full, layout, j) = reader.x(j);
  return ag.cost.gradient(i, full);
}

Vec pseudogradient(const GameSpec& game, const Vec& x) {
  const Layout& layout = game.layout();
  if (x.size() != layout.primal() && x.size() != layout.size()) {
    require_size(x, layout.primal(), "pseudogradient argument");
  }
  StateReader reader(x, layout);
  Vec out(layout.primal());
  for (Index i = 0; i < game.size(); ++i) {
    x_block(out, layout, i) = pseudogradient_block(game, i, reader);
  }
  return out;
}

double cost_value(const GameSpec& game, Index i, const Vec& x) {
  const Layout& layout = game.layout();
  const auto& ag = game.agents[static_cast<size_t>(i)];
  if (ag.cost.kind == CostForm::Kind::Blackbox) {
    if (!ag.cost.value) throw Error(ErrorKind::InvalidArgument, "blackbox cost has no value oracle");
    return ag.cost.value(i, x.head(layout.primal()));
  }
  const Vec xi = x_block(x, layout, i);
  double v = ag.cost.c.dot(xi);
  for (const auto& blk : ag.cost.blocks) {
    const Vec xj = x_block(x, layout, blk.agent);
    const double term = xi.dot(blk.m * xj);
    v += (blk.agent == i) ? 0.5 * term : term;
  }
  return v;
}

Vec coupling_value(const GameSpec& game, const Vec& x) {
  const Layout& layout = game.layout();
  Vec s = Vec::Zero(game.m);
  for (Index i = 0; i < game.size(); ++i) {
    s += game.agents[static_cast<size_t>(i)].g.value(x_block(x, layout, i));
  }
  return s;
}

SpMat pseudogradient_matrix(const GameSpec& game) {
  const Layout& layout = game.layout();
  std::vector<Triplet> trips;
  for (Index i = 0; i < game.size(); ++i) {
    const auto& ag = game.agents[static_cast<size_t>(i)];
    if (ag.cost.kind != CostForm::Kind::Quadratic) continue;
    for (const auto& blk : ag.cost.blocks) {
      for (Index r = 0; r < blk.m.rows(); ++r) {
        for (SpMat::InnerIterator it(blk.m, r); it; ++it) {
          trips.emplace_back(layout.x_offset(i) + r, layout.x_offset(blk.agent) + it.col(),
                             it.value());
        }
      }
    }
  }
  SpMat out(layout.primal(), layout.primal());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

Vec pseudogradient_offset(const GameSpec& game) {
  const Layout& layout = game.layout();
  Vec out = Vec::Zero(layout.primal());
  for (Index i = 0; i < game.size(); ++i) {
    const auto& ag = game.agents[static_cast<size_t>(i)];
    if (ag.cost.kind == CostForm::Kind::Quadratic) x_block(out, layout, i) = ag.cost.c;
  }
  return out;
}

FeasibilityResidual feasible_set_residual(const GameSpec& game, const Vec& x) {
  const Layout& layout = game.layout();
  require_size(x, layout.primal(), "feasible_set_residual argument");
  FeasibilityResidual res;
  res.local.resize(game.size());
  for (Index i = 0; i < game.size(); ++i) {
    res.local[i] = game.agents[static_cast<size_t>(i)].set.distance(x_block(x, layout, i));
  }
  res.coupling = coupling_value(game, x).cwiseMax(0.0);
  return res;
}

double kkt_residual(const GameSpec& game, const Vec& x, const Vec& lambda_bar) {
  const Layout& layout = game.layout();
  require_size(x, layout.primal(), "kkt_residual argument");
  require_size(lambda_bar, game.m, "kkt_residual multiplier");
  if ((lambda_bar.array() < 0.0).any()) {
    throw Error(ErrorKind::InvalidArgument, "kkt_residual requires lambda_bar >= 0");
  }
  const Vec f = pseudogradient(game, x);
  double worst = 0.0;
  for (Index i = 0; i < game.size(); ++i) {
    const auto& ag = game.agents[static_cast<size_t>(i)];
    const Vec xi = x_block(x, layout, i);
    const Vec grad = x_block(f, layout, i) + ag.g.jacobian_t(xi, lambda_bar);
    const Vec z = prox(ag.ell, ag.set, xi - grad, 1.0);
    worst = std::max(worst, (xi - z).norm());
  }
  const auto feas = feasible_set_residual(game, x);
  if (feas.local.size() > 0) worst = std::max(worst, feas.local.maxCoeff());
  if (feas.coupling.size() > 0) worst = std::max(worst, feas.coupling.maxCoeff());
  if (game.m > 0) worst = std::max(worst, std::abs(lambda_bar.dot(coupling_value(game, x))));
  return worst;
}

double cost_gradient_check(const GameSpec& game, Index i, Rng& rng, int probes, double h) {
  const Layout& layout = game.layout();
  Vec lo(layout.primal()), hi(layout.primal());
  for (Index j = 0; j < game.size(); ++j) {
    x_block(lo, layout, j) = game.agents[static_cast<size_t>(j)].set.box().lo;
    x_block(hi, layout, j) = game.agents[static_cast<size_t>(j)].set.box().hi;
  }
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const Vec x = uniform_vector(rng, lo, hi);
    const Vec d = gaussian_vector(rng, layout.dim(i)).normalized();
    Vec xp = x, xm = x;
    x_block(xp, layout, i) += h * d;
    x_block(xm, layout, i) -= h * d;
    const double fd = (cost_value(game, i, xp) - cost_value(game, i, xm)) / (2.0 * h);
    const double an = x_block(pseudogradient(game, x), layout, i).dot(d);
    worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(an)));
  }
  return worst;
}

double selection_gradient_check(const SelectionFunction& phi, Rng& rng, int probes,
                                double scale, double h) {
  const Index n = phi.layout().size();
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const Vec w = uniform_vector(rng, n, -scale, scale);
    const Vec d = gaussian_vector(rng, n).normalized();
    const double fd = (phi.value(w + h * d) - phi.value(w - h * d)) / (2.0 * h);
    const double an = phi.gradient(w).dot(d);
    worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(an)));
  }
  return worst;
}

}  // namespace gne
