#include "gne/operators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gne {

const char* to_string(SplitMode mode) { return mode == SplitMode::Fbf ? "fbf" : "pfb"; }

SplitMode parse_mode(const std::string& name) {
  if (name == "fbf") return SplitMode::Fbf;
  if (name == "pfb") return SplitMode::Pfb;
  throw Error(ErrorKind::InvalidArgument, "unknown algorithm '" + name + "' (expected fbf|pfb)");
}

StepSizes StepSizes::uniform(Index agents, double value, SplitMode mode) {
  StepSizes s;
  s.mode = mode;
  s.rho = Vec::Constant(agents, value);
  s.tau = Vec::Constant(agents, value);
  s.sigma = Vec::Constant(agents, value);
  return s;
}

Vec StepSizes::inverse_weights(const Layout& layout) const {
  Vec out(layout.size());
  for (Index i = 0; i < layout.agents(); ++i) {
    x_block(out, layout, i).setConstant(rho[i]);
    lambda_block(out, layout, i).setConstant(tau[i]);
    nu_block(out, layout, i).setConstant(sigma[i]);
  }
  return out;
}

double StepSizes::max_step() const {
  return std::max({rho.maxCoeff(), tau.maxCoeff(), sigma.maxCoeff()});
}

namespace {

// Σ_{j∈N_i} (v_i − v_j) with v read through `get`, in sorted neighbor order
template <class Get>
Vec laplacian_row(const CommGraph& graph, Index i, Index m, Get get) {
  Vec acc = Vec::Zero(m);
  if (m == 0 || graph.degree(i) == 0) return acc;
  const Vec own = get(i);
  for (Index j : graph.neighbors(i)) acc += own - get(j);
  return acc;
}

Vec local_of(const BlockReader& r, Index i, Index n, Index m) {
  Vec out(n + 2 * m);
  out.head(n) = r.x(i);
  out.segment(n, m) = r.lambda(i);
  out.tail(m) = r.nu(i);
  return out;
}

// v ← v scaled blockwise by (ρ_i, τ_i, σ_i)
Vec scale_local(const StepSizes& steps, Index i, Index n, Index m, const Vec& v) {
  Vec out(v.size());
  out.head(n) = steps.rho[i] * v.head(n);
  out.segment(n, m) = steps.tau[i] * v.segment(n, m);
  out.tail(m) = steps.sigma[i] * v.tail(m);
  return out;
}

template <class Kernel>
Vec assemble(const GameSpec& game, const Vec& w, Kernel kernel) {
  const Layout& layout = game.layout();
  require_size(w, layout.size(), "joint state");
  Vec out(layout.size());
  parallel_for(game.size(), [&](Index i) {
    StateReader reader(w, layout, game.graph, i);
    scatter_local(out, layout, i, kernel(i, reader));
  });
  return out;
}

void require_steps(const GameSpec& game, const StepSizes& steps) {
  const Index n = game.size();
  if (steps.rho.size() != n || steps.tau.size() != n || steps.sigma.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "step-size vectors must have one entry per agent");
  }
  if ((steps.rho.array() <= 0).any() || (steps.tau.array() <= 0).any() ||
      (steps.sigma.array() <= 0).any()) {
    throw Error(ErrorKind::StepSizeViolation, "step sizes must be positive");
  }
}

}  // namespace

Vec b_block(const GameSpec& game, Index i, const BlockReader& reader) {
  const Index n = game.layout().dim(i), m = game.m;
  Vec out = Vec::Zero(n + 2 * m);
  out.head(n) = pseudogradient_block(game, i, reader);
  out.segment(n, m) = laplacian_row(game.graph, i, m, [&](Index j) { return reader.lambda(j); });
  return out;
}

Vec c_block(const GameSpec& game, Index i, const BlockReader& reader) {
  const auto& ag = game.agents[static_cast<size_t>(i)];
  const Index n = ag.dim, m = game.m;
  const Vec xi = reader.x(i);
  const Vec li = reader.lambda(i);
  const Vec lap_l = laplacian_row(game.graph, i, m, [&](Index j) { return reader.lambda(j); });
  const Vec lap_n = laplacian_row(game.graph, i, m, [&](Index j) { return reader.nu(j); });
  Vec out(n + 2 * m);
  out.head(n) = ag.g.jacobian_t(xi, li);
  out.segment(n, m) = -ag.g.value(xi) - lap_n;
  out.tail(m) = lap_l;
  return out;
}

Vec bc_block(const GameSpec& game, Index i, const BlockReader& reader) {
  const auto& ag = game.agents[static_cast<size_t>(i)];
  const Index n = ag.dim, m = game.m;
  const Vec xi = reader.x(i);
  const Vec li = reader.lambda(i);
  const Vec lap_l = laplacian_row(game.graph, i, m, [&](Index j) { return reader.lambda(j); });
  const Vec lap_n = laplacian_row(game.graph, i, m, [&](Index j) { return reader.nu(j); });
  Vec out(n + 2 * m);
  out.head(n) = pseudogradient_block(game, i, reader) + ag.g.jacobian_t(xi, li);
  out.segment(n, m) = (lap_l - ag.g.value(xi)) - lap_n;
  out.tail(m) = lap_l;
  return out;
}

Vec apply_B(const GameSpec& game, const Vec& w) {
  return assemble(game, w, [&](Index i, const BlockReader& r) { return b_block(game, i, r); });
}

Vec apply_C(const GameSpec& game, const Vec& w) {
  return assemble(game, w, [&](Index i, const BlockReader& r) { return c_block(game, i, r); });
}

Vec apply_BC(const GameSpec& game, const Vec& w) {
  return assemble(game, w, [&](Index i, const BlockReader& r) { return bc_block(game, i, r); });
}

Vec resolvent_block(const GameSpec& game, const StepSizes& steps, Index i, const Vec& local) {
  const auto& ag = game.agents[static_cast<size_t>(i)];
  const Index n = ag.dim, m = game.m;
  Vec out(local.size());
  out.head(n) = prox(ag.ell, ag.set, local.head(n), steps.rho[i]);
  out.segment(n, m) = local.segment(n, m).cwiseMax(0.0);
  out.tail(m) = local.tail(m);
  return out;
}

Vec resolvent_A(const GameSpec& game, const StepSizes& steps, const Vec& v) {
  const Layout& layout = game.layout();
  require_size(v, layout.size(), "joint state");
  require_steps(game, steps);
  Vec out(v.size());
  for (Index i = 0; i < game.size(); ++i) {
    scatter_local(out, layout, i, resolvent_block(game, steps, i, gather_local(v, layout, i)));
  }
  return out;
}

FbfStage1 fbf_stage1(const GameSpec& game, const StepSizes& steps, Index i,
                     const BlockReader& at_w) {
  const Index n = game.layout().dim(i), m = game.m;
  FbfStage1 s;
  s.d = bc_block(game, i, at_w);
  const Vec wi = local_of(at_w, i, n, m);
  s.tilde = resolvent_block(game, steps, i, wi - scale_local(steps, i, n, m, s.d));
  return s;
}

Vec fbf_stage2(const GameSpec& game, const StepSizes& steps, Index i, const BlockReader& at_tilde,
               const FbfStage1& s1) {
  const Index n = game.layout().dim(i), m = game.m;
  const Vec d_tilde = bc_block(game, i, at_tilde);
  return s1.tilde - scale_local(steps, i, n, m, d_tilde - s1.d);
}

PfbStage1 pfb_stage1(const GameSpec& game, const StepSizes& steps, Index i,
                     const BlockReader& at_w) {
  const auto& ag = game.agents[static_cast<size_t>(i)];
  const Index m = game.m;
  const Vec xi = at_w.x(i);
  const Vec li = at_w.lambda(i);
  const Vec ni = at_w.nu(i);
  PfbStage1 s;
  const Vec grad = pseudogradient_block(game, i, at_w) + ag.g.a.transpose() * li;
  s.x_next = prox(ag.ell, ag.set, xi - steps.rho[i] * grad, steps.rho[i]);
  s.lap_lambda = laplacian_row(game.graph, i, m, [&](Index j) { return at_w.lambda(j); });
  s.nu_next = ni - steps.sigma[i] * s.lap_lambda;
  s.nu_reflect = 2.0 * s.nu_next - ni;
  return s;
}

Vec pfb_stage2(const GameSpec& game, const StepSizes& steps, Index i, const BlockReader& at_w,
               const BlockReader& reflected, const PfbStage1& s1) {
  const auto& ag = game.agents[static_cast<size_t>(i)];
  const Index n = ag.dim, m = game.m;
  const Vec xi = at_w.x(i);
  const Vec li = at_w.lambda(i);
  const Vec lap_r = laplacian_row(game.graph, i, m, [&](Index j) { return reflected.nu(j); });
  const Vec inner = ((ag.g.a * (2.0 * s1.x_next - xi) - ag.g.b) + lap_r) - s1.lap_lambda;
  Vec out(n + 2 * m);
  out.head(n) = s1.x_next;
  out.segment(n, m) = (li + steps.tau[i] * inner).cwiseMax(0.0);
  out.tail(m) = s1.nu_next;
  return out;
}

FbfResult t_fbf(const GameSpec& game, const StepSizes& steps, const Vec& w) {
  const Layout& layout = game.layout();
  require_size(w, layout.size(), "joint state");
  require_steps(game, steps);
  const Index agents = game.size();
  std::vector<FbfStage1> s1(static_cast<size_t>(agents));
  FbfResult res;
  res.tilde.resize(w.size());
  parallel_for(agents, [&](Index i) {
    StateReader reader(w, layout, game.graph, i);
    s1[static_cast<size_t>(i)] = fbf_stage1(game, steps, i, reader);
  });
  for (Index i = 0; i < agents; ++i) scatter_local(res.tilde, layout, i, s1[static_cast<size_t>(i)].tilde);
  res.out.resize(w.size());
  std::vector<Vec> out(static_cast<size_t>(agents));
  parallel_for(agents, [&](Index i) {
    StateReader reader(res.tilde, layout, game.graph, i);
    out[static_cast<size_t>(i)] = fbf_stage2(game, steps, i, reader, s1[static_cast<size_t>(i)]);
  });
  for (Index i = 0; i < agents; ++i) scatter_local(res.out, layout, i, out[static_cast<size_t>(i)]);
  return res;
}

Vec t_pfb(const GameSpec& game, const StepSizes& steps, const Vec& w) {
  if (!game.affine()) {
    throw Error(ErrorKind::NotAffine, "pFB requires affine coupling constraints");
  }
  const Layout& layout = game.layout();
  require_size(w, layout.size(), "joint state");
  require_steps(game, steps);
  const Index agents = game.size();
  std::vector<PfbStage1> s1(static_cast<size_t>(agents));
  parallel_for(agents, [&](Index i) {
    StateReader reader(w, layout, game.graph, i);
    s1[static_cast<size_t>(i)] = pfb_stage1(game, steps, i, reader);
  });
  Vec refl = Vec::Zero(w.size());
  for (Index i = 0; i < agents; ++i) nu_block(refl, layout, i) = s1[static_cast<size_t>(i)].nu_reflect;
  Vec out(w.size());
  std::vector<Vec> blocks(static_cast<size_t>(agents));
  parallel_for(agents, [&](Index i) {
    StateReader at_w(w, layout, game.graph, i);
    StateReader at_r(refl, layout, game.graph, i);
    blocks[static_cast<size_t>(i)] = pfb_stage2(game, steps, i, at_w, at_r, s1[static_cast<size_t>(i)]);
  });
  for (Index i = 0; i < agents; ++i) scatter_local(out, layout, i, blocks[static_cast<size_t>(i)]);
  return out;
}

double psi_norm(const Layout& layout, const StepSizes& steps, const Vec& v) {
  require_size(v, layout.size(), "joint state");
  double acc = 0.0;
  for (Index i = 0; i < layout.agents(); ++i) {
    acc += x_block(v, layout, i).squaredNorm() / steps.rho[i];
    acc += lambda_block(v, layout, i).squaredNorm() / steps.tau[i];
    acc += nu_block(v, layout, i).squaredNorm() / steps.sigma[i];
  }
  return std::sqrt(acc);
}

double phi_norm(const GameSpec& game, const StepSizes& steps, const Vec& v) {
  const Layout& layout = game.layout();
  require_size(v, layout.size(), "joint state");
  double acc = 0.0;
  for (Index i = 0; i < game.size(); ++i) {
    const auto& ag = game.agents[static_cast<size_t>(i)];
    const Vec vx = x_block(v, layout, i);
    const Vec vl = lambda_block(v, layout, i);
    const Vec vn = nu_block(v, layout, i);
    acc += vx.squaredNorm() / steps.rho[i] + vl.squaredNorm() / steps.tau[i] +
           vn.squaredNorm() / steps.sigma[i];
    acc -= 2.0 * vl.dot(ag.g.a * vx);
    Vec lap = Vec::Zero(game.m);
    for (Index j : game.graph.neighbors(i)) lap += vn - nu_block(v, layout, j);
    acc -= 2.0 * vl.dot(lap);
  }
  if (acc < 0.0) {
    if (acc < -1e-12 * v.squaredNorm()) {
      throw Error(ErrorKind::StepSizeViolation, "preconditioner is not positive definite");
    }
    acc = 0.0;
  }
  return std::sqrt(acc);
}

SpMat bc_matrix(const GameSpec& game) {
  const Layout& layout = game.layout();
  const Index m = game.m;
  std::vector<Triplet> trips;
  const SpMat mf = pseudogradient_matrix(game);
  for (Index r = 0; r < mf.rows(); ++r) {
    for (SpMat::InnerIterator it(mf, r); it; ++it) trips.emplace_back(r, it.col(), it.value());
  }
  for (Index i = 0; i < game.size(); ++i) {
    const SpMat& a = game.agents[static_cast<size_t>(i)].g.a;
    const Index xo = layout.x_offset(i), lo = layout.lambda_offset(i);
    for (Index r = 0; r < a.rows(); ++r) {
      for (SpMat::InnerIterator it(a, r); it; ++it) {
        trips.emplace_back(xo + it.col(), lo + r, it.value());
        trips.emplace_back(lo + r, xo + it.col(), -it.value());
      }
    }
    for (Index j : game.graph.neighbors(i)) {
      for (Index k = 0; k < m; ++k) {
        const Index li = layout.lambda_offset(i) + k, lj = layout.lambda_offset(j) + k;
        const Index ni = layout.nu_offset(i) + k, nj = layout.nu_offset(j) + k;
        trips.emplace_back(li, li, 1.0);
        trips.emplace_back(li, lj, -1.0);
        trips.emplace_back(li, ni, -1.0);
        trips.emplace_back(li, nj, 1.0);
        trips.emplace_back(ni, li, 1.0);
        trips.emplace_back(ni, lj, -1.0);
      }
    }
  }
  SpMat out(layout.size(), layout.size());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

SpMat phi_matrix(const GameSpec& game, const StepSizes& steps) {
  const Layout& layout = game.layout();
  const Index m = game.m;
  std::vector<Triplet> trips;
  const Vec inv = steps.inverse_weights(layout);
  for (Index k = 0; k < layout.size(); ++k) trips.emplace_back(k, k, 1.0 / inv[k]);
  for (Index i = 0; i < game.size(); ++i) {
    const SpMat& a = game.agents[static_cast<size_t>(i)].g.a;
    const Index xo = layout.x_offset(i), lo = layout.lambda_offset(i);
    for (Index r = 0; r < a.rows(); ++r) {
      for (SpMat::InnerIterator it(a, r); it; ++it) {
        trips.emplace_back(xo + it.col(), lo + r, -it.value());
        trips.emplace_back(lo + r, xo + it.col(), -it.value());
      }
    }
    for (Index j : game.graph.neighbors(i)) {
      for (Index k = 0; k < m; ++k) {
        const Index li = layout.lambda_offset(i) + k, ni = layout.nu_offset(i) + k;
        const Index nj = layout.nu_offset(j) + k;
        trips.emplace_back(li, ni, -1.0);
        trips.emplace_back(li, nj, 1.0);
        trips.emplace_back(ni, li, -1.0);
        trips.emplace_back(nj, li, 1.0);
      }
    }
  }
  SpMat out(layout.size(), layout.size());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

double spectral_norm(const SpMat& a, Index dense_limit, bool* exact, std::uint64_t seed) {
  if (a.rows() == 0 || a.cols() == 0 || a.nonZeros() == 0) {
    if (exact) *exact = true;
    return 0.0;
  }
  if (std::max(a.rows(), a.cols()) <= dense_limit) {
    const Mat d = Mat(a);
    const Mat gram = a.cols() <= a.rows() ? Mat(d.transpose() * d) : Mat(d * d.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
    if (exact) *exact = true;
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  }
  Rng rng(seed);
  Vec v = gaussian_vector(rng, a.cols()).normalized();
  double est = 0.0;
  for (int it = 0; it < 3000; ++it) {
    Vec u = a.transpose() * (a * v);
    const double nrm = u.norm();
    if (!std::isfinite(nrm)) throw Error(ErrorKind::EstimationDiverged, "power iteration diverged");
    if (nrm == 0.0) break;
    const double next = std::sqrt(nrm);
    v = u / nrm;
    const bool done = it > 10 && std::abs(next - est) <= 1e-10 * next;
    est = next;
    if (done) break;
  }
  if (exact) *exact = false;
  return est * 1.1;
}

LipschitzEstimate estimate_lipschitz(const GameSpec& game, const LipschitzOptions& opts) {
  const Layout& layout = game.layout();
  LipschitzEstimate est;
  est.lambda_bound = opts.lambda_bound;
  est.grad_g_bound = Vec::Zero(game.size());
  const bool quadratic_costs =
      std::all_of(game.agents.begin(), game.agents.end(),
                  [](const AgentSpec& ag) { return ag.cost.kind == CostForm::Kind::Quadratic; });
  if (game.report().lipschitz_f) est.lf = *game.report().lipschitz_f;

  Rng rng(opts.seed);
  for (Index i = 0; i < game.size(); ++i) {
    const auto& ag = game.agents[static_cast<size_t>(i)];
    if (ag.g.is_affine()) {
      est.grad_g_bound[i] = spectral_norm(ag.g.a, opts.dense_limit, nullptr, opts.seed);
    } else {
      double worst = 0.0;
      for (int s = 0; s < opts.samples; ++s) {
        const Vec x = uniform_vector(rng, ag.set.box().lo, ag.set.box().hi);
        worst = std::max(worst, spectral_norm(ag.g.jacobian(x), opts.dense_limit));
      }
      const double corner = spectral_norm(
          ag.g.jacobian(ag.set.box().lo.cwiseAbs().cwiseMax(ag.set.box().hi.cwiseAbs())),
          opts.dense_limit);
      est.grad_g_bound[i] = std::max(worst, corner);
    }
  }

  if (opts.declared_lb) {
    est.lb = *opts.declared_lb;
    est.method = "declared";
    return est;
  }
  if (!quadratic_costs && !game.report().lipschitz_f) {
    throw Error(ErrorKind::EstimationDiverged,
                "blackbox costs need a declared L_F (or a declared L_B)");
  }

  SpMat lin = bc_matrix(game);
  if (!quadratic_costs) {
    // F handled by its declared constant; triangle inequality for the rest
    SpMat mf = pseudogradient_matrix(game);
    SpMat pad(layout.size(), layout.size());
    std::vector<Triplet> trips;
    for (Index r = 0; r < mf.rows(); ++r) {
      for (SpMat::InnerIterator it(mf, r); it; ++it) trips.emplace_back(r, it.col(), it.value());
    }
    pad.setFromTriplets(trips.begin(), trips.end());
    lin = lin - pad;
  }

  if (game.affine()) {
    bool exact = false;
    const double nrm = spectral_norm(lin, opts.dense_limit, &exact, opts.seed);
    est.lb = quadratic_costs ? nrm : nrm + est.lf;
    est.method = quadratic_costs ? (exact ? "exact-affine" : "power-iteration") : "declared+bound";
  } else {
    // Jacobian of ℬ+𝒞 at sampled (x, λ) with 0 ≤ λ ≤ b_λ
    double worst = 0.0;
    for (int s = 0; s <= opts.samples; ++s) {
      std::vector<Triplet> trips;
      for (Index r = 0; r < lin.rows(); ++r) {
        for (SpMat::InnerIterator it(lin, r); it; ++it) trips.emplace_back(r, it.col(), it.value());
      }
      for (Index i = 0; i < game.size(); ++i) {
        const auto& ag = game.agents[static_cast<size_t>(i)];
        if (ag.g.is_affine()) continue;
        const Vec x = s == 0 ? ag.set.box().hi : uniform_vector(rng, ag.set.box().lo, ag.set.box().hi);
        const Vec lam = s == 0 ? Vec::Constant(game.m, opts.lambda_bound)
                               : uniform_vector(rng, game.m, 0.0, opts.lambda_bound);
        const SpMat jac = ag.g.jacobian(x);
        const Vec hess = ag.g.d.transpose() * lam;
        const Index xo = layout.x_offset(i), lo = layout.lambda_offset(i);
        for (Index k = 0; k < ag.dim; ++k) {
          if (hess[k] != 0.0) trips.emplace_back(xo + k, xo + k, hess[k]);
        }
        for (Index r = 0; r < jac.rows(); ++r) {
          for (SpMat::InnerIterator it(jac, r); it; ++it) {
            trips.emplace_back(xo + it.col(), lo + r, it.value());
            trips.emplace_back(lo + r, xo + it.col(), -it.value());
          }
        }
        // the affine part of g was already placed by bc_matrix
        for (Index r = 0; r < ag.g.a.rows(); ++r) {
          for (SpMat::InnerIterator it(ag.g.a, r); it; ++it) {
            trips.emplace_back(xo + it.col(), lo + r, -it.value());
            trips.emplace_back(lo + r, xo + it.col(), it.value());
          }
        }
      }
      SpMat jac_full(layout.size(), layout.size());
      jac_full.setFromTriplets(trips.begin(), trips.end());
      worst = std::max(worst, spectral_norm(jac_full, opts.dense_limit, nullptr, opts.seed));
    }
    est.lb = 1.1 * worst + (quadratic_costs ? 0.0 : est.lf);
    est.method = "jacobian-sampling";
  }
  if (!std::isfinite(est.lb)) throw Error(ErrorKind::EstimationDiverged, "non-finite L_B");
  if (est.lb <= 0.0) est.lb = 1.0;
  return est;
}

double pfb_delta_lower_bound(const GameSpec& game) {
  const auto& eta = game.report().cocoercivity;
  if (!eta || !(*eta > 0.0)) {
    throw Error(ErrorKind::MissingCocoercivity, "pFB needs a cocoercive pseudogradient (eta)");
  }
  const Index maxdeg = game.graph.max_degree();
  const double graph_term = maxdeg > 0 ? 1.0 / (2.0 * static_cast<double>(maxdeg)) : INFINITY;
  const double denom = std::min(*eta, graph_term);
  return std::isfinite(denom) ? 1.0 / denom : 0.0;
}

namespace {

double max_abs_col_sum(const SpMat& a) {
  Vec sums = Vec::Zero(a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    for (SpMat::InnerIterator it(a, r); it; ++it) sums[it.col()] += std::abs(it.value());
  }
  return sums.size() ? sums.maxCoeff() : 0.0;
}

double max_abs_row_sum(const SpMat& a) {
  double best = 0.0;
  for (Index r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (SpMat::InnerIterator it(a, r); it; ++it) s += std::abs(it.value());
    best = std::max(best, s);
  }
  return best;
}

}  // namespace

StepSizes make_stepsizes(const GameSpec& game, const LipschitzEstimate& lip, SplitMode mode,
                         std::optional<double> delta) {
  const Index agents = game.size();
  if (mode == SplitMode::Fbf) {
    if (!(lip.lb > 0.0)) throw Error(ErrorKind::StepSizeViolation, "L_B must be positive");
    return StepSizes::uniform(agents, 0.99 / lip.lb, SplitMode::Fbf);
  }
  if (!game.affine()) throw Error(ErrorKind::NotAffine, "pFB requires affine coupling constraints");
  const double lower = pfb_delta_lower_bound(game);
  double d = delta ? *delta : (lower > 0.0 ? 1.01 * lower : 1.0);
  if (!(d > lower)) {
    std::ostringstream os;
    os << "delta = " << d << " must exceed " << lower;
    throw Error(ErrorKind::StepSizeViolation, os.str());
  }
  StepSizes s;
  s.mode = SplitMode::Pfb;
  s.delta = d;
  s.rho.resize(agents);
  s.tau.resize(agents);
  s.sigma.resize(agents);
  for (Index i = 0; i < agents; ++i) {
    const SpMat& a = game.agents[static_cast<size_t>(i)].g.a;
    const double deg2 = 2.0 * static_cast<double>(game.graph.degree(i));
    s.rho[i] = 0.99 / (max_abs_col_sum(a) + d);
    s.tau[i] = 0.99 / (max_abs_row_sum(a) + deg2 + d);
    s.sigma[i] = 0.99 / (deg2 + d);
  }
  return s;
}

void check_stepsizes(const GameSpec& game, const StepSizes& steps, const LipschitzEstimate& lip) {
  require_steps(game, steps);
  if (steps.mode == SplitMode::Fbf) {
    if (steps.max_step() > (1.0 / lip.lb) * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "largest step " << steps.max_step() << " exceeds 1/L_B = " << 1.0 / lip.lb;
      throw Error(ErrorKind::StepSizeViolation, os.str());
    }
    return;
  }
  const double lower = pfb_delta_lower_bound(game);
  if (!(steps.delta > lower)) {
    std::ostringstream os;
    os << "delta = " << steps.delta << " must exceed " << lower;
    throw Error(ErrorKind::StepSizeViolation, os.str());
  }
  for (Index i = 0; i < game.size(); ++i) {
    const SpMat& a = game.agents[static_cast<size_t>(i)].g.a;
    const double deg2 = 2.0 * static_cast<double>(game.graph.degree(i));
    const double tol = 1.0 + 1e-12;
    if (steps.rho[i] > tol / (max_abs_col_sum(a) + steps.delta) ||
        steps.tau[i] > tol / (max_abs_row_sum(a) + deg2 + steps.delta) ||
        steps.sigma[i] > tol / (deg2 + steps.delta)) {
      std::ostringstream os;
      os << "agent " << i + 1 << " step sizes violate the pFB bounds";
      throw Error(ErrorKind::StepSizeViolation, os.str());
    }
  }
}

FbfOperator::FbfOperator(const GameSpec& game, StepSizes steps, LipschitzEstimate lip)
    : game_(&game), steps_(std::move(steps)), lip_(std::move(lip)) {
  if (steps_.mode != SplitMode::Fbf) {
    throw Error(ErrorKind::StepSizeViolation, "FBF operator needs FBF step sizes");
  }
  check_stepsizes(game, steps_, lip_);
}

FbfOperator::FbfOperator(const GameSpec& game, const LipschitzOptions& opts)
    : game_(&game), lip_(estimate_lipschitz(game, opts)), opts_(opts) {
  steps_ = make_stepsizes(game, lip_, SplitMode::Fbf);
}

std::optional<std::string> FbfOperator::adapt(const Vec& w) {
  if (game_->affine() || lip_.method == "declared") return std::nullopt;
  const Layout& layout = game_->layout();
  const double lmax = lambda_part(w, layout).size() ? lambda_part(w, layout).maxCoeff() : 0.0;
  if (lmax <= lip_.lambda_bound) return std::nullopt;
  LipschitzOptions o = opts_;
  o.lambda_bound = 10.0 * lmax;
  const double old_lb = lip_.lb;
  lip_ = estimate_lipschitz(*game_, o);
  opts_ = o;
  if (lip_.lb > old_lb) steps_ = make_stepsizes(*game_, lip_, SplitMode::Fbf);
  std::ostringstream os;
  os << "dual bound exceeded (max lambda " << lmax << "); L_B re-estimated " << old_lb << " -> "
     << lip_.lb;
  return os.str();
}

PfbOperator::PfbOperator(const GameSpec& game, StepSizes steps)
    : game_(&game), steps_(std::move(steps)) {
  if (!game.affine()) throw Error(ErrorKind::NotAffine, "pFB requires affine coupling constraints");
  if (steps_.mode != SplitMode::Pfb) {
    throw Error(ErrorKind::StepSizeViolation, "pFB operator needs pFB step sizes");
  }
  check_stepsizes(game, steps_, LipschitzEstimate{});
}

PfbOperator::PfbOperator(const GameSpec& game, std::optional<double> delta) : game_(&game) {
  if (!game.affine()) throw Error(ErrorKind::NotAffine, "pFB requires affine coupling constraints");
  steps_ = make_stepsizes(game, LipschitzEstimate{}, SplitMode::Pfb, delta);
}

FunctionOperator::FunctionOperator(Layout layout, Map map, Vec weights)
    : layout_(std::move(layout)), map_(std::move(map)), weights_(std::move(weights)) {
  if (weights_.size() == 0) weights_ = Vec::Ones(layout_.size());
}

double FunctionOperator::norm(const Vec& v) const {
  return std::sqrt(v.cwiseAbs2().dot(weights_));
}

}  // namespace gne
