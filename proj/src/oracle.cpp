#include "gne/oracle.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

namespace gne {

namespace {

constexpr double kFeasTol = 1e-11;

// Multipliers μ ≥ 0 on `rows` minimizing ‖s + A_rowsᵀ μ‖ over the free coordinates.
Vec nonneg_multipliers(const Mat& at_free, const Vec& s) {
  const Index r = at_free.cols();
  Vec best = Vec::Zero(r);
  double best_res = s.norm();
  for (Index mask = 1; mask < (Index{1} << r); ++mask) {
    std::vector<Index> cols;
    for (Index k = 0; k < r; ++k) {
      if (mask & (Index{1} << k)) cols.push_back(k);
    }
    Mat sub(at_free.rows(), static_cast<Index>(cols.size()));
    for (size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Index>(c)) = at_free.col(cols[c]);
    const Vec mu = sub.completeOrthogonalDecomposition().solve(-s);
    if ((mu.array() < -1e-12).any()) continue;
    const double res = (s + sub * mu).norm();
    if (res < best_res - 1e-15) {
      best_res = res;
      best.setZero();
      for (size_t c = 0; c < cols.size(); ++c) best[cols[c]] = std::max(mu[static_cast<Index>(c)], 0.0);
    }
  }
  return best;
}

Mat dense_coupling(const GameSpec& game, Vec& b) {
  const Layout& layout = game.layout();
  Mat a = Mat::Zero(game.m, layout.primal());
  b = Vec::Zero(game.m);
  for (Index i = 0; i < game.size(); ++i) {
    const auto& g = game.agents[static_cast<size_t>(i)].g;
    a.middleCols(layout.x_offset(i), layout.dim(i)) = Mat(g.a);
    b += g.b;
  }
  return a;
}

}  // namespace

ProjectionResult solve_projection(const ProjectionProblem& p) {
  const Index n = p.ref.size();
  const Index m = p.a.rows();
  if (n > 8) {
    std::ostringstream os;
    os << "active-set enumeration limited to 8 primal dimensions, got " << n;
    throw Error(ErrorKind::DimensionTooLarge, os.str());
  }
  if (p.lo.size() != n || p.hi.size() != n || (m > 0 && p.a.cols() != n) || p.b.size() != m) {
    throw Error(ErrorKind::DimensionMismatch, "projection problem dimensions disagree");
  }
  const Vec w = p.weights.size() ? p.weights : Vec(Vec::Ones(n));
  if ((w.array() <= 0).any()) throw Error(ErrorKind::InvalidArgument, "weights must be positive");

  Index combos = 1;
  for (Index k = 0; k < n; ++k) combos *= 3;
  const Index row_sets = Index{1} << m;

  double best_obj = INFINITY;
  Vec best;
  std::vector<int> face(static_cast<size_t>(n));
  for (Index c = 0; c < combos; ++c) {
    Index code = c;
    bool skip = false;
    for (Index k = 0; k < n; ++k) {
      face[static_cast<size_t>(k)] = static_cast<int>(code % 3);
      code /= 3;
      // a degenerate interval only needs its lower face
      if (p.lo[k] == p.hi[k] && face[static_cast<size_t>(k)] != 1) skip = true;
    }
    if (skip) continue;
    std::vector<Index> freev;
    Vec x = Vec::Zero(n);
    for (Index k = 0; k < n; ++k) {
      const int f = face[static_cast<size_t>(k)];
      if (f == 0) {
        freev.push_back(k);
      } else {
        x[k] = f == 1 ? p.lo[k] : p.hi[k];
      }
    }
    const Index nf = static_cast<Index>(freev.size());
    for (Index rs = 0; rs < row_sets; ++rs) {
      std::vector<Index> rows;
      for (Index r = 0; r < m; ++r) {
        if (rs & (Index{1} << r)) rows.push_back(r);
      }
      const Index na = static_cast<Index>(rows.size());
      if (na > nf) continue;
      Mat kkt = Mat::Zero(nf + na, nf + na);
      Vec rhs(nf + na);
      for (Index a = 0; a < nf; ++a) {
        const Index k = freev[static_cast<size_t>(a)];
        kkt(a, a) = 2.0 * w[k];
        rhs[a] = 2.0 * w[k] * p.ref[k];
      }
      for (Index r = 0; r < na; ++r) {
        const Index row = rows[static_cast<size_t>(r)];
        double fixed = 0.0;
        for (Index k = 0; k < n; ++k) {
          if (face[static_cast<size_t>(k)] != 0) fixed += p.a(row, k) * x[k];
        }
        for (Index a = 0; a < nf; ++a) {
          const double v = p.a(row, freev[static_cast<size_t>(a)]);
          kkt(nf + r, a) = v;
          kkt(a, nf + r) = v;
        }
        rhs[nf + r] = p.b[row] - fixed;
      }
      Vec z = nf + na > 0 ? Vec(kkt.completeOrthogonalDecomposition().solve(rhs)) : Vec();
      if (nf + na > 0 && (kkt * z - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) continue;
      Vec cand = x;
      for (Index a = 0; a < nf; ++a) cand[freev[static_cast<size_t>(a)]] = z[a];
      if ((cand - p.lo).minCoeff() < -kFeasTol || (p.hi - cand).minCoeff() < -kFeasTol) continue;
      if (m > 0 && (p.a * cand - p.b).maxCoeff() > kFeasTol) continue;
      const double obj = (w.array() * (cand - p.ref).array().square()).sum();
      if (obj < best_obj) {
        best_obj = obj;
        best = cand;
      }
    }
  }
  if (best.size() == 0) throw Error(ErrorKind::Validation, "projection problem is infeasible");

  ProjectionResult res;
  res.x = best.cwiseMax(p.lo).cwiseMin(p.hi);
  const Vec grad = 2.0 * (w.array() * (res.x - p.ref).array()).matrix();
  res.mu = Vec::Zero(m);
  if (m > 0) {
    std::vector<Index> act, freev;
    for (Index r = 0; r < m; ++r) {
      if (p.a.row(r).dot(res.x) - p.b[r] >= -1e-9) act.push_back(r);
    }
    for (Index k = 0; k < n; ++k) {
      if (res.x[k] > p.lo[k] + 1e-12 && res.x[k] < p.hi[k] - 1e-12) freev.push_back(k);
    }
    if (!act.empty() && !freev.empty()) {
      Mat at(static_cast<Index>(freev.size()), static_cast<Index>(act.size()));
      Vec s(static_cast<Index>(freev.size()));
      for (size_t a = 0; a < freev.size(); ++a) {
        s[static_cast<Index>(a)] = grad[freev[a]];
        for (size_t r = 0; r < act.size(); ++r) at(static_cast<Index>(a), static_cast<Index>(r)) = p.a(act[r], freev[a]);
      }
      const Vec mu = nonneg_multipliers(at, s);
      for (size_t r = 0; r < act.size(); ++r) res.mu[act[r]] = mu[static_cast<Index>(r)];
    }
  }
  // natural residual of the projection KKT system
  Vec full = grad;
  if (m > 0) full += p.a.transpose() * res.mu;
  double kkt = (res.x - (res.x - full).cwiseMax(p.lo).cwiseMin(p.hi)).norm();
  if (m > 0) {
    const Vec slack = p.a * res.x - p.b;
    kkt = std::max(kkt, slack.cwiseMax(0.0).maxCoeff());
    kkt = std::max(kkt, std::abs(res.mu.dot(slack)));
  }
  res.kkt = kkt;
  return res;
}

Vec assemble_oracle_state(const GameSpec& game, const Vec& x, const Vec& lambda) {
  const Layout& layout = game.layout();
  const Index agents = game.size(), m = game.m;
  Vec w = Vec::Zero(layout.size());
  w.head(layout.primal()) = x.head(layout.primal());
  if (m == 0) return w;
  Mat g(agents, m);
  for (Index i = 0; i < agents; ++i) {
    g.row(i) = game.agents[static_cast<size_t>(i)].g.value(x.segment(layout.x_offset(i), layout.dim(i))).transpose();
    lambda_block(w, layout, i) = lambda;
  }
  const Mat lap = game.graph.laplacian();
  const auto cod = lap.completeOrthogonalDecomposition();
  for (Index k = 0; k < m; ++k) {
    const Vec v = -g.col(k).array() + g.col(k).mean();
    const Vec nu = cod.solve(v);
    for (Index i = 0; i < agents; ++i) nu_block(w, layout, i)[k] = nu[i];
  }
  return w;
}

OracleSolution oracle_projection_game(const GameSpec& game) {
  const Layout& layout = game.layout();
  const Index n = layout.primal();
  ProjectionProblem p;
  p.lo.resize(n);
  p.hi.resize(n);
  for (Index i = 0; i < game.size(); ++i) {
    const auto& ag = game.agents[static_cast<size_t>(i)];
    if (ag.cost.kind != CostForm::Kind::Quadratic || ag.cost.c.cwiseAbs().maxCoeff() > 0.0) {
      throw Error(ErrorKind::InvalidArgument, "projection oracle needs F = 0");
    }
    for (const auto& blk : ag.cost.blocks) {
      if (blk.m.nonZeros() > 0 && Mat(blk.m).cwiseAbs().maxCoeff() > 0.0) {
        throw Error(ErrorKind::InvalidArgument, "projection oracle needs F = 0");
      }
    }
    if (ag.ell.kind != ProxForm::Kind::Zero || !ag.set.is_box() || !ag.g.is_affine()) {
      throw Error(ErrorKind::InvalidArgument,
                  "projection oracle needs box local sets, no nonsmooth term, affine coupling");
    }
    p.lo.segment(layout.x_offset(i), layout.dim(i)) = ag.set.box().lo;
    p.hi.segment(layout.x_offset(i), layout.dim(i)) = ag.set.box().hi;
  }
  if (n > 8) {
    std::ostringstream os;
    os << "active-set enumeration limited to 8 primal dimensions, got " << n;
    throw Error(ErrorKind::DimensionTooLarge, os.str());
  }
  // fold the diagonal x-only selection into weights and a reference
  const SelectionFunction& phi = game.selection;
  if (phi.kind() != SelectionFunction::Kind::Quadratic) {
    throw Error(ErrorKind::InvalidArgument, "projection oracle needs a quadratic selection");
  }
  Vec wsum = Vec::Zero(n), rsum = Vec::Zero(n);
  const SpMat& q = phi.q();
  for (Index r = 0; r < q.outerSize(); ++r) {
    Index count = 0, col = -1;
    double val = 0.0;
    for (SpMat::InnerIterator it(q, r); it; ++it) {
      if (it.value() == 0.0) continue;
      ++count;
      col = it.col();
      val = it.value();
    }
    if (count == 0 || phi.weights()[r] == 0.0) continue;
    if (count > 1 || col >= n) {
      throw Error(ErrorKind::InvalidArgument, "projection oracle needs a diagonal selection on x");
    }
    wsum[col] += phi.weights()[r] * val * val;
    rsum[col] += phi.weights()[r] * val * phi.ref()[r];
  }
  if ((wsum.array() <= 0).any()) {
    throw Error(ErrorKind::InvalidArgument, "selection must weight every primal coordinate");
  }
  p.weights = wsum;
  p.ref = rsum.cwiseQuotient(wsum);
  p.a = dense_coupling(game, p.b);
  const ProjectionResult pr = solve_projection(p);

  OracleSolution sol;
  sol.x = pr.x;
  sol.lambda = Vec::Zero(game.m);
  sol.omega = assemble_oracle_state(game, pr.x, sol.lambda);
  sol.method = game.m == 0 ? "analytic" : "active-set-enumeration";
  sol.kkt = kkt_residual(game, pr.x, sol.lambda);
  sol.vi = pr.kkt;
  return sol;
}

OracleSolution oracle_unique_vgne(const GameSpec& game, Index iters) {
  const Layout& layout = game.layout();
  const Index n = layout.primal(), m = game.m;
  for (const auto& ag : game.agents) {
    if (ag.cost.kind != CostForm::Kind::Quadratic) {
      throw Error(ErrorKind::NotStronglyMonotone, "oracle needs a quadratic pseudogradient");
    }
    if (ag.ell.kind != ProxForm::Kind::Zero || !ag.g.is_affine()) {
      throw Error(ErrorKind::InvalidArgument, "oracle needs no nonsmooth term and affine coupling");
    }
  }
  const Mat mm = Mat(pseudogradient_matrix(game));
  const Vec c = pseudogradient_offset(game);
  const Mat sym = 0.5 * (mm + mm.transpose());
  const double mu = Eigen::SelfAdjointEigenSolver<Mat>(sym, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (!(mu > 1e-10)) {
    std::ostringstream os;
    os << "symmetric part of M has minimum eigenvalue " << mu;
    throw Error(ErrorKind::NotStronglyMonotone, os.str());
  }
  Vec b;
  const Mat a = dense_coupling(game, b);
  Mat big = Mat::Zero(n + m, n + m);
  big.topLeftCorner(n, n) = mm;
  big.topRightCorner(n, m) = a.transpose();
  big.bottomLeftCorner(m, n) = -a;
  const double lip = Eigen::JacobiSVD<Mat>(big).singularValues()(0);
  const double step = 1.0 / (2.0 * lip);

  auto project = [&](const Vec& z) {
    Vec out(n + m);
    for (Index i = 0; i < game.size(); ++i) {
      out.segment(layout.x_offset(i), layout.dim(i)) =
          game.agents[static_cast<size_t>(i)].set.project(z.segment(layout.x_offset(i), layout.dim(i)));
    }
    out.tail(m) = z.tail(m).cwiseMax(0.0);
    return out;
  };
  auto field = [&](const Vec& z) {
    Vec out(n + m);
    out.head(n) = mm * z.head(n) + c + a.transpose() * z.tail(m);
    out.tail(m) = b - a * z.head(n);
    return out;
  };
  auto natural = [&](const Vec& z) { return (z - project(z - field(z))).norm(); };

  Vec z = Vec::Zero(n + m);
  for (Index i = 0; i < game.size(); ++i) {
    z.segment(layout.x_offset(i), layout.dim(i)) = game.agents[static_cast<size_t>(i)].set.interior_point();
  }
  for (Index k = 0; k < iters; ++k) {
    const Vec bar = project(z - step * field(z));
    const Vec next = project(z - step * field(bar));
    const double move = (next - z).norm();
    z = next;
    if (move <= 1e-16 * (1.0 + z.norm())) break;
  }

  // polish on the identified active set (box sets only)
  bool boxes = true;
  for (const auto& ag : game.agents) boxes = boxes && ag.set.is_box();
  if (boxes) {
    Vec lo(n), hi(n);
    for (Index i = 0; i < game.size(); ++i) {
      lo.segment(layout.x_offset(i), layout.dim(i)) = game.agents[static_cast<size_t>(i)].set.box().lo;
      hi.segment(layout.x_offset(i), layout.dim(i)) = game.agents[static_cast<size_t>(i)].set.box().hi;
    }
    const double tol = 1e-7;
    std::vector<Index> freev, rows;
    Vec xfix = Vec::Zero(n);
    for (Index k = 0; k < n; ++k) {
      if (z[k] <= lo[k] + tol) {
        xfix[k] = lo[k];
      } else if (z[k] >= hi[k] - tol) {
        xfix[k] = hi[k];
      } else {
        freev.push_back(k);
      }
    }
    for (Index r = 0; r < m; ++r) {
      if (z[n + r] > tol) rows.push_back(r);
    }
    const Index nf = static_cast<Index>(freev.size()), na = static_cast<Index>(rows.size());
    if (nf + na > 0) {
      Mat kkt = Mat::Zero(nf + na, nf + na);
      Vec rhs = Vec::Zero(nf + na);
      const Vec base = mm * xfix + c;
      for (Index p = 0; p < nf; ++p) {
        for (Index q = 0; q < nf; ++q) kkt(p, q) = mm(freev[static_cast<size_t>(p)], freev[static_cast<size_t>(q)]);
        for (Index r = 0; r < na; ++r) kkt(p, nf + r) = a(rows[static_cast<size_t>(r)], freev[static_cast<size_t>(p)]);
        rhs[p] = -base[freev[static_cast<size_t>(p)]];
      }
      for (Index r = 0; r < na; ++r) {
        const Index row = rows[static_cast<size_t>(r)];
        for (Index p = 0; p < nf; ++p) kkt(nf + r, p) = a(row, freev[static_cast<size_t>(p)]);
        rhs[nf + r] = b[row] - a.row(row).dot(xfix);
      }
      const Vec sol = kkt.completeOrthogonalDecomposition().solve(rhs);
      Vec cand = Vec::Zero(n + m);
      cand.head(n) = xfix;
      for (Index p = 0; p < nf; ++p) cand[freev[static_cast<size_t>(p)]] = sol[p];
      for (Index r = 0; r < na; ++r) cand[n + rows[static_cast<size_t>(r)]] = sol[nf + r];
      if (cand.allFinite() && natural(cand) < natural(z)) z = cand;
    }
  }

  OracleSolution out;
  out.x = z.head(n);
  out.lambda = z.tail(m);
  out.omega = assemble_oracle_state(game, out.x, out.lambda);
  out.method = "long-run-extragradient";
  out.kkt = kkt_residual(game, out.x, out.lambda);
  out.vi = natural(z);
  return out;
}

OracleSolution oracle_selection_on_segment(const Vec& a, const Vec& b,
                                           const std::function<double(const Vec&)>& phi,
                                           double width) {
  if (a.size() != b.size()) throw Error(ErrorKind::DimensionMismatch, "segment endpoints differ in size");
  const Vec dir = b - a;
  auto f = [&](double t) { return phi(a + t * dir); };
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0, hi = 1.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > width) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = f(x2);
    }
  }
  double t = 0.5 * (lo + hi);
  double best = f(t);
  for (double e : {0.0, 1.0}) {
    const double fe = f(e);
    if (fe <= best) {
      best = fe;
      t = e;
    }
  }
  OracleSolution out;
  out.omega = a + t * dir;
  out.x = out.omega;
  out.method = "analytic";
  return out;
}

}  // namespace gne
