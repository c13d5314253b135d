#include "gne/hsdm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace gne {

BetaSchedule BetaSchedule::power(double beta0, double p) {
  if (!(p > 0.5 && p <= 1.0)) {
    std::ostringstream os;
    os << "power schedule needs p in (1/2, 1] (non-summable, square-summable steps); got p = " << p;
    throw Error(ErrorKind::BetaOutOfRange, os.str());
  }
  if (!(beta0 >= 0.0) || !std::isfinite(beta0)) {
    throw Error(ErrorKind::BetaOutOfRange, "beta0 must be finite and >= 0");
  }
  BetaSchedule s;
  s.kind_ = Kind::Power;
  s.beta0_ = beta0;
  s.p_ = p;
  return s;
}

BetaSchedule BetaSchedule::constant(double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorKind::BetaOutOfRange, "beta must be finite and >= 0");
  }
  BetaSchedule s;
  s.kind_ = Kind::Constant;
  s.beta0_ = beta;
  return s;
}

double BetaSchedule::operator()(Index k) const {
  if (kind_ == Kind::Constant) return beta0_;
  return beta0_ / std::pow(static_cast<double>(std::max<Index>(k, 1)), p_);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void RunTrace::write_csv(std::ostream& out, std::uint64_t seed, bool timing) const {
  out << "# seed=" << seed << "\n";
  out << "k,residual,phi,coupling_viol,dual_disagreement,beta,wall_ms\n";
  for (const auto& r : records) {
    out << r.k << ',' << format_double(r.residual) << ',' << format_double(r.phi) << ','
        << format_double(r.coupling_viol) << ',' << format_double(r.dual_disagreement) << ','
        << format_double(r.beta) << ',' << format_double(timing ? r.wall_ms : 0.0) << '\n';
  }
}

HsdmResult hsdm_solve(FixedPointOperator& op, const SelectionFunction& phi, const Vec& w0,
                      const BetaSchedule& schedule, const StopCriteria& stop,
                      const GameSpec* game, bool record) {
  const Layout& layout = op.layout();
  require_size(w0, layout.size(), "initial state");
  if (!w0.allFinite()) throw Error(ErrorKind::InvalidArgument, "initial state is not finite");
  HsdmResult res;
  res.omega = w0;
  res.anchor = w0;
  std::vector<double> phi_hist;
  phi_hist.reserve(static_cast<size_t>(std::min<Index>(stop.max_iter, 1 << 20)) + 1);
  phi_hist.push_back(phi.value(w0));
  const auto start = std::chrono::steady_clock::now();

  for (Index k = 1; k <= stop.max_iter; ++k) {
    if (auto note = op.adapt(res.omega)) res.trace.warnings.push_back(*note);
    const Vec t = op.apply(res.omega);
    const double residual = op.norm(t - res.omega);
    const double beta = schedule(k);
    res.anchor = t;
    if (beta != 0.0) {
      res.omega = t - beta * phi.gradient(t);
    } else {
      res.omega = t;
    }
    const double nrm = res.omega.norm();
    if (!std::isfinite(nrm) || nrm > 1e12) {
      std::ostringstream os;
      os << "iterate norm " << nrm << " at k = " << k;
      throw Error(ErrorKind::Diverged, os.str());
    }
    const double phik = phi.value(res.omega);
    phi_hist.push_back(phik);
    res.iterations = k;
    if (record) {
      TraceRecord r;
      r.k = k;
      r.residual = residual;
      r.phi = phik;
      r.beta = beta;
      if (game && game->m > 0) {
        r.coupling_viol = coupling_value(*game, res.omega.head(layout.primal())).cwiseMax(0.0).maxCoeff();
      }
      r.dual_disagreement = dual_disagreement(res.omega, layout);
      r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      res.trace.records.push_back(r);
    }
    if (residual <= stop.residual_tol && k >= stop.stall_window) {
      const double change = std::abs(phik - phi_hist[static_cast<size_t>(k - stop.stall_window)]);
      if (change <= stop.stall_tol) {
        res.converged = true;
        break;
      }
    }
  }
  return res;
}

Vec picard(const FixedPointOperator& op, const Vec& w0, double tol, Index max_iter,
           Index* iterations) {
  Vec w = w0;
  Index k = 0;
  for (; k < max_iter; ++k) {
    Vec t = op.apply(w);
    const double res = op.norm(t - w);
    w = std::move(t);
    if (!w.allFinite()) throw Error(ErrorKind::Diverged, "Picard iteration diverged");
    if (res <= tol) {
      ++k;
      break;
    }
  }
  if (iterations) *iterations = k;
  return w;
}

SelectionCertificate certify_selection(const GameSpec& game, const Vec& w_final,
                                       const Vec& w_oracle, double tol) {
  const Layout& layout = game.layout();
  require_size(w_final, layout.size(), "solver state");
  require_size(w_oracle, layout.size(), "oracle state");
  SelectionCertificate c;
  c.x_distance = (x_part(w_final, layout) - x_part(w_oracle, layout)).norm();
  c.state_distance = (w_final - w_oracle).norm();
  c.phi_gap = game.selection.value(w_final) - game.selection.value(w_oracle);
  const Vec lbar = mean_dual(w_final, layout).cwiseMax(0.0);
  c.kkt = kkt_residual(game, w_final.head(layout.primal()), lbar);
  c.pass = c.x_distance <= tol && std::abs(c.phi_gap) <= tol && c.kkt <= tol;
  return c;
}

double selection_vi_residual(const SelectionFunction& phi, const Vec& w,
                             const std::vector<Vec>& samples) {
  const Vec g = phi.gradient(w);
  double worst = INFINITY;
  for (const auto& s : samples) worst = std::min(worst, (s - w).dot(g));
  return worst;
}

namespace {

double cloud_distance(const FixedPointOperator& op, const std::vector<Vec>& cloud, const Vec& w,
                      int neighbors) {
  std::vector<std::pair<double, size_t>> d;
  d.reserve(cloud.size());
  for (size_t s = 0; s < cloud.size(); ++s) d.emplace_back(op.norm(w - cloud[s]), s);
  const size_t k = std::min<size_t>(static_cast<size_t>(std::max(neighbors, 1)), d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<long>(k), d.end());
  double best = d.front().first;
  // segments between the nearest samples
  for (size_t a = 0; a < k; ++a) {
    for (size_t b = a + 1; b < k; ++b) {
      const Vec& p = cloud[d[a].second];
      const Vec& q = cloud[d[b].second];
      const Vec dir = q - p;
      // minimize ‖w − p − t·dir‖ in the operator norm by golden-section on t ∈ [0,1]
      double lo = 0.0, hi = 1.0;
      const double g = 0.5 * (std::sqrt(5.0) - 1.0);
      auto f = [&](double t) { return op.norm(w - p - t * dir); };
      double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
      double f1 = f(x1), f2 = f(x2);
      for (int it = 0; it < 60; ++it) {
        if (f1 < f2) {
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
      best = std::min(best, std::min(f1, f2));
    }
  }
  return best;
}

}  // namespace

std::vector<ShrinkageRow> shrinkage_probe(const FixedPointOperator& op,
                                          const std::vector<Vec>& fix_sample,
                                          const ShrinkageOptions& opts) {
  if (fix_sample.empty() && !opts.distance) {
    throw Error(ErrorKind::EmptySlice, "shrinkage probe needs at least one fixed point");
  }
  const Index n = op.layout().size();
  const Vec center = opts.center.size() ? opts.center : Vec(Vec::Zero(n));
  auto dist = [&](const Vec& w) {
    return opts.distance ? opts.distance(w) : cloud_distance(op, fix_sample, w, opts.neighbors);
  };
  Rng rng(opts.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<double, double>> pts;  // (dist, decrease)
  for (int s = 0; s < opts.samples; ++s) {
    const Vec dir = gaussian_vector(rng, n).normalized();
    const double rad = opts.radius * std::pow(unit(rng), 1.0 / static_cast<double>(n));
    const Vec w = center + rad * dir;
    const double dw = dist(w);
    pts.emplace_back(dw, dw - dist(op.apply(w)));
  }
  std::vector<ShrinkageRow> rows;
  for (double r : opts.r_grid) {
    ShrinkageRow row;
    row.r = r;
    if (r <= 0.0) {
      // fixed points themselves sit at distance 0 with zero decrease
      row.d_hat = 0.0;
      row.count = static_cast<Index>(pts.size() + fix_sample.size());
      rows.push_back(row);
      continue;
    }
    double best = INFINITY;
    for (const auto& [dw, dec] : pts) {
      if (dw >= r) {
        best = std::min(best, dec);
        ++row.count;
      }
    }
    if (row.count == 0) {
      std::ostringstream os;
      os << "no sample at distance >= " << r << " inside the probe ball";
      throw Error(ErrorKind::EmptySlice, os.str());
    }
    row.d_hat = best;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gne
