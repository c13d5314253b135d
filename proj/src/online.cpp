#include "gne/online.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

namespace gne {

namespace {

[[noreturn]] void instance_fail(Index t, const std::string& msg) {
  std::ostringstream os;
  os << "instance t = " << t + 1 << ": " << msg;
  throw Error(ErrorKind::InstanceValidation, os.str());
}

GameSequence::Instance build_instance(const Json& doc, Index t, std::uint64_t seed) {
  try {
    return std::make_shared<const GameSpec>(parse_game(doc, seed));
  } catch (const Error& e) {
    instance_fail(t, std::string(to_string(e.kind())) + ": " + e.what());
  }
}

bool same_matrix(const SpMat& a, const SpMat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return Mat(a) == Mat(b);
}

/// Step sizes only depend on M, the constraint matrices and the graph.
bool same_structure(const GameSpec& a, const GameSpec& b) {
  if (a.size() != b.size() || a.m != b.m || a.layout().size() != b.layout().size()) return false;
  for (Index i = 0; i < a.size(); ++i) {
    const auto& ai = a.agents[static_cast<size_t>(i)];
    const auto& bi = b.agents[static_cast<size_t>(i)];
    if (ai.cost.kind != CostForm::Kind::Quadratic || bi.cost.kind != CostForm::Kind::Quadratic) {
      return false;
    }
    if (ai.g.kind != bi.g.kind || !same_matrix(ai.g.a, bi.g.a)) return false;
    if (!ai.g.is_affine() && !same_matrix(ai.g.d, bi.g.d)) return false;
  }
  if (a.declared_lf != b.declared_lf || a.declared_eta != b.declared_eta) return false;
  return a.graph.laplacian() == b.graph.laplacian() &&
         same_matrix(pseudogradient_matrix(a), pseudogradient_matrix(b));
}

}  // namespace

GameSequence::GameSequence(std::vector<Instance> per_step) : family_(std::move(per_step)) {
  for (size_t t = 0; t < family_.size(); ++t) schedule_.push_back(static_cast<Index>(t));
}

GameSequence::GameSequence(std::vector<Instance> family, std::vector<Index> schedule)
    : family_(std::move(family)), schedule_(std::move(schedule)), finite_(true) {
  for (size_t t = 0; t < schedule_.size(); ++t) {
    const Index h = schedule_[t];
    if (h < 0 || h >= static_cast<Index>(family_.size())) {
      instance_fail(static_cast<Index>(t), "schedule references unknown family member");
    }
  }
}

GameSequence GameSequence::from_json(const Json& doc, std::uint64_t seed) {
  if (!doc.is_object()) throw Error(ErrorKind::Parse, "scenario must be a JSON object");
  Json base = doc;
  for (const char* key : {"timeline", "family", "schedule", "T", "delta1", "delta2"}) base.erase(key);

  GameSequence seq;
  if (doc.contains("family")) {
    if (!doc.contains("schedule")) throw Error(ErrorKind::Parse, "family mode needs 'schedule'");
    std::vector<Instance> fam;
    Index h = 0;
    for (const auto& patch : doc.at("family")) {
      Json inst = base;
      inst.merge_patch(patch);
      fam.push_back(build_instance(inst, h++, seed));
    }
    std::vector<Index> sched;
    for (const auto& v : doc.at("schedule")) sched.push_back(v.get<Index>() - 1);
    seq = GameSequence(std::move(fam), std::move(sched));
  } else {
    std::map<Index, Json> patches;
    Index length = doc.value("T", Index{0});
    if (doc.contains("timeline")) {
      for (const auto& entry : doc.at("timeline")) {
        const Index t = entry.at("t").get<Index>();
        if (t < 1) throw Error(ErrorKind::Parse, "timeline t must be >= 1");
        patches[t] = entry.value("patch", Json::object());
        length = std::max(length, t);
      }
    }
    length = std::max<Index>(length, 1);
    Json current = base;
    Json built;
    for (Index t = 1; t <= length; ++t) {
      auto it = patches.find(t);
      if (it != patches.end()) current.merge_patch(it->second);
      if (seq.family_.empty() || current != built) {
        seq.family_.push_back(build_instance(current, t - 1, seed));
        built = current;
      }
      seq.schedule_.push_back(static_cast<Index>(seq.family_.size()) - 1);
    }
  }
  if (doc.contains("delta1")) seq.delta1 = doc.at("delta1").get<double>();
  if (doc.contains("delta2")) seq.delta2 = doc.at("delta2").get<double>();
  return seq;
}

GameSequence GameSequence::load(const std::string& path, std::uint64_t seed) {
  return from_json(read_json(path), seed);
}

const GameSpec& GameSequence::at(Index t) const {
  if (t < 0 || t >= length()) throw Error(ErrorKind::InvalidArgument, "time index out of range");
  return *family_[static_cast<size_t>(schedule_[static_cast<size_t>(t)])];
}

bool GameSequence::all_affine() const {
  return std::all_of(family_.begin(), family_.end(), [](const Instance& g) { return g->affine(); });
}

double tau_beta(double beta, double sigma, double lphi) {
  if (!(sigma > 0.0) || !(lphi > 0.0)) {
    throw Error(ErrorKind::BetaOutOfRange, "tau(beta) needs sigma > 0 and L_phi > 0");
  }
  const double hi = 2.0 * sigma / (lphi * lphi);
  if (!(beta > 0.0 && beta < hi)) {
    std::ostringstream os;
    os << "beta = " << beta << " outside (0, 2 sigma / L_phi^2) = (0, " << hi << ")";
    throw Error(ErrorKind::BetaOutOfRange, os.str());
  }
  // 1 − √(1 − x) written as x / (1 + √(1 − x)), no cancellation for small β
  const double x = beta * (2.0 * sigma - beta * lphi * lphi);
  return x / (1.0 + std::sqrt(std::max(1.0 - x, 0.0)));
}

double tracking_gamma(double beta, double tau, double u, double xi) {
  return beta / tau * u * (6.0 * xi + 11.0 * beta * u);
}

double tracking_bound(double gamma, double delta1, double alpha) {
  if (!(alpha < 0.5)) {
    std::ostringstream os;
    os << "alpha = " << alpha << " >= 1/2; increase K";
    throw Error(ErrorKind::AlphaTooLarge, os.str());
  }
  return (gamma + delta1 * delta1) / (0.5 - alpha);
}

void TrackingReport::write_csv(std::ostream& out, std::uint64_t seed) const {
  out << "# seed=" << seed << "\n";
  out << "t,err_vs_oracle,residual,phi,bound\n";
  for (const auto& r : rows) {
    out << r.t << ',' << (std::isnan(r.err_out) ? std::string() : format_double(r.err_out)) << ','
        << format_double(r.residual) << ',' << format_double(r.phi) << ','
        << (bound ? format_double(*bound) : std::string()) << '\n';
  }
}

Json TrackingReport::to_json() const {
  Json j;
  j["beta"] = beta;
  j["K"] = k_inner;
  j["sigma"] = sigma;
  j["L_phi"] = lphi;
  j["tau"] = tau;
  j["alpha"] = alpha;
  j["U"] = u;
  j["operator"] = operator_name;
  j["assumption_checked"] = assumption_checked;
  auto opt = [&](const char* key, const std::optional<double>& v) {
    j[key] = v ? Json(*v) : Json(nullptr);
  };
  opt("xi", xi);
  opt("gamma", gamma);
  opt("delta1", delta1);
  opt("bound", bound);
  opt("limsup_sq_error", limsup);
  j["steps"] = rows.size();
  if (!rows.empty()) {
    double avg = 0.0;
    for (const auto& r : rows) avg += r.residual;
    j["average_residual"] = avg / static_cast<double>(rows.size());
  }
  j["warnings"] = warnings;
  return j;
}

TrackingResult restarted_hsdm(const GameSequence& seq, double beta, Index k_inner, const Vec& w1,
                              const TrackingOptions& opts) {
  if (k_inner < 1) throw Error(ErrorKind::InvalidArgument, "K must be >= 1");
  if (seq.length() == 0) throw Error(ErrorKind::InvalidArgument, "empty game sequence");
  const Index steps = seq.length();
  const Index size = seq.at(0).layout().size();

  TrackingResult out;
  TrackingReport& rep = out.report;
  rep.beta = beta;
  rep.k_inner = k_inner;
  rep.assumption_checked = seq.finite_family();
  if (!rep.assumption_checked) {
    rep.warnings.push_back("uniform quasi-shrinking assumption unchecked (not a finite family)");
  }

  rep.sigma = INFINITY;
  rep.lphi = 0.0;
  for (Index t = 0; t < steps; ++t) {
    const GameSpec& g = seq.at(t);
    if (g.layout().size() != size) instance_fail(t, "joint-state size differs from t = 1");
    rep.sigma = std::min(rep.sigma, g.selection.sigma());
    rep.lphi = std::max(rep.lphi, g.selection.lipschitz());
  }
  if (!(rep.sigma > 0.0)) {
    throw Error(ErrorKind::BetaOutOfRange, "every phi_t must be strongly convex (sigma > 0)");
  }
  rep.tau = tau_beta(beta, rep.sigma, rep.lphi);
  rep.alpha = std::pow(1.0 - rep.tau, static_cast<double>(k_inner));
  require_size(w1, size, "initial state");
  const bool with_oracle = !opts.oracle.empty();
  if (with_oracle && static_cast<Index>(opts.oracle.size()) < steps) {
    throw Error(ErrorKind::OracleUnavailable, "oracle sequence shorter than the game sequence");
  }

  // one operator per family member, step sizes shared while the structure is unchanged
  std::vector<std::unique_ptr<FixedPointOperator>> ops(seq.family().size());
  const GameSpec* last_game = nullptr;
  std::optional<StepSizes> last_steps;
  std::optional<LipschitzEstimate> last_lip;
  auto op_for = [&](Index t) -> FixedPointOperator& {
    const Index h = seq.family_index(t);
    auto& slot = ops[static_cast<size_t>(h)];
    if (slot) return *slot;
    const GameSpec& g = *seq.family()[static_cast<size_t>(h)];
    const bool reuse = last_game && same_structure(*last_game, g);
    if (opts.mode == SplitMode::Pfb) {
      if (reuse && last_steps) {
        slot = std::make_unique<PfbOperator>(g, *last_steps);
      } else {
        auto p = std::make_unique<PfbOperator>(g);
        last_steps = p->steps();
        slot = std::move(p);
      }
    } else {
      if (reuse && last_steps && last_lip) {
        slot = std::make_unique<FbfOperator>(g, *last_steps, *last_lip);
      } else {
        auto f = std::make_unique<FbfOperator>(g, opts.lipschitz);
        last_steps = f->steps();
        last_lip = f->lipschitz();
        slot = std::move(f);
      }
    }
    last_game = &g;
    return *slot;
  };

  out.states.reserve(static_cast<size_t>(steps) + 1);
  out.states.push_back(w1);
  double u = 0.0;
  Vec y = w1;
  for (Index t = 0; t < steps; ++t) {
    const GameSpec& g = seq.at(t);
    FixedPointOperator& op = op_for(t);
    rep.operator_name = op.name();
    TrackingRow row;
    row.t = t + 1;
    if (with_oracle) {
      row.err_in = (y - opts.oracle[static_cast<size_t>(t)]).norm();
      row.dist_in = row.err_in;
    }
    for (Index k = 0; k < k_inner; ++k) {
      if (auto note = op.adapt(y)) rep.warnings.push_back(*note);
      const Vec tv = op.apply(y);
      const Vec grad = g.selection.gradient(tv);
      u = std::max(u, grad.norm());
      y = tv - beta * grad;
      if (!y.allFinite() || y.norm() > 1e12) {
        std::ostringstream os;
        os << "restarted HSDM diverged at t = " << t + 1;
        throw Error(ErrorKind::Diverged, os.str());
      }
    }
    out.states.push_back(y);
    if (with_oracle) row.err_out = (y - opts.oracle[static_cast<size_t>(t)]).norm();
    row.residual = op.residual(y);
    row.phi = g.selection.value(y);
    rep.rows.push_back(row);
  }
  rep.u = u;

  // δ₁
  if (seq.delta1) {
    rep.delta1 = seq.delta1;
  } else if (with_oracle) {
    double d1 = 0.0;
    for (Index t = 0; t + 1 < steps; ++t) {
      d1 = std::max(d1, (opts.oracle[static_cast<size_t>(t + 1)] - opts.oracle[static_cast<size_t>(t)]).norm());
    }
    rep.delta1 = d1;
  }

  // ξ
  if (opts.xi) {
    rep.xi = opts.xi;
  } else if (opts.shrinkage && with_oracle && k_inner > 1) {
    double dmax = 0.0;
    for (const auto& r : rep.rows) dmax = std::max(dmax, r.dist_in);
    const double need = std::max(2.0 * beta * u, 2.0 * dmax / static_cast<double>(k_inner - 1));
    double lo = 0.0, hi = 1.0;
    while (opts.shrinkage(hi) < need && hi < 1e12) hi *= 2.0;
    if (opts.shrinkage(hi) >= need) {
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (opts.shrinkage(mid) >= need ? hi : lo) = mid;
      }
      rep.xi = hi;
    } else {
      rep.warnings.push_back("no xi satisfies the shrinkage condition");
    }
  } else if (opts.gamma_target && u > 0.0) {
    rep.xi = *opts.gamma_target * rep.sigma / (12.0 * u);
  }
  if (rep.xi) rep.gamma = tracking_gamma(beta, rep.tau, u, *rep.xi);

  if (rep.alpha >= 0.5) {
    rep.warnings.push_back("alpha >= 1/2; bound omitted (increase K)");
  } else if (rep.gamma && rep.delta1) {
    rep.bound = tracking_bound(*rep.gamma, *rep.delta1, rep.alpha);
  }
  if (with_oracle) {
    const Index first = steps - std::max<Index>(1, (steps + 3) / 4);
    double worst = 0.0;
    for (Index t = first; t < steps; ++t) {
      const double e = rep.rows[static_cast<size_t>(t)].err_in;
      worst = std::max(worst, e * e);
    }
    rep.limsup = worst;
  }
  return out;
}

std::pair<double, double> measure_variability(const GameSequence& seq,
                                              const std::vector<Vec>& oracle, SplitMode mode,
                                              double picard_tol, Index picard_max) {
  const Index steps = seq.length();
  if (static_cast<Index>(oracle.size()) < steps) {
    throw Error(ErrorKind::OracleUnavailable, "oracle solutions missing for some steps");
  }
  double d1 = 0.0, d2 = 0.0;
  for (Index t = 0; t + 1 < steps; ++t) {
    const Vec& cur = oracle[static_cast<size_t>(t)];
    const Vec& nxt = oracle[static_cast<size_t>(t + 1)];
    d1 = std::max(d1, (nxt - cur).norm());
    const GameSpec& g = seq.at(t + 1);
    std::unique_ptr<FixedPointOperator> op;
    if (mode == SplitMode::Pfb) {
      op = std::make_unique<PfbOperator>(g);
    } else {
      op = std::make_unique<FbfOperator>(g);
    }
    const Vec lim = picard(*op, cur, picard_tol, picard_max);
    d2 = std::max(d2, (lim - cur).norm());
  }
  return {d1, d2};
}

}  // namespace gne
