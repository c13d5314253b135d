// Acceptance run: one PASS/FAIL line per criterion, diagnostics indented below.
//   acceptance [criterion...] [--strict]
// With --strict any FAIL makes the exit status 1.

#include "support.hpp"

#include "gne/agent_net.hpp"
#include "gne/market.hpp"
#include "gne/online.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <set>

using namespace gne;
using gne::testing::fixture;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string summary;
};

int failures = 0;

void report(int id, const char* name, const Verdict& v) {
  std::printf("%s %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, name, v.summary.c_str());
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

template <class... A>
std::string fmt(const char* f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

void note(const std::string& s) {
  std::printf("    %s\n", s.c_str());
  std::fflush(stdout);
}

// 1 ---------------------------------------------------------------------------

Verdict oracle_equivalence() {
  Rng rng(20240601);
  const std::vector<std::array<Index, 3>> shapes = {{2, 1, 1}, {2, 2, 1}, {3, 2, 2}, {4, 2, 2}, {2, 4, 2}};
  double worst_x = 0.0, worst_gap = 0.0, worst_t = 0.0, worst_anchor = 0.0;
  bool ok = true;
  for (const auto& s : shapes) {
    const GameSpec g = gne::testing::random_projection_game(rng, s[0], s[1], s[2]);
    const OracleSolution orc = oracle_projection_game(g);
    FbfOperator op(g);
    StopCriteria stop;
    stop.max_iter = 200000;
    stop.residual_tol = 0.0;
    const auto t0 = Clock::now();
    const auto res = hsdm_solve(op, g.selection, g.initial_state(),
                                BetaSchedule::power(1.0 / g.selection.lipschitz(), 0.51), stop, &g, false);
    const double secs = seconds_since(t0);
    const Index n = g.layout().primal();
    const double dx = (res.omega.head(n) - orc.x).norm();
    const double da = (res.anchor.head(n) - orc.x).norm();
    const double gap = std::abs(g.selection.value(res.omega) - g.selection.value(orc.omega));
    const double beta_k = BetaSchedule::power(1.0 / g.selection.lipschitz(), 0.51)(res.iterations);
    const double grad = g.selection.gradient(orc.omega).head(n).norm();
    note(fmt("N=%ld n=%ld m=%ld: |x-x*| = %.3e  phi-gap = %.3e  |T(w)_x - x*| = %.3e  beta_k*|grad phi(x*)| = %.3e  %.1f s",
             static_cast<long>(s[0]), static_cast<long>(n), static_cast<long>(s[2]), dx, gap, da,
             beta_k * grad, secs));
    ok = ok && dx <= 1e-4 && gap <= 1e-6 && secs <= 30.0;
    worst_x = std::max(worst_x, dx);
    worst_gap = std::max(worst_gap, gap);
    worst_t = std::max(worst_t, secs);
    worst_anchor = std::max(worst_anchor, da);
  }
  return {ok, fmt("max |x_final - x_oracle| = %.3e (tol 1e-4), max phi-gap = %.3e (tol 1e-6), "
                  "max runtime %.1f s; T-output distance %.3e",
                  worst_x, worst_gap, worst_t, worst_anchor)};
}

// 2 ---------------------------------------------------------------------------

Verdict singleton_consistency() {
  Rng rng(77);
  double worst_pair = 0.0, worst_kkt = 0.0;
  for (Index agents : {2, 3, 5}) {
    const GameSpec g = gne::testing::random_strong_game(rng, agents, 2, 2);
    const Index n = g.layout().primal();
    StopCriteria stop;
    stop.max_iter = 200000;
    stop.residual_tol = 1e-12;
    stop.stall_tol = 1e-15;
    const auto schedule = BetaSchedule::power(1e-5 / g.selection.lipschitz(), 1.0);
    FbfOperator fbf(g);
    PfbOperator pfb(g);
    const auto rf = hsdm_solve(fbf, g.selection, g.initial_state(), schedule, stop, &g, false);
    const auto rp = hsdm_solve(pfb, g.selection, g.initial_state(), schedule, stop, &g, false);
    const OracleSolution orc = oracle_unique_vgne(g);
    const Vec xf = rf.omega.head(n), xp = rp.omega.head(n);
    const double pair = std::max({(xf - xp).norm(), (xf - orc.x).norm(), (xp - orc.x).norm()});
    const double kf = kkt_residual(g, xf, mean_dual(rf.omega, g.layout()).cwiseMax(0.0));
    const double kp = kkt_residual(g, xp, mean_dual(rp.omega, g.layout()).cwiseMax(0.0));
    const double ko = orc.kkt;
    note(fmt("N=%ld: pairwise %.3e  kkt fbf %.3e pfb %.3e oracle %.3e (%ld / %ld iterations)",
             static_cast<long>(agents), pair, kf, kp, ko, static_cast<long>(rf.iterations),
             static_cast<long>(rp.iterations)));
    worst_pair = std::max(worst_pair, pair);
    worst_kkt = std::max({worst_kkt, kf, kp, ko});
  }
  return {worst_pair <= 1e-5 && worst_kkt <= 1e-7,
          fmt("max pairwise distance %.3e (tol 1e-5), max KKT %.3e (tol 1e-7)", worst_pair, worst_kkt)};
}

// 3 ---------------------------------------------------------------------------

Vec random_state(const GameSpec& g, Rng& rng) {
  const Layout& layout = g.layout();
  Vec w(layout.size());
  for (Index i = 0; i < g.size(); ++i) {
    const Box& b = g.agents[static_cast<size_t>(i)].set.box();
    x_block(w, layout, i) = uniform_vector(rng, b.lo, b.hi);
  }
  lambda_part(w, layout) = uniform_vector(rng, g.size() * g.m, 0.0, 2.0);
  nu_part(w, layout) = gaussian_vector(rng, g.size() * g.m);
  return w;
}

Verdict fejer_suite() {
  Rng rng(3);
  Index stated_viol = 0, tseng_viol = 0, pfb_viol = 0, probes = 0;
  double coef_seen = 0.0;
  for (const auto& name : gne::testing::game_fixtures()) {
    const GameSpec g = load_game(fixture(name));
    FbfOperator op(g);
    Index it = 0;
    const Vec star = picard(op, g.initial_state(), 1e-13, 2000000, &it);
    const double mu_min = 1.0 / op.steps().max_step();
    const double coef = std::pow(op.lipschitz().lb / mu_min, 2);
    coef_seen = std::max(coef_seen, coef);
    Index sv = 0, tv = 0, pv = 0;
    std::optional<PfbOperator> pop;
    Vec pstar;
    if (g.affine()) {
      pop.emplace(g);
      pstar = picard(*pop, g.initial_state(), 1e-13, 2000000);
    }
    for (int p = 0; p < 1000; ++p) {
      const Vec w = random_state(g, rng);
      const auto r = op.apply_full(w);
      const double lhs = std::pow(op.norm(r.out - star), 2);
      const double base = std::pow(op.norm(w - star), 2);
      const double step = std::pow(op.norm(r.tilde - w), 2);
      if (lhs > base - coef * step + 1e-9) ++sv;
      if (lhs > base - (1.0 - coef) * step + 1e-9) ++tv;
      if (pop) {
        const double pl = std::pow(pop->norm(pop->apply(w) - pstar), 2);
        const double pb = std::pow(pop->norm(w - pstar), 2);
        if (pl > pb + 1e-9) ++pv;
      }
      ++probes;
    }
    note(fmt("%s: (L_B/mu_min)^2 = %.4f; stated-form violations %ld/1000, "
             "1-(L_B/mu_min)^2 form %ld/1000, pFB Phi-norm %s",
             name.c_str(), coef, static_cast<long>(sv), static_cast<long>(tv),
             pop ? fmt("%ld/1000", static_cast<long>(pv)).c_str() : "n/a (nonaffine g)"));
    stated_viol += sv;
    tseng_viol += tv;
    pfb_viol += pv;
  }
  return {stated_viol == 0 && pfb_viol == 0,
          fmt("stated inequality violations %ld of %ld, pFB violations %ld; "
              "with coefficient 1-(L_B/mu_min)^2: %ld",
              static_cast<long>(stated_viol), static_cast<long>(probes),
              static_cast<long>(pfb_viol), static_cast<long>(tseng_viol))};
}

// 4 ---------------------------------------------------------------------------

Verdict zero_fixed_point() {
  double worst_kkt = 0.0, worst_dd = 0.0, worst_res = 0.0;
  Index limits = 0;
  for (const auto& name : gne::testing::game_fixtures()) {
    const GameSpec g = load_game(fixture(name));
    std::vector<std::unique_ptr<FixedPointOperator>> ops;
    ops.push_back(std::make_unique<FbfOperator>(g));
    if (g.affine()) ops.push_back(std::make_unique<PfbOperator>(g));
    for (const auto& op : ops) {
      Index it = 0;
      const Vec w = picard(*op, g.initial_state(), 1e-10, 5000000, &it);
      const double res = op->residual(w);
      const Vec x = w.head(g.layout().primal());
      const double kkt = kkt_residual(g, x, mean_dual(w, g.layout()));
      const double dd = dual_disagreement(w, g.layout());
      note(fmt("%s %s: residual %.2e after %ld iterations, KKT %.3e, dual disagreement %.3e",
               name.c_str(), op->name().c_str(), res, static_cast<long>(it), kkt, dd));
      worst_kkt = std::max(worst_kkt, kkt);
      worst_dd = std::max(worst_dd, dd);
      worst_res = std::max(worst_res, res);
      ++limits;
    }
  }
  return {worst_res <= 1e-10 && worst_kkt <= 1e-7 && worst_dd <= 1e-7,
          fmt("%ld Picard limits, max residual %.2e, max KKT %.3e (tol 1e-7), max disagreement %.3e (tol 1e-7)",
              static_cast<long>(limits), worst_res, worst_kkt, worst_dd)};
}

// 5 ---------------------------------------------------------------------------

Verdict tau_formulas() {
  double worst_tau = 0.0;
  for (double sigma : {0.02, 0.5, 1.0, 2.0}) {
    for (double lphi : {2.0, 3.0, 10.0}) {
      if (lphi < sigma) continue;
      const double hi = 2.0 * sigma / (lphi * lphi);
      for (double frac : {1e-6, 0.01, 0.3, 0.5, 0.9, 0.999}) {
        const long double b = static_cast<long double>(frac * hi);
        const long double s = sigma, l = lphi;
        const long double x = b * (2.0L * s - b * l * l);
        const long double ref = x / (1.0L + std::sqrt(1.0L - x));
        const double got = tau_beta(static_cast<double>(b), sigma, lphi);
        worst_tau = std::max(worst_tau, static_cast<double>(std::abs(got - ref) / ref));
      }
    }
  }
  const double sigma = 0.7, lphi = 2.0, beta = 1e-8;
  const double ratio = beta / tau_beta(beta, sigma, lphi);
  const double ratio_err = std::abs(ratio - 1.0 / sigma) * sigma;
  double worst_bound = 0.0;
  for (double gamma : {0.0, 1e-3, 0.25}) {
    for (double d1 : {0.0, 0.01, 0.3}) {
      for (double alpha : {0.0, 0.1, 0.4999}) {
        const double got = tracking_bound(gamma, d1, alpha);
        const long double ref = (static_cast<long double>(gamma) + static_cast<long double>(d1) * d1) /
                                (0.5L - static_cast<long double>(alpha));
        worst_bound = std::max(worst_bound, static_cast<double>(std::abs(got - ref) / std::max(1.0L, ref)));
      }
    }
  }
  const double g = tracking_gamma(0.1, 0.2, 3.0, 0.5);
  const double g_ref = 0.1 / 0.2 * 3.0 * (6.0 * 0.5 + 11.0 * 0.1 * 3.0);
  worst_bound = std::max(worst_bound, std::abs(g - g_ref) / g_ref);
  return {worst_tau <= 1e-12 && ratio_err <= 1e-4 && worst_bound <= 1e-12,
          fmt("tau relative error %.2e, beta/tau(beta) at 1e-8 off 1/sigma by %.2e (rel), bound/gamma error %.2e",
              worst_tau, ratio_err, worst_bound)};
}

// 6 ---------------------------------------------------------------------------

Verdict online_contraction() {
  const auto t0 = Clock::now();
  const GameSequence seq = GameSequence::load(fixture("drifting.json"));
  std::vector<Vec> oracle;
  for (Index t = 0; t < seq.length(); ++t) {
    oracle.push_back(oracle_projection_game(seq.at(t)).omega);
  }
  TrackingOptions opts;
  opts.oracle = oracle;
  opts.shrinkage = [](double r) { return r; };
  const double beta = 0.1;
  const Index k_inner = 5;
  const auto res = restarted_hsdm(seq, beta, k_inner, seq.at(0).initial_state(), opts);
  const auto& rep = res.report;
  const double secs = seconds_since(t0);
  Index viol = 0;
  double worst_margin = -INFINITY;
  for (const auto& row : rep.rows) {
    const double lhs = row.err_out * row.err_out;
    const double rhs = rep.alpha * row.err_in * row.err_in + rep.gamma.value_or(NAN);
    worst_margin = std::max(worst_margin, lhs - rhs);
    if (!(lhs <= rhs + 1e-12)) ++viol;
  }
  note(fmt("T = %ld, tau = %.4f, alpha = %.4f, U = %.4f, xi = %.4f, gamma = %.4e, delta1 = %.4e",
           static_cast<long>(seq.length()), rep.tau, rep.alpha, rep.u, rep.xi.value_or(NAN),
           rep.gamma.value_or(NAN), rep.delta1.value_or(NAN)));
  const double bound = rep.bound.value_or(NAN), limsup = rep.limsup.value_or(NAN);
  return {viol == 0 && limsup <= 1.05 * bound && secs <= 60.0,
          fmt("per-step violations %ld/%ld (worst margin %.3e), limsup %.4e vs bound %.4e, %.2f s",
              static_cast<long>(viol), static_cast<long>(rep.rows.size()), worst_margin, limsup, bound, secs)};
}

// 7 ---------------------------------------------------------------------------

struct RtMetrics {
  double avg_residual = 0.0;
  double avg_phi = 0.0;
  double peak_flow = 0.0;
  double secs = 0.0;
};

RtMetrics real_time_run(const BusNetwork& net, const RealTimeScenario& sc, const Vec& w1, double beta,
                        Index k_inner) {
  const auto t0 = Clock::now();
  const auto res = restarted_hsdm(sc.sequence, beta, k_inner, w1);
  RtMetrics m;
  m.secs = seconds_since(t0);
  Index peaks = 0;
  for (size_t t = 0; t < res.report.rows.size(); ++t) {
    m.avg_residual += res.report.rows[t].residual;
    m.avg_phi += res.report.rows[t].phi;
    if (sc.peak[t]) {
      const Mat f = line_flows(net, sc.steps[t], res.states[t + 1]);
      m.peak_flow += f.row(net.cfg.penalized_line).cwiseAbs().mean();
      ++peaks;
    }
  }
  const double steps = static_cast<double>(res.report.rows.size());
  m.avg_residual /= steps;
  m.avg_phi /= steps;
  m.peak_flow /= static_cast<double>(std::max<Index>(peaks, 1));
  return m;
}

Verdict market_trends() {
  const BusNetwork net = BusNetwork::load(fixture("ieee13.json"));
  const MarketGame da = build_day_ahead(net, 24);
  const GameSpec& g = *da.spec;
  note(fmt("day-ahead: n = %ld, m = %ld (reciprocity %ld, power flow %ld, limits %ld, storage %ld), state %ld",
           static_cast<long>(g.layout().primal()), static_cast<long>(g.m),
           static_cast<long>(da.counts.reciprocity), static_cast<long>(da.counts.power_flow),
           static_cast<long>(da.counts.line_limits), static_cast<long>(da.counts.storage),
           static_cast<long>(g.layout().size())));
  FbfOperator op(g);
  StopCriteria stop;
  stop.max_iter = 8000;
  stop.residual_tol = 0.0;
  auto t0 = Clock::now();
  const auto plain = hsdm_solve(op, g.selection, g.initial_state(), BetaSchedule::constant(0.0), stop, &g, false);
  const double t_plain = seconds_since(t0);
  t0 = Clock::now();
  const auto sel = hsdm_solve(op, g.selection, g.initial_state(),
                              BetaSchedule::power(1.0 / g.selection.lipschitz(), 0.51), stop, &g, false);
  const double t_sel = seconds_since(t0);
  const double e_plain = flow_energy(net, da, plain.omega);
  const double e_sel = flow_energy(net, da, sel.omega);
  const double gain = (e_plain - e_sel) / e_plain;
  note(fmt("(a) Q_pf flow energy: plain FBF %.5e, HSDM %.5e, improvement %.1f%% "
           "(residuals %.2e / %.2e after %ld iterations; %.0f s / %.0f s)",
           e_plain, e_sel, 100.0 * gain, op.residual(plain.omega), op.residual(sel.omega),
           static_cast<long>(stop.max_iter), t_plain, t_sel));
  const bool a_ok = gain >= 0.01;

  const DayAheadPlan plan = plan_from_solution(net, da, sel.omega);
  const RealTimeScenario sc = build_real_time(net, plan, 8, 12);
  const GameSpec& g1 = *sc.steps[0].spec;
  FbfOperator op1(g1);
  StopCriteria warm;
  warm.max_iter = 5000;
  warm.residual_tol = 0.0;
  const Vec w1 = hsdm_solve(op1, g1.selection, g1.initial_state(), BetaSchedule::constant(0.0), warm,
                            nullptr, false).omega;
  std::map<Index, RtMetrics> by_k;
  double worst_secs = std::max(t_plain, t_sel);
  for (Index k : {5, 50, 500}) {
    by_k[k] = real_time_run(net, sc, w1, 5e-4, k);
    note(fmt("(b) beta = 5e-4, K = %3ld: average residual %.4e, peak-hour |flow| 632-671 %.4f, "
             "average phi %.4f, %.1f s",
             static_cast<long>(k), by_k[k].avg_residual, by_k[k].peak_flow, by_k[k].avg_phi, by_k[k].secs));
    worst_secs = std::max(worst_secs, by_k[k].secs);
  }
  const bool b_ok = by_k[50].avg_residual <= by_k[5].avg_residual &&
                    by_k[500].avg_residual <= by_k[50].avg_residual &&
                    by_k[50].peak_flow <= by_k[5].peak_flow && by_k[500].peak_flow <= by_k[50].peak_flow;
  const RtMetrics small = real_time_run(net, sc, w1, 5e-5, 5);
  note(fmt("(c) K = 5: average phi %.6f at beta = 5e-5, %.6f at beta = 5e-4", small.avg_phi,
           by_k[5].avg_phi));
  const bool c_ok = small.avg_phi > by_k[5].avg_phi;
  return {a_ok && b_ok && c_ok && worst_secs <= 300.0,
          fmt("(a) %s %.1f%% flow-energy reduction, (b) %s, (c) %s, longest run %.0f s",
              a_ok ? "ok" : "FAILED", 100.0 * gain, b_ok ? "monotone in K" : "NOT monotone in K",
              c_ok ? "smaller beta costs more" : "direction NOT reproduced", worst_secs)};
}

// 8 ---------------------------------------------------------------------------

Verdict distributed_fidelity() {
  std::vector<std::pair<std::string, std::shared_ptr<const GameSpec>>> games;
  for (const auto& name : gne::testing::game_fixtures()) {
    games.emplace_back(name, std::make_shared<GameSpec>(load_game(fixture(name))));
  }
  {
    const BusNetwork net = BusNetwork::load(fixture("ieee13.json"));
    DayAheadPlan plan;
    plan.soc = Mat::Constant(net.size(), 25, 0.5);
    games.emplace_back("ieee13 real-time t=1", build_real_time(net, plan, 8, 1).steps[0].spec);
  }
  double worst = 0.0;
  Index locality = 0, count_mismatch = 0;
  bool rounds_ok = true;
  for (const auto& [name, gp] : games) {
    const GameSpec& g = *gp;
    const auto lip = estimate_lipschitz(g);
    for (SplitMode mode : {SplitMode::Fbf, SplitMode::Pfb}) {
      if (mode == SplitMode::Pfb && !g.affine()) continue;
      const StepSizes steps = make_stepsizes(g, lip, mode);
      const auto schedule = BetaSchedule::power(1.0 / std::max(g.selection.lipschitz(), 1e-12), 0.51);
      double dev = NAN;
      try {
        NetOptions opts;
        opts.shuffle_seed = 11;
        dev = equivalence_check(g, steps, g.selection, schedule, g.initial_state(), 100, opts);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::LocalityViolation) throw;
        ++locality;
      }
      AgentNetwork net(g, steps);
      net.set_state(g.initial_state());
      net.iterate(g.selection, 0.1);
      const Index got = net.last_stats().total_messages();
      const Index want = expected_messages(g, mode, g.selection.separable());
      if (got != want) ++count_mismatch;
      note(fmt("%s %s: max deviation %.2e, messages %ld (formula %ld), full rounds %ld, aux rounds %ld",
               name.c_str(), to_string(mode), dev, static_cast<long>(got), static_cast<long>(want),
               static_cast<long>(net.last_stats().full_rounds),
               static_cast<long>(net.last_stats().aux_rounds)));
      worst = std::max(worst, std::isnan(dev) ? INFINITY : dev);
      if (mode == SplitMode::Pfb) {
        AgentNetwork fbf(g, make_stepsizes(g, lip, SplitMode::Fbf));
        fbf.set_state(g.initial_state());
        fbf.iterate(g.selection, 0.1);
        rounds_ok = rounds_ok && fbf.last_stats().full_rounds > net.last_stats().full_rounds;
      }
    }
  }
  return {worst <= 1e-12 && locality == 0 && count_mismatch == 0 && rounds_ok,
          fmt("max deviation %.2e (tol 1e-12), locality violations %ld, message-count mismatches %ld, "
              "FBF rounds > pFB rounds: %s",
              worst, static_cast<long>(locality), static_cast<long>(count_mismatch), rounds_ok ? "yes" : "no")};
}

// 9 ---------------------------------------------------------------------------

Verdict gradient_checks() {
  Rng rng(9);
  double worst = 0.0;
  Index checks = 0;
  auto check_game = [&](const std::string& name, const GameSpec& g) {
    double w = 0.0;
    for (Index i = 0; i < g.size(); ++i) {
      w = std::max(w, cost_gradient_check(g, i, rng, 100));
      ++checks;
    }
    w = std::max(w, selection_gradient_check(g.selection, rng, 100));
    ++checks;
    note(fmt("%s: worst relative error %.2e", name.c_str(), w));
    worst = std::max(worst, w);
  };
  for (const auto& name : gne::testing::game_fixtures()) check_game(name, load_game(fixture(name)));
  const BusNetwork net = BusNetwork::load(fixture("ieee13.json"));
  check_game("ieee13 day-ahead", *build_day_ahead(net, 24).spec);
  DayAheadPlan plan;
  plan.soc = Mat::Constant(net.size(), 25, 0.5);
  plan.soc.col(2).array() = 0.3;
  check_game("ieee13 real-time t=1", *build_real_time(net, plan, 8, 1).steps[0].spec);
  return {worst <= 1e-5, fmt("%ld oracles, worst relative error %.2e (tol 1e-5)",
                             static_cast<long>(checks), worst)};
}

// 10 --------------------------------------------------------------------------

Verdict schedule_gate() {
  std::string out;
  bool ok = true;
  for (double p : {0.5, 1.1}) {
    bool rejected = false;
    try {
      BetaSchedule::power(1.0, p);
    } catch (const Error& e) {
      rejected = e.kind() == ErrorKind::BetaOutOfRange;
    }
    ok = ok && rejected;
    out += fmt("p=%g %s; ", p, rejected ? "rejected" : "ACCEPTED");
  }
  for (double p : {0.51, 0.75, 1.0}) {
    bool accepted = true;
    try {
      BetaSchedule::power(1.0, p);
    } catch (const Error&) {
      accepted = false;
    }
    ok = ok && accepted;
    out += fmt("p=%g %s; ", p, accepted ? "accepted" : "REJECTED");
  }
  return {ok, out};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  bool strict = false;
  for (int a = 1; a < argc; ++a) {
    if (std::strcmp(argv[a], "--strict") == 0) {
      strict = true;
    } else {
      only.insert(std::atoi(argv[a]));
    }
  }
  const std::vector<std::tuple<int, const char*, std::function<Verdict()>>> criteria = {
      {1, "oracle equivalence", oracle_equivalence},
      {2, "singleton consistency", singleton_consistency},
      {3, "Fejer / quasi-nonexpansiveness", fejer_suite},
      {4, "zero / fixed-point equivalence", zero_fixed_point},
      {5, "tau(beta) and bound formulas", tau_formulas},
      {6, "online contraction", online_contraction},
      {7, "market trends", market_trends},
      {8, "distributed fidelity", distributed_fidelity},
      {9, "gradient checks", gradient_checks},
      {10, "schedule gate", schedule_gate},
  };
  int run = 0;
  for (const auto& [id, name, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    ++run;
    try {
      report(id, name, fn());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("exception: ") + e.what()});
    }
  }
  std::printf("%d/%d criteria passed\n", run - failures, run);
  return strict && failures > 0 ? 1 : 0;
}
