#include "gne/agent_net.hpp"
#include "gne/game_io.hpp"
#include "gne/hsdm.hpp"
#include "gne/market.hpp"
#include "gne/online.hpp"
#include "gne/oracle.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

using namespace gne;
namespace fs = std::filesystem;

namespace {

constexpr int kConverged = 0;
constexpr int kFailure = 1;
constexpr int kMaxIter = 2;

struct RunConfig {
  std::string config;
  std::string algo = "fbf";
  std::optional<double> beta0;
  std::optional<double> p;
  std::optional<double> beta;
  Index k_inner = 10;
  std::optional<Index> max_iter;
  double tol = 1e-4;
  double stall_tol = 1e-8;
  std::string out = "out";
  std::uint64_t seed = 0;
  bool timing = false;
  std::optional<double> step;
  double cert_tol = 1e-4;
  std::optional<double> xi;
  Index hours = 24;
  bool pretty = false;
};

void common_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--config", cfg.config, "Game, scenario or network JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", cfg.seed, "Seed for every randomized probe");
  cmd->add_option("--out", cfg.out, "Output directory");
}

void algo_flag(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--algo", cfg.algo, "Splitting operator")->check(CLI::IsMember({"fbf", "pfb"}));
}

struct Clock {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

fs::path out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.out);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
  return f;
}

void write_json(const fs::path& path, const Json& j) { open_out(path) << j.dump(2) << '\n'; }

Json json_or_null(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json oracle_json(const OracleSolution& o) {
  return {{"method", o.method}, {"x", vector_json(o.x)},   {"lambda", vector_json(o.lambda)},
          {"omega", vector_json(o.omega)}, {"kkt", o.kkt}, {"vi", o.vi}};
}

/// Tries the oracle families in turn; `why` collects the refusals.
std::optional<OracleSolution> try_oracle(const GameSpec& g, std::string* why) {
  try {
    return oracle_projection_game(g);
  } catch (const Error& e) {
    if (why) *why = std::string("projection: ") + e.what();
  }
  try {
    return oracle_unique_vgne(g);
  } catch (const Error& e) {
    if (why) *why += std::string("; unique v-GNE: ") + e.what();
  }
  return std::nullopt;
}

std::unique_ptr<FixedPointOperator> make_operator(const GameSpec& g, const RunConfig& cfg) {
  const SplitMode mode = parse_mode(cfg.algo);
  if (mode == SplitMode::Fbf) {
    if (!cfg.step) return std::make_unique<FbfOperator>(g);
    const auto lip = estimate_lipschitz(g);
    return std::make_unique<FbfOperator>(g, StepSizes::uniform(g.size(), *cfg.step, mode), lip);
  }
  if (!cfg.step) return std::make_unique<PfbOperator>(g);
  if (!g.affine()) throw Error(ErrorKind::NotAffine, "pFB requires affine coupling constraints");
  StepSizes s = make_stepsizes(g, LipschitzEstimate{}, mode);
  s.rho.setConstant(*cfg.step);
  s.tau.setConstant(*cfg.step);
  s.sigma.setConstant(*cfg.step);
  return std::make_unique<PfbOperator>(g, s);
}

BetaSchedule schedule_for(const SelectionFunction& phi, const RunConfig& cfg) {
  if (cfg.beta) return BetaSchedule::constant(*cfg.beta);
  const double b0 = cfg.beta0 ? *cfg.beta0 : (phi.lipschitz() > 0.0 ? 1.0 / phi.lipschitz() : 0.0);
  return BetaSchedule::power(b0, cfg.p.value_or(1.0));
}

int cmd_solve(const RunConfig& cfg) {
  const GameSpec g = load_game(cfg.config, cfg.seed);
  auto op = make_operator(g, cfg);
  StopCriteria stop;
  stop.max_iter = cfg.max_iter.value_or(100000);
  stop.residual_tol = cfg.tol;
  stop.stall_tol = cfg.stall_tol;
  const Clock clock;
  const auto res = hsdm_solve(*op, g.selection, g.initial_state(), schedule_for(g.selection, cfg), stop, &g);
  const double secs = clock.seconds();

  const fs::path dir = out_dir(cfg);
  {
    auto f = open_out(dir / "trace.csv");
    res.trace.write_csv(f, cfg.seed, cfg.timing);
  }
  const Layout& l = g.layout();
  write_json(dir / "final_state.json",
             {{"seed", cfg.seed}, {"omega", vector_json(res.omega)}, {"anchor", vector_json(res.anchor)},
              {"x", vector_json(x_part(res.anchor, l))}});

  Json report = {{"seed", cfg.seed},
                 {"algo", op->name()},
                 {"converged", res.converged},
                 {"iterations", res.iterations},
                 {"residual", op->residual(res.omega)},
                 {"phi", g.selection.value(res.anchor)},
                 {"kkt", kkt_residual(g, x_part(res.anchor, l), mean_dual(res.anchor, l).cwiseMax(0.0))},
                 {"warnings", res.trace.warnings}};
  if (cfg.timing) report["seconds"] = secs;
  std::string why;
  if (auto o = try_oracle(g, &why)) {
    const auto cert = certify_selection(g, res.anchor, o->omega, cfg.cert_tol);
    report["certification"] = {{"status", cert.pass ? "pass" : "fail"},
                               {"oracle", o->method},
                               {"tol", cfg.cert_tol},
                               {"x_distance", cert.x_distance},
                               {"state_distance", cert.state_distance},
                               {"phi_gap", cert.phi_gap},
                               {"kkt", cert.kkt}};
  } else {
    report["certification"] = {{"status", "unavailable"}, {"reason", why}};
  }
  write_json(dir / "report.json", report);
  std::cout << report.dump(cfg.pretty ? 2 : -1) << '\n';
  return res.converged ? kConverged : kMaxIter;
}

int cmd_track(const RunConfig& cfg) {
  if (!cfg.beta) throw Error(ErrorKind::BetaOutOfRange, "track needs --beta");
  const auto seq = GameSequence::load(cfg.config, cfg.seed);
  TrackingOptions opts;
  opts.mode = parse_mode(cfg.algo);
  opts.xi = cfg.xi;
  std::vector<Vec> oracle;
  for (Index t = 0; t < seq.length(); ++t) {
    auto o = try_oracle(seq.at(t), nullptr);
    if (!o) {
      oracle.clear();
      break;
    }
    oracle.push_back(o->omega);
  }
  opts.oracle = oracle;
  const Clock clock;
  const auto res = restarted_hsdm(seq, *cfg.beta, cfg.k_inner, seq.at(0).initial_state(), opts);
  const fs::path dir = out_dir(cfg);
  {
    auto f = open_out(dir / "tracking.csv");
    res.report.write_csv(f, cfg.seed);
  }
  Json report = res.report.to_json();
  report["seed"] = cfg.seed;
  report["oracle"] = !oracle.empty();
  if (cfg.timing) report["seconds"] = clock.seconds();
  write_json(dir / "report.json", report);
  std::cout << report.dump(cfg.pretty ? 2 : -1) << '\n';
  return kConverged;
}

Json check(bool ok, Json detail) {
  detail["status"] = ok ? "PASS" : "FAIL";
  return detail;
}

int cmd_validate(const RunConfig& cfg) {
  const GameSpec g = load_game(cfg.config, cfg.seed, false);
  const AssumptionReport& rep = g.report();
  const Layout& l = g.layout();
  Json out;
  out["seed"] = cfg.seed;
  out["agents"] = g.size();
  out["primal_dim"] = l.primal();
  out["coupling_rows"] = g.m;
  out["state_dim"] = l.size();

  Json checks;
  checks["graph"] = check(rep.connected, {{"algebraic_connectivity", rep.algebraic_connectivity}});
  Json mono = {{"margin", rep.monotonicity_margin}, {"method", rep.monotonicity_method}};
  if (rep.monotonicity_witness) {
    mono["witness"] = {vector_json(rep.monotonicity_witness->first), vector_json(rep.monotonicity_witness->second)};
  }
  checks["monotonicity"] = check(rep.monotone, mono);
  checks["slater"] = check(!rep.slater_supplied || rep.slater_ok, {{"supplied", rep.slater_supplied}});

  const auto lip = estimate_lipschitz(g);
  out["lipschitz"] = {{"lf", lip.lf}, {"lb", lip.lb}, {"method", lip.method},
                      {"lambda_bound", lip.lambda_bound}};
  try {
    const StepSizes fbf = make_stepsizes(g, lip, SplitMode::Fbf);
    check_stepsizes(g, fbf, lip);
    checks["fbf_steps"] = check(true, {{"max_step", fbf.max_step()},
                                       {"bound", 1.0 / lip.lb},
                                       {"margin", 1.0 / lip.lb - fbf.max_step()},
                                       {"psi_inverse_weights", vector_json(fbf.inverse_weights(l))}});
  } catch (const Error& e) {
    checks["fbf_steps"] = check(false, {{"error", to_string(e.kind())}, {"message", e.what()}});
  }
  if (g.affine()) {
    Json pfb = {{"cocoercivity", json_or_null(rep.cocoercivity)}};
    try {
      const StepSizes s = make_stepsizes(g, lip, SplitMode::Pfb);
      check_stepsizes(g, s, lip);
      pfb["delta"] = s.delta;
      pfb["delta_lower_bound"] = pfb_delta_lower_bound(g);
      pfb["rho"] = vector_json(s.rho);
      pfb["tau"] = vector_json(s.tau);
      pfb["sigma"] = vector_json(s.sigma);
      checks["pfb_steps"] = check(rep.cocoercivity.has_value(), pfb);
    } catch (const Error& e) {
      pfb["error"] = to_string(e.kind());
      pfb["message"] = e.what();
      checks["pfb_steps"] = check(false, pfb);
    }
  } else {
    checks["pfb_steps"] = {{"status", "N/A"}, {"message", "coupling is not affine; pfb unavailable"}};
  }

  const SelectionFunction& phi = g.selection;
  Rng rng(cfg.seed);
  const double grad_err = selection_gradient_check(phi, rng);
  checks["selection_gradient"] = check(grad_err <= 1e-4, {{"max_relative_error", grad_err}});
  checks["selection_moduli"] = check(phi.lipschitz() > 0.0 && phi.sigma() >= 0.0 &&
                                         phi.sigma() <= phi.lipschitz() * (1.0 + 1e-12),
                                     {{"sigma", phi.sigma()}, {"lipschitz", phi.lipschitz()},
                                      {"strongly_convex", phi.sigma() > 0.0}, {"declared", phi.declared()}});
  const double p = cfg.p.value_or(1.0);
  const bool p_ok = p > 0.5 && p <= 1.0;
  Json sched = {{"p", p}};
  if (!p_ok) sched["message"] = "p must lie in (1/2, 1]";
  checks["schedule"] = check(p_ok, sched);
  out["checks"] = checks;
  out["warnings"] = rep.warnings;
  bool all = true;
  for (const auto& [name, c] : checks.items()) all = all && c.at("status") != "FAIL";
  out["all_pass"] = all;

  const fs::path dir = out_dir(cfg);
  write_json(dir / "validate.json", out);
  std::cout << out.dump(cfg.pretty ? 2 : -1) << '\n';
  return kConverged;
}

int cmd_oracle(const RunConfig& cfg) {
  const GameSpec g = load_game(cfg.config, cfg.seed);
  std::string why;
  const auto o = try_oracle(g, &why);
  if (!o) throw Error(ErrorKind::OracleUnavailable, "no oracle family applies (" + why + ")");
  Json j = oracle_json(*o);
  j["seed"] = cfg.seed;
  write_json(out_dir(cfg) / "oracle.json", j);
  std::cout << j.dump(cfg.pretty ? 2 : -1) << '\n';
  return kConverged;
}

Json dims_json(const MarketGame& g) {
  Json per_bus = Json::array();
  for (Index i = 0; i < g.spec->size(); ++i) per_bus.push_back(g.layout.dim(i));
  return {{"hours", g.layout.hours()},
          {"dt", g.dt},
          {"n", g.spec->layout().primal()},
          {"m", g.spec->m},
          {"reciprocity", g.counts.reciprocity},
          {"power_flow", g.counts.power_flow},
          {"line_limits", g.counts.line_limits},
          {"storage", g.counts.storage},
          {"state", g.spec->layout().size()},
          {"per_bus", per_bus}};
}

int cmd_market(const RunConfig& cfg) {
  const BusNetwork net = BusNetwork::load(cfg.config);
  const double beta = cfg.beta.value_or(5e-4);
  const Clock clock;
  const MarketGame da = build_day_ahead(net, cfg.hours);
  const GameSpec& g = *da.spec;
  FbfOperator op(g);
  StopCriteria stop;
  stop.max_iter = cfg.max_iter.value_or(8000);
  stop.residual_tol = cfg.tol;
  stop.stall_tol = cfg.stall_tol;
  const double b0 = cfg.beta0.value_or(1.0 / g.selection.lipschitz());
  const auto schedule = BetaSchedule::power(b0, cfg.p.value_or(0.51));
  const auto sol = hsdm_solve(op, g.selection, g.initial_state(), schedule, stop, &g, false);
  const double t_da = clock.seconds();

  const DayAheadPlan plan = plan_from_solution(net, da, sol.omega);
  const RealTimeScenario sc = build_real_time(net, plan, 8, 12, cfg.seed);
  const GameSpec& g1 = *sc.steps[0].spec;
  FbfOperator op1(g1);
  StopCriteria warm;
  warm.max_iter = std::min<Index>(stop.max_iter, 5000);
  warm.residual_tol = cfg.tol;
  const Vec w1 = hsdm_solve(op1, g1.selection, g1.initial_state(), BetaSchedule::constant(0.0), warm,
                            nullptr, false).omega;
  TrackingOptions opts;
  opts.xi = cfg.xi;
  const auto res = restarted_hsdm(sc.sequence, beta, cfg.k_inner, w1, opts);
  const double t_total = clock.seconds();

  const fs::path dir = out_dir(cfg);
  {
    auto f = open_out(dir / "day_ahead_flows.csv");
    write_line_flows(f, net, line_flows(net, da, sol.omega), cfg.seed);
  }
  const Index slots = sc.steps[0].layout.hours();
  Mat flows(static_cast<Index>(net.lines.size()), slots * static_cast<Index>(sc.steps.size()));
  for (size_t t = 0; t < sc.steps.size(); ++t) {
    flows.middleCols(static_cast<Index>(t) * slots, slots) = line_flows(net, sc.steps[t], res.states[t + 1]);
  }
  {
    auto f = open_out(dir / "line_flows.csv");
    write_line_flows(f, net, flows, cfg.seed, 0.0, sc.steps[0].dt);
  }
  {
    auto f = open_out(dir / "tracking.csv");
    res.report.write_csv(f, cfg.seed);
  }
  write_json(dir / "dimensions.json", {{"day_ahead", dims_json(da)}, {"real_time", dims_json(sc.steps[0])}});

  Json report = {{"seed", cfg.seed},
                 {"day_ahead",
                  {{"iterations", sol.iterations},
                   {"residual", op.residual(sol.omega)},
                   {"flow_energy", flow_energy(net, da, sol.omega)},
                   {"phi", g.selection.value(sol.anchor)}}},
                 {"real_time", res.report.to_json()}};
  if (cfg.timing) report["seconds"] = {{"day_ahead", t_da}, {"total", t_total}};
  write_json(dir / "report.json", report);
  report.erase("real_time");
  report["real_time"] = {{"steps", sc.steps.size()}, {"beta", beta}, {"K", cfg.k_inner}};
  std::cout << report.dump(cfg.pretty ? 2 : -1) << '\n';
  return kConverged;
}

int fail(const char* kind, const std::string& message) {
  std::cout << Json{{"error", kind}, {"message", message}}.dump() << '\n';
  return kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal v-GNE selection and tracking"};
  app.require_subcommand(1);
  RunConfig cfg;
  auto* solve = app.add_subcommand("solve", "Run the HSDM-hybridized FBF/pFB solver");
  auto* track = app.add_subcommand("track", "Restarted HSDM on a time-varying scenario");
  auto* validate = app.add_subcommand("validate", "Checklist of game properties and step-size diagnostics");
  auto* oracle = app.add_subcommand("oracle", "Reference solution for oracle families");
  auto* market = app.add_subcommand("market", "Day-ahead clearing then real-time tracking on a bus network");
  for (auto* cmd : {solve, track, validate, oracle, market}) {
    common_flags(cmd, cfg);
    cmd->add_flag("--pretty", cfg.pretty, "Indent JSON on stdout");
  }
  for (auto* cmd : {solve, track}) algo_flag(cmd, cfg);
  for (auto* cmd : {solve, validate, market}) {
    cmd->add_option("--beta0", cfg.beta0, "Schedule scale (default 1/L_phi)");
    cmd->add_option("--p", cfg.p, "Schedule exponent (solve 1, market 0.51)");
  }
  for (auto* cmd : {solve, market}) {
    cmd->add_option("--max-iter", cfg.max_iter, "Iteration cap (solve 100000, market 8000)");
    cmd->add_option("--tol", cfg.tol, "Residual tolerance");
    cmd->add_option("--stall-tol", cfg.stall_tol, "Largest phi decrease over 100 iterations at convergence");
  }
  for (auto* cmd : {solve, track, market}) {
    cmd->add_option("--beta", cfg.beta, "Constant step of the selection descent");
    cmd->add_flag("--timing", cfg.timing, "Record wall-clock times");
  }
  for (auto* cmd : {track, market}) {
    cmd->add_option("--K", cfg.k_inner, "Inner iterations per step")->check(CLI::PositiveNumber);
    cmd->add_option("--xi", cfg.xi, "Shrinkage level for the tracking bound");
  }
  solve->add_option("--step", cfg.step, "Override every step size");
  solve->add_option("--cert-tol", cfg.cert_tol, "Certification tolerance");
  market->add_option("--hours", cfg.hours, "Day-ahead horizon");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("InvalidArgument", e.what());
  }

  try {
    if (*solve) return cmd_solve(cfg);
    if (*track) return cmd_track(cfg);
    if (*validate) return cmd_validate(cfg);
    if (*oracle) return cmd_oracle(cfg);
    if (*market) return cmd_market(cfg);
  } catch (const Error& e) {
    return fail(to_string(e.kind()), e.what());
  } catch (const Json::exception& e) {
    return fail("Parse", e.what());
  } catch (const std::exception& e) {
    return fail("InvalidArgument", e.what());
  }
  return kFailure;
}
