#include "gne/market.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>

namespace gne {

namespace {

[[noreturn]] void parse_fail(const std::string& msg) { throw Error(ErrorKind::Parse, msg); }

Vec profile(const Json& v, Index hours, const std::string& what) {
  if (v.is_number()) return Vec::Constant(std::max<Index>(hours, 1), v.get<double>());
  if (!v.is_array()) parse_fail(what + " must be a number or an array");
  return json_vector(v, what.c_str());
}

double num(const Json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) parse_fail(std::string("'") + key + "' must be a number");
  return obj.at(key).get<double>();
}

// One market window: H slots of length dt starting at `first_hour`.
struct Window {
  Index slots = 0;
  double dt = 1.0;
  double first_hour = 0.0;
  Vec soc_start;             // per bus
  std::optional<Vec> soc_target;  // per bus; enables the storage deviation cost
};

Index hour_of(const Window& win, Index q) {
  return static_cast<Index>(std::floor(win.first_hour + win.dt * static_cast<double>(q) + 1e-9));
}

bool peak_hour(const MarketConfig& cfg, double hour) {
  return hour >= cfg.peak_start - 1e-9 && hour < cfg.peak_end - 1e-9;
}

MarketGame build_window(const BusNetwork& net, const Window& win, std::uint64_t seed) {
  net.validate();
  const Index n_bus = net.size();
  const Index slots = win.slots;
  const MarketConfig& cfg = net.cfg;
  if (hour_of(win, slots - 1) >= net.hours()) {
    throw Error(ErrorKind::ProfileMismatch, "window runs past the end of the hourly profiles");
  }

  MarketGame out;
  out.layout = MarketLayout(net, slots);
  out.dt = win.dt;
  out.first_hour = static_cast<Index>(win.first_hour);
  const MarketLayout& ml = out.layout;

  // row bookkeeping
  Index row = 0;
  std::vector<std::vector<Triplet>> a(static_cast<size_t>(n_bus));
  std::vector<std::map<Index, double>> b(static_cast<size_t>(n_bus));
  auto put = [&](Index agent, Index r, Index col, double v) {
    a[static_cast<size_t>(agent)].emplace_back(r, col, v);
  };

  // p^tr_(i,j) + p^tr_(j,i) = 0
  for (Index i = 0; i < n_bus; ++i) {
    for (Index j : ml.partners(i)) {
      if (j < i) continue;
      const Index si = ml.partner_slot(i, j), sj = ml.partner_slot(j, i);
      for (Index q = 0; q < slots; ++q) {
        for (double sign : {1.0, -1.0}) {
          put(i, row, ml.trade(i, q, si), sign);
          put(j, row, ml.trade(j, q, sj), sign);
          ++row;
        }
      }
    }
  }
  out.counts.reciprocity = row;

  // injection = Σ_j B_ij (θ_i − θ_j)
  std::vector<std::vector<std::pair<Index, double>>> adj(static_cast<size_t>(n_bus));
  for (const auto& ln : net.lines) {
    adj[static_cast<size_t>(ln.from)].emplace_back(ln.to, ln.b);
    adj[static_cast<size_t>(ln.to)].emplace_back(ln.from, ln.b);
  }
  const Index pf_start = row;
  for (Index i = 0; i < n_bus; ++i) {
    const Bus& bus = net.buses[static_cast<size_t>(i)];
    for (Index q = 0; q < slots; ++q) {
      const double d = bus.demand[hour_of(win, q)];
      for (double sign : {1.0, -1.0}) {
        put(i, row, ml.var(i, q, MarketLayout::Gen), sign);
        put(i, row, ml.var(i, q, MarketLayout::Storage), sign);
        if (bus.mg) {
          for (Index k = 0; k < n_bus; ++k) put(k, row, ml.var(k, q, MarketLayout::Grid), sign);
        }
        double diag = 0.0;
        for (const auto& [j, bij] : adj[static_cast<size_t>(i)]) {
          diag += bij;
          put(j, row, ml.theta(j, q), sign * bij);
        }
        put(i, row, ml.theta(i, q), -sign * diag);
        b[static_cast<size_t>(i)][row] += sign * d;
        ++row;
      }
    }
  }
  out.counts.power_flow = row - pf_start;

  // |B_ij (θ_i − θ_j)| ≤ limit
  const Index lim_start = row;
  for (const auto& ln : net.lines) {
    for (Index q = 0; q < slots; ++q) {
      for (double sign : {1.0, -1.0}) {
        put(ln.from, row, ml.theta(ln.from, q), sign * ln.b);
        put(ln.to, row, ml.theta(ln.to, q), -sign * ln.b);
        b[static_cast<size_t>(ln.from)][row] += ln.limit;
        ++row;
      }
    }
  }
  out.counts.line_limits = row - lim_start;

  // e_min ≤ E_start − dt Σ_{q' ≤ q} p^st ≤ e_max
  const Index st_start = row;
  for (Index i = 0; i < n_bus; ++i) {
    const Bus& bus = net.buses[static_cast<size_t>(i)];
    if (!bus.storage) continue;
    const double e_start = win.soc_start[i];
    for (Index q = 0; q < slots; ++q) {
      for (Index p = 0; p <= q; ++p) put(i, row, ml.var(i, p, MarketLayout::Storage), win.dt);
      b[static_cast<size_t>(i)][row] += e_start - bus.e_min;
      ++row;
      for (Index p = 0; p <= q; ++p) put(i, row, ml.var(i, p, MarketLayout::Storage), -win.dt);
      b[static_cast<size_t>(i)][row] += bus.e_max - e_start;
      ++row;
    }
  }
  out.counts.storage = row - st_start;
  const Index m = row;

  auto spec = std::make_shared<GameSpec>();
  spec->m = m;
  std::set<std::pair<Index, Index>> edges;
  for (auto [i, j] : net.trading) edges.insert({std::min(i, j), std::max(i, j)});
  for (const auto& ln : net.lines) edges.insert({std::min(ln.from, ln.to), std::max(ln.from, ln.to)});
  spec->graph = CommGraph(n_bus, {edges.begin(), edges.end()});

  for (Index i = 0; i < n_bus; ++i) {
    const Bus& bus = net.buses[static_cast<size_t>(i)];
    const Index n = ml.dim(i);
    AgentSpec ag;
    ag.dim = n;

    Vec lo(n), hi(n);
    std::vector<BalanceRow> balance;
    for (Index q = 0; q < slots; ++q) {
      const Index h = hour_of(win, q);
      lo[ml.var(i, q, MarketLayout::Gen)] = 0.0;
      hi[ml.var(i, q, MarketLayout::Gen)] = bus.gen_max[h];
      lo[ml.var(i, q, MarketLayout::Grid)] = 0.0;
      hi[ml.var(i, q, MarketLayout::Grid)] = cfg.mg_max;
      lo[ml.var(i, q, MarketLayout::Storage)] = bus.storage ? -bus.st_pmax : 0.0;
      hi[ml.var(i, q, MarketLayout::Storage)] = bus.storage ? bus.st_pmax : 0.0;
      BalanceRow br;
      for (Index k = 0; k < ml.per_hour(i) - 1; ++k) br.idx.push_back(q * ml.per_hour(i) + k);
      for (Index k = 0; k < static_cast<Index>(ml.partners(i).size()); ++k) {
        lo[ml.trade(i, q, k)] = -cfg.tr_max;
        hi[ml.trade(i, q, k)] = cfg.tr_max;
      }
      lo[ml.theta(i, q)] = -cfg.theta_max;
      hi[ml.theta(i, q)] = cfg.theta_max;
      br.coef = Vec::Ones(static_cast<Index>(br.idx.size()));
      br.rhs = bus.demand[h];
      balance.push_back(std::move(br));
    }
    ag.set = LocalSet(Box{lo, hi}, std::move(balance));

    Vec c = Vec::Zero(n);
    std::vector<Triplet> own;
    for (Index q = 0; q < slots; ++q) {
      const Index h = hour_of(win, q);
      c[ml.var(i, q, MarketLayout::Gen)] = bus.gen_cost;
      c[ml.var(i, q, MarketLayout::Grid)] = cfg.c_mg[h];
      for (Index k = 0; k < static_cast<Index>(ml.partners(i).size()); ++k) {
        c[ml.trade(i, q, k)] = cfg.c_tr;
      }
      own.emplace_back(ml.var(i, q, MarketLayout::Grid), ml.var(i, q, MarketLayout::Grid),
                       2.0 * cfg.d_mg);
    }
    if (win.soc_target && bus.storage) {
      const double gap = win.soc_start[i] - (*win.soc_target)[i];
      for (Index q = 0; q < slots; ++q) {
        c[ml.var(i, q, MarketLayout::Storage)] = -2.0 * win.dt * gap;
        for (Index p = 0; p < slots; ++p) {
          own.emplace_back(ml.var(i, q, MarketLayout::Storage), ml.var(i, p, MarketLayout::Storage),
                           2.0 * win.dt * win.dt);
        }
      }
    }
    std::vector<CostBlock> blocks;
    for (Index j = 0; j < n_bus; ++j) {
      SpMat mij(n, ml.dim(j));
      if (j == i) {
        mij.setFromTriplets(own.begin(), own.end());
      } else {
        std::vector<Triplet> t;
        for (Index q = 0; q < slots; ++q) {
          t.emplace_back(ml.var(i, q, MarketLayout::Grid), ml.var(j, q, MarketLayout::Grid), cfg.d_mg);
        }
        mij.setFromTriplets(t.begin(), t.end());
      }
      blocks.push_back({j, std::move(mij)});
    }
    ag.cost = CostForm::quadratic(std::move(blocks), c);

    SpMat ai(m, n);
    ai.setFromTriplets(a[static_cast<size_t>(i)].begin(), a[static_cast<size_t>(i)].end());
    Vec bi = Vec::Zero(m);
    for (const auto& [r, v] : b[static_cast<size_t>(i)]) bi[r] = v;
    ag.g = ConstraintForm::affine(std::move(ai), bi);
    spec->agents.push_back(std::move(ag));
  }

  // selection: prefer local generation, little grid draw, storage and trading,
  // phases near zero, and low flows on the weighted lines
  std::vector<Index> dims;
  for (Index i = 0; i < n_bus; ++i) dims.push_back(ml.dim(i));
  const Layout layout(dims, m);
  std::vector<Triplet> qt;
  std::vector<double> ref, wts;
  auto sel_row = [&](Index col, double coef, double r, double w) {
    qt.emplace_back(static_cast<Index>(ref.size()), col, coef);
    ref.push_back(r);
    wts.push_back(w);
  };
  for (Index i = 0; i < n_bus; ++i) {
    const Bus& bus = net.buses[static_cast<size_t>(i)];
    const Index off = layout.x_offset(i);
    for (Index q = 0; q < slots; ++q) {
      sel_row(off + ml.var(i, q, MarketLayout::Gen), 1.0, bus.gen_max[hour_of(win, q)], cfg.q_d);
      sel_row(off + ml.var(i, q, MarketLayout::Grid), 1.0, 0.0, cfg.q_mg);
      sel_row(off + ml.var(i, q, MarketLayout::Storage), 1.0, 0.0, cfg.q_st);
      for (Index k = 0; k < static_cast<Index>(ml.partners(i).size()); ++k) {
        sel_row(off + ml.trade(i, q, k), 1.0, 0.0, cfg.q_tr);
      }
      sel_row(off + ml.theta(i, q), 1.0, 0.0, cfg.q_theta);
    }
  }
  const Index n_lines = static_cast<Index>(net.lines.size());
  out.q_pf = Vec::Zero(n_lines * slots);
  for (Index l = 0; l < n_lines; ++l) {
    const Line& ln = net.lines[static_cast<size_t>(l)];
    for (Index q = 0; q < slots; ++q) {
      const double hour = win.first_hour + win.dt * static_cast<double>(q);
      const bool hot = (l == cfg.penalized_line) && peak_hour(cfg, hour);
      const double w = hot ? cfg.q_pf_peak : cfg.q_pf_base;
      out.q_pf[l * slots + q] = w;
      const Index r = static_cast<Index>(ref.size());
      qt.emplace_back(r, layout.x_offset(ln.from) + ml.theta(ln.from, q), ln.b);
      qt.emplace_back(r, layout.x_offset(ln.to) + ml.theta(ln.to, q), -ln.b);
      ref.push_back(0.0);
      wts.push_back(w);
    }
  }
  for (Index k = layout.primal(); k < layout.size(); ++k) {
    const bool is_lambda = k < layout.primal() + n_bus * m;
    sel_row(k, 1.0, 0.0, is_lambda ? cfg.q_lambda : cfg.q_nu);
  }
  SpMat qmat(static_cast<Index>(ref.size()), layout.size());
  qmat.setFromTriplets(qt.begin(), qt.end());
  spec->selection = SelectionFunction::quadratic(
      layout, std::move(qmat), Eigen::Map<Vec>(ref.data(), static_cast<Index>(ref.size())),
      Eigen::Map<Vec>(wts.data(), static_cast<Index>(wts.size())));

  spec->finalize(seed);
  out.spec = std::move(spec);
  return out;
}

}  // namespace

Index BusNetwork::hours() const {
  return buses.empty() ? 0 : buses.front().demand.size();
}

std::vector<Index> BusNetwork::partners(Index i) const {
  std::vector<Index> out;
  for (auto [a, b] : trading) {
    if (a == i) out.push_back(b);
    if (b == i) out.push_back(a);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void BusNetwork::validate() const {
  const Index n = size();
  if (n == 0) throw Error(ErrorKind::Validation, "network has no buses");
  const Index h = hours();
  for (const auto& bus : buses) {
    if (bus.demand.size() != h || bus.gen_max.size() != h) {
      throw Error(ErrorKind::ProfileMismatch,
                  "bus " + bus.id + ": demand and generation profiles must have " +
                      std::to_string(h) + " hours");
    }
  }
  if (cfg.c_mg.size() != h) {
    throw Error(ErrorKind::ProfileMismatch, "main-grid price profile must have " +
                                                std::to_string(h) + " hours");
  }
  // union-find over the electric lines
  std::vector<Index> parent(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) parent[static_cast<size_t>(i)] = i;
  std::function<Index(Index)> root = [&](Index i) {
    while (parent[static_cast<size_t>(i)] != i) i = parent[static_cast<size_t>(i)];
    return i;
  };
  for (const auto& ln : lines) {
    if (ln.from < 0 || ln.from >= n || ln.to < 0 || ln.to >= n || ln.from == ln.to) {
      throw Error(ErrorKind::Validation, "line references an unknown bus");
    }
    if (!(ln.b > 0.0) || !(ln.limit > 0.0)) {
      throw Error(ErrorKind::Validation, "line susceptance and limit must be positive");
    }
    parent[static_cast<size_t>(root(ln.from))] = root(ln.to);
  }
  for (Index i = 0; i < n; ++i) {
    if (root(i) != root(0)) {
      throw Error(ErrorKind::IslandedBus,
                  "bus " + buses[static_cast<size_t>(i)].id + " is not connected to bus " +
                      buses.front().id + " by any line path");
    }
  }
  if (std::none_of(buses.begin(), buses.end(), [](const Bus& b) { return b.mg; })) {
    throw Error(ErrorKind::Validation, "no bus is connected to the main grid");
  }
}

BusNetwork BusNetwork::from_json(const Json& doc) {
  if (!doc.is_object()) parse_fail("network document must be an object");
  if (!doc.contains("buses") || !doc.at("buses").is_array()) parse_fail("'buses' array missing");
  BusNetwork net;
  std::map<std::string, Index> ids;
  Index hours = 0;
  for (const auto& jb : doc.at("buses")) {
    if (!jb.is_object() || !jb.contains("id")) parse_fail("each bus needs an 'id'");
    Bus bus;
    bus.id = jb.at("id").is_string() ? jb.at("id").get<std::string>() : jb.at("id").dump();
    if (ids.count(bus.id)) parse_fail("duplicate bus id " + bus.id);
    bus.mg = jb.value("mg", false);
    if (!jb.contains("demand")) parse_fail("bus " + bus.id + " has no demand");
    bus.demand = profile(jb.at("demand"), 0, "demand of bus " + bus.id);
    if (hours == 0) hours = bus.demand.size();
    if (jb.contains("gen")) {
      const Json& g = jb.at("gen");
      bus.gen_max = profile(g.at("pmax"), hours, "gen.pmax of bus " + bus.id);
      bus.gen_cost = num(g, "cost", 0.0);
    } else {
      bus.gen_max = Vec::Zero(bus.demand.size());
    }
    if (jb.contains("storage")) {
      const Json& s = jb.at("storage");
      bus.storage = true;
      bus.st_pmax = num(s, "pmax", 0.0);
      bus.e_max = num(s, "emax", 0.0);
      bus.e_min = num(s, "emin", 0.0);
      bus.e0 = num(s, "e0", 0.5 * (bus.e_min + bus.e_max));
      if (bus.e_min > bus.e0 || bus.e0 > bus.e_max || bus.st_pmax < 0.0) {
        throw Error(ErrorKind::Validation, "bus " + bus.id + ": storage needs emin <= e0 <= emax");
      }
    }
    ids[bus.id] = static_cast<Index>(net.buses.size());
    net.buses.push_back(std::move(bus));
  }
  auto bus_index = [&](const Json& v) {
    const std::string key = v.is_string() ? v.get<std::string>() : v.dump();
    auto it = ids.find(key);
    if (it == ids.end()) parse_fail("unknown bus id " + key);
    return it->second;
  };
  if (doc.contains("lines")) {
    for (const auto& jl : doc.at("lines")) {
      Line ln;
      ln.from = bus_index(jl.at("from"));
      ln.to = bus_index(jl.at("to"));
      ln.b = num(jl, "b", 0.0);
      ln.limit = num(jl, "limit", 0.0);
      net.lines.push_back(ln);
    }
  }
  const Index n = net.size();
  if (doc.contains("trading") && doc.at("trading").is_string()) {
    if (doc.at("trading").get<std::string>() != "complete") parse_fail("trading must be 'complete' or a pair list");
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) net.trading.emplace_back(i, j);
    }
  } else if (doc.contains("trading")) {
    for (const auto& p : doc.at("trading")) {
      if (!p.is_array() || p.size() != 2) parse_fail("trading entries must be pairs");
      const Index i = bus_index(p[0]), j = bus_index(p[1]);
      if (i == j) parse_fail("a bus cannot trade with itself");
      net.trading.emplace_back(std::min(i, j), std::max(i, j));
    }
  }
  const Json cfgj = doc.value("config", Json::object());
  MarketConfig& c = net.cfg;
  c.d_mg = num(cfgj, "d_mg", c.d_mg);
  c.c_mg = cfgj.contains("c_mg") ? profile(cfgj.at("c_mg"), hours, "config.c_mg")
                                 : Vec::Constant(hours, 0.3);
  c.c_tr = num(cfgj, "c_tr", c.c_tr);
  c.mg_max = num(cfgj, "mg_max", c.mg_max);
  c.tr_max = num(cfgj, "tr_max", c.tr_max);
  c.theta_max = num(cfgj, "theta_max", c.theta_max);
  c.q_d = num(cfgj, "q_d", c.q_d);
  c.q_mg = num(cfgj, "q_mg", c.q_mg);
  c.q_theta = num(cfgj, "q_theta", c.q_theta);
  c.q_tr = num(cfgj, "q_tr", c.q_tr);
  c.q_st = num(cfgj, "q_st", c.q_st);
  c.q_lambda = num(cfgj, "q_lambda", c.q_lambda);
  c.q_nu = num(cfgj, "q_nu", c.q_nu);
  c.q_pf_base = num(cfgj, "q_pf_base", c.q_pf_base);
  c.q_pf_peak = num(cfgj, "q_pf_peak", c.q_pf_peak);
  if (cfgj.contains("peak_window")) {
    const Vec pw = json_vector(cfgj.at("peak_window"), "config.peak_window");
    if (pw.size() != 2) parse_fail("config.peak_window must be [start, end]");
    c.peak_start = pw[0];
    c.peak_end = pw[1];
  }
  if (cfgj.contains("penalized_line")) {
    const Json& pl = cfgj.at("penalized_line");
    if (!pl.is_array() || pl.size() != 2) parse_fail("config.penalized_line must be [from, to]");
    const Index f = bus_index(pl[0]), t = bus_index(pl[1]);
    for (size_t l = 0; l < net.lines.size(); ++l) {
      const Line& ln = net.lines[l];
      if ((ln.from == f && ln.to == t) || (ln.from == t && ln.to == f)) {
        c.penalized_line = static_cast<Index>(l);
      }
    }
    if (c.penalized_line < 0) parse_fail("config.penalized_line is not a line");
  }
  for (double w : {c.q_d, c.q_mg, c.q_theta, c.q_tr, c.q_st, c.q_lambda, c.q_nu, c.q_pf_base,
                   c.q_pf_peak}) {
    if (!(w > 0.0)) throw Error(ErrorKind::Validation, "selection weights must be positive");
  }
  net.validate();
  return net;
}

BusNetwork BusNetwork::load(const std::string& path) { return from_json(read_json(path)); }

MarketLayout::MarketLayout(const BusNetwork& net, Index hours) : hours_(hours) {
  for (Index i = 0; i < net.size(); ++i) partners_.push_back(net.partners(i));
}

Index MarketLayout::partner_slot(Index i, Index j) const {
  const auto& p = partners(i);
  auto it = std::lower_bound(p.begin(), p.end(), j);
  if (it == p.end() || *it != j) {
    throw Error(ErrorKind::InvalidArgument, "buses do not trade with each other");
  }
  return static_cast<Index>(it - p.begin());
}

MarketGame build_day_ahead(const BusNetwork& net, Index hours) {
  if (hours <= 0 || hours > net.hours()) {
    throw Error(ErrorKind::ProfileMismatch, "horizon " + std::to_string(hours) +
                                                " exceeds the " + std::to_string(net.hours()) +
                                                "-hour profiles");
  }
  Window win;
  win.slots = hours;
  win.dt = 1.0;
  win.soc_start = Vec::Zero(net.size());
  for (Index i = 0; i < net.size(); ++i) win.soc_start[i] = net.buses[static_cast<size_t>(i)].e0;
  return build_window(net, win, 0);
}

DayAheadPlan plan_from_solution(const BusNetwork& net, const MarketGame& day_ahead, const Vec& w) {
  const Layout& layout = day_ahead.spec->layout();
  require_size(w, layout.size(), "day-ahead state");
  const Index h = day_ahead.layout.hours();
  DayAheadPlan plan;
  plan.soc = Mat::Zero(net.size(), h + 1);
  for (Index i = 0; i < net.size(); ++i) {
    const Bus& bus = net.buses[static_cast<size_t>(i)];
    plan.soc(i, 0) = bus.e0;
    for (Index q = 0; q < h; ++q) {
      const double p = w[layout.x_offset(i) + day_ahead.layout.var(i, q, MarketLayout::Storage)];
      plan.soc(i, q + 1) = plan.soc(i, q) - day_ahead.dt * p;
      if (bus.storage) plan.soc(i, q + 1) = std::clamp(plan.soc(i, q + 1), bus.e_min, bus.e_max);
    }
  }
  return plan;
}

RealTimeScenario build_real_time(const BusNetwork& net, const DayAheadPlan& plan, Index hours,
                                 Index steps, std::uint64_t seed) {
  if (hours <= 0 || steps <= 0) throw Error(ErrorKind::InvalidArgument, "H and steps must be positive");
  const double dt = 0.25;
  const double span = dt * static_cast<double>(hours);
  const double end = span * static_cast<double>(steps);
  if (std::abs(span - std::round(span)) > 1e-12) {
    throw Error(ErrorKind::InvalidArgument, "H quarter-hours must cover whole hours");
  }
  if (end > static_cast<double>(net.hours()) + 1e-9) {
    throw Error(ErrorKind::ProfileMismatch, "real-time horizon runs past the hourly profiles");
  }
  if (plan.soc.rows() != net.size() || plan.soc.cols() < static_cast<Index>(end) + 1) {
    throw Error(ErrorKind::PlanMissing, "day-ahead plan does not cover every bus over " +
                                            std::to_string(static_cast<Index>(end)) + " hours");
  }
  RealTimeScenario sc;
  std::vector<GameSequence::Instance> family;
  std::vector<Index> schedule;
  for (Index t = 0; t < steps; ++t) {
    Window win;
    win.slots = hours;
    win.dt = dt;
    win.first_hour = span * static_cast<double>(t);
    const Index h0 = static_cast<Index>(std::lround(win.first_hour));
    const Index h1 = static_cast<Index>(std::lround(win.first_hour + span));
    win.soc_start = plan.soc.col(h0);
    win.soc_target = Vec(plan.soc.col(h1));
    MarketGame g = build_window(net, win, seed);
    bool hot = false;
    for (Index q = 0; q < hours; ++q) {
      hot = hot || peak_hour(net.cfg, win.first_hour + dt * static_cast<double>(q));
    }
    sc.peak.push_back(hot);
    family.push_back(g.spec);
    schedule.push_back(t);
    sc.steps.push_back(std::move(g));
  }
  sc.sequence = GameSequence(std::move(family), std::move(schedule));
  return sc;
}

Mat line_flows(const BusNetwork& net, const MarketGame& game, const Vec& w) {
  const Layout& layout = game.spec->layout();
  if (w.size() != layout.size() && w.size() != layout.primal()) {
    require_size(w, layout.size(), "market state");
  }
  const Index h = game.layout.hours();
  Mat out(static_cast<Index>(net.lines.size()), h);
  for (size_t l = 0; l < net.lines.size(); ++l) {
    const Line& ln = net.lines[l];
    for (Index q = 0; q < h; ++q) {
      const double ti = w[layout.x_offset(ln.from) + game.layout.theta(ln.from, q)];
      const double tj = w[layout.x_offset(ln.to) + game.layout.theta(ln.to, q)];
      out(static_cast<Index>(l), q) = ln.b * (ti - tj);
    }
  }
  return out;
}

double flow_energy(const BusNetwork& net, const MarketGame& game, const Vec& w) {
  const Mat f = line_flows(net, game, w);
  double e = 0.0;
  for (Index l = 0; l < f.rows(); ++l) {
    for (Index q = 0; q < f.cols(); ++q) e += game.q_pf[l * f.cols() + q] * f(l, q) * f(l, q);
  }
  return e;
}

void write_line_flows(std::ostream& out, const BusNetwork& net, const Mat& flows,
                      std::uint64_t seed, double hour_offset, double dt) {
  out << "# seed=" << seed << "\n";
  out << "line,hour,flow\n";
  for (Index l = 0; l < flows.rows(); ++l) {
    const Line& ln = net.lines[static_cast<size_t>(l)];
    const std::string name = net.buses[static_cast<size_t>(ln.from)].id + "-" +
                             net.buses[static_cast<size_t>(ln.to)].id;
    for (Index q = 0; q < flows.cols(); ++q) {
      out << name << "," << format_double(hour_offset + dt * static_cast<double>(q)) << ","
          << format_double(flows(l, q)) << "\n";
    }
  }
}

}  // namespace gne
