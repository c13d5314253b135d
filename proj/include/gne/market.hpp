#pragma once

#include "gne/online.hpp"

#include <memory>
#include <string>
#include <vector>

namespace gne {

struct Bus {
  std::string id;
  bool mg = false;
  Vec gen_max;  // per hour, zeros when the bus has no generator
  double gen_cost = 0.0;
  bool storage = false;
  double st_pmax = 0.0;
  double e_max = 0.0;
  double e_min = 0.0;
  double e0 = 0.0;
  Vec demand;  // per hour
};

struct Line {
  Index from = 0;
  Index to = 0;
  double b = 0.0;
  double limit = 0.0;
};

struct MarketConfig {
  double d_mg = 0.5;     // main-grid price slope on the aggregate draw
  Vec c_mg;              // per-hour base price
  double c_tr = 0.02;    // trading fee
  double mg_max = 2.0;
  double tr_max = 1.0;
  double theta_max = 1.5;
  double q_d = 0.1, q_mg = 0.1, q_theta = 0.05, q_tr = 0.05, q_st = 0.05;
  double q_lambda = 0.01, q_nu = 0.01;
  double q_pf_base = 1e-4, q_pf_peak = 5e-3;
  Index penalized_line = -1;  // index into lines; -1 means every line at base weight
  double peak_start = 6.0, peak_end = 16.0;  // hours
};

/// Buses are the agents; lines carry susceptances and limits.
struct BusNetwork {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<std::pair<Index, Index>> trading;
  MarketConfig cfg;

  Index size() const { return static_cast<Index>(buses.size()); }
  Index hours() const;
  /// Trading partners of bus i, sorted.
  std::vector<Index> partners(Index i) const;
  /// Throws IslandedBus when the electric graph is not connected.
  void validate() const;

  static BusNetwork from_json(const Json& doc);
  static BusNetwork load(const std::string& path);
};

/// x_{i,h} = (p^g, p^mg, p^st, {p^tr_(i,j)}, θ), stacked over hours.
class MarketLayout {
 public:
  enum Var { Gen = 0, Grid = 1, Storage = 2 };

  MarketLayout() = default;
  MarketLayout(const BusNetwork& net, Index hours);

  Index hours() const { return hours_; }
  Index per_hour(Index i) const { return 4 + static_cast<Index>(partners_[static_cast<size_t>(i)].size()); }
  Index dim(Index i) const { return hours_ * per_hour(i); }
  Index var(Index i, Index h, Var v) const { return h * per_hour(i) + v; }
  Index trade(Index i, Index h, Index k) const { return h * per_hour(i) + 3 + k; }  // k-th partner
  Index theta(Index i, Index h) const { return h * per_hour(i) + per_hour(i) - 1; }
  const std::vector<Index>& partners(Index i) const { return partners_[static_cast<size_t>(i)]; }
  Index partner_slot(Index i, Index j) const;

 private:
  Index hours_ = 0;
  std::vector<std::vector<Index>> partners_;
};

struct ConstraintCounts {
  Index reciprocity = 0;
  Index power_flow = 0;
  Index line_limits = 0;
  Index storage = 0;
  Index total() const { return reciprocity + power_flow + line_limits + storage; }
};

struct MarketGame {
  std::shared_ptr<GameSpec> spec;
  MarketLayout layout;
  ConstraintCounts counts;
  Vec q_pf;  // lines × hours, flattened line-major
  double dt = 1.0;
  Index first_hour = 0;
};

/// Day-ahead clearing over the first H hours of the profiles.
MarketGame build_day_ahead(const BusNetwork& net, Index hours);

/// Planned storage charge per bus at each hour boundary (hours+1 columns).
struct DayAheadPlan {
  Mat soc;  // buses × (hours + 1); rows of non-storage buses unused
};

DayAheadPlan plan_from_solution(const BusNetwork& net, const MarketGame& day_ahead, const Vec& w);

struct RealTimeScenario {
  GameSequence sequence;
  std::vector<MarketGame> steps;
  std::vector<bool> peak;
};

/// `steps` windows of H quarter-hour slots each, with storage-deviation
/// costs against the plan and a peak-window Q_pf on the penalized line.
RealTimeScenario build_real_time(const BusNetwork& net, const DayAheadPlan& plan, Index hours = 8,
                                 Index steps = 12, std::uint64_t seed = 0);

/// B_ij(θ_i − θ_j) per line and hour (lines × hours).
Mat line_flows(const BusNetwork& net, const MarketGame& game, const Vec& w);
/// Σ_h Σ_l Q_pf(l,h) flow(l,h)².
double flow_energy(const BusNetwork& net, const MarketGame& game, const Vec& w);
/// `line,hour,flow` rows with a seed comment line.
void write_line_flows(std::ostream& out, const BusNetwork& net, const Mat& flows,
                      std::uint64_t seed, double hour_offset = 0.0, double dt = 1.0);

}  // namespace gne
