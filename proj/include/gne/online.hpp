#pragma once

#include "gne/hsdm.hpp"
#include "gne/game_io.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gne {

/// Time-varying game: a family of validated instances and a schedule t ↦ family index.
class GameSequence {
 public:
  using Instance = std::shared_ptr<const GameSpec>;

  GameSequence() = default;
  /// Arbitrary per-t games (quasi-shrinking uniformity unchecked).
  explicit GameSequence(std::vector<Instance> per_step);
  /// Finite family with t ↦ schedule[t].
  GameSequence(std::vector<Instance> family, std::vector<Index> schedule);

  /// Scenario document: base spec plus `timeline: [{t, patch}]` (merge-patch,
  /// patches accumulate), or `family: [patch...]` with `schedule: [idx...]`.
  static GameSequence from_json(const Json& doc, std::uint64_t seed = 0);
  static GameSequence load(const std::string& path, std::uint64_t seed = 0);

  Index length() const { return static_cast<Index>(schedule_.size()); }
  const GameSpec& at(Index t) const;  // 0-based
  Index family_index(Index t) const { return schedule_.at(static_cast<size_t>(t)); }
  const std::vector<Instance>& family() const { return family_; }
  bool finite_family() const { return finite_; }
  bool all_affine() const;

  std::optional<double> delta1;
  std::optional<double> delta2;

 private:
  std::vector<Instance> family_;
  std::vector<Index> schedule_;
  bool finite_ = false;
};

/// τ(β) = 1 − √(1 − β(2σ − βL_φ²)); β must lie in (0, 2σ/L_φ²).
double tau_beta(double beta, double sigma, double lphi);
/// γ = (β/τ(β))·U·(6ξ + 11βU).
double tracking_gamma(double beta, double tau, double u, double xi);
/// (γ + δ₁²)/(1/2 − α); throws AlphaTooLarge when α ≥ 1/2.
double tracking_bound(double gamma, double delta1, double alpha);

struct TrackingRow {
  Index t = 0;
  double err_in = NAN;   // ‖ω_t − ω⋆_t‖
  double err_out = NAN;  // ‖ω_{t+1} − ω⋆_t‖
  double residual = 0.0;
  double phi = 0.0;
  double dist_in = NAN;  // dist(ω_t, fix T_t) upper estimate
};

struct TrackingReport {
  std::vector<TrackingRow> rows;
  double beta = 0.0;
  Index k_inner = 0;
  double sigma = 0.0;
  double lphi = 0.0;
  double tau = 0.0;
  double alpha = 0.0;
  double u = 0.0;  // max ‖∇φ_t‖ met along the run
  std::optional<double> xi;
  std::optional<double> gamma;
  std::optional<double> delta1;
  std::optional<double> bound;
  std::optional<double> limsup;  // max ‖ω_t − ω⋆_t‖² over the last 25% of steps
  std::string operator_name;
  bool assumption_checked = false;
  std::vector<std::string> warnings;

  /// `t,err_vs_oracle,residual,phi,bound` with a seed comment line.
  void write_csv(std::ostream& out, std::uint64_t seed) const;
  Json to_json() const;
};

struct TrackingOptions {
  SplitMode mode = SplitMode::Fbf;
  /// ω⋆_t per step; enables the error columns.
  std::vector<Vec> oracle;
  /// Explicit ξ; otherwise derived from `shrinkage` or from `gamma_target`.
  std::optional<double> xi;
  /// Shrinkage function D(r) shared by all T_t (invertible by bisection).
  std::function<double(double)> shrinkage;
  /// ξ = γσ/(12U).
  std::optional<double> gamma_target;
  LipschitzOptions lipschitz;
};

struct TrackingResult {
  std::vector<Vec> states;  // ω_1 … ω_{T+1}
  TrackingReport report;
};

/// Restarted HSDM: K constant-β steps per t, warm-started.
TrackingResult restarted_hsdm(const GameSequence& seq, double beta, Index k_inner, const Vec& w1,
                              const TrackingOptions& opts = {});

/// δ̂₁ = max ‖ω⋆_{t+1} − ω⋆_t‖; δ̂₂ = max ‖ω⋆_t − Picard_{T_{t+1}}(ω⋆_t)‖.
std::pair<double, double> measure_variability(const GameSequence& seq,
                                              const std::vector<Vec>& oracle,
                                              SplitMode mode = SplitMode::Fbf,
                                              double picard_tol = 1e-11,
                                              Index picard_max = 1000000);

}  // namespace gne
