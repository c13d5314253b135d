#pragma once

#include "gne/operators.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gne {

/// β_k = β₀/k^p (power) or β (constant).
class BetaSchedule {
 public:
  enum class Kind { Power, Constant };

  /// Rejects p outside (1/2, 1] and negative β₀.
  static BetaSchedule power(double beta0, double p);
  static BetaSchedule constant(double beta);

  Kind kind() const { return kind_; }
  double beta0() const { return beta0_; }
  double p() const { return p_; }
  /// k ≥ 1.
  double operator()(Index k) const;

 private:
  Kind kind_ = Kind::Constant;
  double beta0_ = 0.0;
  double p_ = 1.0;
};

struct TraceRecord {
  Index k = 0;
  double residual = 0.0;
  double phi = 0.0;
  double coupling_viol = 0.0;
  double dual_disagreement = 0.0;
  double beta = 0.0;
  double wall_ms = 0.0;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  std::vector<std::string> warnings;

  /// `# seed=N` line, header, one row per iteration, 17 significant digits.
  /// wall_ms is written as 0 unless `timing` is set.
  void write_csv(std::ostream& out, std::uint64_t seed, bool timing = false) const;
};

struct StopCriteria {
  Index max_iter = 100000;
  double residual_tol = 1e-8;
  double stall_tol = 1e-10;
  Index stall_window = 100;
};

struct HsdmResult {
  Vec omega;
  Vec anchor;  // last T(ω), before the gradient step
  RunTrace trace;
  bool converged = false;
  Index iterations = 0;
};

/// ω⁺ = T(ω) − β_k ∇φ(T(ω)). `game` (optional) feeds the coupling-violation
/// column of the trace.
HsdmResult hsdm_solve(FixedPointOperator& op, const SelectionFunction& phi, const Vec& w0,
                      const BetaSchedule& schedule, const StopCriteria& stop,
                      const GameSpec* game = nullptr, bool record = true);

/// Banach–Picard iteration ω⁺ = T(ω) until the residual drops below tol.
Vec picard(const FixedPointOperator& op, const Vec& w0, double tol, Index max_iter,
           Index* iterations = nullptr);

struct SelectionCertificate {
  double x_distance = 0.0;
  double state_distance = 0.0;
  double phi_gap = 0.0;
  double kkt = 0.0;
  bool pass = false;
};

/// Compares a solver output with an oracle solution (x-parts, φ, KKT).
SelectionCertificate certify_selection(const GameSpec& game, const Vec& w_final,
                                       const Vec& w_oracle, double tol);

/// min over samples s of ⟨s − ω, ∇φ(ω)⟩.
double selection_vi_residual(const SelectionFunction& phi, const Vec& w,
                             const std::vector<Vec>& samples);

struct ShrinkageRow {
  double r = 0.0;
  double d_hat = 0.0;
  Index count = 0;
};

struct ShrinkageOptions {
  Vec center;
  double radius = 1.0;
  std::vector<double> r_grid;
  int samples = 1000;
  int neighbors = 3;
  std::uint64_t seed = 0;
  /// Exact distance to fix(T) in the operator norm, when known.
  std::function<double(const Vec&)> distance;
};

/// Empirical shrinkage function D̂(r) over a ball; throws EmptySlice.
std::vector<ShrinkageRow> shrinkage_probe(const FixedPointOperator& op,
                                          const std::vector<Vec>& fix_sample,
                                          const ShrinkageOptions& opts);

/// %.17g formatting used by all CSV writers.
std::string format_double(double v);

}  // namespace gne
