#pragma once

#include "gne/game.hpp"

#include <optional>
#include <string>

namespace gne {

enum class SplitMode { Fbf, Pfb };

const char* to_string(SplitMode mode);
SplitMode parse_mode(const std::string& name);

/// Per-agent step sizes; Ψ = diag(ρ⁻¹, τ⁻¹, σ⁻¹) expanded blockwise.
struct StepSizes {
  SplitMode mode = SplitMode::Fbf;
  Vec rho;
  Vec tau;
  Vec sigma;
  double delta = 0.0;  // pFB only

  static StepSizes uniform(Index agents, double value, SplitMode mode = SplitMode::Fbf);
  /// Ψ⁻¹ as a diagonal over the joint state.
  Vec inverse_weights(const Layout& layout) const;
  double max_step() const;
};

struct LipschitzEstimate {
  double lf = 0.0;
  double lb = 0.0;
  std::string method;  // exact-affine, power-iteration, jacobian-sampling, declared
  Vec grad_g_bound;    // b_{∇g_i}
  double lambda_bound = 0.0;
};

struct LipschitzOptions {
  std::optional<double> declared_lb;
  double lambda_bound = 10.0;
  Index dense_limit = 1200;
  int samples = 20;
  std::uint64_t seed = 0;
};

/// ℬ, 𝒞 and ℬ+𝒞 restricted to agent i's local block (x_i, λ_i, ν_i).
Vec b_block(const GameSpec& game, Index i, const BlockReader& reader);
Vec c_block(const GameSpec& game, Index i, const BlockReader& reader);
Vec bc_block(const GameSpec& game, Index i, const BlockReader& reader);

Vec apply_B(const GameSpec& game, const Vec& w);
Vec apply_C(const GameSpec& game, const Vec& w);
Vec apply_BC(const GameSpec& game, const Vec& w);

/// (Id + Ψ⁻¹𝒜)⁻¹ on agent i's local block.
Vec resolvent_block(const GameSpec& game, const StepSizes& steps, Index i, const Vec& local);
Vec resolvent_A(const GameSpec& game, const StepSizes& steps, const Vec& v);

/// Agent programs of one FBF iteration (the two local updates).
struct FbfStage1 {
  Vec tilde;  // local (x̃_i, λ̃_i, ν̃_i)
  Vec d;      // (ℬ+𝒞)_i(ω)
};
FbfStage1 fbf_stage1(const GameSpec& game, const StepSizes& steps, Index i,
                     const BlockReader& at_w);
Vec fbf_stage2(const GameSpec& game, const StepSizes& steps, Index i, const BlockReader& at_tilde,
               const FbfStage1& s1);

/// Agent programs of one pFB iteration (the two local updates).
struct PfbStage1 {
  Vec x_next;
  Vec nu_next;
  Vec nu_reflect;  // 2ν⁺_i − ν_i, sent in the ν-exchange
  Vec lap_lambda;  // Σ_j (λ_i − λ_j)
};
PfbStage1 pfb_stage1(const GameSpec& game, const StepSizes& steps, Index i,
                     const BlockReader& at_w);
/// `reflected` serves ν-blocks holding 2ν⁺_j − ν_j.
Vec pfb_stage2(const GameSpec& game, const StepSizes& steps, Index i, const BlockReader& at_w,
               const BlockReader& reflected, const PfbStage1& s1);

struct FbfResult {
  Vec out;
  Vec tilde;
};
FbfResult t_fbf(const GameSpec& game, const StepSizes& steps, const Vec& w);
Vec t_pfb(const GameSpec& game, const StepSizes& steps, const Vec& w);

double psi_norm(const Layout& layout, const StepSizes& steps, const Vec& v);
double phi_norm(const GameSpec& game, const StepSizes& steps, const Vec& v);

/// Linear part of ℬ+𝒞 for affine games (constants dropped).
SpMat bc_matrix(const GameSpec& game);
/// Φ as a sparse matrix (tests and diagnostics only).
SpMat phi_matrix(const GameSpec& game, const StepSizes& steps);
/// Largest singular value; dense below `dense_limit`, power iteration × 1.1 above.
double spectral_norm(const SpMat& a, Index dense_limit, bool* exact = nullptr,
                     std::uint64_t seed = 0);

LipschitzEstimate estimate_lipschitz(const GameSpec& game, const LipschitzOptions& opts = {});

/// pFB lower bound on δ: 1/min(η, 1/(2 max|N_i|)).
double pfb_delta_lower_bound(const GameSpec& game);
StepSizes make_stepsizes(const GameSpec& game, const LipschitzEstimate& lip, SplitMode mode,
                         std::optional<double> delta = std::nullopt);
/// Throws StepSizeViolation when a step bound fails.
void check_stepsizes(const GameSpec& game, const StepSizes& steps, const LipschitzEstimate& lip);

/// Fixed-point map with its metric.
class FixedPointOperator {
 public:
  virtual ~FixedPointOperator() = default;
  virtual Vec apply(const Vec& w) const = 0;
  virtual double norm(const Vec& v) const = 0;
  virtual const Layout& layout() const = 0;
  virtual std::string name() const = 0;
  /// Hook between iterations; returns a warning when the operator changed.
  virtual std::optional<std::string> adapt(const Vec&) { return std::nullopt; }

  double residual(const Vec& w) const { return norm(apply(w) - w); }
};

class FbfOperator final : public FixedPointOperator {
 public:
  FbfOperator(const GameSpec& game, StepSizes steps, LipschitzEstimate lip);
  /// Estimates L_B and uses 0.99/L_B.
  explicit FbfOperator(const GameSpec& game, const LipschitzOptions& opts = {});

  Vec apply(const Vec& w) const override { return t_fbf(*game_, steps_, w).out; }
  FbfResult apply_full(const Vec& w) const { return t_fbf(*game_, steps_, w); }
  double norm(const Vec& v) const override { return psi_norm(game_->layout(), steps_, v); }
  const Layout& layout() const override { return game_->layout(); }
  std::string name() const override { return "fbf"; }
  std::optional<std::string> adapt(const Vec& w) override;

  const GameSpec& game() const { return *game_; }
  const StepSizes& steps() const { return steps_; }
  const LipschitzEstimate& lipschitz() const { return lip_; }

 private:
  const GameSpec* game_;
  StepSizes steps_;
  LipschitzEstimate lip_;
  LipschitzOptions opts_;
};

class PfbOperator final : public FixedPointOperator {
 public:
  PfbOperator(const GameSpec& game, StepSizes steps);
  explicit PfbOperator(const GameSpec& game, std::optional<double> delta = std::nullopt);

  Vec apply(const Vec& w) const override { return t_pfb(*game_, steps_, w); }
  double norm(const Vec& v) const override { return phi_norm(*game_, steps_, v); }
  const Layout& layout() const override { return game_->layout(); }
  std::string name() const override { return "pfb"; }

  const GameSpec& game() const { return *game_; }
  const StepSizes& steps() const { return steps_; }

 private:
  const GameSpec* game_;
  StepSizes steps_;
};

/// Wraps an arbitrary map with a weighted Euclidean norm (unit weights by default).
class FunctionOperator final : public FixedPointOperator {
 public:
  using Map = std::function<Vec(const Vec&)>;
  FunctionOperator(Layout layout, Map map, Vec weights = Vec());

  Vec apply(const Vec& w) const override { return map_(w); }
  double norm(const Vec& v) const override;
  const Layout& layout() const override { return layout_; }
  std::string name() const override { return "function"; }

 private:
  Layout layout_;
  Map map_;
  Vec weights_;
};

}  // namespace gne
