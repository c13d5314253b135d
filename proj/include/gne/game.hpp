#pragma once

#include "gne/core.hpp"
#include "gne/graph.hpp"
#include "gne/selection.hpp"
#include "gne/sets.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gne {

/// Read access to other agents' blocks. Agent-side kernels only see the game
/// through this interface, so the same kernel runs on a monolithic state
/// and on mailbox contents.
class BlockReader {
 public:
  virtual ~BlockReader() = default;
  virtual Vec x(Index j) const = 0;
  virtual Vec lambda(Index j) const = 0;
  virtual Vec nu(Index j) const = 0;
};

/// Reads blocks straight out of a stacked vector (ω, or just x). With a
/// graph and an owner, reads outside the owner's neighborhood throw
/// LocalityViolation.
class StateReader final : public BlockReader {
 public:
  StateReader(const Vec& w, const Layout& layout) : w_(w), layout_(layout) {}
  StateReader(const Vec& w, const Layout& layout, const CommGraph& graph, Index owner)
      : w_(w), layout_(layout), graph_(&graph), owner_(owner) {}

  Vec x(Index j) const override;
  Vec lambda(Index j) const override;
  Vec nu(Index j) const override;

 private:
  const Vec& w_;
  const Layout& layout_;
  const CommGraph* graph_ = nullptr;
  Index owner_ = -1;

  void check(Index j, bool primal) const;
};

/// Cost row block F_i(x) = Σ_j M_ij x_j + c_i over j ∈ {i} ∪ N_i^J.
struct CostBlock {
  Index agent = 0;
  SpMat m;
};

struct CostForm {
  enum class Kind { Quadratic, Blackbox };
  using Gradient = std::function<Vec(Index i, const Vec& x_full)>;
  using Value = std::function<double(Index i, const Vec& x_full)>;

  Kind kind = Kind::Quadratic;
  std::vector<CostBlock> blocks;  // sorted by agent
  Vec c;
  // Blackbox: x_full holds zeros outside {i} ∪ deps.
  Gradient gradient;
  Value value;
  std::vector<Index> deps;

  static CostForm quadratic(std::vector<CostBlock> blocks, Vec c);
  static CostForm blackbox(Gradient gradient, Value value, std::vector<Index> deps);
};

/// Coupling contribution g_i: affine A x − b, or diagonal-quadratic with
/// g_k(x) = Σ_l ½ D_kl x_l² + a_kl x_l − b_k (D ≥ 0).
struct ConstraintForm {
  enum class Kind { Affine, Quad };

  Kind kind = Kind::Affine;
  SpMat a;  // affine: A (m × n_i); quad: linear part (m × n_i)
  SpMat d;  // quad only, entries ≥ 0
  Vec b;

  static ConstraintForm affine(SpMat a, Vec b);
  static ConstraintForm quad(SpMat d, SpMat a, Vec b);
  static ConstraintForm none(Index m, Index n);

  bool is_affine() const { return kind == Kind::Affine; }
  Vec value(const Vec& x) const;
  /// ∇g(x)ᵀ y.
  Vec jacobian_t(const Vec& x, const Vec& y) const;
  SpMat jacobian(const Vec& x) const;
};

struct AgentSpec {
  Index dim = 0;
  CostForm cost;
  ProxForm ell;
  LocalSet set;
  ConstraintForm g;
};

struct AssumptionReport {
  bool connected = false;
  double algebraic_connectivity = 0.0;
  bool monotone = false;
  double monotonicity_margin = 0.0;  // λ_min of sym(M), or min probe ratio
  std::string monotonicity_method;
  std::optional<std::pair<Vec, Vec>> monotonicity_witness;
  bool affine = true;
  std::optional<double> cocoercivity;  // η
  std::optional<double> lipschitz_f;   // L_F
  bool slater_supplied = false;
  bool slater_ok = false;
  std::vector<std::string> warnings;
};

class GameSpec {
 public:
  std::vector<AgentSpec> agents;
  CommGraph graph;
  Index m = 0;
  SelectionFunction selection;
  std::optional<Vec> slater_point;
  std::optional<double> declared_lf;
  std::optional<double> declared_eta;

  Index size() const { return static_cast<Index>(agents.size()); }
  const Layout& layout() const { return layout_; }
  const AssumptionReport& report() const { return report_; }
  bool affine() const;

  /// Builds the layout, cost-dependency sets, and runs every structural
  /// check; throws ValidationError. Must be called after assembly. With
  /// strict = false a failed monotonicity check is only reported.
  void finalize(std::uint64_t seed = 0, bool strict = true);

  /// Initial state: x at local interior points, λ = ν = 0.
  Vec initial_state() const;

 private:
  Layout layout_;
  AssumptionReport report_;

  void check_monotonicity(Rng& rng, bool strict);
};

/// F_i(x) from the blocks visible to agent i.
Vec pseudogradient_block(const GameSpec& game, Index i, const BlockReader& reader);
/// F(x) for a stacked primal vector (or a full ω).
Vec pseudogradient(const GameSpec& game, const Vec& x);
/// f_i(x), the smooth part of J_i.
double cost_value(const GameSpec& game, Index i, const Vec& x);
/// Σ_j g_j(x_j).
Vec coupling_value(const GameSpec& game, const Vec& x);

/// Full quadratic pseudogradient matrix M (n × n), zero for blackbox agents.
SpMat pseudogradient_matrix(const GameSpec& game);
Vec pseudogradient_offset(const GameSpec& game);

struct FeasibilityResidual {
  Vec local;     // dist(x_i, X_i)
  Vec coupling;  // max(Σ g_j, 0)
};

FeasibilityResidual feasible_set_residual(const GameSpec& game, const Vec& x);
double kkt_residual(const GameSpec& game, const Vec& x, const Vec& lambda_bar);

/// Largest relative error of central finite differences against the
/// analytic gradient over `probes` random points.
double cost_gradient_check(const GameSpec& game, Index i, Rng& rng, int probes = 100,
                           double h = 1e-6);
double selection_gradient_check(const SelectionFunction& phi, Rng& rng, int probes = 100,
                                double scale = 1.0, double h = 1e-6);

}  // namespace gne
