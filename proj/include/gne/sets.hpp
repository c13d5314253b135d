#pragma once

#include "gne/core.hpp"

#include <functional>
#include <vector>

namespace gne {

struct Box {
  Vec lo;
  Vec hi;

  Index size() const { return lo.size(); }
  Vec center() const { return 0.5 * (lo + hi); }
  Vec clip(const Vec& v) const { return v.cwiseMax(lo).cwiseMin(hi); }
  bool contains(const Vec& v, double tol = 0.0) const;
};

/// Equality a·z[idx] = rhs restricted to a subset of coordinates. Rows of one
/// LocalSet must have disjoint supports.
struct BalanceRow {
  std::vector<Index> idx;
  Vec coef;
  double rhs = 0.0;
};

/// Compact convex local feasible set X_i: a finite box, optionally
/// intersected with disjoint-support balance equalities, or an arbitrary
/// convex set given by a projection callback (not serializable).
class LocalSet {
 public:
  using Projection = std::function<Vec(const Vec&)>;

  LocalSet() = default;
  explicit LocalSet(Box box) : box_(std::move(box)) {}
  LocalSet(Box box, std::vector<BalanceRow> rows);
  LocalSet(Box bounding_box, Projection custom)
      : box_(std::move(bounding_box)), custom_(std::move(custom)) {}

  const Box& box() const { return box_; }
  const std::vector<BalanceRow>& balances() const { return rows_; }
  bool is_box() const { return rows_.empty() && !custom_; }
  bool has_custom_projection() const { return static_cast<bool>(custom_); }
  Index dim() const { return box_.size(); }

  Vec project(const Vec& v) const;
  double distance(const Vec& v) const { return (v - project(v)).norm(); }
  bool contains(const Vec& v, double tol = 1e-9) const;
  /// A point of the set; the box center when the set is a box.
  Vec interior_point() const;

  /// Throws ValidationError when the set is empty, unbounded or malformed.
  void validate() const;

 private:
  Box box_;
  std::vector<BalanceRow> rows_;
  Projection custom_;
};

/// Euclidean projection onto {lo ≤ z ≤ hi, coefᵀz = rhs} (exact, breakpoint
/// search over the piecewise-linear multiplier equation).
Vec project_box_hyperplane(const Vec& v, const Vec& lo, const Vec& hi, const Vec& coef,
                           double rhs);

/// Nonsmooth local term ℓ_i.
struct ProxForm {
  enum class Kind { Zero, L1Weighted, IndicatorBox, Custom };
  using Callback = std::function<Vec(const Vec& v, double step)>;

  Kind kind = Kind::Zero;
  Vec weights;  // L1Weighted: ℓ(z) = Σ w_k |z_k|
  Box box;      // IndicatorBox: ℓ = ι_box
  Callback custom;  // Custom: full prox of ℓ + ι_X with parameter `step`

  static ProxForm zero() { return {}; }
  static ProxForm l1(Vec w);
  static ProxForm indicator(Box b);
  static ProxForm callback(Callback cb);

  double value(const Vec& z) const;
};

/// prox^{step}_{ℓ + ι_X}(v) = argmin_z ℓ(z) + ι_X(z) + ‖z − v‖²/(2 step).
Vec prox(const ProxForm& ell, const LocalSet& set, const Vec& v, double step);

}  // namespace gne
