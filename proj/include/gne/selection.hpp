#pragma once

#include "gne/core.hpp"

#include <functional>
#include <optional>

namespace gne {

/// Selection function φ on the joint state.
///
/// Quadratic kind: φ(ω) = Σ_r w_r (q_rᵀω − ref_r)², i.e. ‖Qω − ref‖²_W with W
/// diagonal. Blackbox kind: user value/gradient oracles plus declared σ, L_φ.
class SelectionFunction {
 public:
  using Value = std::function<double(const Vec&)>;
  using Gradient = std::function<Vec(const Vec&)>;
  /// Gradient block of agent i from its local (x_i, λ_i, ν_i) only.
  using LocalGradient = std::function<Vec(Index i, const Vec& local)>;

  enum class Kind { Quadratic, Blackbox };

  SelectionFunction() = default;

  static SelectionFunction quadratic(const Layout& layout, SpMat q, Vec ref, Vec weights);
  /// Σ_k w_k (ω_k − ref_k)² over all coordinates.
  static SelectionFunction diagonal(const Layout& layout, const Vec& weights, const Vec& ref);
  static SelectionFunction blackbox(const Layout& layout, Value value, Gradient gradient,
                                    double sigma, double lipschitz,
                                    LocalGradient local = nullptr);
  /// φ ≡ 0 (plain fixed-point iteration).
  static SelectionFunction zero(const Layout& layout);

  Kind kind() const { return kind_; }
  const Layout& layout() const { return layout_; }
  double value(const Vec& w) const;
  Vec gradient(const Vec& w) const;
  bool separable() const { return separable_; }
  Vec local_gradient(Index i, const Vec& local) const;

  double sigma() const { return sigma_; }
  double lipschitz() const { return lipschitz_; }
  /// Overrides the computed metadata (declared values).
  void declare(std::optional<double> sigma, std::optional<double> lipschitz);
  bool declared() const { return declared_; }

  const SpMat& q() const { return q_; }
  const Vec& ref() const { return ref_; }
  const Vec& weights() const { return w_; }

  /// Moduli of the quadratic kind from H = 2QᵀWQ, per connected component.
  static std::pair<double, double> spectral_bounds(const SpMat& q, const Vec& weights,
                                                   Index n);

 private:
  struct LocalRows {
    SpMat q;  // rows × local_size
    Vec ref;
    Vec w;
  };

  Kind kind_ = Kind::Quadratic;
  Layout layout_;
  SpMat q_;
  Vec ref_;
  Vec w_;
  std::vector<LocalRows> local_;
  Value value_fn_;
  Gradient grad_fn_;
  LocalGradient local_fn_;
  bool separable_ = false;
  bool declared_ = false;
  double sigma_ = 0.0;
  double lipschitz_ = 0.0;

  void build_local_rows();
};

}  // namespace gne
