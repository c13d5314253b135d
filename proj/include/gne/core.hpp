#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gne {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;
using Rng = std::mt19937_64;

enum class ErrorKind {
  Parse,
  Validation,
  DimensionMismatch,
  ProxFailure,
  StepSizeViolation,
  NotAffine,
  EstimationDiverged,
  MissingCocoercivity,
  Diverged,
  EmptySlice,
  BetaOutOfRange,
  InstanceValidation,
  AlphaTooLarge,
  OracleUnavailable,
  DimensionTooLarge,
  NotStronglyMonotone,
  LocalityViolation,
  ProfileMismatch,
  IslandedBus,
  PlanMissing,
  InvalidArgument,
};

const char* to_string(ErrorKind kind);

/// Every failure surfaced by the library. `kind` is stable and is what the
/// CLI serializes; `what()` carries the human-readable evidence.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Block partition of ω = (x, λ, ν): agent primal blocks of size n_i, then N
/// dual blocks of size m, then N consensus blocks of size m.
class Layout {
 public:
  Layout() = default;
  Layout(std::vector<Index> dims, Index m);

  Index agents() const { return static_cast<Index>(dims_.size()); }
  Index coupling() const { return m_; }
  Index primal() const { return n_; }
  Index size() const { return n_ + 2 * agents() * m_; }
  Index dim(Index i) const { return dims_[static_cast<size_t>(i)]; }
  Index x_offset(Index i) const { return x_off_[static_cast<size_t>(i)]; }
  Index lambda_offset(Index i) const { return n_ + i * m_; }
  Index nu_offset(Index i) const { return n_ + (agents() + i) * m_; }
  /// Size of agent i's local block (x_i, λ_i, ν_i).
  Index local_size(Index i) const { return dim(i) + 2 * m_; }
  const std::vector<Index>& dims() const { return dims_; }

  /// Global indices of agent i's local block, in (x_i, λ_i, ν_i) order.
  std::vector<Index> local_indices(Index i) const;
  /// Agent owning global coordinate k.
  Index owner(Index k) const;

  bool operator==(const Layout& other) const {
    return dims_ == other.dims_ && m_ == other.m_;
  }

 private:
  std::vector<Index> dims_;
  std::vector<Index> x_off_;
  Index n_ = 0;
  Index m_ = 0;
};

template <class V>
auto x_block(V&& w, const Layout& layout, Index i) {
  return w.segment(layout.x_offset(i), layout.dim(i));
}
template <class V>
auto lambda_block(V&& w, const Layout& layout, Index i) {
  return w.segment(layout.lambda_offset(i), layout.coupling());
}
template <class V>
auto nu_block(V&& w, const Layout& layout, Index i) {
  return w.segment(layout.nu_offset(i), layout.coupling());
}
template <class V>
auto x_part(V&& w, const Layout& layout) {
  return w.head(layout.primal());
}
template <class V>
auto lambda_part(V&& w, const Layout& layout) {
  return w.segment(layout.primal(), layout.agents() * layout.coupling());
}
template <class V>
auto nu_part(V&& w, const Layout& layout) {
  return w.tail(layout.agents() * layout.coupling());
}

/// Gathers agent i's (x_i, λ_i, ν_i) into one local vector.
Vec gather_local(const Vec& w, const Layout& layout, Index i);
/// Writes a local vector back into the global state.
void scatter_local(Vec& w, const Layout& layout, Index i, const Vec& local);

void require_size(const Vec& v, Index expected, const char* what);

/// max_i ‖λ_i − mean(λ)‖.
double dual_disagreement(const Vec& w, const Layout& layout);
/// mean over agents of λ_i.
Vec mean_dual(const Vec& w, const Layout& layout);

Vec uniform_vector(Rng& rng, Index n, double lo, double hi);
Vec uniform_vector(Rng& rng, const Vec& lo, const Vec& hi);
Vec gaussian_vector(Rng& rng, Index n);

/// Worker-thread cap from GNE_THREADS (default 1).
int worker_threads();

/// Runs body(i) for i in [0, n) on up to worker_threads() threads. Each
/// index must write only its own output slot.
void parallel_for(Index n, const std::function<void(Index)>& body);

}  // namespace gne
