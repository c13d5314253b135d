#include "gne/core.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace gne {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::Validation: return "ValidationError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ProxFailure: return "ProxFailure";
    case ErrorKind::StepSizeViolation: return "StepSizeViolation";
    case ErrorKind::NotAffine: return "NotAffine";
    case ErrorKind::EstimationDiverged: return "EstimationDiverged";
    case ErrorKind::MissingCocoercivity: return "MissingCocoercivity";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::EmptySlice: return "EmptySlice";
    case ErrorKind::BetaOutOfRange: return "BetaOutOfRange";
    case ErrorKind::InstanceValidation: return "InstanceValidationError";
    case ErrorKind::AlphaTooLarge: return "AlphaTooLarge";
    case ErrorKind::OracleUnavailable: return "OracleUnavailable";
    case ErrorKind::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorKind::NotStronglyMonotone: return "NotStronglyMonotone";
    case ErrorKind::LocalityViolation: return "LocalityViolation";
    case ErrorKind::ProfileMismatch: return "ProfileMismatch";
    case ErrorKind::IslandedBus: return "IslandedBus";
    case ErrorKind::PlanMissing: return "PlanMissing";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Error";
}

Layout::Layout(std::vector<Index> dims, Index m) : dims_(std::move(dims)), m_(m) {
  if (m_ < 0) throw Error(ErrorKind::Validation, "coupling dimension must be >= 0");
  x_off_.reserve(dims_.size());
  for (Index d : dims_) {
    if (d <= 0) throw Error(ErrorKind::Validation, "agent dimension must be positive");
    x_off_.push_back(n_);
    n_ += d;
  }
}

std::vector<Index> Layout::local_indices(Index i) const {
  std::vector<Index> idx;
  idx.reserve(static_cast<size_t>(local_size(i)));
  for (Index k = 0; k < dim(i); ++k) idx.push_back(x_offset(i) + k);
  for (Index k = 0; k < m_; ++k) idx.push_back(lambda_offset(i) + k);
  for (Index k = 0; k < m_; ++k) idx.push_back(nu_offset(i) + k);
  return idx;
}

Index Layout::owner(Index k) const {
  if (k < n_) {
    auto it = std::upper_bound(x_off_.begin(), x_off_.end(), k);
    return static_cast<Index>(it - x_off_.begin()) - 1;
  }
  k -= n_;
  const Index dual = k % (agents() * m_);
  return dual / m_;
}

Vec gather_local(const Vec& w, const Layout& layout, Index i) {
  Vec local(layout.local_size(i));
  const Index n = layout.dim(i), m = layout.coupling();
  local.head(n) = x_block(w, layout, i);
  local.segment(n, m) = lambda_block(w, layout, i);
  local.tail(m) = nu_block(w, layout, i);
  return local;
}

void scatter_local(Vec& w, const Layout& layout, Index i, const Vec& local) {
  const Index n = layout.dim(i), m = layout.coupling();
  x_block(w, layout, i) = local.head(n);
  lambda_block(w, layout, i) = local.segment(n, m);
  nu_block(w, layout, i) = local.tail(m);
}

void require_size(const Vec& v, Index expected, const char* what) {
  if (v.size() != expected) {
    std::ostringstream os;
    os << what << ": expected length " << expected << ", got " << v.size();
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
}

Vec mean_dual(const Vec& w, const Layout& layout) {
  Vec mean = Vec::Zero(layout.coupling());
  for (Index i = 0; i < layout.agents(); ++i) mean += lambda_block(w, layout, i);
  if (layout.agents() > 0) mean /= static_cast<double>(layout.agents());
  return mean;
}

double dual_disagreement(const Vec& w, const Layout& layout) {
  if (layout.coupling() == 0) return 0.0;
  const Vec mean = mean_dual(w, layout);
  double worst = 0.0;
  for (Index i = 0; i < layout.agents(); ++i) {
    worst = std::max(worst, (lambda_block(w, layout, i) - mean).norm());
  }
  return worst;
}

Vec uniform_vector(Rng& rng, Index n, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vec v(n);
  for (Index k = 0; k < n; ++k) v[k] = dist(rng);
  return v;
}

Vec uniform_vector(Rng& rng, const Vec& lo, const Vec& hi) {
  Vec v(lo.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index k = 0; k < lo.size(); ++k) v[k] = lo[k] + unit(rng) * (hi[k] - lo[k]);
  return v;
}

Vec gaussian_vector(Rng& rng, Index n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vec v(n);
  for (Index k = 0; k < n; ++k) v[k] = dist(rng);
  return v;
}

int worker_threads() {
  if (const char* env = std::getenv("GNE_THREADS")) {
    const int value = std::atoi(env);
    if (value >= 1) return value;
  }
  return 1;
}

void parallel_for(Index n, const std::function<void(Index)>& body) {
  const Index threads = std::min<Index>(worker_threads(), n);
  if (threads <= 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
  for (Index t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (Index i = t; i < n; i += threads) body(i);
      } catch (...) {
        errors[static_cast<size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace gne
