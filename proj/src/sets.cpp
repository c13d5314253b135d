#include "gne/sets.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gne {

bool Box::contains(const Vec& v, double tol) const {
  return v.size() == lo.size() && (v.array() >= lo.array() - tol).all() &&
         (v.array() <= hi.array() + tol).all();
}

LocalSet::LocalSet(Box box, std::vector<BalanceRow> rows)
    : box_(std::move(box)), rows_(std::move(rows)) {}

Vec project_box_hyperplane(const Vec& v, const Vec& lo, const Vec& hi, const Vec& coef,
                           double rhs) {
  // z(μ) = clip(v − μ a); s(μ) = aᵀz(μ) is non-increasing and piecewise linear.
  auto clipped = [&](double mu) { return (v - mu * coef).cwiseMax(lo).cwiseMin(hi); };
  auto level = [&](double mu) { return coef.dot(clipped(mu)); };

  std::vector<double> breaks;
  breaks.reserve(static_cast<size_t>(2 * v.size()));
  for (Index k = 0; k < v.size(); ++k) {
    if (coef[k] == 0.0) continue;
    breaks.push_back((v[k] - lo[k]) / coef[k]);
    breaks.push_back((v[k] - hi[k]) / coef[k]);
  }
  if (breaks.empty()) return clipped(0.0);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  // s is constant outside [breaks.front(), breaks.back()].
  if (level(breaks.front()) <= rhs) return clipped(breaks.front());
  if (level(breaks.back()) >= rhs) return clipped(breaks.back());

  size_t lo_idx = 0, hi_idx = breaks.size() - 1;
  while (hi_idx - lo_idx > 1) {
    const size_t mid = (lo_idx + hi_idx) / 2;
    if (level(breaks[mid]) >= rhs) {
      lo_idx = mid;
    } else {
      hi_idx = mid;
    }
  }
  const double mu0 = breaks[lo_idx], mu1 = breaks[hi_idx];
  const double s0 = level(mu0), s1 = level(mu1);
  const double mu = (s0 == s1) ? mu0 : mu0 + (s0 - rhs) * (mu1 - mu0) / (s0 - s1);
  return clipped(mu);
}

Vec LocalSet::project(const Vec& v) const {
  if (custom_) return custom_(v);
  Vec z = box_.clip(v);
  for (const auto& row : rows_) {
    const Index k = static_cast<Index>(row.idx.size());
    Vec sub(k), lo(k), hi(k);
    for (Index t = 0; t < k; ++t) {
      const Index j = row.idx[static_cast<size_t>(t)];
      sub[t] = v[j];
      lo[t] = box_.lo[j];
      hi[t] = box_.hi[j];
    }
    const Vec proj = project_box_hyperplane(sub, lo, hi, row.coef, row.rhs);
    for (Index t = 0; t < k; ++t) z[row.idx[static_cast<size_t>(t)]] = proj[t];
  }
  return z;
}

bool LocalSet::contains(const Vec& v, double tol) const {
  if (custom_) return (v - custom_(v)).norm() <= tol;
  if (!box_.contains(v, tol)) return false;
  for (const auto& row : rows_) {
    double s = 0.0;
    for (size_t t = 0; t < row.idx.size(); ++t) s += row.coef[static_cast<Index>(t)] * v[row.idx[t]];
    if (std::abs(s - row.rhs) > tol * std::max(1.0, std::abs(row.rhs))) return false;
  }
  return true;
}

Vec LocalSet::interior_point() const {
  if (is_box()) return box_.center();
  return project(box_.center());
}

void LocalSet::validate() const {
  if (box_.lo.size() != box_.hi.size()) {
    throw Error(ErrorKind::Validation, "box bounds have different lengths");
  }
  if (!box_.lo.allFinite() || !box_.hi.allFinite()) {
    throw Error(ErrorKind::Validation, "local set must be bounded (finite box bounds)");
  }
  for (Index k = 0; k < box_.size(); ++k) {
    if (box_.lo[k] > box_.hi[k]) {
      std::ostringstream os;
      os << "empty box: lo[" << k << "] = " << box_.lo[k] << " > hi = " << box_.hi[k];
      throw Error(ErrorKind::Validation, os.str());
    }
  }
  std::vector<char> used(static_cast<size_t>(box_.size()), 0);
  for (const auto& row : rows_) {
    if (static_cast<Index>(row.idx.size()) != row.coef.size()) {
      throw Error(ErrorKind::Validation, "balance row index/coefficient length mismatch");
    }
    double smin = 0.0, smax = 0.0;
    for (size_t t = 0; t < row.idx.size(); ++t) {
      const Index j = row.idx[t];
      if (j < 0 || j >= box_.size() || used[static_cast<size_t>(j)]) {
        throw Error(ErrorKind::Validation, "balance rows must have disjoint, in-range supports");
      }
      used[static_cast<size_t>(j)] = 1;
      const double a = row.coef[static_cast<Index>(t)];
      smin += std::min(a * box_.lo[j], a * box_.hi[j]);
      smax += std::max(a * box_.lo[j], a * box_.hi[j]);
    }
    if (row.rhs < smin - 1e-12 || row.rhs > smax + 1e-12) {
      std::ostringstream os;
      os << "balance row infeasible: rhs " << row.rhs << " outside [" << smin << ", " << smax
         << "]";
      throw Error(ErrorKind::Validation, os.str());
    }
  }
}

ProxForm ProxForm::l1(Vec w) {
  ProxForm p;
  p.kind = Kind::L1Weighted;
  p.weights = std::move(w);
  return p;
}

ProxForm ProxForm::indicator(Box b) {
  ProxForm p;
  p.kind = Kind::IndicatorBox;
  p.box = std::move(b);
  return p;
}

ProxForm ProxForm::callback(Callback cb) {
  ProxForm p;
  p.kind = Kind::Custom;
  p.custom = std::move(cb);
  return p;
}

double ProxForm::value(const Vec& z) const {
  switch (kind) {
    case Kind::L1Weighted: return weights.dot(z.cwiseAbs());
    case Kind::IndicatorBox: return box.contains(z, 1e-12) ? 0.0 : INFINITY;
    default: return 0.0;
  }
}

Vec prox(const ProxForm& ell, const LocalSet& set, const Vec& v, double step) {
  switch (ell.kind) {
    case ProxForm::Kind::Zero:
      return set.project(v);
    case ProxForm::Kind::L1Weighted: {
      if (!set.is_box()) {
        throw Error(ErrorKind::ProxFailure, "l1 term is only supported on box local sets");
      }
      // one-dimensional convex terms: prox of ℓ + ι_[lo,hi] is the clipped prox of ℓ.
      const Vec t = step * ell.weights;
      Vec soft = (v.array().abs() - t.array()).max(0.0) * v.array().sign();
      return set.box().clip(soft);
    }
    case ProxForm::Kind::IndicatorBox: {
      if (!set.is_box()) {
        throw Error(ErrorKind::ProxFailure, "indicator term is only supported on box local sets");
      }
      Box both{set.box().lo.cwiseMax(ell.box.lo), set.box().hi.cwiseMin(ell.box.hi)};
      return both.clip(v);
    }
    case ProxForm::Kind::Custom: {
      Vec z = ell.custom(v, step);
      if (z.size() != v.size() || !z.allFinite()) {
        throw Error(ErrorKind::ProxFailure, "custom prox returned a non-finite or mis-sized result");
      }
      if (!set.box().contains(z, 1e-9)) {
        throw Error(ErrorKind::ProxFailure, "custom prox left the local set");
      }
      return z;
    }
  }
  return v;
}

}  // namespace gne
