#include "gne/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gne {

namespace {

struct UnionFind {
  std::vector<Index> parent;
  explicit UnionFind(Index n) : parent(static_cast<size_t>(n)) {
    std::iota(parent.begin(), parent.end(), Index{0});
  }
  Index find(Index a) {
    while (parent[static_cast<size_t>(a)] != a) {
      parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
      a = parent[static_cast<size_t>(a)];
    }
    return a;
  }
  void unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<size_t>(std::max(a, b))] = std::min(a, b);
  }
};

double power_max_eig(const SpMat& q, const Vec& w, Index n) {
  Vec v = Vec::Ones(n).normalized();
  double est = 0.0;
  for (int it = 0; it < 500; ++it) {
    Vec hv = 2.0 * (q.transpose() * w.cwiseProduct(q * v));
    const double nrm = hv.norm();
    if (nrm == 0.0) return 0.0;
    const double next = v.dot(hv);
    v = hv / nrm;
    if (std::abs(next - est) <= 1e-12 * std::max(1.0, next)) {
      est = next;
      break;
    }
    est = next;
  }
  return est * 1.1;
}

}  // namespace

std::pair<double, double> SelectionFunction::spectral_bounds(const SpMat& q, const Vec& weights,
                                                             Index n) {
  UnionFind uf(n);
  std::vector<char> covered(static_cast<size_t>(n), 0);
  for (Index r = 0; r < q.rows(); ++r) {
    if (weights[r] == 0.0) continue;
    Index first = -1;
    for (SpMat::InnerIterator it(q, r); it; ++it) {
      if (it.value() == 0.0) continue;
      covered[static_cast<size_t>(it.col())] = 1;
      if (first < 0) {
        first = it.col();
      } else {
        uf.unite(first, it.col());
      }
    }
  }
  std::vector<std::vector<Index>> comps(static_cast<size_t>(n));
  for (Index k = 0; k < n; ++k) comps[static_cast<size_t>(uf.find(k))].push_back(k);

  std::vector<std::vector<Index>> comp_rows(static_cast<size_t>(n));
  for (Index r = 0; r < q.rows(); ++r) {
    if (weights[r] == 0.0) continue;
    for (SpMat::InnerIterator it(q, r); it; ++it) {
      if (it.value() != 0.0) {
        comp_rows[static_cast<size_t>(uf.find(it.col()))].push_back(r);
        break;
      }
    }
  }

  double lo = INFINITY, hi = 0.0;
  for (Index root = 0; root < n; ++root) {
    const auto& cols = comps[static_cast<size_t>(root)];
    if (cols.empty()) continue;
    if (cols.size() == 1 && !covered[static_cast<size_t>(cols[0])]) {
      lo = std::min(lo, 0.0);
      continue;
    }
    const Index s = static_cast<Index>(cols.size());
    std::vector<Index> local(static_cast<size_t>(n), -1);
    for (Index t = 0; t < s; ++t) local[static_cast<size_t>(cols[static_cast<size_t>(t)])] = t;
    const auto& rows = comp_rows[static_cast<size_t>(root)];
    std::vector<Triplet> trips;
    Vec wc(static_cast<Index>(rows.size()));
    for (size_t r = 0; r < rows.size(); ++r) {
      wc[static_cast<Index>(r)] = weights[rows[r]];
      for (SpMat::InnerIterator it(q, rows[r]); it; ++it) {
        trips.emplace_back(static_cast<Index>(r), local[static_cast<size_t>(it.col())], it.value());
      }
    }
    SpMat qc(static_cast<Index>(rows.size()), s);
    qc.setFromTriplets(trips.begin(), trips.end());
    if (s <= 2500) {
      Mat dq = Mat(qc);
      Mat h = 2.0 * dq.transpose() * wc.asDiagonal() * dq;
      Eigen::SelfAdjointEigenSolver<Mat> eig(h, Eigen::EigenvaluesOnly);
      lo = std::min(lo, eig.eigenvalues()[0]);
      hi = std::max(hi, eig.eigenvalues()[s - 1]);
    } else {
      lo = std::min(lo, 0.0);
      hi = std::max(hi, power_max_eig(qc, wc, s));
    }
  }
  if (!std::isfinite(lo)) lo = 0.0;
  return {std::max(lo, 0.0), hi};
}

SelectionFunction SelectionFunction::quadratic(const Layout& layout, SpMat q, Vec ref,
                                               Vec weights) {
  if (q.cols() != layout.size()) {
    throw Error(ErrorKind::DimensionMismatch, "selection matrix Q has wrong column count");
  }
  require_size(ref, q.rows(), "selection reference");
  require_size(weights, q.rows(), "selection weights");
  if ((weights.array() < 0.0).any()) {
    throw Error(ErrorKind::Validation, "selection weights must be non-negative");
  }
  SelectionFunction phi;
  phi.kind_ = Kind::Quadratic;
  phi.layout_ = layout;
  q.makeCompressed();
  phi.q_ = std::move(q);
  phi.ref_ = std::move(ref);
  phi.w_ = std::move(weights);
  auto [s, l] = spectral_bounds(phi.q_, phi.w_, layout.size());
  phi.sigma_ = s;
  phi.lipschitz_ = l;
  phi.build_local_rows();
  return phi;
}

SelectionFunction SelectionFunction::diagonal(const Layout& layout, const Vec& weights,
                                              const Vec& ref) {
  require_size(weights, layout.size(), "selection weights");
  require_size(ref, layout.size(), "selection reference");
  std::vector<Triplet> trips;
  std::vector<double> w, r;
  Index row = 0;
  for (Index k = 0; k < layout.size(); ++k) {
    if (weights[k] == 0.0) continue;
    trips.emplace_back(row++, k, 1.0);
    w.push_back(weights[k]);
    r.push_back(ref[k]);
  }
  SpMat q(row, layout.size());
  q.setFromTriplets(trips.begin(), trips.end());
  return quadratic(layout, std::move(q), Eigen::Map<Vec>(r.data(), row),
                   Eigen::Map<Vec>(w.data(), row));
}

SelectionFunction SelectionFunction::blackbox(const Layout& layout, Value value,
                                              Gradient gradient, double sigma, double lipschitz,
                                              LocalGradient local) {
  if (!(lipschitz > 0.0) || sigma < 0.0 || sigma > lipschitz) {
    throw Error(ErrorKind::Validation, "blackbox selection needs 0 <= sigma <= L_phi, L_phi > 0");
  }
  SelectionFunction phi;
  phi.kind_ = Kind::Blackbox;
  phi.layout_ = layout;
  phi.value_fn_ = std::move(value);
  phi.grad_fn_ = std::move(gradient);
  phi.local_fn_ = std::move(local);
  phi.separable_ = static_cast<bool>(phi.local_fn_);
  phi.sigma_ = sigma;
  phi.lipschitz_ = lipschitz;
  phi.declared_ = true;
  return phi;
}

SelectionFunction SelectionFunction::zero(const Layout& layout) {
  return quadratic(layout, SpMat(0, layout.size()), Vec(0), Vec(0));
}

void SelectionFunction::declare(std::optional<double> sigma, std::optional<double> lipschitz) {
  if (sigma) sigma_ = *sigma;
  if (lipschitz) lipschitz_ = *lipschitz;
  declared_ = declared_ || sigma.has_value() || lipschitz.has_value();
}

void SelectionFunction::build_local_rows() {
  const Index agents = layout_.agents();
  std::vector<Index> owner_of_row(static_cast<size_t>(q_.rows()), -1);
  separable_ = true;
  for (Index r = 0; r < q_.rows() && separable_; ++r) {
    for (SpMat::InnerIterator it(q_, r); it; ++it) {
      const Index who = layout_.owner(it.col());
      if (owner_of_row[static_cast<size_t>(r)] < 0) {
        owner_of_row[static_cast<size_t>(r)] = who;
      } else if (owner_of_row[static_cast<size_t>(r)] != who) {
        separable_ = false;
        break;
      }
    }
  }
  local_.clear();
  if (!separable_) return;

  // position of each global coordinate inside its owner's local block
  std::vector<Index> pos(static_cast<size_t>(layout_.size()));
  for (Index i = 0; i < agents; ++i) {
    const auto idx = layout_.local_indices(i);
    for (size_t t = 0; t < idx.size(); ++t) pos[static_cast<size_t>(idx[t])] = static_cast<Index>(t);
  }
  std::vector<std::vector<Triplet>> trips(static_cast<size_t>(agents));
  std::vector<std::vector<double>> refs(static_cast<size_t>(agents)), ws(static_cast<size_t>(agents));
  for (Index r = 0; r < q_.rows(); ++r) {
    const Index who = owner_of_row[static_cast<size_t>(r)];
    if (who < 0) continue;
    const Index lr = static_cast<Index>(refs[static_cast<size_t>(who)].size());
    for (SpMat::InnerIterator it(q_, r); it; ++it) {
      trips[static_cast<size_t>(who)].emplace_back(lr, pos[static_cast<size_t>(it.col())], it.value());
    }
    refs[static_cast<size_t>(who)].push_back(ref_[r]);
    ws[static_cast<size_t>(who)].push_back(w_[r]);
  }
  local_.resize(static_cast<size_t>(agents));
  for (Index i = 0; i < agents; ++i) {
    auto& lr = local_[static_cast<size_t>(i)];
    const Index rows = static_cast<Index>(refs[static_cast<size_t>(i)].size());
    lr.q.resize(rows, layout_.local_size(i));
    lr.q.setFromTriplets(trips[static_cast<size_t>(i)].begin(), trips[static_cast<size_t>(i)].end());
    lr.ref = Eigen::Map<Vec>(refs[static_cast<size_t>(i)].data(), rows);
    lr.w = Eigen::Map<Vec>(ws[static_cast<size_t>(i)].data(), rows);
  }
}

double SelectionFunction::value(const Vec& w) const {
  require_size(w, layout_.size(), "selection argument");
  if (kind_ == Kind::Blackbox) return value_fn_(w);
  const Vec r = q_ * w - ref_;
  return r.dot(w_.cwiseProduct(r));
}

Vec SelectionFunction::local_gradient(Index i, const Vec& local) const {
  if (!separable_) {
    throw Error(ErrorKind::InvalidArgument, "local gradient requested for a non-separable selection");
  }
  if (kind_ == Kind::Blackbox) return local_fn_(i, local);
  const auto& lr = local_[static_cast<size_t>(i)];
  const Vec r = lr.q * local - lr.ref;
  return 2.0 * (lr.q.transpose() * lr.w.cwiseProduct(r));
}

Vec SelectionFunction::gradient(const Vec& w) const {
  require_size(w, layout_.size(), "selection argument");
  if (separable_) {
    Vec g(w.size());
    for (Index i = 0; i < layout_.agents(); ++i) {
      scatter_local(g, layout_, i, local_gradient(i, gather_local(w, layout_, i)));
    }
    return g;
  }
  if (kind_ == Kind::Blackbox) return grad_fn_(w);
  const Vec r = q_ * w - ref_;
  return 2.0 * (q_.transpose() * w_.cwiseProduct(r));
}

}  // namespace gne
