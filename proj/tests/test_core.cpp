#include <doctest.h>

#include "gne/game.hpp"
#include "gne/graph.hpp"
#include "gne/selection.hpp"
#include "gne/sets.hpp"

#include <algorithm>

using namespace gne;

TEST_CASE("layout offsets follow x, then lambda blocks, then nu blocks") {
  const Layout l({2, 3}, 4);
  CHECK(l.primal() == 5);
  CHECK(l.size() == 5 + 2 * 2 * 4);
  CHECK(l.x_offset(1) == 2);
  CHECK(l.lambda_offset(0) == 5);
  CHECK(l.lambda_offset(1) == 9);
  CHECK(l.nu_offset(0) == 13);
  CHECK(l.nu_offset(1) == 17);
  CHECK(l.local_size(1) == 3 + 8);
  CHECK(l.owner(3) == 1);
  CHECK(l.owner(10) == 1);
  CHECK(l.owner(14) == 0);

  Vec w = Vec::LinSpaced(l.size(), 0, static_cast<double>(l.size() - 1));
  const Vec loc = gather_local(w, l, 1);
  CHECK(loc.size() == l.local_size(1));
  CHECK(loc[0] == 2.0);
  CHECK(loc[3] == 9.0);
  CHECK(loc[7] == 17.0);
  Vec w2 = Vec::Zero(l.size());
  scatter_local(w2, l, 1, loc);
  for (Index k : l.local_indices(1)) CHECK(w2[k] == w[k]);
}

TEST_CASE("dual disagreement and mean") {
  const Layout l({1, 1, 1}, 2);
  Vec w = Vec::Zero(l.size());
  lambda_block(w, l, 0) << 1, 2;
  lambda_block(w, l, 1) << 1, 2;
  lambda_block(w, l, 2) << 4, 2;
  CHECK(mean_dual(w, l)[0] == doctest::Approx(2.0));
  CHECK(dual_disagreement(w, l) == doctest::Approx(2.0));
}

TEST_CASE("error kinds have stable names") {
  CHECK(std::string(to_string(ErrorKind::BetaOutOfRange)) == "BetaOutOfRange");
  CHECK(std::string(to_string(ErrorKind::LocalityViolation)) == "LocalityViolation");
  CHECK(std::string(to_string(ErrorKind::IslandedBus)) == "IslandedBus");
}

TEST_CASE("box projection clips") {
  LocalSet s(Box{Vec::Zero(3), Vec::Ones(3)});
  Vec v(3);
  v << -1, 0.5, 2;
  const Vec p = s.project(v);
  CHECK(p[0] == 0.0);
  CHECK(p[1] == 0.5);
  CHECK(p[2] == 1.0);
  CHECK(s.contains(p));
}

TEST_CASE("box-hyperplane projection satisfies its optimality conditions") {
  // independent check: p solves min ‖z − v‖² over the slab, so p = clip(v − μ a)
  // for some scalar μ, p is feasible, and no sampled feasible point is closer.
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 2 + trial % 5;
    const Vec lo = uniform_vector(rng, n, -1.0, 0.0);
    const Vec hi = uniform_vector(rng, n, 0.5, 1.5);
    const Vec a = uniform_vector(rng, n, 0.2, 2.0);
    const Vec mid = uniform_vector(rng, lo, hi);
    const double rhs = a.dot(mid);
    const Vec v = uniform_vector(rng, n, -3.0, 3.0);
    const Vec p = project_box_hyperplane(v, lo, hi, a, rhs);
    CHECK(std::abs(a.dot(p) - rhs) < 1e-9);
    CHECK(((p - lo).array() >= -1e-12).all());
    CHECK(((hi - p).array() >= -1e-12).all());
    // recover μ from a free coordinate, if any
    for (Index k = 0; k < n; ++k) {
      if (p[k] > lo[k] + 1e-9 && p[k] < hi[k] - 1e-9) {
        const double mu = (v[k] - p[k]) / a[k];
        const Vec q = (v - mu * a).cwiseMax(lo).cwiseMin(hi);
        CHECK((q - p).norm() < 1e-8);
        break;
      }
    }
    for (int s = 0; s < 20; ++s) {
      Vec z = uniform_vector(rng, lo, hi);
      z = project_box_hyperplane(z, lo, hi, a, rhs);
      CHECK((z - v).norm() >= (p - v).norm() - 1e-9);
    }
  }
}

TEST_CASE("balance rows project per row and validate") {
  BalanceRow r1{{0, 1}, Vec::Ones(2), 1.0};
  BalanceRow r2{{2, 3}, Vec::Ones(2), 0.5};
  LocalSet s(Box{Vec::Zero(5), Vec::Ones(5)}, {r1, r2});
  s.validate();
  Vec v(5);
  v << 2, 2, -1, -1, 3;
  const Vec p = s.project(v);
  CHECK(p[0] + p[1] == doctest::Approx(1.0));
  CHECK(p[2] + p[3] == doctest::Approx(0.5));
  CHECK(p[4] == 1.0);
  CHECK(s.contains(s.interior_point()));

  LocalSet overlap(Box{Vec::Zero(3), Vec::Ones(3)}, {BalanceRow{{0, 1}, Vec::Ones(2), 1.0},
                                                     BalanceRow{{1, 2}, Vec::Ones(2), 1.0}});
  CHECK_THROWS_AS(overlap.validate(), Error);
  LocalSet empty(Box{Vec::Zero(2), Vec::Ones(2)}, {BalanceRow{{0, 1}, Vec::Ones(2), 3.0}});
  CHECK_THROWS_AS(empty.validate(), Error);
  LocalSet unbounded(Box{Vec::Constant(1, -INFINITY), Vec::Ones(1)});
  CHECK_THROWS_AS(unbounded.validate(), Error);
}

TEST_CASE("l1 prox is clipped soft thresholding") {
  LocalSet s(Box{Vec::Constant(3, -1.0), Vec::Constant(3, 1.0)});
  Vec v(3);
  v << 0.05, -0.5, 3.0;
  const Vec p = prox(ProxForm::l1(Vec::Constant(3, 1.0)), s, v, 0.1);
  CHECK(p[0] == 0.0);
  CHECK(p[1] == doctest::Approx(-0.4));
  CHECK(p[2] == 1.0);
  LocalSet bal(Box{Vec::Zero(2), Vec::Ones(2)}, {BalanceRow{{0, 1}, Vec::Ones(2), 1.0}});
  CHECK_THROWS_AS(prox(ProxForm::l1(Vec::Ones(2)), bal, Vec::Zero(2), 0.1), Error);
}

TEST_CASE("graph laplacian and connectivity") {
  CommGraph path(3, {{0, 1}, {1, 2}});
  CHECK(path.connected());
  CHECK(path.algebraic_connectivity() == doctest::Approx(1.0));
  CHECK(path.laplacian_max_eigenvalue() == doctest::Approx(3.0));
  CHECK(path.neighbors(1) == std::vector<Index>{0, 2});
  CHECK(path.max_degree() == 2);
  const Mat l = path.laplacian();
  CHECK(l.rowwise().sum().norm() == doctest::Approx(0.0));

  CommGraph split(3, {{0, 1}});
  CHECK_FALSE(split.connected());
  CHECK_THROWS_AS(split.validate(), Error);
  CHECK_THROWS_AS(CommGraph(2, {{0, 0}}), Error);

  CommGraph g(3, {{0, 1}, {1, 2}});
  g.set_cost_dependencies(0, {2});
  CHECK_THROWS_AS(g.validate(), Error);
}

TEST_CASE("diagonal selection has sigma = 2 min w and L = 2 max w") {
  const Layout l({2, 1}, 1);
  Vec w = Vec::Constant(l.size(), 0.5);
  w[0] = 3.0;
  const auto phi = SelectionFunction::diagonal(l, w, Vec::Zero(l.size()));
  CHECK(phi.sigma() == doctest::Approx(1.0));
  CHECK(phi.lipschitz() == doctest::Approx(6.0));
  CHECK(phi.separable());
  Vec x = Vec::Ones(l.size());
  CHECK(phi.value(x) == doctest::Approx(3.0 + 0.5 * (l.size() - 1)));
  CHECK(phi.gradient(x)[0] == doctest::Approx(6.0));
}

TEST_CASE("separable local gradient matches the global gradient bit for bit") {
  const Layout l({2, 3}, 2);
  Rng rng(1);
  const Vec w = uniform_vector(rng, l.size(), 0.1, 2.0);
  const Vec ref = uniform_vector(rng, l.size(), -1.0, 1.0);
  const auto phi = SelectionFunction::diagonal(l, w, ref);
  const Vec x = uniform_vector(rng, l.size(), -1.0, 1.0);
  const Vec g = phi.gradient(x);
  for (Index i = 0; i < 2; ++i) {
    const Vec loc = phi.local_gradient(i, gather_local(x, l, i));
    CHECK((loc - gather_local(g, l, i)).norm() == 0.0);
  }
}

TEST_CASE("coupled selection rows make phi non-separable") {
  const Layout l({1, 1}, 0);
  std::vector<Triplet> t = {{0, 0, 1.0}, {0, 1, -1.0}, {1, 0, 1.0}, {2, 1, 1.0}};
  SpMat q(3, 2);
  q.setFromTriplets(t.begin(), t.end());
  const auto phi = SelectionFunction::quadratic(l, q, Vec::Zero(3), Vec::Ones(3));
  CHECK_FALSE(phi.separable());
  // H = 2 QᵀQ = 2 [[2, -1], [-1, 2]]
  CHECK(phi.sigma() == doctest::Approx(2.0));
  CHECK(phi.lipschitz() == doctest::Approx(6.0));
  CHECK_THROWS_AS(phi.local_gradient(0, Vec::Zero(1)), Error);
  Rng rng(2);
  CHECK(selection_gradient_check(phi, rng, 100) < 1e-6);
}
