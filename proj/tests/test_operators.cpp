#include <doctest.h>

#include "support.hpp"

using namespace gne;
using gne::testing::fixture;

TEST_CASE("bc_matrix is the linear part of B + C") {
  for (const char* name : {"projection2.json", "quadratic3.json", "balance3.json"}) {
    const GameSpec g = load_game(fixture(name));
    const SpMat bc = bc_matrix(g);
    Rng rng(3);
    const Vec w = uniform_vector(rng, g.layout().size(), -1.0, 1.0);
    const Vec z = Vec::Zero(g.layout().size());
    CHECK(((apply_BC(g, w) - apply_BC(g, z)) - bc * w).norm() < 1e-12);
    CHECK((apply_BC(g, w) - apply_B(g, w) - apply_C(g, w)).norm() < 1e-12);
  }
}

TEST_CASE("B + C is monotone on affine fixtures") {
  for (const char* name : {"projection2.json", "quadratic3.json", "balance3.json"}) {
    const GameSpec g = load_game(fixture(name));
    const Mat bc = Mat(bc_matrix(g));
    const Mat sym = 0.5 * (bc + bc.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    CHECK(es.eigenvalues()[0] > -1e-10);
  }
}

TEST_CASE("exact Lipschitz estimate on small affine games") {
  const GameSpec g = load_game(fixture("quadratic3.json"));
  const auto lip = estimate_lipschitz(g);
  Eigen::JacobiSVD<Mat> svd(Mat(bc_matrix(g)));
  CHECK(lip.lb == doctest::Approx(svd.singularValues()[0]).epsilon(1e-10));
  CHECK(lip.method == "exact-affine");
  LipschitzOptions opts;
  opts.declared_lb = 7.0;
  CHECK(estimate_lipschitz(g, opts).lb == 7.0);
}

TEST_CASE("FBF step sizes are 0.99 / L_B") {
  const GameSpec g = load_game(fixture("quadratic3.json"));
  FbfOperator op(g);
  CHECK(op.steps().max_step() == doctest::Approx(0.99 / op.lipschitz().lb));
  CHECK_NOTHROW(check_stepsizes(g, op.steps(), op.lipschitz()));
  StepSizes big = StepSizes::uniform(g.size(), 2.0 / op.lipschitz().lb);
  CHECK_THROWS_AS(check_stepsizes(g, big, op.lipschitz()), Error);
}

TEST_CASE("pFB refuses nonaffine coupling") {
  const GameSpec g = load_game(fixture("nonlinear2.json"));
  try {
    PfbOperator op(g);
    FAIL("expected NotAffine");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotAffine);
  }
}

TEST_CASE("pFB step sizes satisfy the preconditioner bounds") {
  const GameSpec g = load_game(fixture("balance3.json"));
  PfbOperator op(g);
  const Mat phi = Mat(phi_matrix(g, op.steps()));
  CHECK((phi - phi.transpose()).norm() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Mat> es(phi);
  CHECK(es.eigenvalues()[0] > 0.0);
  CHECK(op.steps().delta > pfb_delta_lower_bound(g));
}

TEST_CASE("oracle states are fixed points of both operators") {
  // fixed points of T are zeros of A + B + C; the oracle builds ω⋆ independently
  const GameSpec p = load_game(fixture("projection2.json"));
  const OracleSolution po = oracle_projection_game(p);
  FbfOperator fp(p);
  PfbOperator pp(p);
  CHECK(fp.residual(po.omega) < 1e-12);
  CHECK(pp.residual(po.omega) < 1e-12);

  Rng rng(19);
  const GameSpec q = gne::testing::random_strong_game(rng, 3, 2, 2);
  const OracleSolution qo = oracle_unique_vgne(q);
  FbfOperator fq(q);
  PfbOperator pq(q);
  CHECK(fq.residual(qo.omega) < 1e-8);
  CHECK(pq.residual(qo.omega) < 1e-8);
}

TEST_CASE("stage kernels reproduce the monolithic operators") {
  const GameSpec g = load_game(fixture("quadratic3.json"));
  const Layout& l = g.layout();
  Rng rng(6);
  const Vec w = uniform_vector(rng, l.size(), 0.0, 1.0);
  FbfOperator f(g);
  const auto full = t_fbf(g, f.steps(), w);
  StateReader at_w(w, l);
  Vec tilde(l.size());
  std::vector<FbfStage1> s1;
  for (Index i = 0; i < g.size(); ++i) {
    s1.push_back(fbf_stage1(g, f.steps(), i, at_w));
    scatter_local(tilde, l, i, s1.back().tilde);
  }
  CHECK((tilde - full.tilde).norm() == 0.0);
  StateReader at_t(tilde, l);
  Vec out(l.size());
  for (Index i = 0; i < g.size(); ++i) scatter_local(out, l, i, fbf_stage2(g, f.steps(), i, at_t, s1[static_cast<size_t>(i)]));
  CHECK((out - full.out).norm() == 0.0);
}

TEST_CASE("state readers enforce neighborhoods") {
  const GameSpec g = load_game(fixture("quadratic3.json"));
  const Vec w = g.initial_state();
  StateReader r(w, g.layout(), g.graph, 0);
  CHECK_NOTHROW(r.x(1));
  CHECK_NOTHROW(r.lambda(1));
  try {
    r.lambda(2);
    FAIL("expected LocalityViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LocalityViolation);
  }
}

TEST_CASE("psi norm weights blocks by inverse steps") {
  const Layout l({1}, 1);
  StepSizes s = StepSizes::uniform(1, 0.5);
  Vec v = Vec::Ones(l.size());
  CHECK(psi_norm(l, s, v) == doctest::Approx(std::sqrt(3.0 * 2.0)));
}
