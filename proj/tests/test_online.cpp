#include <doctest.h>

#include "support.hpp"

#include "gne/online.hpp"

#include <cmath>
#include <sstream>

using namespace gne;
using gne::testing::fixture;

TEST_CASE("tau(beta) against the direct formula") {
  const double sigma = 0.7, lphi = 1.9;
  for (double beta : {1e-3, 0.05, 0.2, 0.38}) {
    const double direct = 1.0 - std::sqrt(1.0 - beta * (2.0 * sigma - beta * lphi * lphi));
    CHECK(tau_beta(beta, sigma, lphi) == doctest::Approx(direct).epsilon(1e-12));
  }
  // cancellation regime: series 1 − √(1 − x) ≈ x/2 + x²/8
  const double beta = 1e-9;
  const double x = beta * (2.0 * sigma - beta * lphi * lphi);
  CHECK(tau_beta(beta, sigma, lphi) == doctest::Approx(x / 2.0 + x * x / 8.0).epsilon(1e-14));
  for (double bad : {0.0, -0.1, 2.0 * sigma / (lphi * lphi)}) {
    try {
      tau_beta(bad, sigma, lphi);
      FAIL("expected BetaOutOfRange");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::BetaOutOfRange);
    }
  }
}

TEST_CASE("tracking bound") {
  const double g = tracking_gamma(0.1, 0.05, 2.0, 0.01);
  CHECK(g == doctest::Approx((0.1 / 0.05) * 2.0 * (0.06 + 2.2)));
  CHECK(tracking_bound(0.5, 0.2, 0.25) == doctest::Approx((0.5 + 0.04) / 0.25));
  try {
    tracking_bound(0.5, 0.2, 0.5);
    FAIL("expected AlphaTooLarge");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::AlphaTooLarge);
  }
}

TEST_CASE("game sequences: timeline and finite family") {
  const auto seq = GameSequence::load(fixture("drifting.json"));
  CHECK(seq.length() == 200);
  CHECK_FALSE(seq.finite_family());
  REQUIRE(seq.delta1.has_value());
  CHECK(*seq.delta1 == doctest::Approx(0.0376743).epsilon(1e-6));
  CHECK(seq.at(0).selection.ref()[0] == doctest::Approx(0.537599970069291));
  CHECK(seq.at(1).selection.ref()[0] == doctest::Approx(0.574606966149456));
  CHECK_THROWS_AS(seq.at(200), Error);

  Json doc = read_json(fixture("drifting.json"));
  doc.erase("timeline");
  Json patch;
  patch["selection"]["x"]["weight"] = 1;
  patch["selection"]["x"]["ref"] = {0.2, 0.3};
  doc["family"] = Json::array();
  doc["family"].push_back(Json::object());
  doc["family"].push_back(patch);
  doc["schedule"] = {1, 2, 2, 1};  // 1-based
  const auto fam = GameSequence::from_json(doc);
  CHECK(fam.finite_family());
  CHECK(fam.length() == 4);
  CHECK(fam.family_index(2) == 1);
  CHECK(fam.at(1).selection.ref()[1] == doctest::Approx(0.3));
  CHECK(fam.at(3).selection.ref()[1] == doctest::Approx(0.797634410394343));
}

TEST_CASE("an invalid instance names its step") {
  Json doc = read_json(fixture("drifting.json"));
  doc["timeline"][3]["patch"]["agents"] = Json::array({{{"dim", 1}, {"box", {{"lo", 1}, {"hi", 0}}}},
                                                       {{"dim", 1}, {"box", {{"lo", 0}, {"hi", 1}}}}});
  try {
    GameSequence::from_json(doc);
    FAIL("expected InstanceValidation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InstanceValidation);
    CHECK(std::string(e.what()).find("t = 5") != std::string::npos);
  }
  Json fam = read_json(fixture("drifting.json"));
  fam.erase("timeline");
  fam["family"] = Json::array({Json::object()});
  fam["schedule"] = {0, 3};
  CHECK_THROWS_AS(GameSequence::from_json(fam), Error);
}

TEST_CASE("restarted HSDM tracks a drifting reference") {
  const auto seq = GameSequence::load(fixture("drifting.json"));
  std::vector<Vec> oracle;
  for (Index t = 0; t < seq.length(); ++t) {
    // no coupling: the selected point is the reference clipped to the box
    oracle.push_back(seq.at(t).selection.ref().cwiseMax(0.0).cwiseMin(1.0));
  }
  TrackingOptions opts;
  opts.oracle = oracle;
  const auto res = restarted_hsdm(seq, 0.2, 20, seq.at(0).initial_state(), opts);
  CHECK(res.states.size() == 201);
  CHECK(res.report.rows.size() == 200);
  REQUIRE(res.report.limsup.has_value());
  CHECK(*res.report.limsup < 0.05);
  CHECK(res.report.tau == doctest::Approx(tau_beta(0.2, res.report.sigma, res.report.lphi)));

  std::ostringstream os;
  res.report.write_csv(os, 9);
  CHECK(os.str().rfind("# seed=9\nt,err_vs_oracle,residual,phi,bound\n", 0) == 0);

  const auto [d1, d2] = measure_variability(seq, oracle);
  CHECK(d1 == doctest::Approx(*seq.delta1).epsilon(1e-6));
  CHECK(d2 >= 0.0);
}

TEST_CASE("restarted HSDM argument checks") {
  const auto seq = GameSequence::load(fixture("drifting.json"));
  CHECK_THROWS_AS(restarted_hsdm(seq, 0.2, 0, seq.at(0).initial_state()), Error);
  TrackingOptions opts;
  opts.oracle = {Vec::Zero(2)};
  try {
    restarted_hsdm(seq, 0.2, 2, seq.at(0).initial_state(), opts);
    FAIL("expected OracleUnavailable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OracleUnavailable);
  }
}
