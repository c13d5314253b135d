#include <doctest.h>

#include "support.hpp"

#include "gne/market.hpp"

#include <sstream>

using namespace gne;
using gne::testing::fixture;

TEST_CASE("ieee13 network") {
  const auto net = BusNetwork::load(fixture("ieee13.json"));
  CHECK(net.size() == 13);
  CHECK(net.lines.size() == 12);
  CHECK(net.hours() == 24);
  CHECK(net.partners(0).size() == 12);
  CHECK_NOTHROW(net.validate());
}

TEST_CASE("day-ahead dimensions") {
  const auto net = BusNetwork::load(fixture("ieee13.json"));
  const auto g = build_day_ahead(net, 24);
  Index n = 0;
  for (Index i = 0; i < net.size(); ++i) {
    CHECK(g.layout.dim(i) == 24 * (4 + static_cast<Index>(net.partners(i).size())));
    n += g.layout.dim(i);
  }
  CHECK(n == 4992);
  CHECK(g.counts.reciprocity == 3744);
  CHECK(g.counts.power_flow == 624);
  CHECK(g.counts.line_limits == 576);
  CHECK(g.counts.storage == 288);
  CHECK(g.spec->m == g.counts.total());
  CHECK(g.spec->layout().size() == 141024);
  CHECK(g.spec->affine());
}

TEST_CASE("market layout indexing") {
  const auto net = BusNetwork::load(fixture("ieee13.json"));
  const MarketLayout l(net, 2);
  CHECK(l.var(0, 1, MarketLayout::Grid) == l.per_hour(0) + 1);
  CHECK(l.theta(0, 0) == l.per_hour(0) - 1);
  CHECK(l.trade(0, 0, 0) == 3);
  CHECK(l.partner_slot(0, 1) == 0);
  CHECK(l.partner_slot(1, 0) == 0);
  CHECK(l.partner_slot(1, 2) == 1);
}

TEST_CASE("network validation errors") {
  Json doc = read_json(fixture("ieee13.json"));
  SUBCASE("islanded bus") {
    doc["lines"].erase(doc["lines"].size() - 1);
    try {
      BusNetwork::from_json(doc).validate();
      FAIL("expected IslandedBus");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::IslandedBus);
    }
  }
  SUBCASE("profile mismatch") {
    doc["buses"][0]["demand"].erase(0);
    try {
      BusNetwork::from_json(doc);
      FAIL("expected ProfileMismatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ProfileMismatch);
    }
  }
  SUBCASE("horizon past the profiles") {
    const auto net = BusNetwork::from_json(doc);
    try {
      build_day_ahead(net, 25);
      FAIL("expected ProfileMismatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ProfileMismatch);
    }
  }
}

TEST_CASE("real-time needs a plan") {
  const auto net = BusNetwork::load(fixture("ieee13.json"));
  DayAheadPlan empty;
  try {
    build_real_time(net, empty);
    FAIL("expected PlanMissing");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PlanMissing);
  }
}

TEST_CASE("real-time windows and flows") {
  const auto net = BusNetwork::load(fixture("ieee13.json"));
  const auto da = build_day_ahead(net, 24);
  const auto plan = plan_from_solution(net, da, da.spec->initial_state());
  CHECK(plan.soc.rows() == 13);
  CHECK(plan.soc.cols() == 25);
  const auto rt = build_real_time(net, plan, 8, 12, 5);
  CHECK(rt.sequence.length() == 12);
  CHECK(rt.steps.size() == 12);
  CHECK(rt.steps[0].dt == 0.25);
  CHECK(rt.steps[1].first_hour == 2);
  CHECK(rt.steps[0].spec->layout().size() == 47008);

  const auto& step = rt.steps[0];
  Rng rng(1);
  const Vec w = uniform_vector(rng, step.spec->layout().size(), -0.1, 0.1);
  const Mat flows = line_flows(net, step, w);
  CHECK(flows.rows() == 12);
  CHECK(flows.cols() == 8);
  const Line& ln = net.lines[0];
  const double expect = ln.b * (w[step.spec->layout().x_offset(ln.from) + step.layout.theta(ln.from, 3)] -
                                w[step.spec->layout().x_offset(ln.to) + step.layout.theta(ln.to, 3)]);
  CHECK(flows(0, 3) == doctest::Approx(expect));
  double energy = 0.0;
  for (Index l = 0; l < flows.rows(); ++l) {
    for (Index h = 0; h < flows.cols(); ++h) energy += step.q_pf[l * flows.cols() + h] * flows(l, h) * flows(l, h);
  }
  CHECK(flow_energy(net, step, w) == doctest::Approx(energy));

  std::ostringstream os;
  write_line_flows(os, net, flows, 5, 2.0, 0.25);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "# seed=5");
  std::getline(in, line);
  CHECK(line == "line,hour,flow");
  Index rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 12 * 8);
}
