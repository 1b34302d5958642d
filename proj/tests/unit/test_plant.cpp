#include "hiercoord/coldbox.hpp"
#include "hiercoord/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace hiercoord;

namespace {

std::vector<Vector> op_inputs(const PlantSpec& p) {
  std::vector<Vector> u;
  for (const auto& unit : p.units) u.push_back(unit.model->operating_point().u);
  return u;
}

std::vector<Vector> op_disturbances(const PlantSpec& p) {
  std::vector<Vector> d;
  for (const auto& unit : p.units) d.push_back(unit.model->operating_point().d);
  return d;
}

Vector concat(const std::vector<Vector>& parts, const std::vector<int>& units) {
  Eigen::Index n = 0;
  for (int u : units) n += parts[static_cast<std::size_t>(u - 1)].size();
  Vector out(n);
  Eigen::Index at = 0;
  for (int u : units) {
    const Vector& p = parts[static_cast<std::size_t>(u - 1)];
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("cold box plant topology") {
  const PlantSpec p = coldbox_plant();
  CHECK(p.units.size() == 4);
  CHECK(p.edges.size() == 8);
  CHECK(validate_plant(p).ok());
  CHECK(p.unit_index("NEF34") == 3);
  CHECK_THROWS_AS(p.unit_index("NEF5"), ConfigError);

  auto four = decompose(p, build_coldbox_4ss().decomposition);
  const Topology& t4 = four.network->topology();
  CHECK(t4.edges().size() == 8);
  const auto out2 = t4.stack_out({2});
  REQUIRE(out2.size() == 3);
  CHECK(t4.edges()[out2[0]].dest.index == 1);
  CHECK(t4.edges()[out2[1]].dest.index == 3);
  CHECK(t4.edges()[out2[2]].dest.index == 4);
  CHECK(t4.controlled() == std::vector<SubsystemId>{{1}, {4}});

  auto two = decompose(p, build_coldbox_2ss().decomposition);
  CHECK(two.network->topology().edges().size() == 2);
  CHECK(two.network->topology().controlled() == std::vector<SubsystemId>{{1}, {2}});
  CHECK(two.layout[1].units == std::vector<int>{2, 3, 4});
}

TEST_CASE("decomposition validation") {
  const PlantSpec p = coldbox_plant();
  CHECK(!validate_decomposition(p, {{1}, {2, 3}}).ok());       // unit 4 missing
  CHECK(!validate_decomposition(p, {{1, 2}, {2, 3, 4}}).ok());  // unit 2 twice
  CHECK(validate_decomposition(p, {{1, 2}, {3, 4}}).ok());
}

TEST_CASE("equilibrium is a fixed point of the plant") {
  const PlantSpec p = coldbox_plant();
  Plant plant(p);
  const auto x0 = plant.operating_state();
  auto s = step_plant(plant, x0, op_inputs(p), op_disturbances(p));
  for (std::size_t i = 0; i < x0.size(); ++i) {
    CHECK(max_abs(s.x_next[i] - x0[i]) <= 1e-12);
    CHECK(max_abs(s.y[i] - p.units[i].model->operating_point().y) <= 1e-12);
  }
}

TEST_CASE("a larger heater load lowers the bath level") {
  const PlantSpec p = coldbox_plant();
  Plant plant(p);
  auto d = op_disturbances(p);
  d[0][0] += 5.0;
  auto s = step_plant(plant, plant.operating_state(), op_inputs(p), d);
  CHECK(s.x_next[0][0] < 60.5);
}

TEST_CASE("inputs outside the actuator box are rejected") {
  const PlantSpec p = coldbox_plant();
  Plant plant(p);
  auto u = op_inputs(p);
  u[0][1] = 120.0;  // CV155 above 100 %
  CHECK_THROWS_AS(step_plant(plant, plant.operating_state(), u, op_disturbances(p)), std::invalid_argument);
  u = op_inputs(p);
  u[0][0] = -3.0;  // NCR22a below 0 W
  CHECK_THROWS_AS(step_plant(plant, plant.operating_state(), u, op_disturbances(p)), std::invalid_argument);
}

TEST_CASE("every decomposition reproduces the plant open loop") {
  const PlantSpec p = coldbox_plant();
  Plant plant(p);
  const int N = p.horizon;

  // Open-loop excursion away from the operating point.
  auto x = plant.operating_state();
  x[0][0] += 1.0;
  x[2][1] -= 0.3;
  x[3][0] += 0.2;
  const auto x_start = x;
  auto u = op_inputs(p);
  u[0][1] = 45.0;
  u[3][0] = 6.5;
  const auto d = op_disturbances(p);
  std::vector<PlantStep> steps;
  for (int k = 0; k < N; ++k) {
    steps.push_back(step_plant(plant, x, u, d, k));
    x = steps.back().x_next;
  }

  for (const auto& groups : {build_coldbox_2ss().decomposition, build_coldbox_4ss().decomposition}) {
    auto net = decompose(p, groups);
    for (std::size_t s = 0; s < groups.size(); ++s) {
      const auto& lay = net.layout[s];
      const Subsystem& sub = net.network->subsystem({static_cast<int>(s) + 1});
      const Dims& dm = sub.model().dims();
      Profile v_in(dm.nv, N);
      for (int k = 0; k < N; ++k) {
        for (int j = 0; j < dm.nv; ++j) {
          const auto [unit, idx] = lay.v_source[static_cast<std::size_t>(j)];
          v_in.step(k)[j] = steps[static_cast<std::size_t>(k)].v[static_cast<std::size_t>(unit - 1)][idx];
        }
      }
      auto sim = simulate_profile(sub.model(), concat(x_start, lay.units),
                                  Profile::constant(concat(u, lay.units), N), v_in, concat(d, lay.units));
      for (int k = 0; k < N; ++k) {
        const Vector y = concat(steps[static_cast<std::size_t>(k)].y, lay.units);
        CHECK(max_abs(sim.y.step(k) - y) <= 1e-10);
        for (int j = 0; j < dm.nw; ++j) {
          const auto [unit, idx] = lay.w_source[static_cast<std::size_t>(j)];
          CHECK(std::abs(sim.w.step(k)[j] - steps[static_cast<std::size_t>(k)].w[static_cast<std::size_t>(unit - 1)][idx]) <= 1e-10);
        }
      }
    }
  }
}

TEST_CASE("subsystem responses at the operating point") {
  const PlantSpec p = coldbox_plant();
  auto net = decompose(p, build_coldbox_4ss().decomposition);
  const Network& nw = *net.network;
  const Vector v0 = nw.nominal_in();

  // NEF2 carries no cost of its own.
  const Subsystem& nef2 = nw.subsystem({2});
  auto r2 = nef2.respond(nef2.initial_state(), std::nullopt, nw.gather_in({2}, v0));
  CHECK(r2.cost == 0.0);
  CHECK_THROWS(nef2.respond(nef2.initial_state(), Vector{{1.0}}, nw.gather_in({2}, v0)));

  // M_out sits below its bound: no violation cost.
  const Subsystem& nef34 = nw.subsystem({3});
  auto r3 = nef34.respond(nef34.initial_state(), std::nullopt, nw.gather_in({3}, v0));
  CHECK(r3.cost == 0.0);
  CHECK((r3.y.values().array() < 0.07).all());

  // JT at its set-point with nominal couplings and no input weight.
  const Subsystem& jt = nw.subsystem({1});
  CHECK(jt.setpoint_dim() == 2);
  auto r1 = jt.respond(jt.initial_state(), Vector{{60.5, 4.6}}, nw.gather_in({1}, v0));
  CHECK(r1.cost <= 1e-12);
  CHECK_THROWS(jt.respond(jt.initial_state(), std::nullopt, nw.gather_in({1}, v0)));
}
