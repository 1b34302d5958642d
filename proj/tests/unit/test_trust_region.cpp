#include "hiercoord/error.hpp"
#include "hiercoord/trust_region.hpp"

#include <doctest.h>

#include <algorithm>
#include <limits>

using namespace hiercoord;

namespace {

TrustRegionConfig config_1d(int grid = 3) {
  TrustRegionConfig c;
  c.grid_size = grid;
  c.lower = Vector{{-10.0}};
  c.upper = Vector{{10.0}};
  c.radius_init = Vector{{1.0}};
  c.radius_min = Vector{{1e-3}};
  c.radius_max = Vector{{5.0}};
  return c;
}

TrustRegionConfig config_2d() {
  TrustRegionConfig c;
  c.grid_size = 3;
  c.lower = Vector{{-5.0, -5.0}};
  c.upper = Vector{{5.0, 5.0}};
  c.radius_init = Vector{{0.5, 0.5}};
  c.radius_min = Vector{{1e-4, 1e-4}};
  c.radius_max = Vector{{2.0, 2.0}};
  return c;
}

std::vector<CloudPoint> sample(const std::vector<Vector>& rs, double (*f)(const Vector&)) {
  std::vector<CloudPoint> out;
  for (const auto& r : rs) out.push_back({r, f(r), true});
  return out;
}

double quad_1d(const Vector& r) { return 3 + 2 * r[0] + r[0] * r[0]; }
double concave_1d(const Vector& r) { return -r[0] * r[0] + 0.5 * r[0]; }
double bowl_2d(const Vector& r) {
  const double a = r[0] - 1.3, b = r[1] + 0.7;
  return 4 + 2 * a * a + a * b + 3 * b * b;
}

}  // namespace

TEST_CASE("grid examples") {
  auto c = config_1d();
  auto s = initial_region(Vector{{0.0}}, c);
  auto g = build_grid(s, c);
  REQUIRE(g.size() == 3);
  CHECK(g[0][0] == 0.0);
  std::vector<double> vals;
  for (auto& p : g) vals.push_back(p[0]);
  std::sort(vals.begin(), vals.end());
  CHECK(vals == std::vector<double>{-1.0, 0.0, 1.0});

  auto c2 = config_2d();
  CHECK(build_grid(initial_region(Vector{{0.0, 0.0}}, c2), c2).size() == 9);

  auto clip = config_1d();
  clip.upper = Vector{{1.0}};
  auto sc = initial_region(Vector{{0.9}}, clip);
  sc.radius = Vector{{0.5}};
  double hi = -1;
  for (auto& p : build_grid(sc, clip)) hi = std::max(hi, p[0]);
  CHECK(hi == 1.0);

  auto one = config_1d(1);
  CHECK(build_grid(initial_region(Vector{{2.0}}, one), one).size() == 1);
  TrustRegionState empty{Vector(), Vector(), {}};
  CHECK_THROWS(build_grid(empty, c));
}

TEST_CASE("quadratic fit recovers a 1-D quadratic") {
  auto m = quadratic_fit(sample({Vector{{-1.0}}, Vector{{0.0}}, Vector{{1.0}}, Vector{{0.5}}}, quad_1d));
  CHECK(m.c == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(std::abs(m.g[0] - 2.0) <= 1e-8);
  CHECK(std::abs(m.H(0, 0) - 2.0) <= 1e-8);
  CHECK(m.positive_definite());
  CHECK(m.value(Vector{{2.0}}) == doctest::Approx(11.0));
}

TEST_CASE("quadratic fit recovers a 2-D quadratic") {
  auto c = config_2d();
  auto s = initial_region(Vector{{0.2, 0.1}}, c);
  auto m = quadratic_fit(sample(build_grid(s, c), bowl_2d));
  CHECK(m.form == QuadModel::Form::Full);
  CHECK(!m.reduced);
  const Matrix H{{4.0, 1.0}, {1.0, 6.0}};
  CHECK((m.H - H).cwiseAbs().maxCoeff() <= 1e-6);
  const Vector rstar{{1.3, -0.7}};
  CHECK((m.g + H * rstar).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(m.value(rstar) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("constant cloud") {
  std::vector<CloudPoint> cloud{{Vector{{0.0}}, 5.0, true}, {Vector{{1.0}}, 5.0, true}, {Vector{{-1.0}}, 5.0, true}};
  auto m = quadratic_fit(cloud);
  CHECK(std::abs(m.g[0]) <= 1e-12);
  CHECK(std::abs(m.H(0, 0)) <= 1e-12);
  CHECK(!m.positive_definite());

  auto c = config_1d();
  TrustRegionState s{Vector{{0.0}}, Vector{{1.0}}, cloud};
  auto step = trust_region_step(s, m, c, [](const Vector&) -> CloudPoint { FAIL("no evaluation expected"); return {}; });
  CHECK(s.center[0] == 0.0);
  CHECK(!step.improved);
}

TEST_CASE("reduced fits") {
  // A plus-shaped 2-D cloud cannot support the cross term.
  std::vector<Vector> plus{Vector{{0.0, 0.0}}, Vector{{1.0, 0.0}}, Vector{{-1.0, 0.0}},
                           Vector{{0.0, 1.0}}, Vector{{0.0, -1.0}}};
  auto m = quadratic_fit(sample(plus, bowl_2d));
  CHECK(m.form == QuadModel::Form::Diagonal);
  CHECK(m.reduced);

  auto lin = quadratic_fit(sample({Vector{{0.0}}, Vector{{1.0}}}, quad_1d));
  CHECK(lin.form == QuadModel::Form::Linear);
  CHECK(lin.reduced);
  CHECK(lin.g[0] == doctest::Approx(3.0));

  std::vector<CloudPoint> failed{{Vector{{0.0}}, 1.0, false}};
  CHECK_THROWS_AS(quadratic_fit(failed), SolverError);
}

TEST_CASE("positive definite model: analytic vertex") {
  auto c = config_1d();
  TrustRegionState s = initial_region(Vector{{0.0}}, c);
  s.radius = Vector{{2.0}};
  s.cloud = sample(build_grid(s, c), quad_1d);
  auto m = quadratic_fit(s.cloud);
  auto step = trust_region_step(s, m, c, [](const Vector& r) { return CloudPoint{r, quad_1d(r), true}; });
  CHECK(step.from_model);
  CHECK(step.candidate.r[0] == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("concave model takes the best grid point") {
  auto c = config_1d();
  TrustRegionState s = initial_region(Vector{{0.0}}, c);
  s.cloud = sample(build_grid(s, c), concave_1d);
  auto m = quadratic_fit(s.cloud);
  CHECK(!m.positive_definite());
  auto step = trust_region_step(s, m, c, [](const Vector&) -> CloudPoint { FAIL("no evaluation expected"); return {}; });
  CHECK(!step.from_model);
  CHECK(step.candidate.r[0] == -1.0);  // concave_1d(-1) = -1.5, the grid minimum
  CHECK(s.center[0] == -1.0);
}

TEST_CASE("radius update rules") {
  auto c = config_1d();
  TrustRegionState s = initial_region(Vector{{2.0}}, c);
  s.cloud = sample(build_grid(s, c), quad_1d);
  auto m = quadratic_fit(s.cloud);
  auto step = trust_region_step(s, m, c, [](const Vector& r) { return CloudPoint{r, quad_1d(r), true}; });
  CHECK(step.improved);
  CHECK(s.radius[0] == c.radius_init[0] * c.gamma_e);

  // No improvement over the center: contract.
  TrustRegionState t = initial_region(Vector{{-1.0}}, c);
  t.cloud = sample(build_grid(t, c), quad_1d);
  auto m2 = quadratic_fit(t.cloud);
  auto step2 = trust_region_step(t, m2, c, [](const Vector& r) { return CloudPoint{r, quad_1d(r), true}; });
  CHECK(!step2.improved);
  CHECK(t.radius[0] == c.radius_init[0] * c.gamma_c);
  CHECK(t.center[0] == -1.0);
}

TEST_CASE("optimize_setpoint reaches the minimiser of a synthetic quadratic") {
  auto c = config_2d();
  TrustRegionState s = initial_region(Vector{{0.0, 0.0}}, c);
  auto batch = [](const std::vector<Vector>& rs) { return sample(rs, bowl_2d); };
  const Vector rstar{{1.3, -0.7}};
  int periods = 0;
  OptimizeResult res;
  while (periods < 5) {
    res = optimize_setpoint(s, c, batch);
    ++periods;
    if ((res.r_opt - rstar).cwiseAbs().maxCoeff() <= 1e-3) break;
  }
  CHECK(periods <= 5);
  CHECK((res.r_opt - rstar).cwiseAbs().maxCoeff() <= 1e-3);
  CHECK(res.any_converged);
  CHECK(res.J == doctest::Approx(bowl_2d(res.r_opt)));
}

TEST_CASE("optimize_setpoint with a single grid point keeps the center") {
  auto c = config_1d(1);
  TrustRegionState s = initial_region(Vector{{0.7}}, c);
  int calls = 0;
  auto res = optimize_setpoint(s, c, [&](const std::vector<Vector>& rs) {
    calls += static_cast<int>(rs.size());
    return sample(rs, quad_1d);
  });
  CHECK(res.r_opt[0] == 0.7);
  CHECK(calls == 1);
}

TEST_CASE("optimize_setpoint when nothing converges") {
  auto c = config_1d();
  TrustRegionState s = initial_region(Vector{{0.5}}, c);
  auto res = optimize_setpoint(s, c, [](const std::vector<Vector>& rs) {
    std::vector<CloudPoint> out;
    for (auto& r : rs) out.push_back({r, 1.0, false});
    return out;
  });
  CHECK(!res.any_converged);
  CHECK(res.r_opt[0] == 0.5);
  CHECK(s.radius[0] == c.radius_init[0] * c.gamma_c);
}

TEST_CASE("trust region config validation") {
  auto c = config_1d();
  c.gamma_e = 1.0;
  CHECK_THROWS_AS(c.validate(1), ConfigError);
  c = config_1d();
  c.radius_init = Vector{{10.0}};
  CHECK_THROWS_AS(c.validate(1), ConfigError);
  c = config_1d();
  CHECK_THROWS_AS(c.validate(2), ConfigError);
}
