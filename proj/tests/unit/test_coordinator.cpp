#include "hiercoord/coordinator.hpp"
#include "hiercoord/error.hpp"
#include "support/affine_map.hpp"

#include <doctest.h>

#include <cmath>

using namespace hiercoord;
using hctest::AffineMap;

TEST_CASE("filter_step examples") {
  const Vector prev{{2.0, -1.0}}, hat{{4.0, 3.0}};
  CHECK(filter_step(prev, hat, 1.0) == hat);
  CHECK(filter_step(prev, hat, 0.0) == prev);
  CHECK(filter_step(Vector{{2.0}}, Vector{{4.0}}, 0.5) == Vector{{3.0}});
  CHECK(filter_step(prev, hat, Vector{{0.5, 0.25}}) == Vector{{3.0, 0.0}});
  CHECK_THROWS(filter_step(prev, Vector{{1.0}}, 1.0));
}

TEST_CASE("scaled_norm") {
  CHECK(scaled_norm(Vector(), Vector()) == 0.0);
  CHECK(scaled_norm(Vector{{3.0, 4.0}}, Vector{{1.0, 1.0}}) == doctest::Approx(std::sqrt(12.5)));
  CHECK(scaled_norm(Vector{{2.0}}, Vector{{0.25}}) == 1.0);
}

TEST_CASE("fixed point of a random affine contraction matches the direct solve") {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    CAPTURE(trial);
    const int n = 6;
    AffineMap map;
    map.M = hctest::random_contraction(n, 0.8, rng);
    map.B = Matrix::Identity(n, 2).eval();
    map.b = hctest::random_vector(n, rng);
    const Vector r = hctest::random_vector(2, rng);
    FixedPointConfig cfg{5e-10, 100};
    auto res = fixed_point_solve(map, r, Vector::Zero(n), Vector::Ones(n), cfg);
    REQUIRE(res.converged);
    CHECK(res.iterations <= 100);
    CHECK((res.v_in_star - map.direct(r)).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(res.coherence_residual <= 10 * cfg.eps_max);

    // Geometric decrease over the tail.
    const auto& e = res.residuals;
    const std::size_t mid = e.size() / 2;
    const double rate = std::pow(e.back() / e[mid], 1.0 / static_cast<double>(e.size() - 1 - mid));
    CHECK(rate < 0.95);
  }
}

TEST_CASE("no coupling edges converge in one iteration") {
  AffineMap map;
  map.M = Matrix(0, 0);
  map.b = Vector(0);
  map.cost_v = 1.0;
  auto res = fixed_point_solve(map, Vector(), Vector(), Vector(), {});
  CHECK(res.converged);
  CHECK(res.iterations == 1);
  CHECK(res.residuals == std::vector<double>{0.0});
  CHECK(res.J_c == 0.0);
}

TEST_CASE("eigenvalue 1.5 diverges without filtering") {
  AffineMap map;
  map.M = Matrix{{1.5, 0.0}, {0.0, 0.3}};
  map.b = Vector{{1.0, 1.0}};
  FixedPointConfig cfg{1e-6, 40};
  auto res = fixed_point_solve(map, Vector(), Vector::Zero(2), Vector::Ones(2), cfg);
  CHECK(!res.converged);
  CHECK(res.iterations == 40);
  for (std::size_t i = 5; i < res.residuals.size(); ++i) {
    CHECK(res.residuals[i] / res.residuals[i - 1] == doctest::Approx(1.5).epsilon(1e-3));
  }
}

TEST_CASE("synthesize_filter examples") {
  CHECK(synthesize_filter(0.0) == 1.0);
  CHECK(synthesize_filter(0.9, 1.9) == 1.0);
  const double a = synthesize_filter(3.0, 1.9);
  CHECK(a == doctest::Approx(0.475));
  CHECK(std::abs((1 - a) + a * -3.0) == doctest::Approx(0.9));
  CHECK_THROWS_AS(synthesize_filter(std::nan("")), SolverError);
  CHECK_THROWS_AS(synthesize_filter(-1.0), SolverError);
}

TEST_CASE("synthesized filter tames the gain-3 map") {
  AffineMap map = hctest::scalar_map(-3.0, 4.0);
  FixedPointConfig cfg{1e-6, 200};
  const Vector r, v0 = Vector::Zero(1);
  auto plain = fixed_point_solve(map, r, v0, Vector::Ones(1), cfg);
  CHECK(!plain.converged);

  const double rho = estimate_map_gain(map, r, v0);
  CHECK(rho == doctest::Approx(3.0).epsilon(1e-6));
  auto filtered = fixed_point_solve(map, r, v0, Vector::Constant(1, synthesize_filter(rho)), cfg);
  CHECK(filtered.converged);
  CHECK(filtered.iterations <= 200);
  CHECK(std::abs(filtered.v_in_star[0] - 1.0) <= 1e-5);
  CHECK(filtered.coherence_residual <= 10 * cfg.eps_max);
}

TEST_CASE("estimate_map_gain on a known spectrum") {
  AffineMap map;
  map.M = Matrix{{0.5, 0.2, 0.0}, {0.0, -0.7, 0.0}, {0.1, 0.0, 0.2}};
  map.b = Vector::Zero(3);
  // Geometric mean of the growth factors: the start-up transient fades as 1/iterations.
  CHECK(estimate_map_gain(map, Vector(), Vector::Zero(3), 400) == doctest::Approx(0.7).epsilon(2e-3));
  CHECK(estimate_map_gain(map, Vector(), Vector::Zero(3), 8) == doctest::Approx(0.7).epsilon(0.1));
  AffineMap empty;
  empty.M = Matrix(0, 0);
  empty.b = Vector(0);
  CHECK(estimate_map_gain(empty, Vector(), Vector()) == 0.0);
}

TEST_CASE("fixed point config validation") {
  CHECK_THROWS_AS((FixedPointConfig{0.0, 10}.validate()), ConfigError);
  CHECK_THROWS_AS((FixedPointConfig{1e-6, 0}.validate()), ConfigError);
  CHECK_NOTHROW(FixedPointConfig{}.validate());
}
