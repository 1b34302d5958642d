#include "hiercoord/costs.hpp"
#include "hiercoord/error.hpp"

#include <doctest.h>

#include <random>

using namespace hiercoord;

TEST_CASE("tracking cost at the set-point is zero") {
  const Vector r{{1.0, 2.0}};
  auto spec = LocalCostSpec::tracking({0, 1}, Vector{{1e4, 1e4}}, r);
  CHECK(tracking_cost(Profile::constant(r, 5), Profile(0, 5), spec) == 0.0);
}

TEST_CASE("tracking cost unit deviation") {
  auto spec = LocalCostSpec::tracking({0, 1}, Vector{{1e4, 1e4}}, Vector{{0.0, 0.0}});
  CHECK(tracking_cost(Profile::constant(Vector{{1.0, 0.0}}, 1), Profile(0, 1), spec) == 1e4);
  CHECK(local_cost(Profile::constant(Vector{{1.0, 0.0}}, 1), Profile(0, 1), spec) == 1e4);
}

TEST_CASE("tracking cost input penalty") {
  auto spec = LocalCostSpec::tracking({0}, Vector{{1.0}}, Vector{{0.0}}, Vector{{2.0, 3.0}});
  const Profile u(2, 2, Vector{{1, 1, 2, 0}});
  CHECK(tracking_cost(Profile(1, 2), u, spec) == 2 + 3 + 8);
}

TEST_CASE("constraint cost") {
  auto spec = LocalCostSpec::constraint({0}, Vector{{1e12}}, Vector{{0.07}});
  CHECK(constraint_cost(Profile::constant(Vector{{0.05}}, 4), spec) == 0.0);
  CHECK(constraint_cost(Profile::constant(Vector{{0.08}}, 1), spec) == doctest::Approx(1e8).epsilon(1e-9));
  CHECK(violation_amount(Vector{{0.08}}, spec) == doctest::Approx(0.01));
  CHECK(violation_amount(Vector{{0.01}}, spec) == 0.0);
}

TEST_CASE("costs are quadratic in the deviation") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  const int N = 4;
  auto spec = LocalCostSpec::tracking({0, 2}, Vector{{3.0, 0.5}}, Vector{{0.0, 0.0}});
  Profile y(3, N);
  for (Eigen::Index i = 0; i < y.values().size(); ++i) y.values()[i] = u(rng);
  const double base = tracking_cost(y, Profile(0, N), spec);
  CHECK(tracking_cost(Profile(3, N, 2.0 * y.values()), Profile(0, N), spec) == doctest::Approx(4 * base));
  CHECK(tracking_cost(Profile(3, N, -y.values()), Profile(0, N), spec) == doctest::Approx(base));

  auto con = LocalCostSpec::constraint({1}, Vector{{2.0}}, Vector{{0.0}});
  const double c1 = constraint_cost(y, con);
  CHECK(constraint_cost(Profile(3, N, 2.0 * y.values()), con) == doctest::Approx(4 * c1));
  CHECK(c1 >= 0.0);
}

TEST_CASE("zero spec and validation") {
  CHECK(LocalCostSpec::zero().is_zero());
  CHECK(local_cost(Profile::constant(Vector{{5.0}}, 3), Profile(0, 3), LocalCostSpec::zero()) == 0.0);
  auto neg = LocalCostSpec::tracking({0}, Vector{{-1.0}}, Vector{{0.0}});
  CHECK_THROWS_AS(neg.validate(1, 0), ConfigError);
  auto out_of_range = LocalCostSpec::tracking({3}, Vector{{1.0}}, Vector{{0.0}});
  CHECK_THROWS_AS(out_of_range.validate(2, 0), ConfigError);
  auto bad_r = LocalCostSpec::tracking({0}, Vector{{1.0}}, Vector{{0.0}}, Vector{{1.0}});
  CHECK_THROWS_AS(bad_r.validate(1, 2), ConfigError);
}
