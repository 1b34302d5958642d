#include "hiercoord/error.hpp"
#include "hiercoord/local_control.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace hiercoord;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

LinearModelData small_plant() {
  LinearModelData m = LinearModelData::zeros({2, 2, 1, 0, 2, 1});
  m.A = Matrix{{0.8, 0.1}, {-0.2, 0.6}};
  m.B_u = Matrix{{1.0, 0.2}, {0.0, 0.7}};
  m.B_v = Matrix{{0.3}, {-0.1}};
  m.C_y = Matrix{{1.0, 0.0}, {0.5, 1.0}};
  m.D_yu = Matrix{{0.0, 0.1}, {0.0, 0.0}};
  m.C_w = Matrix{{0.0, 1.0}};
  m.x_op = Vector{{1.0, 2.0}};
  m.u_op = Vector{{0.5, -0.5}};
  m.v_op = Vector{{0.2}};
  m.y_op = m.C_y * m.x_op;
  m.w_op = m.C_w * m.x_op;
  return m;
}

MpcConfig small_config(int horizon) {
  MpcConfig c;
  c.horizon = horizon;
  c.tracked_outputs = {0, 1};
  c.q = Vector{{1.0, 2.0}};
  c.r = Vector{{0.1, 0.3}};
  c.u_min = Vector::Constant(2, -kInf);
  c.u_max = Vector::Constant(2, kInf);
  return c;
}

ControlProblem small_problem(const LinearModelData& m, int horizon) {
  ControlProblem p;
  p.x0 = Vector{{1.4, 1.5}};
  p.u_last = Vector{{0.3, -0.2}};
  p.d = Vector();
  Profile v(1, horizon);
  for (int k = 0; k < horizon; ++k) v.values()[k] = 0.2 + 0.05 * k;
  p.v_in = v;
  p.reference = m.y_op + Vector{{0.3, -0.4}};
  return p;
}

// The objective is an exact quadratic in u for a linear model: recover its
// Hessian and gradient by probing and solve the normal equations directly.
Vector brute_force_optimum(const LinearModel& model, const ControlProblem& p, const MpcConfig& c) {
  const int nu = model.dims().nu;
  const int n = nu * c.horizon;
  auto J = [&](const Vector& u) { return control_objective(model, p, c, Profile(nu, c.horizon, u)); };
  const Vector zero = Vector::Zero(n);
  const double j0 = J(zero);
  Vector ji(n);
  for (int i = 0; i < n; ++i) ji[i] = J(Vector::Unit(n, i));
  Matrix H(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      H(i, k) = J(Vector::Unit(n, i) + Vector::Unit(n, k)) - ji[i] - ji[k] + j0;
    }
  }
  Vector g(n);
  for (int i = 0; i < n; ++i) g[i] = ji[i] - j0 - 0.5 * H(i, i);
  return H.ldlt().solve(-g);
}

}  // namespace

TEST_CASE("saturate clips to the actuator boxes") {
  const Vector lo{{0.0, 0.0}}, hi{{100.0, 55.0}};
  Profile u(2, 2, Vector{{120.0, -3.0, 50.0, 60.0}});
  CHECK(saturate(u, lo, hi).values() == Vector{{100.0, 0.0, 50.0, 55.0}});
  CHECK_THROWS(saturate(u, Vector{{0.0}}, hi));
}

TEST_CASE("equilibrium problem returns the equilibrium input") {
  const auto m = small_plant();
  auto model = std::make_shared<LinearModel>(m);
  const int N = 5;
  const auto c = small_config(N);
  ControlProblem p;
  p.x0 = m.x_op;
  p.u_last = m.u_op;
  p.v_in = Profile::constant(m.v_op, N);
  p.reference = m.y_op;

  auto lin = lin_mpc_solve(*model, p, c);
  for (int k = 0; k < N; ++k) CHECK((lin.u.step(k) - m.u_op).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(lin.objective <= 1e-20);

  NmpcConfig nc;
  nc.mpc = c;
  auto nl = nmpc_solve(*model, p, nc);
  for (int k = 0; k < N; ++k) CHECK((nl.u.step(k) - m.u_op).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(nl.objective <= 1e-12);
  CHECK(!nl.budget_exhausted);
}

TEST_CASE("deadbeat integrator") {
  // x+ = x + u, tracked y = x, no move penalty worth mentioning: one move closes the gap.
  LinearModelData m = LinearModelData::zeros({1, 1, 0, 0, 1, 0});
  m.A(0, 0) = 1.0;
  m.B_u(0, 0) = 1.0;
  m.C_y(0, 0) = 1.0;
  auto model = std::make_shared<LinearModel>(m);
  MpcConfig c;
  c.horizon = 3;
  c.tracked_outputs = {0};
  c.q = Vector{{1.0}};
  c.r = Vector{{1e-10}};
  c.u_min = Vector{{-kInf}};
  c.u_max = Vector{{kInf}};
  ControlProblem p{Vector{{0.0}}, Vector{{0.0}}, Vector(), Profile(0, 3), Vector{{2.0}}, {}};
  auto plan = lin_mpc_solve(*model, p, c);
  CHECK(plan.u.values()[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(std::abs(plan.u.values()[1]) <= 1e-6);
  CHECK(std::abs(plan.u.values()[2]) <= 1e-6);
}

TEST_CASE("linear MPC matches the brute-force optimum") {
  const auto m = small_plant();
  LinearModel model(m);
  for (int N : {1, 3, 6}) {
    CAPTURE(N);
    const auto c = small_config(N);
    const auto p = small_problem(m, N);
    const Vector want = brute_force_optimum(model, p, c);
    const auto plan = lin_mpc_solve(model, p, c);
    CHECK((plan.u.values() - want).cwiseAbs().maxCoeff() <= 1e-6);
    // No nearby point does better.
    std::mt19937 rng(static_cast<unsigned>(N));
    std::normal_distribution<double> g(0.0, 1e-3);
    for (int t = 0; t < 20; ++t) {
      Vector du = plan.u.values();
      for (Eigen::Index i = 0; i < du.size(); ++i) du[i] += g(rng);
      CHECK(control_objective(model, p, c, Profile(2, N, du)) >= plan.objective - 1e-12);
    }
  }
}

TEST_CASE("NMPC on a linear model agrees with linear MPC") {
  const auto m = small_plant();
  NonlinearModel model({m, {{"bilinear", 'x', 0, 0.0, {0, 2}}}});
  LinearModel lin(m);
  const int N = 4;
  NmpcConfig nc;
  nc.mpc = small_config(N);
  nc.max_iterations = 5000;
  nc.tolerance = 1e-15;
  const auto p = small_problem(m, N);
  const auto a = lin_mpc_solve(lin, p, nc.mpc);
  const auto b = nmpc_solve(model, p, nc);
  CHECK(std::abs(b.objective - a.objective) <= 1e-4 * std::abs(a.objective));
  CHECK((b.u.values() - a.u.values()).cwiseAbs().maxCoeff() <= 1e-3);

  // Accepted iterates never increase the objective.
  for (std::size_t i = 1; i < b.history.size(); ++i) CHECK(b.history[i] <= b.history[i - 1]);
  CHECK(b.history.back() == b.objective);
}

TEST_CASE("NMPC budget flag") {
  const auto m = small_plant();
  LinearModel model(m);
  NmpcConfig nc;
  nc.mpc = small_config(4);
  nc.max_iterations = 1;
  const auto plan = nmpc_solve(model, small_problem(m, 4), nc);
  CHECK(plan.budget_exhausted);
  CHECK(plan.iterations == 1);
  CHECK(plan.objective < plan.history.front());
}

TEST_CASE("NMPC respects the input box") {
  const auto m = small_plant();
  LinearModel model(m);
  NmpcConfig nc;
  nc.mpc = small_config(4);
  nc.mpc.u_min = Vector{{0.4, -0.6}};
  nc.mpc.u_max = Vector{{0.45, -0.4}};
  const auto plan = nmpc_solve(model, small_problem(m, 4), nc);
  for (int k = 0; k < 4; ++k) {
    CHECK((plan.u.step(k).array() >= nc.mpc.u_min.array()).all());
    CHECK((plan.u.step(k).array() <= nc.mpc.u_max.array()).all());
  }
}

TEST_CASE("objective gradient agrees with central differences") {
  auto m = small_plant();
  NonlinearModel model({m, {{"bilinear", 'x', 1, 0.3, {0, 2}}, {"sqrt_flow", 'y', 0, 0.2, {1, 3}}}});
  const int N = 4;
  const auto c = small_config(N);
  const auto p = small_problem(m, N);
  Profile u = Profile::constant(Vector{{0.7, -0.3}}, N);
  const Vector g = objective_gradient(model, p, c, u, 1e-7);
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < u.values().size(); ++i) {
    Profile up = u, dn = u;
    up.values()[i] += h;
    dn.values()[i] -= h;
    const double cd = (control_objective(model, p, c, up) - control_objective(model, p, c, dn)) / (2 * h);
    CHECK(g[i] == doctest::Approx(cd).epsilon(1e-4).scale(1.0));
  }
}

TEST_CASE("ill-posed linear MPC") {
  LinearModelData m = LinearModelData::zeros({1, 1, 0, 0, 1, 0});
  m.A(0, 0) = 0.5;
  m.C_y(0, 0) = 1.0;  // B_u = 0: the output cannot be reached
  MpcConfig c;
  c.horizon = 3;
  c.tracked_outputs = {0};
  c.q = Vector{{1.0}};
  c.r = Vector{{0.0}};
  c.u_min = Vector{{-kInf}};
  c.u_max = Vector{{kInf}};
  CHECK_THROWS_WITH_AS(LinearMpc(std::make_shared<LinearModel>(m), c),
                       "ill-posed MPC; add input regularization", SolverError);
  c.r = Vector{{1.0}};
  CHECK_NOTHROW(LinearMpc(std::make_shared<LinearModel>(m), c));
}

TEST_CASE("controller configuration validation") {
  const Dims d{2, 2, 1, 0, 2, 1};
  auto c = small_config(3);
  CHECK_NOTHROW(c.validate(d));
  c.tracked_outputs = {5, 0};
  CHECK_THROWS_AS(c.validate(d), ConfigError);
  c = small_config(3);
  c.u_min = Vector{{1.0, 0.0}};
  c.u_max = Vector{{0.0, 1.0}};
  CHECK_THROWS_AS(c.validate(d), ConfigError);
  NmpcConfig nc;
  nc.mpc = small_config(3);
  nc.backtrack = 1.0;
  CHECK_THROWS_AS(nc.validate(d), ConfigError);
}
