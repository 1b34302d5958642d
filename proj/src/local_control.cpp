#include "hiercoord/local_control.hpp"

#include "hiercoord/error.hpp"

#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace hiercoord {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

void check_problem(const Dims& dims, const ControlProblem& p, const MpcConfig& c) {
  if (p.x0.size() != dims.nx) throw std::invalid_argument("control problem: x0 dimension");
  if (p.u_last.size() != dims.nu) throw std::invalid_argument("control problem: u_last dimension");
  if (p.d.size() != dims.nd) throw std::invalid_argument("control problem: disturbance dimension");
  if (p.v_in.dim() != dims.nv || (dims.nv > 0 && p.v_in.horizon() != c.horizon)) {
    throw std::invalid_argument("control problem: coupling profile shape");
  }
  if (p.reference.size() != static_cast<Eigen::Index>(c.tracked_outputs.size())) {
    throw std::invalid_argument("control problem: reference dimension");
  }
  if (!p.x0.allFinite() || !p.v_in.values().allFinite() || !p.reference.allFinite()) {
    throw std::invalid_argument("control problem: non-finite input");
  }
}

// Objective split by stage so the gradient can restart from a stored state.
// Stage j (1..N) holds the tracking term of yhat(k+j) = h(x_j, u_j', v_j')
// with j' = min(j, N-1), plus the move term of u_{j-1}.
struct Rollout {
  std::vector<Vector> states;  // x_0 .. x_N
  std::vector<double> stages;  // index j-1 for stage j
};

double stage_cost(const ControlProblem& p, const MpcConfig& c, const Profile& u, int j,
                  const Vector& y) {
  double cost = 0.0;
  for (std::size_t m = 0; m < c.tracked_outputs.size(); ++m) {
    const double e = y[c.tracked_outputs[m]] - p.reference[static_cast<Eigen::Index>(m)];
    cost += c.q[static_cast<Eigen::Index>(m)] * e * e;
  }
  const int i = j - 1;
  for (int l = 0; l < u.dim(); ++l) {
    const double prev = i == 0 ? p.u_last[l] : u.step(i - 1)[l];
    const double du = u.step(i)[l] - prev;
    cost += c.r[l] * du * du;
  }
  return cost;
}

// Simulates from x_from = x_{from} and returns the sum of stages from..N
// (stage 0 does not exist; from = 0 starts with the first state update).
double rollout(const Dynamics& model, const ControlProblem& p, const MpcConfig& c,
               const Profile& u, int from, const Vector& x_from, Rollout* record) {
  const Dims& dm = model.dims();
  const int n = c.horizon;
  static const Vector empty;
  thread_local Vector x, x_next, y, w;
  auto uk = [&](int k) { return dm.nu > 0 ? Vector(u.step(k)) : empty; };
  auto vk = [&](int k) { return dm.nv > 0 ? Vector(p.v_in.step(k)) : empty; };
  auto check = [&](int k) {
    if (!x_next.allFinite() || !y.allFinite()) {
      throw SimulationError(fmt::format("numerical blow-up at step {}", k), k);
    }
  };
  x = x_from;
  int j = from;
  if (j == 0) {
    model.step(x, uk(0), vk(0), p.d, x_next);
    if (!x_next.allFinite()) throw SimulationError("numerical blow-up at step 0", 0);
    x.swap(x_next);
    j = 1;
    if (record) record->states[1] = x;
  }
  double total = 0.0;
  for (; j <= n; ++j) {
    const int h = std::min(j, n - 1);
    if (j < n) {
      model.evaluate(x, uk(h), vk(h), p.d, y, w, x_next);
    } else {
      model.outputs(x, uk(h), vk(h), p.d, y, w);
      x_next = x;
    }
    check(j);
    const double s = stage_cost(p, c, u, j, y);
    total += s;
    if (record) {
      record->stages[static_cast<std::size_t>(j - 1)] = s;
      if (j < n) record->states[static_cast<std::size_t>(j) + 1] = x_next;
    }
    x.swap(x_next);
  }
  return total;
}

Profile initial_profile(const Dims& dims, const ControlProblem& p, const MpcConfig& c) {
  if (p.warm_start && p.warm_start->dim() == dims.nu && p.warm_start->horizon() == c.horizon) {
    return *p.warm_start;
  }
  return Profile::constant(p.u_last, c.horizon);
}

}  // namespace

void MpcConfig::validate(const Dims& dims) const {
  if (horizon < 1) throw ConfigError("controller horizon must be >= 1");
  const auto m = static_cast<Eigen::Index>(tracked_outputs.size());
  if (q.size() != m) throw ConfigError("controller q must have one entry per tracked output");
  for (int o : tracked_outputs) {
    if (o < 0 || o >= dims.ny) throw ConfigError(fmt::format("tracked output {} outside y", o));
  }
  if (r.size() != dims.nu) throw ConfigError("controller r must have one entry per input");
  if (u_min.size() != dims.nu || u_max.size() != dims.nu) {
    throw ConfigError("controller bounds must have one entry per input");
  }
  if (m > 0 && q.minCoeff() < 0.0) throw ConfigError("controller q must be nonnegative");
  if (dims.nu > 0 && r.minCoeff() < 0.0) throw ConfigError("controller r must be nonnegative");
  for (int l = 0; l < dims.nu; ++l) {
    if (!(u_min[l] <= u_max[l])) throw ConfigError("controller bounds: u_min > u_max");
  }
}

void NmpcConfig::validate(const Dims& dims) const {
  mpc.validate(dims);
  if (max_iterations < 1) throw ConfigError("nmpc iteration budget must be >= 1");
  if (!(fd_step > 0.0)) throw ConfigError("nmpc finite-difference step must be positive");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("nmpc backtrack factor must be in (0,1)");
  if (!(armijo > 0.0 && armijo < 1.0)) throw ConfigError("nmpc armijo constant must be in (0,1)");
}

Profile saturate(const Profile& u, const Vector& lo, const Vector& hi) {
  if (lo.size() != u.dim() || hi.size() != u.dim()) {
    throw std::invalid_argument("saturate: bound dimension");
  }
  Profile out = u;
  for (int k = 0; k < u.horizon(); ++k) {
    out.step(k) = out.step(k).cwiseMax(lo).cwiseMin(hi);
  }
  return out;
}

double control_objective(const Dynamics& model, const ControlProblem& problem,
                         const MpcConfig& config, const Profile& u) {
  check_problem(model.dims(), problem, config);
  return rollout(model, problem, config, u, 0, problem.x0, nullptr);
}

Vector objective_gradient(const Dynamics& model, const ControlProblem& problem,
                          const MpcConfig& config, const Profile& u, double fd_step) {
  const Dims& dm = model.dims();
  const int n = config.horizon;
  Rollout base{std::vector<Vector>(static_cast<std::size_t>(n) + 1),
               std::vector<double>(static_cast<std::size_t>(n))};
  base.states[0] = problem.x0;
  const double f0 = rollout(model, problem, config, u, 0, problem.x0, &base);

  // prefix[j] = sum of stages 1..j
  std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
  for (int j = 1; j <= n; ++j) {
    prefix[static_cast<std::size_t>(j)] = prefix[static_cast<std::size_t>(j - 1)] + base.stages[static_cast<std::size_t>(j - 1)];
  }

  Vector grad(u.values().size());
  Profile pert = u;
  for (int i = 0; i < n; ++i) {
    // u_i first enters stage i (through feedthrough at x_i), so stages before
    // i and the state x_i are unchanged.
    const int from = i == 0 ? 0 : i;
    const double before = i == 0 ? 0.0 : prefix[static_cast<std::size_t>(i - 1)];
    for (int l = 0; l < dm.nu; ++l) {
      const Eigen::Index idx = static_cast<Eigen::Index>(i) * dm.nu + l;
      const double ui = u.values()[idx];
      double h = fd_step * std::max(1.0, std::abs(ui));
      if (ui + h > config.u_max[l] && ui - h >= config.u_min[l]) h = -h;
      pert.values()[idx] = ui + h;
      const double fi = before + rollout(model, problem, config, pert, from,
                                         base.states[static_cast<std::size_t>(from)], nullptr);
      grad[idx] = (fi - f0) / h;
      pert.values()[idx] = ui;
    }
  }
  return grad;
}

LinearMpc::LinearMpc(std::shared_ptr<const LinearModel> model, MpcConfig config)
    : model_(std::move(model)), config_(std::move(config)) {
  const Dims& dm = model_->dims();
  config_.validate(dm);
  const auto& md = model_->data();
  const int n = config_.horizon;
  const int m = static_cast<int>(config_.tracked_outputs.size());
  const int nx = dm.nx, nu = dm.nu, nv = dm.nv, nd = dm.nd;

  Matrix Csel(m, nx), Dusel(m, nu), Dvsel(m, nv);
  for (int j = 0; j < m; ++j) {
    Csel.row(j) = md.C_y.row(config_.tracked_outputs[static_cast<std::size_t>(j)]);
    Dusel.row(j) = md.D_yu.row(config_.tracked_outputs[static_cast<std::size_t>(j)]);
    Dvsel.row(j) = md.D_yv.row(config_.tracked_outputs[static_cast<std::size_t>(j)]);
  }

  // x(k+i+1) = A^{i+1} x0 + sum_{j<=i} A^{i-j} (B_u u_j + B_v v_j) + sum_{j<=i} A^{i-j} B_d d
  Matrix Px = Matrix::Zero(nx * n, nx);
  Matrix Pu = Matrix::Zero(nx * n, nu * n);
  Matrix Pv = Matrix::Zero(nx * n, nv * n);
  Matrix Pd = Matrix::Zero(nx * n, nd);
  Matrix Apow = Matrix::Identity(nx, nx);
  std::vector<Matrix> powers;  // A^0 .. A^{N-1}
  for (int i = 0; i < n; ++i) {
    powers.push_back(Apow);
    Apow = md.A * Apow;
    Px.block(i * nx, 0, nx, nx) = Apow;
  }
  for (int i = 0; i < n; ++i) {
    Matrix acc_d = Matrix::Zero(nx, nd);
    for (int j = 0; j <= i; ++j) {
      const Matrix& P = powers[static_cast<std::size_t>(i - j)];
      if (nu > 0) Pu.block(i * nx, j * nu, nx, nu) = P * md.B_u;
      if (nv > 0) Pv.block(i * nx, j * nv, nx, nv) = P * md.B_v;
      if (nd > 0) acc_d += P * md.B_d;
    }
    if (nd > 0) Pd.block(i * nx, 0, nx, nd) = acc_d;
  }

  Sx_ = Matrix::Zero(m * n, nx);
  Su_ = Matrix::Zero(m * n, nu * n);
  Sv_ = Matrix::Zero(m * n, nv * n);
  Sd_ = Matrix::Zero(m * n, nd);
  for (int i = 0; i < n; ++i) {
    Sx_.block(i * m, 0, m, nx) = Csel * Px.block(i * nx, 0, nx, nx);
    if (nu > 0) {
      Su_.block(i * m, 0, m, nu * n) = Csel * Pu.block(i * nx, 0, nx, nu * n);
      Su_.block(i * m, std::min(i + 1, n - 1) * nu, m, nu) += Dusel;
    }
    if (nv > 0) {
      Sv_.block(i * m, 0, m, nv * n) = Csel * Pv.block(i * nx, 0, nx, nv * n);
      Sv_.block(i * m, std::min(i + 1, n - 1) * nv, m, nv) += Dvsel;
    }
    if (nd > 0) Sd_.block(i * m, 0, m, nd) = Csel * Pd.block(i * nx, 0, nx, nd);
  }

  Sdelta_ = Matrix::Identity(nu * n, nu * n);
  for (int i = 1; i < n; ++i) {
    Sdelta_.block(i * nu, (i - 1) * nu, nu, nu) = -Matrix::Identity(nu, nu);
  }
  qbar_ = config_.q.replicate(n, 1);
  rbar_ = config_.r.replicate(n, 1);

  const Matrix H = Su_.transpose() * qbar_.asDiagonal() * Su_ +
                   Sdelta_.transpose() * rbar_.asDiagonal() * Sdelta_;
  hessian_.compute(H);
  const double scale = H.size() > 0 ? std::max(H.diagonal().cwiseAbs().maxCoeff(), 1e-300) : 1.0;
  if (nu > 0 && (hessian_.info() != Eigen::Success || hessian_.vectorD().minCoeff() <= 1e-12 * scale)) {
    throw SolverError("ill-posed MPC; add input regularization");
  }
}

ControlPlan LinearMpc::solve(const ControlProblem& p) const {
  const auto start = Clock::now();
  const Dims& dm = model_->dims();
  check_problem(dm, p, config_);
  const auto& md = model_->data();
  const int n = config_.horizon;
  const int m = static_cast<int>(config_.tracked_outputs.size());

  ControlPlan plan;
  if (dm.nu == 0) {
    plan.u = Profile(0, n);
    plan.objective = control_objective(*model_, p, config_, plan.u);
    plan.walltime_ms = elapsed_ms(start);
    return plan;
  }

  Vector target(m * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      target[i * m + j] = p.reference[j] - md.y_op[config_.tracked_outputs[static_cast<std::size_t>(j)]];
    }
  }
  Vector free = Sx_ * (p.x0 - md.x_op);
  if (dm.nv > 0) {
    Vector dv = p.v_in.values();
    for (int i = 0; i < n; ++i) dv.segment(i * dm.nv, dm.nv) -= md.v_op;
    free += Sv_ * dv;
  }
  if (dm.nd > 0) free += Sd_ * (p.d - md.d_op);

  Vector e = Vector::Zero(dm.nu * n);
  e.head(dm.nu) = p.u_last - md.u_op;
  const Vector rhs = Su_.transpose() * (qbar_.asDiagonal() * (target - free)) +
                     Sdelta_.transpose() * (rbar_.asDiagonal() * e);
  Vector du = hessian_.solve(rhs);
  for (int i = 0; i < n; ++i) du.segment(i * dm.nu, dm.nu) += md.u_op;

  plan.u = saturate(Profile(dm.nu, n, std::move(du)), config_.u_min, config_.u_max);
  plan.objective = control_objective(*model_, p, config_, plan.u);
  plan.iterations = 1;
  plan.history = {plan.objective};
  plan.walltime_ms = elapsed_ms(start);
  return plan;
}

ControlPlan lin_mpc_solve(const LinearModel& model, const ControlProblem& problem,
                          const MpcConfig& config) {
  // Non-owning alias; the solver does not outlive this call.
  std::shared_ptr<const LinearModel> alias(std::shared_ptr<const LinearModel>{}, &model);
  return LinearMpc(alias, config).solve(problem);
}

ControlPlan nmpc_solve(const Dynamics& model, const ControlProblem& p, const NmpcConfig& cfg) {
  const auto start = Clock::now();
  const Dims& dm = model.dims();
  const MpcConfig& c = cfg.mpc;
  check_problem(dm, p, c);

  ControlPlan plan;
  Profile u = saturate(initial_profile(dm, p, c), c.u_min, c.u_max);
  double f = control_objective(model, p, c, u);
  plan.history.push_back(f);
  if (dm.nu == 0) {
    plan.u = u;
    plan.objective = f;
    plan.walltime_ms = elapsed_ms(start);
    return plan;
  }

  // Initial step: the largest gradient component moves 10% of its box (or 1).
  Vector span(dm.nu);
  for (int l = 0; l < dm.nu; ++l) {
    const double w = c.u_max[l] - c.u_min[l];
    span[l] = std::isfinite(w) && w > 0.0 ? w : 1.0;
  }

  Vector u_prev, g_prev;
  double t = 0.0;
  bool converged = false;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    const Vector g = objective_gradient(model, p, c, u, cfg.fd_step);
    if (!g.allFinite()) throw SimulationError("non-finite gradient", 0);
    if (it == 0 || t <= 0.0) {
      double ratio = 0.0;
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        ratio = std::max(ratio, std::abs(g[i]) / span[i % dm.nu]);
      }
      if (ratio == 0.0) {
        converged = true;
        break;
      }
      t = 0.1 / ratio;
    } else {
      // Barzilai-Borwein step as the first trial of the line search.
      const Vector s = u.values() - u_prev;
      const Vector yv = g - g_prev;
      const double sy = s.dot(yv);
      if (sy > 0.0) t = s.squaredNorm() / sy;
    }

    bool accepted = false;
    Profile trial;
    double f_trial = f;
    for (int b = 0; b < cfg.max_backtracks; ++b) {
      trial = saturate(Profile(dm.nu, c.horizon, u.values() - t * g), c.u_min, c.u_max);
      const double decrease = g.dot(u.values() - trial.values());
      // Nothing to gain even at this step length: the projected gradient is
      // negligible.
      if (decrease <= cfg.tolerance * (1.0 + std::abs(f))) break;
      f_trial = control_objective(model, p, c, trial);
      if (f_trial <= f - cfg.armijo * decrease) {
        accepted = true;
        break;
      }
      t *= cfg.backtrack;
    }
    if (!accepted) {
      converged = true;
      break;
    }
    u_prev = u.values();
    g_prev = g;
    const double drop = f - f_trial;
    u = std::move(trial);
    f = f_trial;
    plan.history.push_back(f);
    if (drop <= cfg.tolerance * (1.0 + std::abs(f))) {
      converged = true;
      ++it;
      break;
    }
  }
  plan.u = std::move(u);
  plan.objective = f;
  plan.iterations = it;
  plan.budget_exhausted = !converged;
  plan.walltime_ms = elapsed_ms(start);
  return plan;
}

}  // namespace hiercoord
