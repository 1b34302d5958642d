#pragma once

// Local controllers for controlled subsystems: condensed linear MPC and a
// single-shooting NMPC solved by projected gradient descent.
//
// Both minimise the same internal objective over the horizon
//
//   sum_{i=1..N} ||yhat(k+i) - r||_Q^2 + sum_{i=0..N-1} ||u(k+i) - u(k+i-1)||_R^2
//
// where yhat(k+i) are the tracked outputs evaluated at x(k+i) with the inputs
// of step k+i (step k+N-1 for i = N), u(k-1) is the last applied input and the incoming
// coupling profile is a known exogenous signal.

#include "hiercoord/models.hpp"

#include <memory>
#include <optional>

namespace hiercoord {

struct MpcConfig {
  int horizon = 10;
  std::vector<int> tracked_outputs;  // indices into y; one reference entry each
  Vector q;      // tracking weight per tracked output
  Vector r;      // move weight per input
  Vector u_min;  // may contain -inf
  Vector u_max;  // may contain +inf

  void validate(const Dims& dims) const;
};

struct NmpcConfig {
  MpcConfig mpc;
  int max_iterations = 50;
  double fd_step = 1e-6;       // relative forward-difference step
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;
  double tolerance = 1e-10;    // stop when the relative decrease falls below this

  void validate(const Dims& dims) const;
};

struct ControlProblem {
  Vector x0;
  Vector u_last;
  Vector d;
  Profile v_in;
  Vector reference;
  std::optional<Profile> warm_start;
};

struct ControlPlan {
  Profile u;
  double objective = 0.0;
  int iterations = 0;
  bool budget_exhausted = false;
  double walltime_ms = 0.0;
  std::vector<double> history;  // objective after each accepted iterate
};

/// Componentwise clip of every step to [lo, hi].
Profile saturate(const Profile& u, const Vector& lo, const Vector& hi);

/// Internal controller objective, by forward simulation.
double control_objective(const Dynamics& model, const ControlProblem& problem,
                         const MpcConfig& config, const Profile& u);

/// Forward-difference gradient of control_objective (the one used by the NMPC).
Vector objective_gradient(const Dynamics& model, const ControlProblem& problem,
                          const MpcConfig& config, const Profile& u, double fd_step);

/// Condensed prediction matrices and the factorised Hessian for one model and
/// configuration; immutable after construction so solves are reentrant.
class LinearMpc {
 public:
  /// Throws SolverError("ill-posed MPC; add input regularization") if the
  /// normal equations are singular.
  LinearMpc(std::shared_ptr<const LinearModel> model, MpcConfig config);

  ControlPlan solve(const ControlProblem& problem) const;

  const MpcConfig& config() const { return config_; }
  const LinearModel& model() const { return *model_; }

 private:
  std::shared_ptr<const LinearModel> model_;
  MpcConfig config_;
  Matrix Sx_, Su_, Sv_, Sd_;  // tracked-output predictions
  Matrix Sdelta_;             // input moves
  Vector qbar_, rbar_;
  Eigen::LDLT<Matrix> hessian_;
};

ControlPlan lin_mpc_solve(const LinearModel& model, const ControlProblem& problem,
                          const MpcConfig& config);

ControlPlan nmpc_solve(const Dynamics& model, const ControlProblem& problem,
                       const NmpcConfig& config);

}  // namespace hiercoord
