#include "hiercoord/subsystem.hpp"

#include "hiercoord/error.hpp"

#include <fmt/format.h>

namespace hiercoord {

Subsystem::Subsystem(SubsystemId id, std::string name, std::shared_ptr<const Dynamics> model,
                     LocalCostSpec cost, ControllerKind controller, NmpcConfig controller_config)
    : id_(id),
      name_(std::move(name)),
      model_(std::move(model)),
      cost_(std::move(cost)),
      controller_(controller),
      config_(std::move(controller_config)) {
  if (!model_) throw ConfigError(fmt::format("subsystem {}: missing model", id_.index));
  const Dims& dm = model_->dims();
  cost_.validate(dm.ny, dm.nu);
  if (controller_ == ControllerKind::None) {
    if (dm.nu != 0) {
      throw ConfigError(fmt::format("subsystem {}: inputs declared but no controller", name_));
    }
    return;
  }
  if (dm.nu == 0) throw ConfigError(fmt::format("subsystem {}: controller without inputs", name_));
  config_.validate(dm);
  if (controller_ == ControllerKind::LinearMpc) {
    auto linear = std::dynamic_pointer_cast<const LinearModel>(model_);
    if (!linear) throw ConfigError(fmt::format("subsystem {}: linear MPC needs a linear model", name_));
    try {
      mpc_ = std::make_shared<const LinearMpc>(linear, config_.mpc);
    } catch (const SolverError& e) {
      throw ConfigError(fmt::format("subsystem {}: {}", name_, e.what()));
    }
  }
}

int Subsystem::setpoint_dim() const {
  return controlled() ? static_cast<int>(config_.mpc.tracked_outputs.size()) : 0;
}

SubsystemState Subsystem::initial_state() const {
  const auto& op = model_->operating_point();
  return {op.x, op.u, op.d, std::nullopt};
}

ControlPlan Subsystem::plan(const SubsystemState& state, const Vector& r, const Profile& v_in) const {
  ControlProblem problem{state.x, state.u_last, state.d, v_in, r, state.warm};
  if (controller_ == ControllerKind::LinearMpc) return mpc_->solve(problem);
  return nmpc_solve(*model_, problem, config_);
}

Response Subsystem::respond(const SubsystemState& state, const LocalCostSpec& cost,
                            const std::optional<Vector>& r, const Profile& v_in) const {
  const Dims& dm = model_->dims();
  const int n = v_in.horizon();
  if (v_in.dim() != dm.nv) {
    throw std::invalid_argument(fmt::format("subsystem {}: incoming profile has dim {}, expected {}",
                                            name_, v_in.dim(), dm.nv));
  }
  Response out;
  if (controlled()) {
    if (!r) throw std::invalid_argument(fmt::format("subsystem {}: set-point required", name_));
    if (r->size() != setpoint_dim()) {
      throw std::invalid_argument(fmt::format("subsystem {}: set-point dimension", name_));
    }
    ControlPlan p = plan(state, *r, v_in);
    out.u = std::move(p.u);
    out.walltime_ms = p.walltime_ms;
    out.budget_exhausted = p.budget_exhausted;
  } else {
    if (r) throw std::invalid_argument(fmt::format("subsystem {}: set-point given to uncontrolled subsystem", name_));
    out.u = Profile(0, n);
  }
  SimulationResult sim = simulate_profile(*model_, state.x, out.u, v_in, state.d);
  out.cost = local_cost(sim.y, out.u, cost);
  out.v_out = std::move(sim.w);
  out.y = std::move(sim.y);
  return out;
}

}  // namespace hiercoord
