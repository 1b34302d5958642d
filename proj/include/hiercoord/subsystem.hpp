#pragma once

// One subsystem of a decomposition: dynamics, local cost and (if controlled)
// a local controller. respond() answers the coordinator's query for a given
// set-point and presumed incoming coupling profile.

#include "hiercoord/costs.hpp"
#include "hiercoord/local_control.hpp"
#include "hiercoord/models.hpp"

#include <memory>
#include <optional>
#include <string>

namespace hiercoord {

enum class ControllerKind { None, LinearMpc, Nmpc };

/// Everything time-varying a subsystem needs at plant time k. The warm plan
/// is carried explicitly so respond() stays a pure function.
struct SubsystemState {
  Vector x;
  Vector u_last;
  Vector d;                     // held over the horizon
  std::optional<Profile> warm;  // previous plan, already shifted
};

struct Response {
  Profile v_out;
  double cost = 0.0;
  Profile u;  // empty for uncontrolled subsystems
  Profile y;
  double walltime_ms = 0.0;  // controller time
  bool budget_exhausted = false;
};

class Subsystem {
 public:
  /// Throws ConfigError on dimension mismatches or a controller kind that the
  /// model cannot support (linear MPC needs a LinearModel).
  Subsystem(SubsystemId id, std::string name, std::shared_ptr<const Dynamics> model,
            LocalCostSpec cost, ControllerKind controller, NmpcConfig controller_config = {});

  SubsystemId id() const { return id_; }
  const std::string& name() const { return name_; }
  const Dynamics& model() const { return *model_; }
  std::shared_ptr<const Dynamics> model_ptr() const { return model_; }
  const LocalCostSpec& cost() const { return cost_; }
  ControllerKind controller() const { return controller_; }
  const NmpcConfig& controller_config() const { return config_; }
  bool controlled() const { return controller_ != ControllerKind::None; }
  /// Dimension of r_s (one entry per tracked output); 0 if uncontrolled.
  int setpoint_dim() const;

  /// Local processing contract. `cost` overrides the default spec (set-points
  /// and bounds may follow a schedule). r must be given iff controlled.
  Response respond(const SubsystemState& state, const LocalCostSpec& cost,
                   const std::optional<Vector>& r, const Profile& v_in) const;
  Response respond(const SubsystemState& state, const std::optional<Vector>& r,
                   const Profile& v_in) const {
    return respond(state, cost_, r, v_in);
  }

  /// Controller plan alone (no simulation), for the closed loop.
  ControlPlan plan(const SubsystemState& state, const Vector& r, const Profile& v_in) const;

  SubsystemState initial_state() const;

 private:
  SubsystemId id_;
  std::string name_;
  std::shared_ptr<const Dynamics> model_;
  LocalCostSpec cost_;
  ControllerKind controller_;
  NmpcConfig config_;
  std::shared_ptr<const LinearMpc> mpc_;
};

}  // namespace hiercoord
