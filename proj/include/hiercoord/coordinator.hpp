#pragma once

// Upper layer, inner loop: for a frozen set-point r, reconcile the presumed
// incoming coupling profiles with the outgoing profiles they induce, then sum
// the local costs at the reconciled profiles.

#include "hiercoord/subsystem.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <vector>

namespace hiercoord {

/// One exchange round: every subsystem answers (r_s, v_s^in) and the outgoing
/// profiles are routed back into the in-stack ordering.
struct RoundOutput {
  Vector v_in_hat;
  std::vector<double> costs;  // J_s per subsystem, index order
  double nmpc_ms = 0.0;
  int budget_hits = 0;
  std::vector<Response> responses;  // empty for synthetic maps
};

/// v_in -> G_in * g_out(r, v_in), as seen by the coordinator.
class CouplingMap {
 public:
  virtual ~CouplingMap() = default;
  virtual std::size_t length() const = 0;
  virtual RoundOutput round(const Vector& r, const Vector& v_in) const = 0;
  /// Residual weights per in-stack entry (1/scale^2); default all ones.
  virtual Vector weights() const { return Vector::Ones(static_cast<Eigen::Index>(length())); }
};

struct FixedPointConfig {
  double eps_max = 1e-6;
  int sigma_max = 200;
  void validate() const;
};

struct FixedPointResult {
  Vector v_in_star;
  bool converged = false;
  int iterations = 0;
  std::vector<double> residuals;  // eps after each update
  double J_c = 0.0;
  std::vector<double> costs;
  double coherence_residual = 0.0;  // eps-norm of v_in_star - G_in g_out(r, v_in_star)
  double nmpc_ms = 0.0;
  int budget_hits = 0;
  RoundOutput final_round;
};

/// (I - Pi) prev + Pi hat with diagonal Pi.
Vector filter_step(const Vector& prev, const Vector& hat, const Vector& pi);
Vector filter_step(const Vector& prev, const Vector& hat, double pi);

/// sqrt(sum w_i d_i^2 / len); 0 for an empty vector.
double scaled_norm(const Vector& d, const Vector& weights);

FixedPointResult fixed_point_solve(const CouplingMap& map, const Vector& r, const Vector& v0,
                                   const Vector& pi, const FixedPointConfig& config);

/// Power-iteration estimate of the spectral radius of the map's Jacobian in v
/// at (r, v), from `iterations` finite-difference products.
double estimate_map_gain(const CouplingMap& map, const Vector& r, const Vector& v,
                         int iterations = 8, double step = 1e-4);

/// alpha = min(1, kappa / (1 + rho)).
double synthesize_filter(double rho_hat, double kappa = 1.9);

/// A decomposition: topology, routing and one Subsystem per index.
class Network {
 public:
  /// Throws ConfigError when subsystem dimensions or controlled flags do not
  /// agree with the topology.
  Network(Topology topology, std::vector<std::shared_ptr<const Subsystem>> subsystems);

  const Topology& topology() const { return topology_; }
  const Routing& routing() const { return routing_; }
  int size() const { return topology_.size(); }
  const Subsystem& subsystem(SubsystemId s) const { return *subsystems_.at(static_cast<std::size_t>(s.index - 1)); }
  std::size_t stack_length() const { return routing_.length; }

  int setpoint_dim() const { return setpoint_dim_; }
  /// Where r_s sits inside r (length 0 for uncontrolled subsystems).
  Block setpoint_block(SubsystemId s) const { return setpoint_blocks_.at(static_cast<std::size_t>(s.index - 1)); }

  Profile gather_in(SubsystemId s, const Vector& in_stack) const;
  void scatter_out(SubsystemId s, const Profile& w, Vector& out_stack) const;

  /// In-stack at the operating-point coupling values (cold start).
  Vector nominal_in() const;
  /// Previous fixed point shifted one step, last block held.
  Vector shift_in(const Vector& in_stack) const;
  Vector residual_weights() const { return weights_; }

 private:
  Topology topology_;
  Routing routing_;
  std::vector<std::shared_ptr<const Subsystem>> subsystems_;
  std::vector<Block> setpoint_blocks_;
  int setpoint_dim_ = 0;
  Vector weights_;
};

/// Time-varying data of one sampling period.
struct PeriodContext {
  std::vector<SubsystemState> states;  // index order
  std::vector<LocalCostSpec> costs;    // index order
};

class NetworkMap final : public CouplingMap {
 public:
  NetworkMap(const Network& network, const PeriodContext& period);
  std::size_t length() const override { return network_.stack_length(); }
  RoundOutput round(const Vector& r, const Vector& v_in) const override;
  Vector weights() const override { return network_.residual_weights(); }

  /// NMPC time accumulated over every round evaluated through this map.
  double nmpc_ms() const { return static_cast<double>(nmpc_ns_.load()) * 1e-6; }

 private:
  const Network& network_;
  const PeriodContext& period_;
  mutable std::atomic<std::int64_t> nmpc_ns_{0};
};

}  // namespace hiercoord
