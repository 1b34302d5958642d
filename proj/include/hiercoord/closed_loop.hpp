#pragma once

// Receding-horizon simulation: hierarchical coordination or decentralized
// control of a decomposed plant, traces and performance metrics.

#include "hiercoord/plant.hpp"
#include "hiercoord/trust_region.hpp"

#include <string>
#include <vector>

namespace hiercoord {

struct CoordinatorConfig {
  enum class FilterMode { Identity, Fixed, Synthesized };

  FixedPointConfig fixed_point;
  FilterMode filter = FilterMode::Synthesized;
  double filter_gain = 1.0;  // Fixed mode
  double kappa = 1.9;
  int power_iterations = 8;
  double power_step = 1e-4;
  int grid_size = 3;
  double gamma_e = 1.6;
  double gamma_c = 0.5;
  int threads = 1;

  void validate() const;
};

struct BenchmarkConfig {
  std::string name;
  PlantSpec plant;
  Decomposition decomposition;
  CoordinatorConfig coordinator;
};

struct ScheduleChange {
  int step = 0;
  std::string signal;  // output name (set-point, bound) or disturbance name
  double value = 0.0;
};

struct Scenario {
  std::string name;
  int steps = 1;
  int transient_end = 0;  // first step of the post-transient window
  std::vector<ScheduleChange> setpoints;
  std::vector<ScheduleChange> bounds;
  std::vector<ScheduleChange> disturbances;

  void validate() const;
};

/// Per-unit cost specs at step k with the scheduled set-points and bounds.
std::vector<LocalCostSpec> scheduled_costs(const PlantSpec& plant, const Scenario& scenario, int k);
/// Per-unit disturbance vectors at step k.
std::vector<Vector> scheduled_disturbances(const PlantSpec& plant, const Scenario& scenario, int k);

struct TraceRow {
  int step = 0;
  std::vector<Vector> u, y, v;  // per unit, applied / measured / actual couplings
  Vector r_opt;
  Vector r_d;
  double J_c = 0.0;
  int sigma_used = 0;
  bool converged = true;
  double presumption_error = 0.0;
  std::vector<double> unit_cost;  // J_s^cl(k) per unit
  double stage_cost = 0.0;
  double violation = 0.0;  // sum of bound excess at step k
  int budget_hits = 0;
  double walltime_nmpc_ms = 0.0;
  double walltime_cycle_ms = 0.0;
};

struct ClosedLoopTrace {
  std::string strategy;
  std::string scenario;
  double Ts = 1.0;
  int transient_end = 0;
  std::vector<std::string> unit_names;
  std::vector<std::vector<std::string>> input_names, output_names, coupling_names;
  std::vector<std::string> setpoint_names;  // "unit.output" per r entry
  std::vector<std::string> bound_names;     // "unit.output" per bounded output
  std::vector<std::vector<double>> bound_values;  // per row
  std::vector<TraceRow> rows;
  bool failed = false;
  std::string failure;
  int failure_step = -1;
};

ClosedLoopTrace run_hierarchical(const Scenario& scenario, const BenchmarkConfig& config);

/// Local controllers with couplings frozen at their last measured values.
ClosedLoopTrace run_decentralized(const Scenario& scenario, const BenchmarkConfig& config);

struct PerformanceReport {
  double J_cl = 0.0;
  std::vector<double> unit_J_cl;
  double violation_integral = 0.0;                // sum max(y - bound, 0) * Ts
  double violation_integral_post_transient = 0.0;
  double walltime_nmpc_median_ms = 0.0;
  double walltime_nmpc_max_ms = 0.0;
  double walltime_cycle_median_ms = 0.0;
  double walltime_cycle_max_ms = 0.0;
  int steps = 0;
  int unconverged_steps = 0;
};

PerformanceReport closed_loop_cost(const ClosedLoopTrace& trace);

double median(std::vector<double> values);

}  // namespace hiercoord
