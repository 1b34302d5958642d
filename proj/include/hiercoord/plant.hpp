#pragma once

// A physical plant described unit by unit, and its decomposition into
// subsystems. Grouping several units into one subsystem produces a composite
// model; the true plant is the composite of all units.

#include "hiercoord/coordinator.hpp"

#include <memory>
#include <string>
#include <vector>

namespace hiercoord {

struct Signal {
  std::string name;
  std::string unit;
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
};

/// Trust-region geometry for the set-point entries of one controlled unit.
struct SetpointGeometry {
  Vector halfwidth;  // set-point bounds r_d +- halfwidth
  Vector radius_init;
  Vector radius_min;
  Vector radius_max;
};

struct PlantUnit {
  std::string name;
  std::vector<Signal> inputs;        // u; min/max are the actuator box
  std::vector<Signal> disturbances;  // d
  std::vector<Signal> outputs;       // y
  std::shared_ptr<const Dynamics> model;
  LocalCostSpec cost;
  ControllerKind controller = ControllerKind::None;
  NmpcConfig controller_config;  // bounds are filled from the input box
  SetpointGeometry setpoint;
};

/// Coupling signal between two units (1-based unit indices).
struct UnitEdge {
  int source = 0;
  int dest = 0;
  std::vector<std::string> channels;
  std::vector<double> scale;
};

struct PlantSpec {
  std::string name;
  double Ts = 1.0;
  int horizon = 1;
  std::vector<PlantUnit> units;
  std::vector<UnitEdge> edges;

  int unit_index(const std::string& name) const;  // 1-based; throws ConfigError
  /// Unit-level topology (one subsystem per unit).
  TopologySpec unit_topology() const;
};

/// Groups of unit indices (1-based), one group per subsystem.
using Decomposition = std::vector<std::vector<int>>;

/// How a subsystem's vectors map onto unit vectors.
struct SubsystemLayout {
  std::vector<int> units;                       // member units in component order
  std::vector<std::pair<int, int>> v_source;    // subsystem v index -> (unit, unit v index)
  std::vector<std::pair<int, int>> w_source;    // subsystem w index -> (unit, unit w index)
};

struct DecomposedNetwork {
  std::shared_ptr<const Network> network;
  std::vector<SubsystemLayout> layout;  // index order
};

/// Checks the plant: unit-level topology, model dimensions against signals
/// and edges, cost and controller settings. Returns violations (empty = ok).
ValidationReport validate_plant(const PlantSpec& plant);
ValidationReport validate_decomposition(const PlantSpec& plant, const Decomposition& groups);

/// Builds subsystems, topology and routing for a decomposition.
DecomposedNetwork decompose(const PlantSpec& plant, const Decomposition& groups);

/// Cost spec of a group of units, output indices shifted to the concatenated y.
LocalCostSpec merge_costs(const PlantSpec& plant, const std::vector<int>& units,
                          const std::vector<LocalCostSpec>& unit_costs);

/// Input boxes of the units concatenated.
void input_box(const PlantSpec& plant, const std::vector<int>& units, Vector& lo, Vector& hi);

struct PlantStep {
  std::vector<Vector> x_next;
  std::vector<Vector> y, v, w;  // per unit, at the current step
};

/// The true plant: every unit evaluated with the couplings actually produced.
class Plant {
 public:
  explicit Plant(const PlantSpec& spec);

  const PlantSpec& spec() const { return spec_; }
  const CompositeModel& model() const { return *model_; }
  std::vector<Vector> operating_state() const;

  /// Advances one sampling period. Throws SimulationError on non-finite
  /// values and std::invalid_argument on an input outside its box.
  PlantStep step(const std::vector<Vector>& x, const std::vector<Vector>& u,
                 const std::vector<Vector>& d, int k = 0) const;

 private:
  PlantSpec spec_;
  std::shared_ptr<const CompositeModel> model_;
};

PlantStep step_plant(const Plant& plant, const std::vector<Vector>& x,
                     const std::vector<Vector>& u, const std::vector<Vector>& d, int k = 0);

}  // namespace hiercoord
