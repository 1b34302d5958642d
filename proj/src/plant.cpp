#include "hiercoord/plant.hpp"

#include "hiercoord/error.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <map>

namespace hiercoord {
namespace {

const PlantUnit& unit_at(const PlantSpec& plant, int u) {
  return plant.units.at(static_cast<std::size_t>(u - 1));
}

// Incoming unit edges of unit u ordered by source; outgoing ordered by dest.
std::vector<std::size_t> unit_in(const PlantSpec& plant, int u) {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < plant.edges.size(); ++e) {
    if (plant.edges[e].dest == u) out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    return plant.edges[a].source < plant.edges[b].source;
  });
  return out;
}

std::vector<std::size_t> unit_out(const PlantSpec& plant, int u) {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < plant.edges.size(); ++e) {
    if (plant.edges[e].source == u) out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    return plant.edges[a].dest < plant.edges[b].dest;
  });
  return out;
}

// Offset of edge e's channels inside the dest unit's v (in) or source unit's w (out).
int offset_in(const PlantSpec& plant, std::size_t e) {
  int off = 0;
  for (std::size_t f : unit_in(plant, plant.edges[e].dest)) {
    if (f == e) return off;
    off += static_cast<int>(plant.edges[f].channels.size());
  }
  throw std::logic_error("edge not found");
}

int offset_out(const PlantSpec& plant, std::size_t e) {
  int off = 0;
  for (std::size_t f : unit_out(plant, plant.edges[e].source)) {
    if (f == e) return off;
    off += static_cast<int>(plant.edges[f].channels.size());
  }
  throw std::logic_error("edge not found");
}

}  // namespace

int PlantSpec::unit_index(const std::string& n) const {
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (units[i].name == n) return static_cast<int>(i) + 1;
  }
  throw ConfigError(fmt::format("unknown unit '{}'", n));
}

TopologySpec PlantSpec::unit_topology() const {
  TopologySpec t;
  t.subsystem_count = static_cast<int>(units.size());
  t.horizon = horizon;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (units[i].controller != ControllerKind::None) t.controlled.insert(static_cast<int>(i) + 1);
  }
  for (const auto& e : edges) {
    t.edges.push_back({{e.source}, {e.dest}, static_cast<int>(e.channels.size()), e.channels, e.scale});
  }
  return t;
}

ValidationReport validate_plant(const PlantSpec& plant) {
  ValidationReport rep = validate_topology(plant.unit_topology());
  if (!(plant.Ts > 0.0)) rep.violations.push_back("sampling period must be positive");
  for (std::size_t i = 0; i < plant.units.size(); ++i) {
    const PlantUnit& u = plant.units[i];
    const int idx = static_cast<int>(i) + 1;
    const std::string where = fmt::format("unit {}", u.name);
    if (!u.model) {
      rep.violations.push_back(where + ": missing model");
      continue;
    }
    const Dims& dm = u.model->dims();
    auto expect = [&](int got, std::size_t want, const char* what) {
      if (got != static_cast<int>(want)) {
        rep.violations.push_back(fmt::format("{}: dimension mismatch ({} {} in model, {} declared)",
                                             where, what, got, want));
      }
    };
    expect(dm.nu, u.inputs.size(), "inputs");
    expect(dm.nd, u.disturbances.size(), "disturbances");
    expect(dm.ny, u.outputs.size(), "outputs");
    if (rep.ok()) {
      int nv = 0, nw = 0;
      for (const auto& e : plant.edges) {
        if (e.dest == idx) nv += static_cast<int>(e.channels.size());
        if (e.source == idx) nw += static_cast<int>(e.channels.size());
      }
      expect(dm.nv, static_cast<std::size_t>(nv), "incoming coupling channels");
      expect(dm.nw, static_cast<std::size_t>(nw), "outgoing coupling channels");
    }
    for (const auto& s : u.inputs) {
      if (!(s.min <= s.max)) rep.violations.push_back(fmt::format("{}: input {} has min > max", where, s.name));
    }
    try {
      u.cost.validate(dm.ny, dm.nu);
      if (u.controller != ControllerKind::None) {
        NmpcConfig c = u.controller_config;
        Vector lo, hi;
        input_box(plant, {idx}, lo, hi);
        c.mpc.u_min = lo;
        c.mpc.u_max = hi;
        c.mpc.horizon = plant.horizon;
        c.validate(dm);
        const auto k = static_cast<Eigen::Index>(c.mpc.tracked_outputs.size());
        const auto& g = u.setpoint;
        if (g.halfwidth.size() != k || g.radius_init.size() != k || g.radius_min.size() != k ||
            g.radius_max.size() != k) {
          rep.violations.push_back(where + ": set-point geometry needs one entry per tracked output");
        }
      }
    } catch (const ConfigError& e) {
      rep.violations.push_back(fmt::format("{}: {}", where, e.what()));
    }
  }
  return rep;
}

ValidationReport validate_decomposition(const PlantSpec& plant, const Decomposition& groups) {
  ValidationReport rep;
  std::vector<int> seen(plant.units.size(), 0);
  for (const auto& g : groups) {
    if (g.empty()) rep.violations.push_back("empty subsystem group");
    for (int u : g) {
      if (u < 1 || u > static_cast<int>(plant.units.size())) {
        rep.violations.push_back(fmt::format("decomposition references unknown unit {}", u));
      } else {
        ++seen[static_cast<std::size_t>(u - 1)];
      }
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] != 1) {
      rep.violations.push_back(fmt::format("unit {} appears {} times in the decomposition",
                                           plant.units[i].name, seen[i]));
    }
  }
  return rep;
}

void input_box(const PlantSpec& plant, const std::vector<int>& units, Vector& lo, Vector& hi) {
  std::vector<double> l, h;
  for (int u : units) {
    for (const auto& s : unit_at(plant, u).inputs) {
      l.push_back(s.min);
      h.push_back(s.max);
    }
  }
  lo = Eigen::Map<Vector>(l.data(), static_cast<Eigen::Index>(l.size()));
  hi = Eigen::Map<Vector>(h.data(), static_cast<Eigen::Index>(h.size()));
}

LocalCostSpec merge_costs(const PlantSpec& plant, const std::vector<int>& units,
                          const std::vector<LocalCostSpec>& unit_costs) {
  LocalCostSpec out;
  int y_off = 0;
  std::vector<double> rc;
  bool any_rc = false;
  for (int u : units) {
    const auto& spec = unit_costs.at(static_cast<std::size_t>(u - 1));
    const Dims& dm = unit_at(plant, u).model->dims();
    for (CostTerm t : spec.terms) {
      for (int& o : t.outputs) o += y_off;
      out.terms.push_back(std::move(t));
    }
    for (int j = 0; j < dm.nu; ++j) {
      const bool has = spec.input_weight.size() == dm.nu;
      any_rc = any_rc || has;
      rc.push_back(has ? spec.input_weight[j] : 0.0);
    }
    y_off += dm.ny;
  }
  if (any_rc) out.input_weight = Eigen::Map<Vector>(rc.data(), static_cast<Eigen::Index>(rc.size()));
  return out;
}

DecomposedNetwork decompose(const PlantSpec& plant, const Decomposition& groups) {
  {
    ValidationReport rep = validate_plant(plant);
    ValidationReport dec = validate_decomposition(plant, groups);
    rep.violations.insert(rep.violations.end(), dec.violations.begin(), dec.violations.end());
    if (!rep.ok()) {
      std::string msg = "invalid plant:";
      for (const auto& v : rep.violations) msg += "\n  " + v;
      throw ConfigError(msg);
    }
  }
  const int ng = static_cast<int>(groups.size());
  std::vector<int> group_of(plant.units.size() + 1, -1);
  for (int g = 0; g < ng; ++g) {
    for (int u : groups[static_cast<std::size_t>(g)]) group_of[static_cast<std::size_t>(u)] = g;
  }

  // Subsystem-level edges: unit edges crossing groups, merged per group pair.
  std::map<std::pair<int, int>, std::vector<std::size_t>> crossing;
  for (std::size_t e = 0; e < plant.edges.size(); ++e) {
    const int a = group_of[static_cast<std::size_t>(plant.edges[e].source)];
    const int b = group_of[static_cast<std::size_t>(plant.edges[e].dest)];
    if (a != b) crossing[{a, b}].push_back(e);
  }
  for (auto& [pair, list] : crossing) {
    std::sort(list.begin(), list.end(), [&](std::size_t x, std::size_t y) {
      return std::pair(plant.edges[x].source, plant.edges[x].dest) <
             std::pair(plant.edges[y].source, plant.edges[y].dest);
    });
  }

  TopologySpec topo;
  topo.subsystem_count = ng;
  topo.horizon = plant.horizon;
  for (const auto& [pair, list] : crossing) {
    CouplingEdge ce{{pair.first + 1}, {pair.second + 1}, 0, {}, {}};
    for (std::size_t e : list) {
      const UnitEdge& ue = plant.edges[e];
      ce.dim += static_cast<int>(ue.channels.size());
      ce.channels.insert(ce.channels.end(), ue.channels.begin(), ue.channels.end());
      for (std::size_t c = 0; c < ue.channels.size(); ++c) {
        ce.scale.push_back(ue.scale.empty() ? 1.0 : ue.scale[c]);
      }
    }
    topo.edges.push_back(std::move(ce));
  }

  DecomposedNetwork out;
  std::vector<std::shared_ptr<const Subsystem>> subsystems;
  for (int g = 0; g < ng; ++g) {
    std::vector<int> members = groups[static_cast<std::size_t>(g)];
    std::sort(members.begin(), members.end());
    SubsystemLayout lay;
    lay.units = members;
    auto component_of = [&](int u) {
      return static_cast<int>(std::find(members.begin(), members.end(), u) - members.begin());
    };

    // v: incoming crossing edges by source group.
    for (const auto& [pair, list] : crossing) {
      if (pair.second != g) continue;
      for (std::size_t e : list) {
        const int off = offset_in(plant, e);
        for (std::size_t c = 0; c < plant.edges[e].channels.size(); ++c) {
          lay.v_source.emplace_back(plant.edges[e].dest, off + static_cast<int>(c));
        }
      }
    }
    // w: outgoing crossing edges by dest group.
    for (const auto& [pair, list] : crossing) {
      if (pair.first != g) continue;
      for (std::size_t e : list) {
        const int off = offset_out(plant, e);
        for (std::size_t c = 0; c < plant.edges[e].channels.size(); ++c) {
          lay.w_source.emplace_back(plant.edges[e].source, off + static_cast<int>(c));
        }
      }
    }

    std::shared_ptr<const Dynamics> model;
    bool direct = members.size() == 1;
    if (direct) {
      const Dims& dm = unit_at(plant, members[0]).model->dims();
      direct = static_cast<int>(lay.v_source.size()) == dm.nv && static_cast<int>(lay.w_source.size()) == dm.nw;
      for (std::size_t i = 0; direct && i < lay.v_source.size(); ++i) direct = lay.v_source[i].second == static_cast<int>(i);
      for (std::size_t i = 0; direct && i < lay.w_source.size(); ++i) direct = lay.w_source[i].second == static_cast<int>(i);
    }
    if (direct) {
      model = unit_at(plant, members[0]).model;
    } else {
      std::vector<std::shared_ptr<const Dynamics>> comps;
      CompositeWiring wiring;
      for (int u : members) {
        comps.push_back(unit_at(plant, u).model);
        std::vector<WireSource> inputs;
        for (std::size_t e : unit_in(plant, u)) {
          const UnitEdge& ue = plant.edges[e];
          const int off_src = offset_out(plant, e);
          const int off_dst = offset_in(plant, e);
          for (std::size_t c = 0; c < ue.channels.size(); ++c) {
            WireSource w;
            if (group_of[static_cast<std::size_t>(ue.source)] == g) {
              w.kind = WireSource::Kind::Internal;
              w.component = component_of(ue.source);
              w.index = off_src + static_cast<int>(c);
            } else {
              const auto key = std::pair(u, off_dst + static_cast<int>(c));
              w.index = static_cast<int>(std::find(lay.v_source.begin(), lay.v_source.end(), key) - lay.v_source.begin());
            }
            inputs.push_back(w);
          }
        }
        wiring.inputs.push_back(std::move(inputs));
      }
      for (const auto& [u, idx] : lay.w_source) wiring.outputs.emplace_back(component_of(u), idx);
      model = std::make_shared<const CompositeModel>(std::move(comps), std::move(wiring),
                                                     static_cast<int>(lay.v_source.size()));
    }

    // Cost and controller.
    std::vector<LocalCostSpec> unit_costs;
    for (const auto& pu : plant.units) unit_costs.push_back(pu.cost);
    LocalCostSpec cost = merge_costs(plant, members, unit_costs);

    std::vector<int> controlled;
    for (int u : members) {
      if (unit_at(plant, u).controller != ControllerKind::None) controlled.push_back(u);
    }
    ControllerKind kind = ControllerKind::None;
    NmpcConfig cfg;
    if (!controlled.empty()) {
      const PlantUnit& lead = unit_at(plant, controlled.front());
      cfg = lead.controller_config;
      cfg.mpc.horizon = plant.horizon;
      kind = members.size() == 1 ? lead.controller : ControllerKind::Nmpc;
      cfg.mpc.tracked_outputs.clear();
      std::vector<double> q, r;
      int y_off = 0;
      for (int u : members) {
        const PlantUnit& pu = unit_at(plant, u);
        const Dims& dm = pu.model->dims();
        if (pu.controller != ControllerKind::None) {
          const auto& c = pu.controller_config.mpc;
          for (std::size_t j = 0; j < c.tracked_outputs.size(); ++j) {
            cfg.mpc.tracked_outputs.push_back(c.tracked_outputs[j] + y_off);
            q.push_back(c.q[static_cast<Eigen::Index>(j)]);
          }
          for (int j = 0; j < dm.nu; ++j) r.push_back(c.r[j]);
        } else {
          for (int j = 0; j < dm.nu; ++j) r.push_back(0.0);
        }
        y_off += dm.ny;
      }
      cfg.mpc.q = Eigen::Map<Vector>(q.data(), static_cast<Eigen::Index>(q.size()));
      cfg.mpc.r = Eigen::Map<Vector>(r.data(), static_cast<Eigen::Index>(r.size()));
      input_box(plant, members, cfg.mpc.u_min, cfg.mpc.u_max);
      topo.controlled.insert(g + 1);
    }

    std::string name;
    for (int u : members) name += (name.empty() ? "" : "+") + unit_at(plant, u).name;
    subsystems.push_back(std::make_shared<const Subsystem>(SubsystemId{g + 1}, name, model,
                                                           std::move(cost), kind, cfg));
    out.layout.push_back(std::move(lay));
  }
  out.network = std::make_shared<const Network>(Topology(std::move(topo)), std::move(subsystems));
  return out;
}

Plant::Plant(const PlantSpec& spec) : spec_(spec) {
  ValidationReport rep = validate_plant(spec_);
  if (!rep.ok()) {
    std::string msg = "invalid plant:";
    for (const auto& v : rep.violations) msg += "\n  " + v;
    throw ConfigError(msg);
  }
  std::vector<std::shared_ptr<const Dynamics>> comps;
  CompositeWiring wiring;
  for (std::size_t i = 0; i < spec_.units.size(); ++i) {
    const int u = static_cast<int>(i) + 1;
    comps.push_back(spec_.units[i].model);
    std::vector<WireSource> inputs;
    for (std::size_t e : unit_in(spec_, u)) {
      const int off = offset_out(spec_, e);
      for (std::size_t c = 0; c < spec_.edges[e].channels.size(); ++c) {
        inputs.push_back({WireSource::Kind::Internal, off + static_cast<int>(c), spec_.edges[e].source - 1});
      }
    }
    wiring.inputs.push_back(std::move(inputs));
  }
  model_ = std::make_shared<const CompositeModel>(std::move(comps), std::move(wiring), 0);
}

std::vector<Vector> Plant::operating_state() const {
  std::vector<Vector> out;
  for (const auto& u : spec_.units) out.push_back(u.model->operating_point().x);
  return out;
}

PlantStep Plant::step(const std::vector<Vector>& x, const std::vector<Vector>& u,
                      const std::vector<Vector>& d, int k) const {
  const std::size_t n = spec_.units.size();
  if (x.size() != n || u.size() != n || d.size() != n) {
    throw std::invalid_argument("plant step: one vector per unit required");
  }
  const Dims& dm = model_->dims();
  Vector X(dm.nx), U(dm.nu), D(dm.nd);
  for (std::size_t i = 0; i < n; ++i) {
    const Dims& off = model_->component_offsets(i);
    const Dims& ud = spec_.units[i].model->dims();
    if (x[i].size() != ud.nx || u[i].size() != ud.nu || d[i].size() != ud.nd) {
      throw std::invalid_argument(fmt::format("plant step: dimension mismatch for unit {}", spec_.units[i].name));
    }
    for (int j = 0; j < ud.nu; ++j) {
      const Signal& s = spec_.units[i].inputs[static_cast<std::size_t>(j)];
      if (!(u[i][j] >= s.min && u[i][j] <= s.max)) {
        throw std::invalid_argument(fmt::format("plant step: input {} = {} outside [{}, {}]",
                                                s.name, u[i][j], s.min, s.max));
      }
    }
    X.segment(off.nx, ud.nx) = x[i];
    U.segment(off.nu, ud.nu) = u[i];
    D.segment(off.nd, ud.nd) = d[i];
  }
  std::vector<CompositeModel::ComponentSignals> sig;
  Vector X_next;
  const Vector none;
  model_->evaluate_components(X, U, none, D, sig, X_next);
  if (!X_next.allFinite()) throw SimulationError(fmt::format("plant state not finite at step {}", k), k);
  PlantStep out;
  for (std::size_t i = 0; i < n; ++i) {
    const Dims& off = model_->component_offsets(i);
    const Dims& ud = spec_.units[i].model->dims();
    out.x_next.push_back(X_next.segment(off.nx, ud.nx));
    out.y.push_back(sig[i].y);
    out.v.push_back(sig[i].v);
    out.w.push_back(sig[i].w);
    if (!sig[i].y.allFinite() || !sig[i].w.allFinite()) {
      throw SimulationError(fmt::format("plant output not finite at step {}", k), k);
    }
  }
  return out;
}

PlantStep step_plant(const Plant& plant, const std::vector<Vector>& x,
                     const std::vector<Vector>& u, const std::vector<Vector>& d, int k) {
  return plant.step(x, u, d, k);
}

}  // namespace hiercoord
