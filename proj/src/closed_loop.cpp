#include "hiercoord/closed_loop.hpp"

#include "hiercoord/error.hpp"
#include "hiercoord/log.hpp"
#include "hiercoord/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace hiercoord {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

int output_index(const PlantUnit& u, const std::string& name) {
  for (std::size_t i = 0; i < u.outputs.size(); ++i) {
    if (u.outputs[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

Vector concat(const std::vector<Vector>& parts, const std::vector<int>& units) {
  Eigen::Index n = 0;
  for (int u : units) n += parts[static_cast<std::size_t>(u - 1)].size();
  Vector out(n);
  Eigen::Index at = 0;
  for (int u : units) {
    const Vector& p = parts[static_cast<std::size_t>(u - 1)];
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

void split(const Vector& v, const std::vector<int>& units, const PlantSpec& plant,
           std::vector<Vector>& per_unit) {
  Eigen::Index at = 0;
  for (int u : units) {
    const int nu = plant.units[static_cast<std::size_t>(u - 1)].model->dims().nu;
    per_unit[static_cast<std::size_t>(u - 1)] = v.segment(at, nu);
    at += nu;
  }
}

// Everything both strategies share.
struct Harness {
  const Scenario& scenario;
  const BenchmarkConfig& config;
  const PlantSpec& plant;
  Plant truth;
  DecomposedNetwork dn;
  std::vector<Vector> r_weights;  // per subsystem: 1/scale^2 per incoming channel

  Harness(const Scenario& s, const BenchmarkConfig& c)
      : scenario(s), config(c), plant(c.plant), truth(c.plant), dn(decompose(c.plant, c.decomposition)) {
    scenario.validate();
    config.coordinator.validate();
    const Topology& topo = dn.network->topology();
    for (SubsystemId sid : topo.all()) {
      Vector w(topo.in_dim(sid));
      Eigen::Index at = 0;
      for (std::size_t e : topo.stack_in(sid)) {
        for (double sc : topo.edges()[e].scale) w[at++] = 1.0 / (sc * sc);
      }
      r_weights.push_back(w);
    }
  }

  const Network& net() const { return *dn.network; }
  const SubsystemLayout& layout(SubsystemId s) const { return dn.layout[static_cast<std::size_t>(s.index - 1)]; }

  /// Desired set-points of the controlled subsystems, in r order.
  Vector desired(const std::vector<LocalCostSpec>& sub_costs) const {
    Vector r(net().setpoint_dim());
    for (SubsystemId s : net().topology().controlled()) {
      const Subsystem& sub = net().subsystem(s);
      const Block b = net().setpoint_block(s);
      const auto& tracked = sub.controller_config().mpc.tracked_outputs;
      for (std::size_t j = 0; j < tracked.size(); ++j) {
        double target = sub.model().operating_point().y[tracked[j]];
        for (const CostTerm& t : sub_costs[static_cast<std::size_t>(s.index - 1)].terms) {
          if (t.kind != CostKind::Tracking) continue;
          for (std::size_t m = 0; m < t.outputs.size(); ++m) {
            if (t.outputs[m] == tracked[j]) target = t.target[static_cast<Eigen::Index>(m)];
          }
        }
        r[static_cast<Eigen::Index>(b.offset + j)] = target;
      }
    }
    return r;
  }

  void geometry(Vector& halfwidth, Vector& rinit, Vector& rmin, Vector& rmax) const {
    std::vector<double> h, a, b, c;
    for (SubsystemId s : net().topology().controlled()) {
      for (int u : layout(s).units) {
        const PlantUnit& pu = plant.units[static_cast<std::size_t>(u - 1)];
        if (pu.controller == ControllerKind::None) continue;
        for (Eigen::Index j = 0; j < pu.setpoint.halfwidth.size(); ++j) {
          h.push_back(pu.setpoint.halfwidth[j]);
          a.push_back(pu.setpoint.radius_init[j]);
          b.push_back(pu.setpoint.radius_min[j]);
          c.push_back(pu.setpoint.radius_max[j]);
        }
      }
    }
    auto to_vec = [](std::vector<double>& v) { return Vector(Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()))); };
    halfwidth = to_vec(h);
    rinit = to_vec(a);
    rmin = to_vec(b);
    rmax = to_vec(c);
  }

  ClosedLoopTrace new_trace(const std::string& strategy) const {
    ClosedLoopTrace t;
    t.strategy = strategy;
    t.scenario = scenario.name;
    t.Ts = plant.Ts;
    t.transient_end = scenario.transient_end;
    for (std::size_t i = 0; i < plant.units.size(); ++i) {
      const PlantUnit& u = plant.units[i];
      t.unit_names.push_back(u.name);
      std::vector<std::string> in, out, cp;
      for (const auto& s : u.inputs) in.push_back(s.name);
      for (const auto& s : u.outputs) out.push_back(s.name);
      std::vector<const UnitEdge*> incoming;
      for (const auto& e : plant.edges) {
        if (e.dest == static_cast<int>(i) + 1) incoming.push_back(&e);
      }
      std::sort(incoming.begin(), incoming.end(), [](const UnitEdge* a, const UnitEdge* b) { return a->source < b->source; });
      for (const UnitEdge* e : incoming) {
        for (const auto& ch : e->channels) cp.push_back(plant.units[static_cast<std::size_t>(e->source - 1)].name + "_" + ch);
      }
      t.input_names.push_back(in);
      t.output_names.push_back(out);
      t.coupling_names.push_back(cp);
      for (const CostTerm& term : u.cost.terms) {
        if (term.kind != CostKind::ConstraintViolation) continue;
        for (int o : term.outputs) t.bound_names.push_back(u.name + "." + u.outputs[static_cast<std::size_t>(o)].name);
      }
    }
    for (SubsystemId s : net().topology().controlled()) {
      for (int u : layout(s).units) {
        const PlantUnit& pu = plant.units[static_cast<std::size_t>(u - 1)];
        if (pu.controller == ControllerKind::None) continue;
        for (int o : pu.controller_config.mpc.tracked_outputs) {
          t.setpoint_names.push_back(pu.name + "." + pu.outputs[static_cast<std::size_t>(o)].name);
        }
      }
    }
    return t;
  }

  PeriodContext context(const std::vector<Vector>& x, const std::vector<Vector>& u_last,
                        const std::vector<Vector>& d, const std::vector<LocalCostSpec>& unit_costs,
                        const std::vector<std::optional<Profile>>& warm) const {
    PeriodContext ctx;
    for (SubsystemId s : net().topology().all()) {
      const auto& units = layout(s).units;
      ctx.states.push_back({concat(x, units), concat(u_last, units), concat(d, units),
                            warm[static_cast<std::size_t>(s.index - 1)]});
      ctx.costs.push_back(merge_costs(plant, units, unit_costs));
    }
    return ctx;
  }

  /// Actual incoming coupling of subsystem s from per-unit measurements.
  Vector measured_in(SubsystemId s, const std::vector<Vector>& unit_v) const {
    const auto& src = layout(s).v_source;
    Vector v(static_cast<Eigen::Index>(src.size()));
    for (std::size_t i = 0; i < src.size(); ++i) {
      v[static_cast<Eigen::Index>(i)] = unit_v[static_cast<std::size_t>(src[i].first - 1)][src[i].second];
    }
    return v;
  }

  /// Records measurements and costs of one applied step.
  void record(TraceRow& row, const PlantStep& ps, const std::vector<Vector>& u,
              const std::vector<LocalCostSpec>& unit_costs, ClosedLoopTrace& trace) const {
    row.u = u;
    row.y = ps.y;
    row.v = ps.v;
    row.stage_cost = 0.0;
    row.violation = 0.0;
    std::vector<double> bounds;
    for (std::size_t i = 0; i < plant.units.size(); ++i) {
      const LocalCostSpec& c = unit_costs[i];
      const double j = local_cost(Profile(static_cast<int>(ps.y[i].size()), 1, ps.y[i]),
                                  Profile(static_cast<int>(u[i].size()), 1, u[i]), c);
      row.unit_cost.push_back(j);
      row.stage_cost += j;
      row.violation += violation_amount(ps.y[i], c);
      for (const CostTerm& term : c.terms) {
        if (term.kind != CostKind::ConstraintViolation) continue;
        for (Eigen::Index m = 0; m < term.target.size(); ++m) bounds.push_back(term.target[m]);
      }
    }
    trace.bound_values.push_back(std::move(bounds));
  }

  std::vector<Vector> initial_inputs() const {
    std::vector<Vector> u;
    for (const auto& pu : plant.units) u.push_back(pu.model->operating_point().u);
    return u;
  }
};

void fail(ClosedLoopTrace& trace, const std::exception& e, int k) {
  trace.failed = true;
  trace.failure = e.what();
  trace.failure_step = k;
  log::warn("run stopped at step {}: {}", k, e.what());
}

}  // namespace

void CoordinatorConfig::validate() const {
  fixed_point.validate();
  if (filter == FilterMode::Fixed && !(filter_gain > 0.0 && filter_gain <= 1.0)) {
    throw ConfigError("filter gain must be in (0,1]");
  }
  if (!(kappa > 0.0)) throw ConfigError("filter kappa must be positive");
  if (power_iterations < 1) throw ConfigError("power_iterations must be >= 1");
  if (!(power_step > 0.0)) throw ConfigError("power_step must be positive");
  if (grid_size < 1) throw ConfigError("grid_size must be >= 1");
  if (!(gamma_e > 1.0)) throw ConfigError("gamma_e must be > 1");
  if (!(gamma_c > 0.0 && gamma_c < 1.0)) throw ConfigError("gamma_c must be in (0,1)");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

void Scenario::validate() const {
  if (steps < 1) throw ConfigError("scenario steps must be >= 1");
  if (transient_end < 0 || transient_end > steps) throw ConfigError("transient_end must lie in [0, steps]");
  for (const auto* list : {&setpoints, &bounds, &disturbances}) {
    for (const auto& c : *list) {
      if (c.step < 0 || c.step >= steps) {
        throw ConfigError(fmt::format("schedule change for {} at step {} outside [0, {})", c.signal, c.step, steps));
      }
      if (!std::isfinite(c.value)) throw ConfigError(fmt::format("schedule value for {} is not finite", c.signal));
    }
  }
  for (const auto& c : bounds) {
    if (!(c.value > 0.0)) throw ConfigError(fmt::format("bound for {} must be positive", c.signal));
  }
}

std::vector<LocalCostSpec> scheduled_costs(const PlantSpec& plant, const Scenario& scenario, int k) {
  std::vector<LocalCostSpec> out;
  for (const auto& u : plant.units) out.push_back(u.cost);
  auto apply = [&](const std::vector<ScheduleChange>& list, CostKind kind) {
    for (const auto& c : list) {
      if (c.step > k) continue;
      bool found = false;
      for (std::size_t i = 0; i < plant.units.size(); ++i) {
        const int o = output_index(plant.units[i], c.signal);
        if (o < 0) continue;
        for (CostTerm& t : out[i].terms) {
          if (t.kind != kind) continue;
          for (std::size_t m = 0; m < t.outputs.size(); ++m) {
            if (t.outputs[m] == o) {
              t.target[static_cast<Eigen::Index>(m)] = c.value;
              found = true;
            }
          }
        }
      }
      if (!found) {
        throw ConfigError(fmt::format("scenario refers to '{}', which has no {} term", c.signal,
                                      kind == CostKind::Tracking ? "tracking" : "constraint"));
      }
    }
  };
  // Later entries win when several apply; lists are taken in step order.
  auto sorted = [](std::vector<ScheduleChange> v) {
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
    return v;
  };
  apply(sorted(scenario.setpoints), CostKind::Tracking);
  apply(sorted(scenario.bounds), CostKind::ConstraintViolation);
  return out;
}

std::vector<Vector> scheduled_disturbances(const PlantSpec& plant, const Scenario& scenario, int k) {
  std::vector<Vector> out;
  for (const auto& u : plant.units) out.push_back(u.model->operating_point().d);
  std::vector<ScheduleChange> list = scenario.disturbances;
  std::stable_sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
  for (const auto& c : list) {
    bool found = false;
    for (std::size_t i = 0; i < plant.units.size(); ++i) {
      for (std::size_t j = 0; j < plant.units[i].disturbances.size(); ++j) {
        if (plant.units[i].disturbances[j].name != c.signal) continue;
        found = true;
        if (c.step <= k) out[i][static_cast<Eigen::Index>(j)] = c.value;
      }
    }
    if (!found) throw ConfigError(fmt::format("scenario refers to unknown disturbance '{}'", c.signal));
  }
  return out;
}

ClosedLoopTrace run_hierarchical(const Scenario& scenario, const BenchmarkConfig& config) {
  Harness h(scenario, config);
  const Network& net = h.net();
  const CoordinatorConfig& cc = config.coordinator;
  ClosedLoopTrace trace = h.new_trace(fmt::format("hierarchical-{}ss", net.size()));

  std::vector<Vector> x = h.truth.operating_state();
  std::vector<Vector> u_last = h.initial_inputs();
  std::vector<std::optional<Profile>> warm(static_cast<std::size_t>(net.size()));
  Vector halfwidth, rinit, rmin, rmax;
  h.geometry(halfwidth, rinit, rmin, rmax);

  TrustRegionConfig tr;
  tr.grid_size = cc.grid_size;
  tr.gamma_e = cc.gamma_e;
  tr.gamma_c = cc.gamma_c;
  tr.radius_init = rinit;
  tr.radius_min = rmin;
  tr.radius_max = rmax;
  TrustRegionState region;
  Vector v_prev, r_d_prev;

  for (int k = 0; k < scenario.steps; ++k) {
    try {
      const auto t0 = Clock::now();
      const auto unit_costs = scheduled_costs(h.plant, scenario, k);
      const auto d = scheduled_disturbances(h.plant, scenario, k);
      const PeriodContext ctx = h.context(x, u_last, d, unit_costs, warm);
      const Vector r_d = h.desired(ctx.costs);
      tr.lower = r_d - halfwidth;
      tr.upper = r_d + halfwidth;
      if (k == 0) {
        region = initial_region(r_d, tr);
      } else if (r_d != r_d_prev) {
        // The desired setpoint moved: the region shrunk around the old
        // optimum is too small to follow it.
        region.radius = rinit;
      }
      r_d_prev = r_d;
      region.center = region.center.cwiseMax(tr.lower).cwiseMin(tr.upper);

      NetworkMap map(net, ctx);
      const Vector v0 = k == 0 ? net.nominal_in() : net.shift_in(v_prev);
      double alpha = 1.0;
      if (cc.filter == CoordinatorConfig::FilterMode::Fixed) alpha = cc.filter_gain;
      if (cc.filter == CoordinatorConfig::FilterMode::Synthesized) {
        const double rho = estimate_map_gain(map, region.center, v0, cc.power_iterations, cc.power_step);
        alpha = synthesize_filter(rho, cc.kappa);
      }
      const Vector pi = Vector::Constant(v0.size(), alpha);

      std::vector<std::pair<Vector, FixedPointResult>> evaluated;
      auto batch = [&](const std::vector<Vector>& rs) {
        std::vector<FixedPointResult> fps(rs.size());
        parallel_for(rs.size(), cc.threads, [&](std::size_t i) {
          fps[i] = fixed_point_solve(map, rs[i], v0, pi, cc.fixed_point);
        });
        std::vector<CloudPoint> pts;
        for (std::size_t i = 0; i < rs.size(); ++i) {
          pts.push_back({rs[i], fps[i].J_c, fps[i].converged && std::isfinite(fps[i].J_c)});
          evaluated.emplace_back(rs[i], std::move(fps[i]));
        }
        return pts;
      };
      const OptimizeResult opt = optimize_setpoint(region, tr, batch);
      const FixedPointResult* fp = nullptr;
      for (const auto& [r, res] : evaluated) {
        if (r.size() == opt.r_opt.size() && (r - opt.r_opt).cwiseAbs().maxCoeff() == 0.0) {
          fp = &res;
          break;
        }
      }
      if (!fp) fp = &evaluated.front().second;  // previous set-point kept; use the center run
      const Vector& v_star = fp->v_in_star;
      if (!v_star.allFinite()) throw SolverError("coordination diverged");

      double nmpc_ms = map.nmpc_ms();
      std::vector<Vector> u = u_last;
      TraceRow row;
      row.step = k;
      row.r_opt = opt.r_opt;
      row.r_d = r_d;
      row.J_c = opt.J;
      row.sigma_used = fp->iterations;
      row.converged = fp->converged;
      row.budget_hits = fp->budget_hits;
      for (SubsystemId s : net.topology().controlled()) {
        const Subsystem& sub = net.subsystem(s);
        const Block b = net.setpoint_block(s);
        const Vector rs = opt.r_opt.segment(static_cast<Eigen::Index>(b.offset), static_cast<Eigen::Index>(b.length));
        const ControlPlan plan = sub.plan(ctx.states[static_cast<std::size_t>(s.index - 1)], rs, net.gather_in(s, v_star));
        if (sub.controller() == ControllerKind::Nmpc) nmpc_ms += plan.walltime_ms;
        split(plan.u.step(0), h.layout(s).units, h.plant, u);
        warm[static_cast<std::size_t>(s.index - 1)] = plan.u.shifted();
      }
      row.walltime_nmpc_ms = nmpc_ms;
      row.walltime_cycle_ms = ms_since(t0);

      const PlantStep ps = h.truth.step(x, u, d, k);
      h.record(row, ps, u, unit_costs, trace);
      double err = 0.0;
      std::size_t len = 0;
      for (SubsystemId s : net.topology().all()) {
        const Vector presumed = net.gather_in(s, v_star).step(0);
        const Vector actual = h.measured_in(s, ps.v);
        const Vector& w = h.r_weights[static_cast<std::size_t>(s.index - 1)];
        err += (presumed - actual).cwiseAbs2().cwiseProduct(w).sum();
        len += static_cast<std::size_t>(presumed.size());
      }
      row.presumption_error = len ? std::sqrt(err / static_cast<double>(len)) : 0.0;
      trace.rows.push_back(std::move(row));

      v_prev = v_star;
      x = ps.x_next;
      u_last = u;
    } catch (const SolverError& e) {
      fail(trace, e, k);
      break;
    }
  }
  return trace;
}

ClosedLoopTrace run_decentralized(const Scenario& scenario, const BenchmarkConfig& config) {
  Harness h(scenario, config);
  const Network& net = h.net();
  ClosedLoopTrace trace = h.new_trace("decentralized");

  std::vector<Vector> x = h.truth.operating_state();
  std::vector<Vector> u_last = h.initial_inputs();
  std::vector<Vector> v_meas;
  for (const auto& pu : h.plant.units) v_meas.push_back(pu.model->operating_point().v);
  std::vector<std::optional<Profile>> warm(static_cast<std::size_t>(net.size()));
  const int n = net.topology().horizon();

  for (int k = 0; k < scenario.steps; ++k) {
    try {
      const auto t0 = Clock::now();
      const auto unit_costs = scheduled_costs(h.plant, scenario, k);
      const auto d = scheduled_disturbances(h.plant, scenario, k);
      const PeriodContext ctx = h.context(x, u_last, d, unit_costs, warm);
      const Vector r_d = h.desired(ctx.costs);

      TraceRow row;
      row.step = k;
      row.r_opt = r_d;
      row.r_d = r_d;
      row.J_c = std::numeric_limits<double>::quiet_NaN();
      std::vector<Vector> u = u_last;
      std::vector<Vector> frozen;
      for (SubsystemId s : net.topology().all()) frozen.push_back(h.measured_in(s, v_meas));
      for (SubsystemId s : net.topology().controlled()) {
        const Subsystem& sub = net.subsystem(s);
        const Block b = net.setpoint_block(s);
        const Vector rs = r_d.segment(static_cast<Eigen::Index>(b.offset), static_cast<Eigen::Index>(b.length));
        const Profile v_in = Profile::constant(frozen[static_cast<std::size_t>(s.index - 1)], n);
        const ControlPlan plan = sub.plan(ctx.states[static_cast<std::size_t>(s.index - 1)], rs, v_in);
        if (sub.controller() == ControllerKind::Nmpc) row.walltime_nmpc_ms += plan.walltime_ms;
        if (plan.budget_exhausted) ++row.budget_hits;
        split(plan.u.step(0), h.layout(s).units, h.plant, u);
        warm[static_cast<std::size_t>(s.index - 1)] = plan.u.shifted();
      }
      row.walltime_cycle_ms = ms_since(t0);

      const PlantStep ps = h.truth.step(x, u, d, k);
      h.record(row, ps, u, unit_costs, trace);
      double err = 0.0;
      std::size_t len = 0;
      for (SubsystemId s : net.topology().all()) {
        const Vector actual = h.measured_in(s, ps.v);
        const Vector& w = h.r_weights[static_cast<std::size_t>(s.index - 1)];
        err += (frozen[static_cast<std::size_t>(s.index - 1)] - actual).cwiseAbs2().cwiseProduct(w).sum();
        len += static_cast<std::size_t>(actual.size());
      }
      row.presumption_error = len ? std::sqrt(err / static_cast<double>(len)) : 0.0;
      trace.rows.push_back(std::move(row));

      v_meas = ps.v;
      x = ps.x_next;
      u_last = u;
    } catch (const SolverError& e) {
      fail(trace, e, k);
      break;
    }
  }
  return trace;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

PerformanceReport closed_loop_cost(const ClosedLoopTrace& trace) {
  PerformanceReport rep;
  rep.steps = static_cast<int>(trace.rows.size());
  if (trace.rows.empty()) return rep;
  rep.unit_J_cl.assign(trace.unit_names.size(), 0.0);
  std::vector<double> nmpc, cycle;
  for (const auto& row : trace.rows) {
    rep.J_cl += row.stage_cost;
    for (std::size_t i = 0; i < row.unit_cost.size() && i < rep.unit_J_cl.size(); ++i) rep.unit_J_cl[i] += row.unit_cost[i];
    rep.violation_integral += row.violation * trace.Ts;
    if (row.step >= trace.transient_end) rep.violation_integral_post_transient += row.violation * trace.Ts;
    if (!row.converged) ++rep.unconverged_steps;
    nmpc.push_back(row.walltime_nmpc_ms);
    cycle.push_back(row.walltime_cycle_ms);
  }
  const double n = static_cast<double>(trace.rows.size());
  rep.J_cl /= n;
  for (double& j : rep.unit_J_cl) j /= n;
  rep.walltime_nmpc_median_ms = median(nmpc);
  rep.walltime_nmpc_max_ms = *std::max_element(nmpc.begin(), nmpc.end());
  rep.walltime_cycle_median_ms = median(cycle);
  rep.walltime_cycle_max_ms = *std::max_element(cycle.begin(), cycle.end());
  return rep;
}

}  // namespace hiercoord
