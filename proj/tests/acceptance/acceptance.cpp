// Acceptance checks 1-10. One line per criterion; exit status 1 if any fails.

#include "hiercoord/coldbox.hpp"
#include "hiercoord/commands.hpp"
#include "hiercoord/config.hpp"
#include "hiercoord/log.hpp"
#include "hiercoord/trace_io.hpp"
#include "support/affine_map.hpp"
#include "support/triangle.hpp"

#include <fmt/format.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

using namespace hiercoord;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = HIERCOORD_SOURCE_DIR;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Fixed points collected by criteria 2 and 4 for the coherence check.
std::vector<std::pair<std::string, FixedPointResult>> g_fixed_points;
std::map<std::string, double> g_eps;

void keep(const std::string& label, const FixedPointResult& r, double eps_max) {
  g_fixed_points.emplace_back(label, r);
  g_eps[label] = eps_max;
}

// ---- 1 ------------------------------------------------------------------

TopologySpec four_unit_spec(int horizon) {
  TopologySpec t;
  t.subsystem_count = 4;
  t.controlled = {1, 4};
  t.horizon = horizon;
  const auto edges = build_coldbox_4ss().plant.edges;
  for (const auto& e : edges) {
    t.edges.push_back({{e.source}, {e.dest}, static_cast<int>(e.channels.size()), e.channels, e.scale});
  }
  return t;
}

// Stacks built from the definitions with a distinct tag per entry.
std::pair<Vector, Vector> tagged(const TopologySpec& t) {
  std::vector<double> out, in;
  auto tag = [](const CouplingEdge& e, int k, int c) {
    return 1e4 * e.source.index + 1e3 * e.dest.index + 10.0 * k + c;
  };
  for (int s = 1; s <= t.subsystem_count; ++s) {
    std::vector<const CouplingEdge*> o, i;
    for (const auto& e : t.edges) {
      if (e.source.index == s) o.push_back(&e);
      if (e.dest.index == s) i.push_back(&e);
    }
    std::sort(o.begin(), o.end(), [](auto* a, auto* b) { return a->dest < b->dest; });
    std::sort(i.begin(), i.end(), [](auto* a, auto* b) { return a->source < b->source; });
    for (auto* e : o) {
      for (int k = 0; k < t.horizon; ++k) {
        for (int c = 0; c < e->dim; ++c) out.push_back(tag(*e, k, c));
      }
    }
    for (auto* e : i) {
      for (int k = 0; k < t.horizon; ++k) {
        for (int c = 0; c < e->dim; ++c) in.push_back(tag(*e, k, c));
      }
    }
  }
  return {Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size())),
          Eigen::Map<Vector>(in.data(), static_cast<Eigen::Index>(in.size()))};
}

Outcome routing() {
  const auto t0 = Clock::now();
  int checked = 0;
  bool ok = true;
  for (const auto& spec : {hctest::triangle_spec(1, 1), hctest::triangle_spec(2, 12), four_unit_spec(1), four_unit_spec(12)}) {
    const Topology t(spec);
    const Routing r = build_routing(t);
    const auto [out, in] = tagged(spec);
    ok = ok && r.length == static_cast<std::size_t>(out.size()) && (r.global.apply(out).array() == in.array()).all();
    ++checked;
  }
  const double s = seconds_since(t0);
  return {ok && s < 1.0, fmt::format("{} topologies exact, {:.3f} s", checked, s)};
}

// ---- 2 ------------------------------------------------------------------

Outcome fixed_point_vs_direct() {
  const auto t0 = Clock::now();
  std::mt19937 rng(20240601);
  double worst_err = 0.0, worst_rate = 0.0;
  int worst_sigma = 0;
  bool ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 4 + trial;
    hctest::AffineMap map;
    map.M = hctest::random_contraction(n, 0.8, rng);
    map.B = hctest::random_contraction(n, 1.0, rng).leftCols(2);
    map.b = hctest::random_vector(n, rng);
    const Vector r = hctest::random_vector(2, rng);
    const FixedPointConfig cfg{5e-10, 100};
    const auto res = fixed_point_solve(map, r, Vector::Zero(n), Vector::Ones(n), cfg);
    const double err = (res.v_in_star - map.direct(r)).cwiseAbs().maxCoeff();
    const auto& e = res.residuals;
    const std::size_t mid = e.size() / 2;
    const double rate = std::pow(e.back() / e[mid], 1.0 / static_cast<double>(e.size() - 1 - mid));
    ok = ok && res.converged && res.iterations <= 100 && err <= 1e-8 && rate < 1.0;
    worst_err = std::max(worst_err, err);
    worst_rate = std::max(worst_rate, rate);
    worst_sigma = std::max(worst_sigma, res.iterations);
    if (res.converged) keep(fmt::format("affine network {}", trial), res, cfg.eps_max);
  }
  const double s = seconds_since(t0);
  return {ok && s < 1.0, fmt::format("10 networks, max error {:.2e}, max sigma {}, tail rate <= {:.3f}, {:.3f} s",
                                     worst_err, worst_sigma, worst_rate, s)};
}

// ---- 4 (before 3, which reuses its fixed points) -------------------------

Outcome filter_synthesis() {
  const hctest::AffineMap map = hctest::scalar_map(-3.0, 4.0);
  const FixedPointConfig cfg{1e-6, 200};
  const Vector r, v0 = Vector::Zero(1);
  const auto plain = fixed_point_solve(map, r, v0, Vector::Ones(1), cfg);
  const double rho = estimate_map_gain(map, r, v0);
  const double alpha = synthesize_filter(rho);
  const auto filtered = fixed_point_solve(map, r, v0, Vector::Constant(1, alpha), cfg);
  if (filtered.converged) keep("gain-3 map, synthesized filter", filtered, cfg.eps_max);
  return {!plain.converged && filtered.converged && filtered.iterations <= 200,
          fmt::format("identity: {} after {} rounds; alpha = {:.4f}: {} after {} rounds",
                      plain.converged ? "converged" : "diverged", plain.iterations, alpha,
                      filtered.converged ? "converged" : "no convergence", filtered.iterations)};
}

// ---- 3 ------------------------------------------------------------------

void coldbox_fixed_points() {
  for (const auto& cfg : {build_coldbox_4ss(), build_coldbox_2ss()}) {
    const auto net = decompose(cfg.plant, cfg.decomposition);
    const Network& nw = *net.network;
    for (int variant = 0; variant < 2; ++variant) {
      PeriodContext ctx;
      for (SubsystemId s : nw.topology().all()) {
        SubsystemState st = nw.subsystem(s).initial_state();
        if (variant == 1) st.x[0] += s.index == 1 ? 1.5 : 0.1;
        ctx.states.push_back(st);
        ctx.costs.push_back(nw.subsystem(s).cost());
      }
      const NetworkMap map(nw, ctx);
      Vector r(nw.setpoint_dim());
      for (SubsystemId s : nw.topology().controlled()) {
        const Block b = nw.setpoint_block(s);
        const Subsystem& sub = nw.subsystem(s);
        const auto& tracked = sub.controller_config().mpc.tracked_outputs;
        for (std::size_t j = 0; j < tracked.size(); ++j) {
          r[static_cast<Eigen::Index>(b.offset + j)] = sub.model().operating_point().y[tracked[j]];
        }
      }
      if (variant == 1) r[0] += 1.0;
      const Vector v0 = nw.nominal_in();
      const auto& cc = cfg.coordinator;
      const double alpha = synthesize_filter(estimate_map_gain(map, r, v0, cc.power_iterations, cc.power_step), cc.kappa);
      const auto res = fixed_point_solve(map, r, v0, Vector::Constant(v0.size(), alpha), cc.fixed_point);
      if (res.converged) {
        keep(fmt::format("{} {}", cfg.name, variant ? "perturbed" : "equilibrium"), res, cc.fixed_point.eps_max);
      }
    }
  }
}

Outcome coherence() {
  coldbox_fixed_points();
  bool ok = !g_fixed_points.empty();
  double worst = 0.0;
  std::string worst_label;
  for (const auto& [label, res] : g_fixed_points) {
    const double ratio = res.coherence_residual / g_eps[label];
    if (ratio > worst) {
      worst = ratio;
      worst_label = label;
    }
    ok = ok && res.coherence_residual <= 10.0 * g_eps[label];
  }
  return {ok, fmt::format("{} converged fixed points, worst residual {:.3f} x eps_max ({})", g_fixed_points.size(),
                          worst, worst_label)};
}

// ---- 5 ------------------------------------------------------------------

Outcome quadratic_surrogate() {
  std::mt19937 rng(77);
  double worst = 0.0;
  for (int dim = 1; dim <= 3; ++dim) {
    for (int trial = 0; trial < 5; ++trial) {
      const Matrix L = hctest::random_vector(dim * dim, rng).reshaped(dim, dim);
      const Matrix H = L * L.transpose() + Matrix::Identity(dim, dim);
      const Vector g = hctest::random_vector(dim, rng);
      const double c = hctest::random_vector(1, rng)[0];
      TrustRegionConfig tc;
      tc.grid_size = 3;
      tc.lower = Vector::Constant(dim, -10);
      tc.upper = Vector::Constant(dim, 10);
      tc.radius_init = tc.radius_min = tc.radius_max = Vector::Constant(dim, 0.7);
      TrustRegionState s = initial_region(hctest::random_vector(dim, rng), tc);
      std::vector<CloudPoint> cloud;
      for (const auto& r : build_grid(s, tc)) cloud.push_back({r, c + g.dot(r) + 0.5 * r.dot(H * r), true});
      const QuadModel m = quadratic_fit(cloud);
      worst = std::max({worst, std::abs(m.c - c), (m.g - g).cwiseAbs().maxCoeff(), (m.H - H).cwiseAbs().maxCoeff()});
    }
  }

  // Synthetic J_c with its minimiser away from the start.
  const Vector rstar{{62.1, 4.45, 9.62}};
  const Matrix Q = Vector{{3.0, 40.0, 200.0}}.asDiagonal();
  auto J = [&](const Vector& r) { return (r - rstar).dot(Q * (r - rstar)) + 0.3 * (r[0] - rstar[0]) * (r[1] - rstar[1]); };
  TrustRegionConfig tc;
  tc.grid_size = 3;
  tc.lower = Vector{{57.5, 4.1, 9.0}};
  tc.upper = Vector{{63.5, 5.1, 10.0}};
  tc.radius_init = Vector{{0.5, 0.05, 0.02}};
  tc.radius_min = Vector{{1e-6, 1e-6, 1e-7}};
  tc.radius_max = Vector{{2.0, 0.5, 0.5}};
  TrustRegionState s = initial_region(Vector{{60.5, 4.6, 9.5}}, tc);
  int periods = 0;
  double dist = 0.0;
  for (; periods < 5;) {
    const auto res = optimize_setpoint(s, tc, [&](const std::vector<Vector>& rs) {
      std::vector<CloudPoint> out;
      for (const auto& r : rs) out.push_back({r, J(r), true});
      return out;
    });
    ++periods;
    dist = (res.r_opt - rstar).cwiseAbs().maxCoeff();
    if (dist <= 1e-3) break;
  }
  return {worst <= 1e-6 && dist <= 1e-3,
          fmt::format("15 fits, max coefficient error {:.2e}; minimiser within {:.2e} after {} periods", worst, dist,
                      periods)};
}

// ---- 6 ------------------------------------------------------------------

Outcome benchmark_constants() {
  std::vector<std::string> missing;
  auto need = [&](bool cond, const std::string& what) {
    if (!cond) missing.push_back(what);
  };
  for (const char* name : {"coldbox_2ss.json", "coldbox_4ss.json"}) {
    const auto cfg = load_benchmark(kSource / "configs" / name);
    const auto& p = cfg.plant;
    auto unit = [&](const char* n) -> const PlantUnit& { return p.units.at(static_cast<std::size_t>(p.unit_index(n) - 1)); };
    const std::string f = name;
    need(p.Ts == 5.0, f + " Ts");
    const auto& jt = unit("JT");
    need(jt.cost.terms.at(0).weight == Vector{{1e4, 1e4}}, f + " Q JT");
    need(jt.cost.terms.at(0).target[0] == 60.5, f + " Ltb131 set-point");
    need(jt.inputs.at(0).name == "NCR22a" && jt.inputs[0].min == 0.0 && jt.inputs[0].max == 55.0, f + " NCR22a box");
    need(jt.inputs.at(1).name == "CV155" && jt.inputs[1].min == 0.0 && jt.inputs[1].max == 100.0, f + " CV155 box");
    const auto& t1 = unit("T1");
    need(t1.cost.terms.at(0).weight == Vector{{1e6}}, f + " Q T1");
    need(t1.inputs.at(0).name == "dP156" && t1.inputs[0].min == 0.0 && t1.inputs[0].max == 12.0, f + " dP156 box");
    const auto& nef34 = unit("NEF34");
    need(nef34.cost.terms.at(0).kind == CostKind::ConstraintViolation &&
             nef34.cost.terms[0].weight == Vector{{1e12}}, f + " Q NEF34");
    need(nef34.outputs.at(0).name == "M_out" && nef34.cost.terms[0].target == Vector{{0.07}}, f + " M_out bound");
    need(unit("NEF2").cost.is_zero(), f + " NEF2 zero cost");
  }
  std::string detail = "Ts, weights, actuator boxes, Ltb131 60.5 %, M_out 0.07 kg/s in both configs";
  if (!missing.empty()) {
    detail = "missing:";
    for (const auto& m : missing) detail += " " + m + ";";
  }
  return {missing.empty(), detail};
}

// ---- 7-9 ----------------------------------------------------------------

struct TimedRun {
  ClosedLoopTrace trace;
  PerformanceReport report;
  double seconds = 0.0;
};

TimedRun run(const std::string& strategy, const char* scenario) {
  RunSpec spec;
  spec.strategy = strategy;
  spec.scenario = kSource / "scenarios" / scenario;
  const auto [sc, cfg] = resolve_run(spec);
  const auto t0 = Clock::now();
  TimedRun out;
  out.trace = is_hierarchical(strategy) ? run_hierarchical(sc, cfg) : run_decentralized(sc, cfg);
  out.seconds = seconds_since(t0);
  out.report = closed_loop_cost(out.trace);
  return out;
}

Outcome constraint_scenario() {
  const TimedRun h = run("hierarchical-4ss", "ltb_step.json");
  const TimedRun d = run("decentralized", "ltb_step.json");
  const double vh = h.report.violation_integral_post_transient;
  const double vd = d.report.violation_integral_post_transient;
  const bool ok = !h.trace.failed && !d.trace.failed && vh <= 1e-4 && vd > 0.0 && vd >= 10.0 * vh && h.seconds < 60.0;
  return {ok, fmt::format("post-transient M_out violation: hierarchical {:.3e} kg, decentralized {:.3e} kg "
                          "(ratio {:.3g}); hierarchical run {:.1f} s",
                          vh, vd, vh > 0 ? vd / vh : INFINITY, h.seconds)};
}

Outcome speedup(const TimedRun& r4, const TimedRun& r2) {
  const double m4 = r4.report.walltime_nmpc_median_ms, m2 = r2.report.walltime_nmpc_median_ms;
  const int cycles = std::min(r4.report.steps, r2.report.steps);
  const double worst = r4.report.walltime_cycle_max_ms;
  const bool ok = !r4.trace.failed && !r2.trace.failed && cycles >= 50 && m4 < m2 && worst < r4.trace.Ts * 1000.0;
  return {ok, fmt::format("median NMPC time per cycle: 4ss {:.1f} ms, 2ss {:.1f} ms over {} cycles; "
                          "slowest 4ss cycle {:.0f} ms (limit {:.0f} ms)",
                          m4, m2, cycles, worst, r4.trace.Ts * 1000.0)};
}

Outcome ordering(const TimedRun& r4, const TimedRun& r2) {
  const double j4 = r4.report.J_cl, j2 = r2.report.J_cl;
  return {!r4.trace.failed && !r2.trace.failed && j4 <= j2,
          fmt::format("J_cl 4ss = {:.6g}, J_cl 2ss = {:.6g} (4ss - 2ss = {:+.4g}, {:+.3f} %)", j4, j2, j4 - j2,
                      100.0 * (j4 - j2) / j2)};
}

// ---- 10 -----------------------------------------------------------------

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / fmt::format("hiercoord_accept_{}", ::getpid());
  fs::remove_all(dir);
  // Short scenario with a set-point move, so the coordinator has work to do.
  const std::string scenario = fmt::format(R"({{
  "name": "determinism",
  "steps": 16,
  "setpoints": [{{"step": 3, "signal": "Ltb131", "value": 62.5}}],
  "bounds": [{{"step": 0, "signal": "M_out", "value": 0.07}}],
  "configs": {{
    "hierarchical-2ss": "{0}/configs/coldbox_2ss.json",
    "hierarchical-4ss": "{0}/configs/coldbox_4ss.json",
    "decentralized": "{0}/configs/coldbox_4ss.json"
  }}
}}
)", kSource.string());
  fs::create_directories(dir);
  write_atomic(dir / "scenario.json", scenario);

  int runs = 0;
  std::vector<std::string> differing;
  for (const char* strategy : {"hierarchical-4ss", "hierarchical-2ss", "decentralized"}) {
    std::vector<std::string> traces;
    for (int threads : {1, 4, 1, 4}) {
      RunSpec spec;
      spec.strategy = strategy;
      spec.scenario = dir / "scenario.json";
      spec.out_dir = dir / fmt::format("{}_{}_{}", strategy, threads, runs);
      spec.threads = threads;
      std::ostringstream sink;
      if (cmd_run(spec, sink, sink) != kExitOk) {
        differing.push_back(fmt::format("{} failed", strategy));
        break;
      }
      ++runs;
      traces.push_back(strip_walltime_columns(read_text(spec.out_dir / "trace.csv")));
    }
    for (const auto& t : traces) {
      if (t != traces.front()) {
        differing.push_back(strategy);
        break;
      }
    }
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  std::string detail = fmt::format("{} runs (threads 1 and 4, repeated) identical modulo wall-time", runs);
  if (!differing.empty()) {
    detail = "differences:";
    for (const auto& d : differing) detail += " " + d;
  }
  return {differing.empty() && runs == 12, detail};
}

}  // namespace

int main() {
  log::set_threshold(log::Level::Warn);
  int failures = 0;
  auto report = [&](int n, const char* name, const std::function<Outcome()>& check) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    if (!o.pass) ++failures;
    fmt::print("{} {:>2} {}: {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail, seconds_since(t0));
    std::fflush(stdout);
  };

  report(1, "routing", routing);
  report(2, "fixed point vs direct solve", fixed_point_vs_direct);
  report(4, "filter synthesis", filter_synthesis);
  report(3, "coherence at fixed points", coherence);
  report(5, "quadratic surrogate", quadratic_surrogate);
  report(6, "benchmark constants", benchmark_constants);
  report(7, "constraint scenario", constraint_scenario);

  TimedRun r4, r2;
  bool ran = false;
  auto comparison = [&] {
    if (!ran) {
      r4 = run("hierarchical-4ss", "comparison.json");
      r2 = run("hierarchical-2ss", "comparison.json");
      ran = true;
    }
  };
  report(8, "decomposition speedup", [&] {
    comparison();
    return speedup(r4, r2);
  });
  report(9, "closed-loop ordering", [&] {
    comparison();
    return ordering(r4, r2);
  });
  report(10, "determinism", determinism);

  fmt::print("{} of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
