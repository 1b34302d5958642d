#include "hiercoord/commands.hpp"

#include "hiercoord/config.hpp"
#include "hiercoord/error.hpp"
#include "hiercoord/log.hpp"
#include "hiercoord/trace_io.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unistd.h>

namespace hiercoord {
namespace fs = std::filesystem;

namespace {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> column(const ClosedLoopTrace& t, double TraceRow::*field) {
  std::vector<double> out;
  for (const auto& r : t.rows) out.push_back(r.*field);
  return out;
}

}  // namespace

bool is_hierarchical(const std::string& strategy) {
  return strategy == "hierarchical-2ss" || strategy == "hierarchical-4ss";
}

void RunSpec::validate() const {
  if (!is_hierarchical(strategy) && strategy != "decentralized") {
    throw ConfigError(fmt::format("unknown strategy '{}' (hierarchical-2ss, hierarchical-4ss, decentralized)", strategy));
  }
  if (eps_max && !(*eps_max > 0.0 && *eps_max < 1.0)) throw ConfigError("--eps-max must be in (0, 1)");
  if (sigma_max && (*sigma_max < 1 || *sigma_max > 100000)) throw ConfigError("--sigma-max must be in [1, 100000]");
  if (grid_size && (*grid_size < 1 || *grid_size > 9)) throw ConfigError("--grid-size must be in [1, 9]");
  if (threads && (*threads < 1 || *threads > 256)) throw ConfigError("--threads must be in [1, 256]");
  if (nmpc_iterations && (*nmpc_iterations < 1 || *nmpc_iterations > 10000)) {
    throw ConfigError("--nmpc-iterations must be in [1, 10000]");
  }
}

std::pair<Scenario, BenchmarkConfig> resolve_run(const RunSpec& spec) {
  spec.validate();
  const ScenarioFile sf = load_scenario(spec.scenario);
  fs::path cfg_path;
  if (spec.config) {
    cfg_path = *spec.config;
  } else {
    const auto it = sf.configs.find(spec.strategy);
    if (it == sf.configs.end()) {
      throw ConfigError(fmt::format("{}: configs: no entry for strategy '{}' and no --config given",
                                    spec.scenario.string(), spec.strategy));
    }
    cfg_path = it->second;
  }
  BenchmarkConfig cfg = load_benchmark(cfg_path);
  if (spec.eps_max) cfg.coordinator.fixed_point.eps_max = *spec.eps_max;
  if (spec.sigma_max) cfg.coordinator.fixed_point.sigma_max = *spec.sigma_max;
  if (spec.grid_size) cfg.coordinator.grid_size = *spec.grid_size;
  if (spec.threads) cfg.coordinator.threads = *spec.threads;
  if (spec.nmpc_iterations) {
    for (auto& u : cfg.plant.units) u.controller_config.max_iterations = *spec.nmpc_iterations;
  }
  const ValidationReport rep = validate_benchmark(cfg);
  if (!rep.ok()) {
    std::string msg = cfg_path.string() + ":";
    for (const auto& v : rep.violations) msg += "\n  " + v;
    throw ConfigError(msg);
  }
  // Names in the scenario must resolve against this plant.
  scheduled_costs(cfg.plant, sf.scenario, 0);
  scheduled_disturbances(cfg.plant, sf.scenario, 0);
  return {sf.scenario, std::move(cfg)};
}

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + fmt::format(".tmp{}", ::getpid());
  try {
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw ConfigError(fmt::format("{}: cannot write", tmp.string()));
      f << content;
      f.flush();
      if (!f) throw ConfigError(fmt::format("{}: write failed", tmp.string()));
    }
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

std::string report_json(const ClosedLoopTrace& t, const PerformanceReport& r) {
  nlohmann::ordered_json units = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < t.unit_names.size() && i < r.unit_J_cl.size(); ++i) units[t.unit_names[i]] = r.unit_J_cl[i];
  nlohmann::ordered_json doc{
      {"strategy", t.strategy},
      {"scenario", t.scenario},
      {"steps", r.steps},
      {"J_cl", r.J_cl},
      {"unit_J_cl", units},
      {"violation_integral", r.violation_integral},
      {"violation_integral_post_transient", r.violation_integral_post_transient},
      {"unconverged_steps", r.unconverged_steps},
      {"walltime_nmpc_median_ms", r.walltime_nmpc_median_ms},
      {"walltime_nmpc_max_ms", r.walltime_nmpc_max_ms},
      {"walltime_cycle_median_ms", r.walltime_cycle_median_ms},
      {"walltime_cycle_max_ms", r.walltime_cycle_max_ms},
  };
  return doc.dump(2) + "\n";
}

std::string report_text(const ClosedLoopTrace& t, const PerformanceReport& r) {
  std::string s = fmt::format("strategy   {}\nscenario   {}\nsteps      {}\n", t.strategy, t.scenario, r.steps);
  s += fmt::format("J_cl       {:.6g}\n", r.J_cl);
  for (std::size_t i = 0; i < t.unit_names.size() && i < r.unit_J_cl.size(); ++i) {
    s += fmt::format("  {:<8} {:.6g}\n", t.unit_names[i], r.unit_J_cl[i]);
  }
  s += fmt::format("violation  {:.6g} (post-transient {:.6g})\n", r.violation_integral,
                   r.violation_integral_post_transient);
  s += fmt::format("nmpc ms    median {:.3f} max {:.3f}\n", r.walltime_nmpc_median_ms, r.walltime_nmpc_max_ms);
  s += fmt::format("cycle ms   median {:.3f} max {:.3f}\n", r.walltime_cycle_median_ms, r.walltime_cycle_max_ms);
  if (r.unconverged_steps > 0) s += fmt::format("unconverged fixed points: {}\n", r.unconverged_steps);
  return s;
}

int cmd_run(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  Scenario scenario;
  BenchmarkConfig cfg;
  try {
    std::tie(scenario, cfg) = resolve_run(spec);
    if (spec.out_dir.empty()) throw ConfigError("--out is required");
    fs::create_directories(spec.out_dir);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  log::info("running {} on {} ({} steps)", spec.strategy, scenario.name, scenario.steps);
  ClosedLoopTrace trace;
  try {
    trace = is_hierarchical(spec.strategy) ? run_hierarchical(scenario, cfg) : run_decentralized(scenario, cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
  trace.strategy = spec.strategy;
  if (trace.failed) {
    err << fmt::format("solver failure at step {}: {}\n", trace.failure_step, trace.failure);
    return kExitSolver;
  }

  const PerformanceReport rep = closed_loop_cost(trace);
  try {
    write_atomic(spec.out_dir / "trace.csv", trace_csv(trace));
    write_atomic(spec.out_dir / "report.json", report_json(trace, rep));
    write_atomic(spec.out_dir / "report.txt", report_text(trace, rep));
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  out << report_text(trace, rep);
  return kExitOk;
}

std::vector<ComparisonRow> compare_reports(const ClosedLoopTrace& a, const ClosedLoopTrace& b) {
  const PerformanceReport ra = closed_loop_cost(a);
  const PerformanceReport rb = closed_loop_cost(b);
  std::vector<ComparisonRow> rows{
      {"J_cl", ra.J_cl, rb.J_cl},
  };
  for (std::size_t i = 0; i < a.unit_names.size(); ++i) {
    const auto it = std::find(b.unit_names.begin(), b.unit_names.end(), a.unit_names[i]);
    if (it == b.unit_names.end()) continue;
    const auto j = static_cast<std::size_t>(it - b.unit_names.begin());
    rows.push_back({"J_cl." + a.unit_names[i], ra.unit_J_cl[i], rb.unit_J_cl[j]});
  }
  const auto na = column(a, &TraceRow::walltime_nmpc_ms), nb = column(b, &TraceRow::walltime_nmpc_ms);
  const auto ca = column(a, &TraceRow::walltime_cycle_ms), cb = column(b, &TraceRow::walltime_cycle_ms);
  rows.insert(rows.end(), {
      {"violation_integral", ra.violation_integral, rb.violation_integral},
      {"violation_integral_post_transient", ra.violation_integral_post_transient, rb.violation_integral_post_transient},
      {"walltime_nmpc_median_ms", ra.walltime_nmpc_median_ms, rb.walltime_nmpc_median_ms},
      {"walltime_nmpc_q25_ms", quantile(na, 0.25), quantile(nb, 0.25)},
      {"walltime_nmpc_q75_ms", quantile(na, 0.75), quantile(nb, 0.75)},
      {"walltime_nmpc_max_ms", ra.walltime_nmpc_max_ms, rb.walltime_nmpc_max_ms},
      {"walltime_cycle_median_ms", ra.walltime_cycle_median_ms, rb.walltime_cycle_median_ms},
      {"walltime_cycle_q25_ms", quantile(ca, 0.25), quantile(cb, 0.25)},
      {"walltime_cycle_q75_ms", quantile(ca, 0.75), quantile(cb, 0.75)},
      {"walltime_cycle_max_ms", ra.walltime_cycle_max_ms, rb.walltime_cycle_max_ms},
      {"steps", static_cast<double>(ra.steps), static_cast<double>(rb.steps)},
      {"unconverged_steps", static_cast<double>(ra.unconverged_steps), static_cast<double>(rb.unconverged_steps)},
  });
  return rows;
}

int cmd_compare(const fs::path& a, const fs::path& b, const std::optional<fs::path>& out_csv,
                std::ostream& out, std::ostream& err) {
  ClosedLoopTrace ta, tb;
  try {
    for (auto [path, trace] : {std::pair{&a, &ta}, std::pair{&b, &tb}}) {
      std::ifstream in(*path);
      if (!in) throw ConfigError(fmt::format("{}: cannot open file", path->string()));
      *trace = read_trace_csv(in, path->string());
      if (trace->rows.empty()) throw ConfigError(fmt::format("{}: trace has no rows", path->string()));
    }
    if (ta.scenario != tb.scenario) {
      throw ConfigError(fmt::format("traces come from different scenarios ('{}' vs '{}')", ta.scenario, tb.scenario));
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const std::string la = ta.strategy.empty() ? "A" : ta.strategy;
  const std::string lb = tb.strategy.empty() || tb.strategy == ta.strategy ? "B" : tb.strategy;
  const auto rows = compare_reports(ta, tb);

  std::string csv = fmt::format("metric,{},{},delta,order\n", la, lb);
  std::string text = fmt::format("scenario {}\n{:<36} {:>14} {:>14} {:>14}  order\n", ta.scenario, "metric", la, lb, "delta");
  for (const auto& r : rows) {
    const char* op = r.a < r.b ? "<" : r.a > r.b ? ">" : "=";
    const std::string order = fmt::format("{} {} {}", la, op, lb);
    csv += fmt::format("{},{},{},{},{}\n", r.metric, r.a, r.b, r.b - r.a, order);
    text += fmt::format("{:<36} {:>14.6g} {:>14.6g} {:>14.6g}  {}\n", r.metric, r.a, r.b, r.b - r.a, order);
  }
  if (out_csv) {
    try {
      write_atomic(*out_csv, csv);
    } catch (const std::exception& e) {
      err << "config error: " << e.what() << "\n";
      return kExitConfig;
    }
  }
  out << text;
  return kExitOk;
}

int cmd_validate(const fs::path& path, std::ostream& out, std::ostream& err) {
  BenchmarkConfig cfg;
  try {
    cfg = load_benchmark(path);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const ValidationReport rep = validate_benchmark(cfg);
  for (const auto& w : rep.warnings) out << "warning: " << w << "\n";
  if (!rep.ok()) {
    for (const auto& v : rep.violations) err << path.string() << ": " << v << "\n";
    return kExitConfig;
  }
  std::size_t channels = 0;
  for (const auto& e : cfg.plant.edges) channels += e.channels.size();
  out << fmt::format("{}: ok ({} units, {} edges, {} coupling channels, {} subsystems)\n", path.string(),
                     cfg.plant.units.size(), cfg.plant.edges.size(), channels, cfg.decomposition.size());
  return kExitOk;
}

}  // namespace hiercoord
