#include "hiercoord/trace_io.hpp"

#include "hiercoord/error.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <map>
#include <sstream>

namespace hiercoord {
namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

// Shortest representation that reads back to the same double.
std::string num(double v) { return fmt::format("{}", v); }

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

std::vector<std::string> trace_columns(const ClosedLoopTrace& t) {
  std::vector<std::string> c{"step", "time_s"};
  const std::size_t n = t.unit_names.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& s : t.input_names[i]) c.push_back("u." + t.unit_names[i] + "." + s);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& s : t.output_names[i]) c.push_back("y." + t.unit_names[i] + "." + s);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& s : t.coupling_names[i]) c.push_back("v." + t.unit_names[i] + "." + s);
  }
  for (const auto& s : t.setpoint_names) c.push_back("r_opt." + s);
  for (const auto& s : t.setpoint_names) c.push_back("r_d." + s);
  for (const char* s : {"J_c", "sigma_used", "converged", "presumption_error", "budget_hits"}) c.push_back(s);
  for (const auto& s : t.unit_names) c.push_back("cost." + s);
  c.push_back("stage_cost");
  c.push_back("violation");
  for (const auto& s : t.bound_names) c.push_back("bound." + s);
  c.push_back("walltime_nmpc_ms");
  c.push_back("walltime_cycle_ms");
  return c;
}

bool is_walltime_column(const std::string& column) { return starts_with(column, "walltime_"); }

void write_trace_csv(std::ostream& out, const ClosedLoopTrace& t) {
  out << "# strategy=" << t.strategy << "\n";
  out << "# scenario=" << t.scenario << "\n";
  out << "# Ts=" << num(t.Ts) << "\n";
  out << "# transient_end=" << t.transient_end << "\n";
  if (t.failed) {
    out << "# failed_step=" << t.failure_step << "\n";
    std::string msg = t.failure;
    for (char& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    out << "# failure=" << msg << "\n";
  }
  const auto cols = trace_columns(t);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";

  std::string line;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const TraceRow& r = t.rows[k];
    line.clear();
    auto put = [&](const std::string& s) {
      if (!line.empty()) line += ',';
      line += s;
    };
    put(std::to_string(r.step));
    put(num(r.step * t.Ts));
    for (const auto* group : {&r.u, &r.y, &r.v}) {
      for (const Vector& v : *group) {
        for (Eigen::Index j = 0; j < v.size(); ++j) put(num(v[j]));
      }
    }
    for (const Vector* v : {&r.r_opt, &r.r_d}) {
      for (Eigen::Index j = 0; j < v->size(); ++j) put(num((*v)[j]));
    }
    put(num(r.J_c));
    put(std::to_string(r.sigma_used));
    put(r.converged ? "1" : "0");
    put(num(r.presumption_error));
    put(std::to_string(r.budget_hits));
    for (double c : r.unit_cost) put(num(c));
    put(num(r.stage_cost));
    put(num(r.violation));
    if (k < t.bound_values.size()) {
      for (double b : t.bound_values[k]) put(num(b));
    }
    put(num(r.walltime_nmpc_ms));
    put(num(r.walltime_cycle_ms));
    out << line << "\n";
  }
}

std::string trace_csv(const ClosedLoopTrace& trace) {
  std::ostringstream ss;
  write_trace_csv(ss, trace);
  return ss.str();
}

ClosedLoopTrace read_trace_csv(std::istream& in, const std::string& origin) {
  ClosedLoopTrace t;
  std::string line;
  int lineno = 0;
  std::vector<std::string> cols;
  auto fail = [&](const std::string& msg) -> void {
    throw ConfigError(fmt::format("{}: line {}: {}", origin, lineno, msg));
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (starts_with(line, "#")) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      if (key == "strategy") t.strategy = value;
      else if (key == "scenario") t.scenario = value;
      else if (key == "Ts") t.Ts = std::strtod(value.c_str(), nullptr);
      else if (key == "transient_end") t.transient_end = std::atoi(value.c_str());
      else if (key == "failed_step") {
        t.failed = true;
        t.failure_step = std::atoi(value.c_str());
      } else if (key == "failure") t.failure = value;
      continue;
    }
    cols = split(line, ',');
    break;
  }
  if (cols.size() < 2 || cols[0] != "step") fail("missing header row");

  // Recover the names from the header.
  std::map<std::string, std::size_t> unit_pos;
  auto unit_of = [&](const std::string& rest) {
    const auto dot = rest.find('.');
    return std::make_pair(rest.substr(0, dot), dot == std::string::npos ? std::string() : rest.substr(dot + 1));
  };
  for (const auto& c : cols) {
    if (starts_with(c, "cost.")) {
      unit_pos[c.substr(5)] = t.unit_names.size();
      t.unit_names.push_back(c.substr(5));
    }
  }
  const std::size_t n = t.unit_names.size();
  t.input_names.resize(n);
  t.output_names.resize(n);
  t.coupling_names.resize(n);
  enum class Col { Step, Time, U, Y, V, Ropt, Rd, Jc, Sigma, Conv, Pe, Budget, Cost, Stage, Viol, Bound, Nmpc, Cycle };
  std::vector<std::pair<Col, std::size_t>> kinds;
  for (const auto& c : cols) {
    auto unit_col = [&](std::size_t prefix, std::vector<std::vector<std::string>>& names, Col kind) {
      const auto [unit, name] = unit_of(c.substr(prefix));
      const auto it = unit_pos.find(unit);
      if (it == unit_pos.end()) fail(fmt::format("column {} names unknown unit", c));
      names[it->second].push_back(name);
      kinds.emplace_back(kind, it->second);
    };
    if (c == "step") kinds.emplace_back(Col::Step, 0);
    else if (c == "time_s") kinds.emplace_back(Col::Time, 0);
    else if (starts_with(c, "u.")) unit_col(2, t.input_names, Col::U);
    else if (starts_with(c, "y.")) unit_col(2, t.output_names, Col::Y);
    else if (starts_with(c, "v.")) unit_col(2, t.coupling_names, Col::V);
    else if (starts_with(c, "r_opt.")) {
      t.setpoint_names.push_back(c.substr(6));
      kinds.emplace_back(Col::Ropt, 0);
    } else if (starts_with(c, "r_d.")) kinds.emplace_back(Col::Rd, 0);
    else if (c == "J_c") kinds.emplace_back(Col::Jc, 0);
    else if (c == "sigma_used") kinds.emplace_back(Col::Sigma, 0);
    else if (c == "converged") kinds.emplace_back(Col::Conv, 0);
    else if (c == "presumption_error") kinds.emplace_back(Col::Pe, 0);
    else if (c == "budget_hits") kinds.emplace_back(Col::Budget, 0);
    else if (starts_with(c, "cost.")) kinds.emplace_back(Col::Cost, unit_pos[c.substr(5)]);
    else if (c == "stage_cost") kinds.emplace_back(Col::Stage, 0);
    else if (c == "violation") kinds.emplace_back(Col::Viol, 0);
    else if (starts_with(c, "bound.")) {
      t.bound_names.push_back(c.substr(6));
      kinds.emplace_back(Col::Bound, 0);
    } else if (c == "walltime_nmpc_ms") kinds.emplace_back(Col::Nmpc, 0);
    else if (c == "walltime_cycle_ms") kinds.emplace_back(Col::Cycle, 0);
    else fail(fmt::format("unknown column {}", c));
  }

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != cols.size()) fail(fmt::format("expected {} fields, got {}", cols.size(), cells.size()));
    TraceRow r;
    std::vector<std::vector<double>> u(n), y(n), v(n);
    std::vector<double> ropt, rd, bounds;
    r.unit_cost.assign(n, 0.0);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      char* end = nullptr;
      const double x = std::strtod(cells[i].c_str(), &end);
      if (cells[i].empty() || *end != '\0') fail(fmt::format("column {}: not a number: '{}'", cols[i], cells[i]));
      const std::size_t unit = kinds[i].second;
      switch (kinds[i].first) {
        case Col::Step: r.step = static_cast<int>(x); break;
        case Col::Time: break;
        case Col::U: u[unit].push_back(x); break;
        case Col::Y: y[unit].push_back(x); break;
        case Col::V: v[unit].push_back(x); break;
        case Col::Ropt: ropt.push_back(x); break;
        case Col::Rd: rd.push_back(x); break;
        case Col::Jc: r.J_c = x; break;
        case Col::Sigma: r.sigma_used = static_cast<int>(x); break;
        case Col::Conv: r.converged = x != 0.0; break;
        case Col::Pe: r.presumption_error = x; break;
        case Col::Budget: r.budget_hits = static_cast<int>(x); break;
        case Col::Cost: r.unit_cost[unit] = x; break;
        case Col::Stage: r.stage_cost = x; break;
        case Col::Viol: r.violation = x; break;
        case Col::Bound: bounds.push_back(x); break;
        case Col::Nmpc: r.walltime_nmpc_ms = x; break;
        case Col::Cycle: r.walltime_cycle_ms = x; break;
      }
    }
    auto to_vec = [](const std::vector<double>& a) {
      return Vector(Eigen::Map<const Vector>(a.data(), static_cast<Eigen::Index>(a.size())));
    };
    for (std::size_t i = 0; i < n; ++i) {
      r.u.push_back(to_vec(u[i]));
      r.y.push_back(to_vec(y[i]));
      r.v.push_back(to_vec(v[i]));
    }
    r.r_opt = to_vec(ropt);
    r.r_d = to_vec(rd);
    t.rows.push_back(std::move(r));
    t.bound_values.push_back(std::move(bounds));
  }
  return t;
}

std::string strip_walltime_columns(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  std::vector<bool> keep;
  while (std::getline(in, line)) {
    if (starts_with(line, "#")) {
      out << line << "\n";
      continue;
    }
    const auto cells = split(line, ',');
    if (keep.empty()) {
      for (const auto& c : cells) keep.push_back(!is_walltime_column(c));
    }
    bool first = true;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i < keep.size() && !keep[i]) continue;
      out << (first ? "" : ",") << cells[i];
      first = false;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace hiercoord
