#pragma once

// Trace CSV. Leading '#' lines hold run metadata (key=value), then one
// header row and one row per step. Column order:
//
//   step, time_s,
//   u.<unit>.<input>..., y.<unit>.<output>..., v.<unit>.<source>_<channel>...
//   r_opt.<unit>.<output>..., r_d.<unit>.<output>...,
//   J_c, sigma_used, converged, presumption_error, budget_hits,
//   cost.<unit>..., stage_cost, violation, bound.<unit>.<output>...,
//   walltime_nmpc_ms, walltime_cycle_ms
//
// Numbers use the shortest round-trip form, so a trace reads back bit-exact.

#include "hiercoord/closed_loop.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace hiercoord {

std::vector<std::string> trace_columns(const ClosedLoopTrace& trace);
bool is_walltime_column(const std::string& column);

void write_trace_csv(std::ostream& out, const ClosedLoopTrace& trace);
std::string trace_csv(const ClosedLoopTrace& trace);

/// Inverse of write_trace_csv. Throws ConfigError with a line number on
/// malformed input.
ClosedLoopTrace read_trace_csv(std::istream& in, const std::string& origin = "<stream>");

/// The CSV with wall-time columns removed, for reproducibility checks.
std::string strip_walltime_columns(const std::string& csv);

}  // namespace hiercoord
