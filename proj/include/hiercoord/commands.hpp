#pragma once

// Command implementations behind the hiercoord binary. Each returns the
// process exit code and writes diagnostics to the given error stream.

#include "hiercoord/closed_loop.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace hiercoord {

enum ExitCode : int { kExitOk = 0, kExitSolver = 2, kExitConfig = 3 };

struct RunSpec {
  std::string strategy;  // hierarchical-2ss | hierarchical-4ss | decentralized
  std::filesystem::path scenario;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> config;  // else taken from the scenario file
  std::optional<double> eps_max;
  std::optional<int> sigma_max;
  std::optional<int> grid_size;
  std::optional<int> threads;
  std::optional<int> nmpc_iterations;

  /// Throws ConfigError on an unknown strategy or out-of-range override.
  void validate() const;
};

bool is_hierarchical(const std::string& strategy);

/// Loads scenario and benchmark for a spec with overrides applied.
std::pair<Scenario, BenchmarkConfig> resolve_run(const RunSpec& spec);

/// Runs the strategy; writes <out>/trace.csv, report.json and report.txt.
int cmd_run(const RunSpec& spec, std::ostream& out, std::ostream& err);

/// Side-by-side metrics of two traces of the same scenario. With an output
/// path, also writes the table as CSV there.
int cmd_compare(const std::filesystem::path& a, const std::filesystem::path& b,
                const std::optional<std::filesystem::path>& out_csv, std::ostream& out,
                std::ostream& err);

/// Topology and model dimension checks of a benchmark config.
int cmd_validate(const std::filesystem::path& config, std::ostream& out, std::ostream& err);

struct ComparisonRow {
  std::string metric;
  double a = 0.0;
  double b = 0.0;
};

std::vector<ComparisonRow> compare_reports(const ClosedLoopTrace& a, const ClosedLoopTrace& b);
std::string report_json(const ClosedLoopTrace& trace, const PerformanceReport& report);
std::string report_text(const ClosedLoopTrace& trace, const PerformanceReport& report);

/// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace hiercoord
