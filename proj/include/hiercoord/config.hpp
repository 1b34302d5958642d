#pragma once

// JSON files: benchmark configurations (plant units, coupling edges,
// decomposition, coordinator settings) and scenarios.
//
// Errors carry the file name and the field path, e.g.
//   configs/x.json: plant.units[2].model.A: expected 2 rows, got 3

#include "hiercoord/closed_loop.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace hiercoord {

BenchmarkConfig parse_benchmark(const std::string& text, const std::string& origin = "<string>");
BenchmarkConfig load_benchmark(const std::filesystem::path& path);
/// Pretty-printed JSON; parse_benchmark(dump_benchmark(c)) reproduces c.
std::string dump_benchmark(const BenchmarkConfig& config);

/// Plant, decomposition and coordinator checks together.
ValidationReport validate_benchmark(const BenchmarkConfig& config);

struct ScenarioFile {
  Scenario scenario;
  /// Strategy name -> benchmark config, resolved against the scenario's directory.
  std::map<std::string, std::filesystem::path> configs;
};

ScenarioFile parse_scenario(const std::string& text, const std::filesystem::path& base_dir,
                            const std::string& origin = "<string>");
ScenarioFile load_scenario(const std::filesystem::path& path);
std::string dump_scenario(const Scenario& scenario,
                          const std::map<std::string, std::string>& configs = {});

/// Reads a whole file; ConfigError when it cannot be opened.
std::string read_text(const std::filesystem::path& path);

}  // namespace hiercoord
