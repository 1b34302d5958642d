#pragma once

#include <stdexcept>
#include <string>

namespace hiercoord {

/// Malformed or inconsistent configuration (topology, model dimensions, files).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine could not produce a usable result.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Simulation produced a non-finite value.
class SimulationError : public SolverError {
 public:
  SimulationError(const std::string& what, int step)
      : SolverError(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace hiercoord
