// hiercoord: run coordination strategies on a benchmark, compare traces,
// validate configs.

#include "hiercoord/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace hiercoord;

int main(int argc, char** argv) {
  CLI::App app{"hierarchical coordination of coupled subsystems"};
  app.require_subcommand(1);

  RunSpec spec;
  double eps_max = 0.0;
  int sigma_max = 0, grid_size = 0, threads = 0, nmpc_iterations = 0;
  std::string config;
  auto* run = app.add_subcommand("run", "run one strategy on a scenario");
  run->add_option("--strategy", spec.strategy, "hierarchical-2ss | hierarchical-4ss | decentralized")->required();
  run->add_option("--scenario", spec.scenario, "scenario JSON")->required();
  run->add_option("--out", spec.out_dir, "output directory")->required();
  auto* o_cfg = run->add_option("--config", config, "benchmark config (default: taken from the scenario)");
  auto* o_eps = run->add_option("--eps-max", eps_max, "fixed-point tolerance");
  auto* o_sig = run->add_option("--sigma-max", sigma_max, "fixed-point round budget");
  auto* o_grid = run->add_option("--grid-size", grid_size, "trust-region grid points per axis");
  auto* o_thr = run->add_option("--threads", threads, "worker threads for grid evaluation");
  auto* o_it = run->add_option("--nmpc-iterations", nmpc_iterations, "NMPC iteration budget");

  std::string trace_a, trace_b, compare_out;
  auto* cmp = app.add_subcommand("compare", "compare two traces of the same scenario");
  cmp->add_option("A", trace_a, "trace CSV")->required();
  cmp->add_option("B", trace_b, "trace CSV")->required();
  auto* o_cmp_out = cmp->add_option("--out", compare_out, "write the comparison table as CSV");

  std::string validate_path;
  auto* val = app.add_subcommand("validate", "check a benchmark config");
  val->add_option("PATH", validate_path, "benchmark config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*run) {
    if (*o_cfg) spec.config = config;
    if (*o_eps) spec.eps_max = eps_max;
    if (*o_sig) spec.sigma_max = sigma_max;
    if (*o_grid) spec.grid_size = grid_size;
    if (*o_thr) spec.threads = threads;
    if (*o_it) spec.nmpc_iterations = nmpc_iterations;
    return cmd_run(spec, std::cout, std::cerr);
  }
  if (*cmp) {
    std::optional<std::filesystem::path> out;
    if (*o_cmp_out) out = compare_out;
    return cmd_compare(trace_a, trace_b, out, std::cout, std::cerr);
  }
  return cmd_validate(validate_path, std::cout, std::cerr);
}
