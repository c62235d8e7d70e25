#pragma once

#include <iosfwd>
#include <memory>

#include "stfmm/cluster_tree.hpp"
#include "stfmm/config.hpp"
#include "stfmm/fmm.hpp"
#include "stfmm/galerkin.hpp"
#include "stfmm/geometry.hpp"

namespace stfmm {

enum ExitCode { exit_ok = 0, exit_usage = 2, exit_not_converged = 3, exit_audit = 4, exit_transport = 5 };

/// Mesh, tree, integrator and sequential operator of a run.
struct Problem {
  std::unique_ptr<SpaceTimeMesh> mesh;
  std::unique_ptr<ClusterTree> tree;
  std::unique_ptr<SingleLayerIntegrator> integrator;
  std::unique_ptr<FmmOperator> op;
  double assembly_seconds = 0.0;
};

SpaceTimeMesh make_mesh(const RunConfig& config);
TreeParams tree_params(const RunConfig& config);
RuntimeOptions runtime_options(const RunConfig& config);
Problem build_problem(const RunConfig& config, int assembly_threads = 1);

/// t1 / (p * tp).
double parallel_efficiency(double t1, int p, double tp);

/// Each command prints a human-readable summary to out and returns an ExitCode.
/// ConfigError for invalid input, TransportError/ProtocolError from the runtime
/// propagate to the caller.
int cmd_verify(const RunConfig& config, std::ostream& out);
int cmd_solve(const RunConfig& config, std::ostream& out);
int cmd_trace(const RunConfig& config, std::ostream& out);
int cmd_bench(const RunConfig& config, std::ostream& out);

}  // namespace stfmm
