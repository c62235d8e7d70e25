#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "stfmm/galerkin.hpp"
#include "stfmm/runtime.hpp"

namespace stfmm {

struct RunConfig {
  std::string mesh;  // spatial mesh file; empty generates the cube surface
  int cube_subdiv = 4;
  double t_end = 1.0;
  int timesteps = 16;
  int slices = 1;
  double alpha = 1.0;
  int nmax = 80;
  double cst = 0.9;
  int ntr = 5;
  int mt = 6;
  int mx = 6;
  double oversize = 1.0;  // non-positive disables the oversize stopping rule
  QuadratureSpec quadrature;
  int ranks = 1;
  TransportKind transport = TransportKind::inproc;
  int workers = 1;
  int threshold = -1;  // negative: 2 * workers
  int grain = 1;
  double tol = 1e-8;
  int max_iter = 500;
  unsigned seed = 1;
  std::size_t dense_cap = 16384;
  std::vector<int> bench_workers{1, 2, 4};
  std::vector<int> bench_ranks{1, 2, 4};
  std::string trace_out;
  std::string report_out;
  std::string solution_out;
  std::string convergence_out;

  bool operator==(const RunConfig&) const = default;
};

/// Throws ConfigError for out-of-range values.
void validate(const RunConfig& config);

std::string serialize_config(const RunConfig& config);
/// Keys missing from the text keep their defaults; unknown keys are a ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

const char* transport_name(TransportKind kind);
TransportKind parse_transport(const std::string& name);

}  // namespace stfmm
