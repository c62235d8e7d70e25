#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stfmm/commands.hpp"
#include "stfmm/config.hpp"
#include "stfmm/errors.hpp"

namespace {

struct Overrides {
  std::optional<std::string> mesh, transport, trace_out, report_out, solution_out,
      convergence_out;
  std::optional<int> cube_subdiv, timesteps, slices, nmax, ntr, mt, mx, ranks, workers,
      threshold, grain, max_iter;
  std::optional<double> t_end, alpha, cst, tol, oversize;
  std::optional<unsigned> seed;
  std::optional<std::size_t> dense_cap;
  std::optional<std::vector<int>> bench_workers, bench_ranks;
};

void add_options(CLI::App& app, Overrides& o, std::string& config_path, std::string& write_config) {
  app.add_option("--config", config_path, "JSON config file; flags override its values");
  app.add_option("--write-config", write_config, "Write the effective config and exit");
  app.add_option("--mesh", o.mesh, "Spatial triangle mesh file (default: generated cube)");
  app.add_option("--cube-subdiv", o.cube_subdiv, "Cube subdivisions per edge");
  app.add_option("--t-end", o.t_end, "End time T");
  app.add_option("--timesteps", o.timesteps, "Number of time-steps");
  app.add_option("--slices", o.slices, "Number of time slices");
  app.add_option("--alpha", o.alpha, "Heat capacity constant");
  app.add_option("--nmax", o.nmax, "Maximal elements per leaf");
  app.add_option("--cst", o.cst, "Space-time box relation constant");
  app.add_option("--ntr", o.ntr, "Truncation grid distance");
  app.add_option("--mt", o.mt, "Lagrange order in time");
  app.add_option("--mx", o.mx, "Chebyshev order in space");
  app.add_option("--oversize", o.oversize, "Oversize stopping factor (<= 0 disables)");
  app.add_option("--ranks", o.ranks, "Number of simulated ranks");
  app.add_option("--workers", o.workers, "Pool threads per rank");
  app.add_option("--transport", o.transport, "inproc or tcp")
      ->check(CLI::IsMember({"inproc", "tcp"}));
  app.add_option("--threshold", o.threshold,
                 "Queue length above which the scheduling thread computes (negative: 2*workers)");
  app.add_option("--grain", o.grain, "Space-time clusters per work item");
  app.add_option("--tol", o.tol, "GMRES relative tolerance");
  app.add_option("--max-iter", o.max_iter, "GMRES iteration limit");
  app.add_option("--trace-out", o.trace_out, "Trace JSON output path");
  app.add_option("--report-out", o.report_out, "Report output path");
  app.add_option("--solution-out", o.solution_out, "Solution vector output path");
  app.add_option("--convergence-out", o.convergence_out, "Convergence CSV output path");
  app.add_option("--seed", o.seed, "Random seed");
  app.add_option("--dense-cap", o.dense_cap, "Largest DOF count for the dense oracle");
  app.add_option("--bench-workers", o.bench_workers, "Worker counts for bench");
  app.add_option("--bench-ranks", o.bench_ranks, "Rank counts for bench");
}

template <class T>
void apply(const std::optional<T>& v, T& field) {
  if (v) field = *v;
}

stfmm::RunConfig resolve(const Overrides& o, const std::string& config_path) {
  stfmm::RunConfig c = config_path.empty() ? stfmm::RunConfig{} : stfmm::load_config(config_path);
  apply(o.mesh, c.mesh);
  if (o.transport) c.transport = stfmm::parse_transport(*o.transport);
  apply(o.trace_out, c.trace_out);
  apply(o.report_out, c.report_out);
  apply(o.solution_out, c.solution_out);
  apply(o.convergence_out, c.convergence_out);
  apply(o.cube_subdiv, c.cube_subdiv);
  apply(o.timesteps, c.timesteps);
  apply(o.slices, c.slices);
  apply(o.nmax, c.nmax);
  apply(o.ntr, c.ntr);
  apply(o.mt, c.mt);
  apply(o.mx, c.mx);
  apply(o.ranks, c.ranks);
  apply(o.workers, c.workers);
  apply(o.threshold, c.threshold);
  apply(o.grain, c.grain);
  apply(o.max_iter, c.max_iter);
  apply(o.t_end, c.t_end);
  apply(o.alpha, c.alpha);
  apply(o.cst, c.cst);
  apply(o.tol, c.tol);
  apply(o.oversize, c.oversize);
  apply(o.seed, c.seed);
  apply(o.dense_cap, c.dense_cap);
  apply(o.bench_workers, c.bench_workers);
  apply(o.bench_ranks, c.bench_ranks);
  stfmm::validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space-time fast multipole solver for the single-layer heat operator"};
  app.require_subcommand(1);
  Overrides o;
  std::string config_path, write_config;
  std::string selected;
  for (auto [name, help] : {std::pair{"verify", "Compare FMM against the dense matrix and audit the block partition"},
                            std::pair{"solve", "GMRES solve with a manufactured right-hand side"},
                            std::pair{"trace", "One instrumented matvec written as trace JSON"},
                            std::pair{"bench", "Assembly and matvec timings as CSV"}}) {
    auto* sub = app.add_subcommand(name, help);
    add_options(*sub, o, config_path, write_config);
    sub->callback([&selected, n = std::string(name)] { selected = n; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : stfmm::exit_usage;
  }

  try {
    const stfmm::RunConfig config = resolve(o, config_path);
    if (!write_config.empty()) {
      std::ofstream out(write_config);
      if (!out) throw stfmm::ConfigError("cannot write " + write_config);
      out << stfmm::serialize_config(config);
      return stfmm::exit_ok;
    }
    if (selected == "verify") return stfmm::cmd_verify(config, std::cout);
    if (selected == "solve") return stfmm::cmd_solve(config, std::cout);
    if (selected == "trace") return stfmm::cmd_trace(config, std::cout);
    return stfmm::cmd_bench(config, std::cout);
  } catch (const stfmm::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return stfmm::exit_usage;
  } catch (const stfmm::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return stfmm::exit_usage;
  } catch (const stfmm::TransportError& e) {
    std::cerr << "transport failure: " << e.what() << '\n';
    return stfmm::exit_transport;
  } catch (const stfmm::ProtocolError& e) {
    std::cerr << "transport failure: " << e.what() << '\n';
    return stfmm::exit_transport;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
