#include "stfmm/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "stfmm/errors.hpp"
#include "stfmm/runtime.hpp"
#include "stfmm/solver.hpp"

namespace stfmm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double relative_error(std::span<const double> a, std::span<const double> ref) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ref[i]) * (a[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

void write_report(const RunConfig& config, const nlohmann::ordered_json& report) {
  if (config.report_out.empty()) return;
  std::ofstream out(config.report_out);
  if (!out) throw ConfigError("cannot write report " + config.report_out);
  out << report.dump(2) << '\n';
}

}  // namespace

SpaceTimeMesh make_mesh(const RunConfig& config) {
  validate(config);
  TriMesh space = config.mesh.empty() ? generate_cube_surface(config.cube_subdiv)
                                      : load_spatial_mesh(config.mesh);
  return build_tensor_mesh(std::move(space), config.t_end, config.timesteps);
}

TreeParams tree_params(const RunConfig& config) {
  TreeParams p;
  p.n_max = config.nmax;
  p.c_st = config.cst;
  p.n_tr = config.ntr;
  p.alpha = config.alpha;
  p.n_slices = config.slices;
  p.oversize = config.oversize;
  return p;
}

RuntimeOptions runtime_options(const RunConfig& config) {
  RuntimeOptions o;
  o.workers = config.workers;
  o.threshold = config.threshold;
  o.grain = config.grain;
  return o;
}

Problem build_problem(const RunConfig& config, int assembly_threads) {
  Problem p;
  p.mesh = std::make_unique<SpaceTimeMesh>(make_mesh(config));
  const auto start = Clock::now();
  p.tree = std::make_unique<ClusterTree>(*p.mesh, tree_params(config));
  p.integrator =
      std::make_unique<SingleLayerIntegrator>(*p.mesh, config.alpha, config.quadrature);
  auto near = assemble_nearfield(*p.tree, *p.integrator, std::size_t{1} << 27, assembly_threads);
  p.op = std::make_unique<FmmOperator>(*p.tree, std::move(near),
                                       ExpansionOrders{config.mt, config.mx, config.alpha});
  p.assembly_seconds = seconds_since(start);
  return p;
}

double parallel_efficiency(double t1, int p, double tp) { return t1 / (p * tp); }

int cmd_verify(const RunConfig& config, std::ostream& out) {
  validate(config);
  const SpaceTimeMesh probe = make_mesh(config);
  if (probe.n_dofs() > config.dense_cap) {
    throw ConfigError("verify needs the dense matrix: " + std::to_string(probe.n_dofs()) +
                      " DOFs exceed the dense cap of " + std::to_string(config.dense_cap));
  }
  Problem p = build_problem(config);
  DistributedFmm fmm(*p.op, config.ranks, runtime_options(config), config.transport);
  const auto dense_start = Clock::now();
  const Eigen::MatrixXd dense = assemble_dense(*p.integrator, config.dense_cap);
  const double dense_seconds = seconds_since(dense_start);

  std::mt19937_64 rng(config.seed);
  std::vector<double> errors;
  double max_error = 0.0;
  for (int r = 0; r < 5; ++r) {
    const auto w = random_vector(p.mesh->n_dofs(), rng);
    const auto f = fmm.apply(w);
    std::vector<double> ref(w.size());
    dense_operator(dense).apply(w, ref);
    errors.push_back(relative_error(f, ref));
    max_error = std::max(max_error, errors.back());
  }

  const std::size_t ex = p.mesh->n_space();
  double causality = 0.0;
  for (int k = 0; k < p.mesh->n_timesteps(); ++k) {
    std::vector<double> w(p.mesh->n_dofs(), 0.0);
    auto vals = random_vector(ex, rng);
    std::copy(vals.begin(), vals.end(), w.begin() + k * ex);
    const auto f = fmm.apply(w);
    for (std::size_t i = 0; i < k * ex; ++i) causality = std::max(causality, std::abs(f[i]));
  }

  const CoverageReport audit = audit_coverage(*p.tree);
  const bool pass = audit.exact() && causality == 0.0 && max_error <= 1e-4;

  out << std::scientific << std::setprecision(3);
  out << "dofs " << p.mesh->n_dofs() << "  leaves " << p.tree->leaves().size() << "  ranks "
      << config.ranks << '\n';
  out << "matvec relative error (max of 5) " << max_error << '\n';
  out << "causality max |f| before support " << causality << '\n';
  out << "coverage: causal pairs " << audit.causal_pairs << ", uncovered " << audit.uncovered
      << ", duplicated " << audit.duplicated << ", anticausal in admissible blocks "
      << audit.anticausal_admissible << '\n';
  out << (pass ? "verify: pass" : "verify: FAIL") << '\n';

  nlohmann::ordered_json report;
  report["command"] = "verify";
  report["dofs"] = p.mesh->n_dofs();
  report["matvec_relative_errors"] = errors;
  report["max_relative_error"] = max_error;
  report["causality_max_abs"] = causality;
  report["coverage"] = {{"causal_pairs", audit.causal_pairs},
                        {"uncovered", audit.uncovered},
                        {"duplicated", audit.duplicated},
                        {"anticausal_admissible", audit.anticausal_admissible},
                        {"exact", audit.exact()}};
  report["assembly_seconds"] = p.assembly_seconds;
  report["dense_seconds"] = dense_seconds;
  report["pass"] = pass;
  write_report(config, report);
  return pass ? exit_ok : exit_audit;
}

int cmd_solve(const RunConfig& config, std::ostream& out) {
  Problem p = build_problem(config);
  DistributedFmm fmm(*p.op, config.ranks, runtime_options(config), config.transport);
  std::mt19937_64 rng(config.seed);
  const auto w_ref = random_vector(p.mesh->n_dofs(), rng);
  const auto rhs = manufactured_rhs(*p.mesh, w_ref, RhsMode::fmm, p.op.get());
  SolveReport report;
  const auto x =
      gmres(distributed_operator(fmm), rhs, {config.tol, config.max_iter, 0}, report);
  const double err = relative_error(x, w_ref);

  if (!config.solution_out.empty()) {
    std::ofstream sol(config.solution_out);
    if (!sol) throw ConfigError("cannot write solution " + config.solution_out);
    sol << std::setprecision(17);
    for (double v : x) sol << v << '\n';
  }
  if (!config.convergence_out.empty()) {
    std::ofstream csv(config.convergence_out);
    if (!csv) throw ConfigError("cannot write convergence log " + config.convergence_out);
    write_convergence_csv(csv, report);
  }

  out << std::scientific << std::setprecision(3);
  out << "dofs " << p.mesh->n_dofs() << "  ranks " << config.ranks << "  workers "
      << config.workers << '\n';
  out << "gmres iterations " << report.iterations << "  relative residual "
      << report.residuals.back() << "  " << (report.converged ? "converged" : "NOT converged")
      << (report.breakdown ? " (breakdown)" : "") << '\n';
  out << "relative error to manufactured density " << err << '\n';
  out << std::fixed << std::setprecision(3) << "assembly " << p.assembly_seconds << " s  solve "
      << report.seconds << " s\n";

  nlohmann::ordered_json j;
  j["command"] = "solve";
  j["dofs"] = p.mesh->n_dofs();
  j["ranks"] = config.ranks;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  j["breakdown"] = report.breakdown;
  j["residuals"] = report.residuals;
  j["relative_error"] = err;
  j["assembly_seconds"] = p.assembly_seconds;
  j["solve_seconds"] = report.seconds;
  write_report(config, j);
  return report.converged ? exit_ok : exit_not_converged;
}

int cmd_trace(const RunConfig& config, std::ostream& out) {
  Problem p = build_problem(config);
  RuntimeOptions options = runtime_options(config);
  options.trace = true;
  DistributedFmm fmm(*p.op, config.ranks, options, config.transport);
  std::mt19937_64 rng(config.seed);
  const auto w = random_vector(p.mesh->n_dofs(), rng);
  fmm.apply(w);
  const std::string path = config.trace_out.empty() ? "trace.json" : config.trace_out;
  {
    std::ofstream file(path);
    if (!file) throw ConfigError("cannot write trace " + path);
    write_trace_json(file, fmm.trace());
  }
  const TraceSummary s = summarize_trace(fmm.trace());
  out << "events " << fmm.trace().size() << " written to " << path << '\n';
  out << std::fixed << std::setprecision(1);
  for (const auto& [cat, us] : s.total_us) out << "  " << cat << " " << us << " us\n";
  out << "max worker idle gap " << s.max_idle_gap_us << " us\n";
  out << "compute events on the scheduling thread " << s.scheduler_compute_events << '\n';

  nlohmann::ordered_json j;
  j["command"] = "trace";
  j["events"] = fmm.trace().size();
  j["total_us"] = s.total_us;
  j["max_idle_gap_us"] = s.max_idle_gap_us;
  j["scheduler_compute_events"] = s.scheduler_compute_events;
  write_report(config, j);
  return exit_ok;
}

int cmd_bench(const RunConfig& config, std::ostream& out) {
  validate(config);
  struct Row {
    std::string phase;
    int workers, ranks;
    double seconds, efficiency;
  };
  std::vector<Row> rows;
  std::unique_ptr<Problem> base;
  double t1 = 0.0;
  for (int w : config.bench_workers) {
    auto p = std::make_unique<Problem>(build_problem(config, w));
    if (rows.empty()) t1 = p->assembly_seconds * w;
    rows.push_back({"assembly", w, 1, p->assembly_seconds,
                    parallel_efficiency(t1, w, p->assembly_seconds)});
    if (!base) base = std::move(p);
  }
  std::mt19937_64 rng(config.seed);
  const auto x = random_vector(base->mesh->n_dofs(), rng);
  auto time_matvec = [&](int ranks, int workers) {
    RunConfig c = config;
    c.workers = workers;
    DistributedFmm fmm(*base->op, ranks, runtime_options(c), config.transport);
    fmm.apply(x);
    const int reps = 3;
    const auto start = Clock::now();
    for (int r = 0; r < reps; ++r) fmm.apply(x);
    return seconds_since(start) / reps;
  };
  double base_t = 0.0;
  int base_p = 1;
  for (std::size_t i = 0; i < config.bench_workers.size(); ++i) {
    const int w = config.bench_workers[i];
    const double t = time_matvec(1, w);
    if (i == 0) base_t = t, base_p = w;
    rows.push_back({"iteration", w, 1, t, parallel_efficiency(base_t * base_p, w, t)});
  }
  for (std::size_t i = 0; i < config.bench_ranks.size(); ++i) {
    const int r = config.bench_ranks[i];
    const double t = time_matvec(r, 1);
    if (i == 0) base_t = t, base_p = r;
    rows.push_back({"iteration", 1, r, t, parallel_efficiency(base_t * base_p, r, t)});
  }
  std::ostringstream csv;
  csv << "phase,workers,ranks,seconds,efficiency\n";
  csv << std::setprecision(6);
  for (const auto& r : rows)
    csv << r.phase << ',' << r.workers << ',' << r.ranks << ',' << r.seconds << ','
        << r.efficiency << '\n';
  out << csv.str();
  if (!config.report_out.empty()) {
    std::ofstream file(config.report_out);
    if (!file) throw ConfigError("cannot write report " + config.report_out);
    file << csv.str();
  }
  return exit_ok;
}

}  // namespace stfmm
