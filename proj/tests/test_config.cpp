#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unistd.h>

#include "stfmm/commands.hpp"
#include "stfmm/config.hpp"
#include "stfmm/errors.hpp"

using namespace stfmm;
namespace fs = std::filesystem;

namespace {

RunConfig small_config() {
  RunConfig c;
  c.cube_subdiv = 2;
  c.timesteps = 16;
  c.nmax = 40;
  c.oversize = 0.0;
  return c;
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("stfmm_config_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const char* name) const { return (path / name).string(); }
};

std::vector<double> read_column(const std::string& path) {
  std::ifstream in(path);
  std::vector<double> v;
  double x;
  while (in >> x) v.push_back(x);
  return v;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("config round trip") {
  const RunConfig defaults;
  CHECK(parse_config(serialize_config(defaults)) == defaults);

  RunConfig c = small_config();
  c.mesh = "surface.obj";
  c.t_end = 2.5;
  c.slices = 4;
  c.alpha = 0.3;
  c.cst = 0.7;
  c.ntr = 3;
  c.mt = 4;
  c.mx = 12;
  c.quadrature.coincident = 10;
  c.ranks = 3;
  c.transport = TransportKind::tcp;
  c.workers = 2;
  c.threshold = threshold_never;
  c.grain = 2;
  c.tol = 1e-6;
  c.max_iter = 77;
  c.seed = 99;
  c.dense_cap = 1000;
  c.bench_workers = {1, 3};
  c.bench_ranks = {2};
  c.trace_out = "t.json";
  c.report_out = "r.json";
  c.solution_out = "x.txt";
  c.convergence_out = "c.csv";
  CHECK(parse_config(serialize_config(c)) == c);

  const RunConfig partial = parse_config(R"({"timesteps": 32, "quadrature": {"edge": 10}})");
  CHECK(partial.timesteps == 32);
  CHECK(partial.quadrature.edge == 10);
  CHECK(partial.quadrature.coincident == defaults.quadrature.coincident);
  CHECK(partial.nmax == 80);
  CHECK(partial.cst == 0.9);

  TempDir dir;
  {
    std::ofstream out(dir.file("c.json"));
    out << serialize_config(c);
  }
  CHECK(load_config(dir.file("c.json")) == c);
  CHECK_THROWS_AS(load_config(dir.file("missing.json")), ConfigError);
}

TEST_CASE("config rejects bad input") {
  CHECK_THROWS_AS(parse_config(R"({"timestep": 16})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"quadrature": {"far": 3}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{ not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"timesteps": "many"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"transport": "mpi"})"), ConfigError);
  for (const char* text :
       {R"({"timesteps": 0})", R"({"t_end": 0})", R"({"cst": -1})", R"({"alpha": 0})",
        R"({"ranks": 0})", R"({"workers": -1})", R"({"tol": 0})", R"({"max_iter": 0})",
        R"({"mx": -1})", R"({"ntr": -2})", R"({"slices": 17})", R"({"grain": 0})",
        R"({"bench_workers": [0]})", R"({"quadrature": {"vertex": 0}})"}) {
    CAPTURE(text);
    CHECK_THROWS_AS(parse_config(text), ConfigError);
  }
  CHECK(parse_transport("inproc") == TransportKind::inproc);
  CHECK(parse_transport("tcp") == TransportKind::tcp);
  CHECK(std::string(transport_name(TransportKind::tcp)) == "tcp");
}

TEST_CASE("parallel efficiency") {
  CHECK(parallel_efficiency(10.0, 1, 10.0) == 1.0);
  CHECK(parallel_efficiency(10.0, 4, 5.0) == doctest::Approx(0.5));
  CHECK(parallel_efficiency(12.0, 4, 3.0) == doctest::Approx(1.0));
  CHECK(parallel_efficiency(8.0, 2, 8.0) == doctest::Approx(0.5));
}

TEST_CASE("derived settings") {
  RunConfig c = small_config();
  c.slices = 4;
  c.workers = 3;
  c.grain = 2;
  const auto mesh = make_mesh(c);
  CHECK(mesh.n_timesteps() == 16);
  CHECK(mesh.n_space() == 48);
  const auto tp = tree_params(c);
  CHECK(tp.n_max == 40);
  CHECK(tp.n_slices == 4);
  CHECK(tp.oversize == 0.0);
  const auto ro = runtime_options(c);
  CHECK(ro.workers == 3);
  CHECK(ro.grain == 2);
  CHECK(ro.effective_threshold() == 6);
}

TEST_CASE("verify command") {
  TempDir dir;
  RunConfig c = small_config();
  c.ranks = 2;
  c.report_out = dir.file("verify.json");
  std::ostringstream out;
  CHECK(cmd_verify(c, out) == exit_ok);
  const auto report = nlohmann::json::parse(std::ifstream(c.report_out));
  CHECK(report["pass"] == true);
  CHECK(report["max_relative_error"].get<double>() <= 1e-4);
  CHECK(report["coverage"]["exact"] == true);
  CHECK(report["causality_max_abs"].get<double>() == 0.0);

  c.ntr = 0;
  std::ostringstream truncated;
  CHECK(cmd_verify(c, truncated) == exit_audit);

  c = small_config();
  c.dense_cap = 100;
  std::ostringstream capped;
  CHECK_THROWS_AS(cmd_verify(c, capped), ConfigError);
}

TEST_CASE("solve command") {
  TempDir dir;
  RunConfig c = small_config();
  c.solution_out = dir.file("x1.txt");
  c.convergence_out = dir.file("c1.csv");
  std::ostringstream out;
  CHECK(cmd_solve(c, out) == exit_ok);
  const auto x1 = read_column(c.solution_out);
  CHECK(x1.size() == 768);
  const auto log1 = read_lines(c.convergence_out);
  REQUIRE(log1.size() > 2);
  CHECK(log1.front() == "iter,relres");

  c.ranks = 4;
  c.workers = 2;
  c.solution_out = dir.file("x4.txt");
  c.convergence_out = dir.file("c4.csv");
  std::ostringstream out4;
  CHECK(cmd_solve(c, out4) == exit_ok);
  const auto x4 = read_column(c.solution_out);
  CHECK(read_lines(c.convergence_out).size() == log1.size());
  REQUIRE(x4.size() == x1.size());
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    diff = std::max(diff, std::abs(x4[i] - x1[i]));
    scale = std::max(scale, std::abs(x1[i]));
  }
  CHECK(diff <= 1e-10 * scale);

  c.max_iter = 1;
  std::ostringstream capped;
  CHECK(cmd_solve(c, capped) == exit_not_converged);
}

TEST_CASE("trace command") {
  TempDir dir;
  RunConfig c = small_config();
  c.ranks = 2;
  c.workers = 1;
  c.threshold = threshold_never;
  c.trace_out = dir.file("trace.json");
  std::ostringstream out;
  CHECK(cmd_trace(c, out) == exit_ok);
  const auto trace = nlohmann::json::parse(std::ifstream(c.trace_out));
  REQUIRE(trace.is_array());
  CHECK(!trace.empty());
  for (const auto& e : trace)
    if (e["worker"] == 0) CHECK((e["category"] == "SEND" || e["category"] == "RECV"));
}

TEST_CASE("bench command") {
  TempDir dir;
  RunConfig c = small_config();
  c.bench_workers = {1, 2};
  c.bench_ranks = {1, 2};
  c.report_out = dir.file("bench.csv");
  std::ostringstream out;
  CHECK(cmd_bench(c, out) == exit_ok);
  const auto lines = read_lines(c.report_out);
  REQUIRE(lines.size() == 7);
  CHECK(lines[0] == "phase,workers,ranks,seconds,efficiency");
  CHECK(lines[1].rfind("assembly,1,1,", 0) == 0);
  CHECK(lines[1].substr(lines[1].rfind(',') + 1) == "1");
  CHECK(lines[3].rfind("iteration,1,1,", 0) == 0);
  CHECK(lines[3].substr(lines[3].rfind(',') + 1) == "1");
}
