#include "stfmm/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stfmm/errors.hpp"

namespace stfmm {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

const char* transport_name(TransportKind kind) {
  return kind == TransportKind::tcp ? "tcp" : "inproc";
}

TransportKind parse_transport(const std::string& name) {
  if (name == "inproc") return TransportKind::inproc;
  if (name == "tcp") return TransportKind::tcp;
  throw ConfigError("unknown transport '" + name + "' (inproc or tcp)");
}

void validate(const RunConfig& c) {
  require(c.cube_subdiv >= 1, "cube-subdiv must be >= 1");
  require(c.t_end > 0.0, "t-end must be > 0");
  require(c.timesteps >= 1, "timesteps must be >= 1");
  require(c.slices >= 1 && c.slices <= c.timesteps, "slices must be in 1..timesteps");
  require(c.alpha > 0.0, "alpha must be > 0");
  require(c.nmax >= 1, "nmax must be >= 1");
  require(c.cst > 0.0, "cst must be > 0");
  require(c.ntr >= 0, "ntr must be >= 0");
  require(c.mt >= 0 && c.mt <= 30, "mt must be in 0..30");
  require(c.mx >= 0 && c.mx <= 30, "mx must be in 0..30");
  for (int q : {c.quadrature.coincident, c.quadrature.edge, c.quadrature.vertex,
                c.quadrature.disjoint})
    require(q >= 1 && q <= 30, "quadrature orders must be in 1..30");
  require(c.ranks >= 1, "ranks must be >= 1");
  require(c.workers >= 0, "workers must be >= 0");
  require(c.grain >= 1, "grain must be >= 1");
  require(c.tol > 0.0 && c.tol < 1.0, "tol must be in (0, 1)");
  require(c.max_iter >= 1, "max-iter must be >= 1");
  require(c.dense_cap >= 1, "dense-cap must be >= 1");
  for (int w : c.bench_workers) require(w >= 1, "bench worker counts must be >= 1");
  for (int r : c.bench_ranks) require(r >= 1, "bench rank counts must be >= 1");
}

std::string serialize_config(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["mesh"] = c.mesh;
  j["cube_subdiv"] = c.cube_subdiv;
  j["t_end"] = c.t_end;
  j["timesteps"] = c.timesteps;
  j["slices"] = c.slices;
  j["alpha"] = c.alpha;
  j["nmax"] = c.nmax;
  j["cst"] = c.cst;
  j["ntr"] = c.ntr;
  j["mt"] = c.mt;
  j["mx"] = c.mx;
  j["oversize"] = c.oversize;
  j["quadrature"] = {{"coincident", c.quadrature.coincident},
                     {"edge", c.quadrature.edge},
                     {"vertex", c.quadrature.vertex},
                     {"disjoint", c.quadrature.disjoint}};
  j["ranks"] = c.ranks;
  j["transport"] = transport_name(c.transport);
  j["workers"] = c.workers;
  j["threshold"] = c.threshold;
  j["grain"] = c.grain;
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["seed"] = c.seed;
  j["dense_cap"] = c.dense_cap;
  j["bench_workers"] = c.bench_workers;
  j["bench_ranks"] = c.bench_ranks;
  j["trace_out"] = c.trace_out;
  j["report_out"] = c.report_out;
  j["solution_out"] = c.solution_out;
  j["convergence_out"] = c.convergence_out;
  return j.dump(2) + "\n";
}

RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), "config must be a JSON object");
  RunConfig c;
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
  };
  static const char* known[] = {
      "mesh",       "cube_subdiv",   "t_end",         "timesteps",       "slices",
      "alpha",      "nmax",          "cst",           "ntr",             "mt",
      "mx",         "oversize",      "quadrature",    "ranks",         "transport",       "workers",
      "threshold",  "grain",         "tol",           "max_iter",        "seed",
      "dense_cap",  "bench_workers", "bench_ranks",   "trace_out",       "report_out",
      "solution_out", "convergence_out"};
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    require(ok, "unknown config key '" + key + "'");
  }
  get("mesh", c.mesh);
  get("cube_subdiv", c.cube_subdiv);
  get("t_end", c.t_end);
  get("timesteps", c.timesteps);
  get("slices", c.slices);
  get("alpha", c.alpha);
  get("nmax", c.nmax);
  get("cst", c.cst);
  get("ntr", c.ntr);
  get("mt", c.mt);
  get("mx", c.mx);
  get("oversize", c.oversize);
  if (j.contains("quadrature")) {
    const auto& q = j["quadrature"];
    require(q.is_object(), "config key 'quadrature' must be an object");
    for (const auto& [key, value] : q.items()) {
      require(value.is_number_integer(), "quadrature order '" + key + "' must be an integer");
      if (key == "coincident") c.quadrature.coincident = value;
      else if (key == "edge") c.quadrature.edge = value;
      else if (key == "vertex") c.quadrature.vertex = value;
      else if (key == "disjoint") c.quadrature.disjoint = value;
      else throw ConfigError("unknown quadrature key '" + key + "'");
    }
  }
  get("ranks", c.ranks);
  if (j.contains("transport")) {
    std::string t;
    get("transport", t);
    c.transport = parse_transport(t);
  }
  get("workers", c.workers);
  get("threshold", c.threshold);
  get("grain", c.grain);
  get("tol", c.tol);
  get("max_iter", c.max_iter);
  get("seed", c.seed);
  get("dense_cap", c.dense_cap);
  get("bench_workers", c.bench_workers);
  get("bench_ranks", c.bench_ranks);
  get("trace_out", c.trace_out);
  get("report_out", c.report_out);
  get("solution_out", c.solution_out);
  get("convergence_out", c.convergence_out);
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace stfmm
