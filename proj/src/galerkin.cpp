#include "stfmm/galerkin.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <thread>

#include "stfmm/errors.hpp"

namespace stfmm {

namespace {

constexpr double inv_sqrt_pi = 0.56418958354775628695;  // 1/sqrt(pi)

// Double time antiderivative of the heat kernel, W(s) = int_0^s (s-u) G(r, u) du,
// written as sqrt(s/alpha)/(4 pi alpha) * gw(rho) with rho = r / sqrt(4 alpha s).
// R(s) = W(s) - s/(4 pi alpha r) drops the 1/r part: R = sqrt(s/alpha)/(4 pi alpha) * g(rho).
struct Antiderivative {
  double w;  // W(s)
  double r;  // R(s)
};

double erf_over_rho(double rho, double erf_value) {
  if (rho < 1e-4) {
    const double q = rho * rho;
    return 2.0 * inv_sqrt_pi * (1.0 - q / 3.0 + q * q / 10.0);
  }
  return erf_value / rho;
}

Antiderivative antiderivative(double r, double s, double alpha) {
  const double pref = std::sqrt(s / alpha) / (4.0 * std::numbers::pi * alpha);
  const double rho = r / std::sqrt(4.0 * alpha * s);
  double e, ec;
  if (rho < 0.5) {
    e = std::erf(rho);
    ec = 1.0 - e;
  } else {
    ec = std::erfc(rho);
    e = 1.0 - ec;
  }
  const double gauss = std::exp(-rho * rho) * inv_sqrt_pi;
  const double common = rho * ec - gauss;
  Antiderivative out;
  out.r = pref * (common - 0.5 * erf_over_rho(rho, e));
  out.w = rho > 0.0 ? pref * (common + ec / (2.0 * rho)) : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace

int QuadratureSpec::order(Adjacency a) const {
  switch (a) {
    case Adjacency::coincident: return coincident;
    case Adjacency::edge: return edge;
    case Adjacency::vertex: return vertex;
    case Adjacency::disjoint: return disjoint;
  }
  return disjoint;
}

double time_integrated_kernel(double r, const Interval& target, const Interval& source,
                              double alpha) {
  if (r < 0.0) throw DomainError("time_integrated_kernel: negative distance");
  const double a = target.lo, b = target.hi, c = source.lo, d = source.hi;
  if (c >= b) return 0.0;
  const std::array<double, 4> s{b - c, b - d, a - c, a - d};
  const std::array<double, 4> sign{1.0, -1.0, -1.0, 1.0};
  const bool identical = a == c && b == d;
  double lin = 0.0;
  if (identical) {
    lin = b - a;
  } else if (d > a) {
    for (int i = 0; i < 4; ++i) lin += sign[i] * std::max(s[i], 0.0);
  }
  if (r == 0.0 && lin > 0.0) return std::numeric_limits<double>::infinity();
  const bool use_w = r * r / (4.0 * alpha * s[0]) > 1.0;
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (s[i] <= 0.0) continue;
    const auto ad = antiderivative(r, s[i], alpha);
    sum += sign[i] * (use_w ? ad.w : ad.r);
  }
  if (!use_w && lin != 0.0) sum += lin / (4.0 * std::numbers::pi * alpha * r);
  return sum;
}

LagKernel::LagKernel(double h, double alpha) : h_(h), alpha_(alpha) {
  if (!(h > 0.0) || !(alpha > 0.0)) throw DomainError("LagKernel: h and alpha must be positive");
}

void LagKernel::eval(double r, std::span<double> out) const {
  if (r < 0.0) throw DomainError("LagKernel: negative distance");
  const int n_lags = static_cast<int>(out.size());
  if (n_lags == 0) return;
  // values for s = m h, m = 0..n_lags; index 0 is the zero antiderivative
  thread_local std::vector<Antiderivative> ad;
  ad.assign(static_cast<std::size_t>(n_lags) + 1, Antiderivative{0.0, 0.0});
  for (int m = 1; m <= n_lags; ++m) ad[m] = antiderivative(r, m * h_, alpha_);
  auto at = [&](int m) { return m <= 0 ? Antiderivative{0.0, 0.0} : ad[m]; };
  const double sing = r > 0.0 ? h_ / (4.0 * std::numbers::pi * alpha_ * r)
                              : std::numeric_limits<double>::infinity();
  for (int d = 0; d < n_lags; ++d) {
    const auto p = at(d + 1), q = at(d), o = at(d - 1);
    if (r * r / (4.0 * alpha_ * (d + 1) * h_) > 1.0) {
      out[d] = p.w - 2.0 * q.w + o.w;
    } else {
      out[d] = p.r - 2.0 * q.r + o.r;
      if (d == 0) out[d] += sing;
    }
  }
}

double LagKernel::eval(double r, int lag) const {
  std::vector<double> v(static_cast<std::size_t>(lag) + 1);
  eval(r, v);
  return v[lag];
}

SingleLayerIntegrator::SingleLayerIntegrator(const SpaceTimeMesh& mesh, double alpha,
                                             QuadratureSpec spec)
    : mesh_(&mesh), alpha_(alpha), spec_(spec), lag_kernel_(mesh.timestep(), alpha) {
  for (auto kind :
       {Adjacency::disjoint, Adjacency::vertex, Adjacency::edge, Adjacency::coincident}) {
    const int n = spec_.order(kind);
    if (n < 1) throw std::invalid_argument("quadrature orders must be >= 1");
    rules_[static_cast<int>(kind)] = pair_rule(kind, n);
  }
}

Adjacency SingleLayerIntegrator::adjacency(int kx, int jx) const {
  if (kx == jx) return Adjacency::coincident;
  const auto& tk = mesh_->space().triangles()[kx];
  const auto& tj = mesh_->space().triangles()[jx];
  int shared = 0;
  for (int u : tk)
    for (int v : tj) shared += u == v;
  if (shared >= 2) return Adjacency::edge;
  if (shared == 1) return Adjacency::vertex;
  return Adjacency::disjoint;
}

SingleLayerIntegrator::Oriented SingleLayerIntegrator::orient(int kx, int jx) const {
  const auto& space = mesh_->space();
  const auto& tk = space.triangles()[kx];
  const auto& tj = space.triangles()[jx];
  Oriented o;
  o.kind = adjacency(kx, jx);
  std::array<int, 3> ok = tk, oj = tj;
  if (o.kind == Adjacency::edge || o.kind == Adjacency::vertex) {
    std::vector<int> common;
    for (int u : tk)
      if (std::find(tj.begin(), tj.end(), u) != tj.end()) common.push_back(u);
    auto reorder = [&](const std::array<int, 3>& t) {
      std::array<int, 3> r{};
      int pos = 0;
      for (int u : common) r[pos++] = u;
      for (int u : t)
        if (std::find(common.begin(), common.end(), u) == common.end()) r[pos++] = u;
      return r;
    };
    ok = reorder(tk);
    oj = reorder(tj);
  }
  for (int i = 0; i < 3; ++i) {
    o.x[i] = space.vertex(ok[i]);
    o.y[i] = space.vertex(oj[i]);
  }
  return o;
}

void SingleLayerIntegrator::lag_integrals(int kx, int jx, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  if (out.empty()) return;
  const Oriented o = orient(kx, jx);
  const PairRule& rule = rules_[static_cast<int>(o.kind)];
  const Vec3 ex1 = o.x[1] - o.x[0], ex2 = o.x[2] - o.x[1];
  const Vec3 ey1 = o.y[1] - o.y[0], ey2 = o.y[2] - o.y[1];
  thread_local std::vector<double> k;
  k.resize(out.size());
  for (std::size_t q = 0; q < rule.w.size(); ++q) {
    const auto& p = rule.pts[q];
    const Vec3 x = o.x[0] + p[0] * ex1 + p[1] * ex2;
    const Vec3 y = o.y[0] + p[2] * ey1 + p[3] * ey2;
    lag_kernel_.eval(norm(x - y), k);
    const double w = rule.w[q];
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += w * k[d];
  }
  const double jac = 4.0 * mesh_->space().area(kx) * mesh_->space().area(jx);
  for (auto& v : out) v *= jac;
}

double SingleLayerIntegrator::entry(int kt, int kx, int jt, int jx) const {
  if (jt > kt) return 0.0;
  std::vector<double> v(static_cast<std::size_t>(kt - jt) + 1);
  lag_integrals(kx, jx, v);
  return v.back();
}

Eigen::MatrixXd assemble_dense(const SingleLayerIntegrator& integrator, std::size_t cap,
                               int threads) {
  const auto& mesh = integrator.mesh();
  const std::size_t n = mesh.n_dofs();
  if (n > cap) {
    throw std::length_error("dense assembly of " + std::to_string(n) +
                            " DOFs exceeds the cap of " + std::to_string(cap));
  }
  const int ex = mesh.n_space();
  const int et = mesh.n_timesteps();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(n));
  auto work = [&](int first, int stride) {
    std::vector<double> v(static_cast<std::size_t>(et));
    for (int kx = first; kx < ex; kx += stride) {
      for (int jx = 0; jx < ex; ++jx) {
        integrator.lag_integrals(kx, jx, v);
        for (int kt = 0; kt < et; ++kt)
          for (int jt = 0; jt <= kt; ++jt)
            m(static_cast<Eigen::Index>(mesh.dof(kt, kx)),
              static_cast<Eigen::Index>(mesh.dof(jt, jx))) = v[kt - jt];
      }
    }
  };
  threads = std::max(1, threads);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }
  return m;
}

std::size_t NearfieldSet::entries() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += static_cast<std::size_t>(b.values.size());
  return n;
}

std::size_t nearfield_entry_count(const ClusterTree& tree) {
  std::size_t n = 0;
  for (int leaf : tree.leaves())
    for (int src : tree.cluster(leaf).nearfield)
      n += tree.cluster(leaf).n_elements() * tree.cluster(src).n_elements();
  return n;
}

NearfieldSet assemble_nearfield(const ClusterTree& tree, const SingleLayerIntegrator& integrator,
                                std::size_t cap, int threads) {
  const std::size_t n_entries = nearfield_entry_count(tree);
  if (n_entries > cap) {
    throw std::length_error("nearfield needs " + std::to_string(n_entries) +
                            " entries, exceeding the cap of " + std::to_string(cap));
  }
  const auto& mesh = tree.mesh();
  const int ex = mesh.n_space();
  const auto pair_key = [ex](int kx, int jx) {
    return static_cast<std::size_t>(kx) * static_cast<std::size_t>(ex) + static_cast<std::size_t>(jx);
  };

  // Largest lag needed per triangle pair; -1 when the pair is not used.
  std::vector<int> max_lag(static_cast<std::size_t>(ex) * ex, -1);
  const auto leaves = tree.leaves();
  for (int leaf : leaves) {
    const auto& z = tree.cluster(leaf);
    for (int src : z.nearfield) {
      const auto& y = tree.cluster(src);
      const int lag = z.step_end - 1 - y.step_begin;
      if (lag < 0) continue;
      for (int kx : z.triangles)
        for (int jx : y.triangles) {
          int& m = max_lag[pair_key(kx, jx)];
          m = std::max(m, lag);
        }
    }
  }
  std::vector<std::size_t> used;
  for (std::size_t k = 0; k < max_lag.size(); ++k)
    if (max_lag[k] >= 0) used.push_back(k);
  std::vector<std::vector<double>> lags(max_lag.size());
  threads = std::max(1, threads);
  auto eval_pairs = [&](int first, int stride) {
    for (std::size_t i = first; i < used.size(); i += stride) {
      const std::size_t k = used[i];
      auto& v = lags[k];
      v.resize(static_cast<std::size_t>(max_lag[k]) + 1);
      integrator.lag_integrals(static_cast<int>(k / ex), static_cast<int>(k % ex), v);
    }
  };
  if (threads == 1) {
    eval_pairs(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(eval_pairs, t, threads);
  }

  NearfieldSet set;
  set.by_target.resize(tree.clusters().size());
  for (int leaf : leaves) {
    const auto& z = tree.cluster(leaf);
    for (int src : z.nearfield) {
      const auto& y = tree.cluster(src);
      NearfieldBlock block;
      block.target = leaf;
      block.source = src;
      const auto nz = static_cast<Eigen::Index>(z.triangles.size());
      const auto ny = static_cast<Eigen::Index>(y.triangles.size());
      block.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(z.n_elements()),
                                           static_cast<Eigen::Index>(y.n_elements()));
      for (int kt = z.step_begin; kt < z.step_end; ++kt) {
        for (int jt = y.step_begin; jt < y.step_end && jt <= kt; ++jt) {
          const Eigen::Index row0 = (kt - z.step_begin) * nz;
          const Eigen::Index col0 = (jt - y.step_begin) * ny;
          for (Eigen::Index a = 0; a < nz; ++a)
            for (Eigen::Index b = 0; b < ny; ++b)
              block.values(row0 + a, col0 + b) =
                  lags[pair_key(z.triangles[a], y.triangles[b])][kt - jt];
        }
      }
      set.by_target[leaf].push_back(static_cast<int>(set.blocks.size()));
      set.blocks.push_back(std::move(block));
    }
  }
  return set;
}

void export_dense(std::ostream& out, const Eigen::MatrixXd& m) {
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << m(i, j);
    }
    out << '\n';
  }
}

}  // namespace stfmm
