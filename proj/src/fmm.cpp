#include "stfmm/fmm.hpp"

#include <algorithm>
#include <cmath>

#include "stfmm/errors.hpp"
#include "stfmm/quadrature.hpp"

namespace stfmm {

namespace {

std::size_t cube_index(int m, int i, int j, int k) {
  const auto n = static_cast<std::size_t>(m) + 1;
  return (static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)) * n +
         static_cast<std::size_t>(k);
}

std::size_t quad_index(int m, int i, int j, int k, int c) {
  return cube_index(m, i, j, k) * (static_cast<std::size_t>(m) + 1) + static_cast<std::size_t>(c);
}

// out = q applied along one axis of an (m+1)^3 cube:
// forward out[..n..] = sum_k q[k][n] in[..k..], transposed out[..k..] = sum_n q[k][n] in[..n..].
void axis_transform(const std::vector<double>& in, std::vector<double>& out,
                    const std::vector<double>& q, int m, int axis, bool transpose) {
  const int n1 = m + 1;
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n1; ++j) {
      for (int s = 0; s < n1; ++s) {
        std::size_t src;
        if (axis == 0) src = cube_index(m, s, i, j);
        else if (axis == 1) src = cube_index(m, i, s, j);
        else src = cube_index(m, i, j, s);
        const double v = in[src];
        if (v == 0.0) continue;
        for (int t = 0; t < n1; ++t) {
          const double c = transpose ? q[t * n1 + s] : q[s * n1 + t];
          if (c == 0.0) continue;
          std::size_t dst;
          if (axis == 0) dst = cube_index(m, t, i, j);
          else if (axis == 1) dst = cube_index(m, i, t, j);
          else dst = cube_index(m, i, j, t);
          out[dst] += c * v;
        }
      }
    }
  }
}

}  // namespace

BasisIntegrals compute_basis_integrals(const ClusterTree& tree, int cluster,
                                       const ExpansionOrders& orders) {
  const auto& z = tree.cluster(cluster);
  const auto& mesh = tree.mesh();
  const int mt = orders.mt;
  const int mx = orders.mx;
  const MultiIndexSet idx(mx);
  const std::size_t nk = idx.size();
  BasisIntegrals out;
  out.n_steps = z.step_end - z.step_begin;
  out.n_triangles = static_cast<int>(z.triangles.size());
  out.temporal.assign(static_cast<std::size_t>(out.n_steps) * (mt + 1), 0.0);
  out.spatial.assign(static_cast<std::size_t>(out.n_triangles) * nk, 0.0);

  const Rule1D g = gauss_legendre(mt / 2 + 1);
  const LagrangeBasis basis(mt);
  std::vector<double> l(static_cast<std::size_t>(mt) + 1);
  for (int s = 0; s < out.n_steps; ++s) {
    const double t0 = mesh.time(z.step_begin + s);
    const double h = mesh.time(z.step_begin + s + 1) - t0;
    for (std::size_t q = 0; q < g.x.size(); ++q) {
      basis.values(z.box.time, t0 + h * g.x[q], l);
      for (int a = 0; a <= mt; ++a) out.temporal[s * (mt + 1) + a] += h * g.w[q] * l[a];
    }
  }

  const TriangleRule tr = triangle_rule((mx + 3) / 2);
  std::array<std::vector<double>, 3> cheb;
  for (auto& c : cheb) c.resize(static_cast<std::size_t>(mx) + 1);
  for (int i = 0; i < out.n_triangles; ++i) {
    const int tri = z.triangles[i];
    const auto p = mesh.space().corners(tri);
    const double jac = 2.0 * mesh.space().area(tri);
    double* row = out.spatial.data() + static_cast<std::size_t>(i) * nk;
    for (std::size_t q = 0; q < tr.w.size(); ++q) {
      const Vec3 y = p[0] + tr.pts[q][0] * (p[1] - p[0]) + tr.pts[q][1] * (p[2] - p[1]);
      for (int j = 0; j < 3; ++j) chebyshev_values(mx, z.box.axis(j).to_ref(y[j]), cheb[j]);
      const double w = jac * tr.w[q];
      for (std::size_t k = 0; k < nk; ++k) {
        const auto& kappa = idx[k];
        row[k] += w * cheb[0][kappa[0]] * cheb[1][kappa[1]] * cheb[2][kappa[2]];
      }
    }
  }
  return out;
}

FmmOperator::FmmOperator(const ClusterTree& tree, NearfieldSet nearfield, ExpansionOrders orders,
                         FmmOptions options)
    : tree_(&tree),
      nearfield_(std::move(nearfield)),
      orders_(orders),
      options_(options),
      idx_(orders.mx),
      tensor_size_(static_cast<std::size_t>(orders.mt + 1) * idx_.size()) {
  if (orders.mt < 0 || orders.mx < 0) throw std::invalid_argument("expansion orders must be >= 0");
  const auto& clusters = tree.clusters();
  const std::size_t n = clusters.size();
  if (nearfield_.by_target.size() != n)
    throw std::invalid_argument("nearfield set does not match the tree");

  needs_moments_.assign(n, 0);
  needs_locals_.assign(n, 0);
  for (const auto& z : clusters)
    for (int src : z.interaction) needs_moments_[src] = 1;
  for (const auto& z : clusters) {
    if (z.parent >= 0) {
      needs_moments_[z.id] = needs_moments_[z.id] || needs_moments_[z.parent];
      needs_locals_[z.id] = needs_locals_[z.parent];
    }
    if (!z.interaction.empty()) needs_locals_[z.id] = 1;
  }

  basis_.resize(n);
  for (const auto& z : clusters)
    if (z.is_leaf() && (needs_moments_[z.id] || needs_locals_[z.id]))
      basis_[z.id] = compute_basis_integrals(tree, z.id, orders_);

  const int mt = orders_.mt;
  const int mx = orders_.mx;
  const LagrangeBasis lagrange(mt);
  const auto xi = chebyshev_nodes(mx);
  std::vector<double> tv(static_cast<std::size_t>(mx) + 1);
  std::vector<double> lv(static_cast<std::size_t>(mt) + 1);
  transfer_.resize(n);
  for (const auto& c : clusters) {
    if (c.parent < 0) continue;
    const auto& p = clusters[c.parent];
    Transfer& tr = transfer_[c.id];
    tr.qt.assign(static_cast<std::size_t>(mt + 1) * (mt + 1), 0.0);
    for (int ac = 0; ac <= mt; ++ac) {
      lagrange.values(p.box.time, lagrange.node(c.box.time, ac), lv);
      for (int ap = 0; ap <= mt; ++ap) tr.qt[ac * (mt + 1) + ap] = lv[ap];
    }
    for (int j = 0; j < 3; ++j) {
      auto& q = tr.qx[j];
      q.assign(static_cast<std::size_t>(mx + 1) * (mx + 1), 0.0);
      const Interval ic = c.box.axis(j);
      const Interval ip = p.box.axis(j);
      for (int s = 0; s <= mx; ++s) {
        chebyshev_values(mx, ip.to_ref(ic.from_ref(xi[s])), tv);
        for (int kc = 0; kc <= mx; ++kc) {
          const double tk = std::cos(kc * std::acos(xi[s]));
          for (int kp = kc; kp <= mx; ++kp) q[kc * (mx + 1) + kp] += tv[kp] * tk;
        }
      }
      for (int kc = 0; kc <= mx; ++kc) {
        const double scale = (kc == 0 ? 1.0 : 2.0) / (mx + 1.0);
        for (int kp = kc; kp <= mx; ++kp) q[kc * (mx + 1) + kp] *= scale;
      }
    }
  }

  for (const auto& z : clusters) {
    for (int src : z.interaction) {
      const CacheKey key = cache_key(z.id, src);
      if (cache_.count(key)) continue;
      cache_.emplace(key, expansion_coeffs(z.box, clusters[src].box, orders_));
    }
  }
}

FmmOperator::CacheKey FmmOperator::cache_key(int target, int source) const {
  const auto& z = tree_->cluster(target);
  const auto& y = tree_->cluster(source);
  int t0 = z.t_index - y.t_index;
  int t1 = -1;
  if (z.level != y.level || !tree_->level(z.level).uniform_time) {
    t0 = tree_->temporal(z.temporal).id;
    t1 = tree_->temporal(y.temporal).id;
  }
  return {z.level, t0, t1, z.grid[0] - y.grid[0], z.grid[1] - y.grid[1], z.grid[2] - y.grid[2]};
}

CoeffTensor FmmOperator::coefficients(int target, int source) const {
  const auto& z = tree_->cluster(target);
  const auto& y = tree_->cluster(source);
  if (z.level == y.level) {
    auto it = cache_.find(cache_key(target, source));
    if (it != cache_.end()) return it->second;
  }
  return expansion_coeffs(z.box, y.box, orders_);
}

void FmmOperator::s2m(int leaf, std::span<const double> w, std::span<double> mu) const {
  const auto& z = tree_->cluster(leaf);
  const auto& bi = basis_[leaf];
  const int na = orders_.mt + 1;
  const std::size_t nk = idx_.size();
  const int ex = tree_->mesh().n_space();
  thread_local std::vector<double> wa;
  wa.assign(static_cast<std::size_t>(bi.n_triangles) * na, 0.0);
  for (int s = 0; s < bi.n_steps; ++s) {
    const std::size_t base = static_cast<std::size_t>(z.step_begin + s) * ex;
    for (int i = 0; i < bi.n_triangles; ++i) {
      const double v = w[base + z.triangles[i]];
      if (v == 0.0) continue;
      for (int a = 0; a < na; ++a) wa[i * na + a] += v * bi.temporal[s * na + a];
    }
  }
  for (int i = 0; i < bi.n_triangles; ++i) {
    const double* sp = bi.spatial.data() + static_cast<std::size_t>(i) * nk;
    for (int a = 0; a < na; ++a) {
      const double v = wa[i * na + a];
      if (v == 0.0) continue;
      double* out = mu.data() + static_cast<std::size_t>(a) * nk;
      for (std::size_t k = 0; k < nk; ++k) out[k] += v * sp[k];
    }
  }
}

void FmmOperator::l2t(int leaf, std::span<const double> lambda, std::span<double> f) const {
  const auto& z = tree_->cluster(leaf);
  const auto& bi = basis_[leaf];
  const int na = orders_.mt + 1;
  const std::size_t nk = idx_.size();
  const int ex = tree_->mesh().n_space();
  thread_local std::vector<double> ga;
  ga.assign(static_cast<std::size_t>(bi.n_triangles) * na, 0.0);
  for (int i = 0; i < bi.n_triangles; ++i) {
    const double* sp = bi.spatial.data() + static_cast<std::size_t>(i) * nk;
    for (int a = 0; a < na; ++a) {
      const double* lam = lambda.data() + static_cast<std::size_t>(a) * nk;
      double acc = 0.0;
      for (std::size_t k = 0; k < nk; ++k) acc += lam[k] * sp[k];
      ga[i * na + a] = acc;
    }
  }
  for (int s = 0; s < bi.n_steps; ++s) {
    const std::size_t base = static_cast<std::size_t>(z.step_begin + s) * ex;
    for (int i = 0; i < bi.n_triangles; ++i) {
      double acc = 0.0;
      for (int a = 0; a < na; ++a) acc += bi.temporal[s * na + a] * ga[i * na + a];
      f[base + z.triangles[i]] += acc;
    }
  }
}

void FmmOperator::m2m(int child, std::span<const double> mu_child,
                      std::span<double> mu_parent) const {
  const Transfer& tr = transfer_[child];
  const int mt = orders_.mt;
  const int mx = orders_.mx;
  const std::size_t nk = idx_.size();
  const std::size_t ncube = cube_index(mx, mx, mx, mx) + 1;
  thread_local std::vector<double> c0, c1;
  c0.resize(ncube);
  c1.resize(ncube);
  for (int ap = 0; ap <= mt; ++ap) {
    std::fill(c0.begin(), c0.end(), 0.0);
    bool any = false;
    for (int ac = 0; ac <= mt; ++ac) {
      const double q = tr.qt[ac * (mt + 1) + ap];
      const double* in = mu_child.data() + static_cast<std::size_t>(ac) * nk;
      for (std::size_t k = 0; k < nk; ++k) {
        const auto& kp = idx_[k];
        c0[cube_index(mx, kp[0], kp[1], kp[2])] += q * in[k];
        any = any || in[k] != 0.0;
      }
    }
    if (!any) continue;
    axis_transform(c0, c1, tr.qx[0], mx, 0, false);
    axis_transform(c1, c0, tr.qx[1], mx, 1, false);
    axis_transform(c0, c1, tr.qx[2], mx, 2, false);
    double* out = mu_parent.data() + static_cast<std::size_t>(ap) * nk;
    for (std::size_t k = 0; k < nk; ++k) {
      const auto& kp = idx_[k];
      out[k] += c1[cube_index(mx, kp[0], kp[1], kp[2])];
    }
  }
}

void FmmOperator::l2l(int child, std::span<const double> lambda_parent,
                      std::span<double> lambda_child) const {
  const Transfer& tr = transfer_[child];
  const int mt = orders_.mt;
  const int mx = orders_.mx;
  const std::size_t nk = idx_.size();
  const std::size_t ncube = cube_index(mx, mx, mx, mx) + 1;
  thread_local std::vector<double> c0, c1;
  c0.resize(ncube);
  c1.resize(ncube);
  for (int ac = 0; ac <= mt; ++ac) {
    std::fill(c0.begin(), c0.end(), 0.0);
    bool any = false;
    for (int ap = 0; ap <= mt; ++ap) {
      const double q = tr.qt[ac * (mt + 1) + ap];
      const double* in = lambda_parent.data() + static_cast<std::size_t>(ap) * nk;
      for (std::size_t k = 0; k < nk; ++k) {
        const auto& kp = idx_[k];
        c0[cube_index(mx, kp[0], kp[1], kp[2])] += q * in[k];
        any = any || in[k] != 0.0;
      }
    }
    if (!any) continue;
    axis_transform(c0, c1, tr.qx[0], mx, 0, true);
    axis_transform(c1, c0, tr.qx[1], mx, 1, true);
    axis_transform(c0, c1, tr.qx[2], mx, 2, true);
    double* out = lambda_child.data() + static_cast<std::size_t>(ac) * nk;
    for (std::size_t k = 0; k < nk; ++k) {
      const auto& kp = idx_[k];
      out[k] += c1[cube_index(mx, kp[0], kp[1], kp[2])];
    }
  }
}

void FmmOperator::m2l(int target, int source, std::span<const double> mu,
                      std::span<double> lambda) const {
  const auto& z = tree_->cluster(target);
  const auto& y = tree_->cluster(source);
  const CoeffTensor* e = nullptr;
  CoeffTensor local;
  if (z.level == y.level) {
    auto it = cache_.find(cache_key(target, source));
    if (it != cache_.end()) e = &it->second;
  }
  if (!e) {
    local = expansion_coeffs(z.box, y.box, orders_);
    e = &local;
  }
  if (options_.naive_m2l) m2l_naive(*e, mu, lambda);
  else m2l_fast(*e, mu, lambda);
}

void FmmOperator::m2l_naive(const CoeffTensor& e, std::span<const double> mu,
                            std::span<double> lambda) const {
  const int mt = orders_.mt;
  const int mx = orders_.mx;
  const std::size_t nk = idx_.size();
  for (int a = 0; a <= mt; ++a) {
    for (int b = 0; b <= mt; ++b) {
      const double pref = e.prefactor(a, b);
      for (std::size_t i = 0; i < nk; ++i) {
        const auto& kappa = idx_[i];
        const double m = mu[a * nk + i];
        const int dk = kappa[0] + kappa[1] + kappa[2];
        for (std::size_t j = 0; j < nk; ++j) {
          const auto& nu = idx_[j];
          if (dk + nu[0] + nu[1] + nu[2] > mx) break;
          lambda[b * nk + j] += pref * e.axis(a, b, 0, kappa[0], nu[0]) *
                                e.axis(a, b, 1, kappa[1], nu[1]) *
                                e.axis(a, b, 2, kappa[2], nu[2]) * m;
        }
      }
    }
  }
}

void FmmOperator::m2l_fast(const CoeffTensor& e, std::span<const double> mu,
                           std::span<double> lambda) const {
  const int mt = orders_.mt;
  const int m = orders_.mx;
  const int n1 = m + 1;
  const std::size_t nk = idx_.size();
  thread_local std::vector<double> cube, p1, p2;
  cube.resize(cube_index(m, m, m, m) + 1);
  p1.resize(quad_index(m, m, m, m, m) + 1);
  p2.resize(p1.size());
  for (int a = 0; a <= mt; ++a) {
    const double* mu_a = mu.data() + static_cast<std::size_t>(a) * nk;
    bool any = false;
    std::fill(cube.begin(), cube.end(), 0.0);
    for (std::size_t i = 0; i < nk; ++i) {
      const auto& k = idx_[i];
      cube[cube_index(m, k[0], k[1], k[2])] = mu_a[i];
      any = any || mu_a[i] != 0.0;
    }
    if (!any) continue;
    for (int b = 0; b <= mt; ++b) {
      const double* e1 = e.axis_table(a, b, 0);
      const double* e2 = e.axis_table(a, b, 1);
      const double* e3 = e.axis_table(a, b, 2);
      // p1[k1,k2,n3,c] = sum_{k3 <= c} E3[k3][n3] mu[k1,k2,k3], k1+k2+n3+c <= m
      for (int k1 = 0; k1 <= m; ++k1)
        for (int k2 = 0; k1 + k2 <= m; ++k2)
          for (int n3 = 0; k1 + k2 + n3 <= m; ++n3) {
            double acc = 0.0;
            for (int c = 0; k1 + k2 + n3 + c <= m; ++c) {
              acc += e3[c * n1 + n3] * cube[cube_index(m, k1, k2, c)];
              p1[quad_index(m, k1, k2, n3, c)] = acc;
            }
          }
      // p2[k1,n2,n3,c] = sum_{k2 <= c} E2[k2][n2] p1[k1,k2,n3,c-k2], k1+n2+n3+c <= m
      for (int k1 = 0; k1 <= m; ++k1)
        for (int n2 = 0; k1 + n2 <= m; ++n2)
          for (int n3 = 0; k1 + n2 + n3 <= m; ++n3)
            for (int c = 0; k1 + n2 + n3 + c <= m; ++c) {
              double acc = 0.0;
              for (int k2 = 0; k2 <= c; ++k2)
                acc += e2[k2 * n1 + n2] * p1[quad_index(m, k1, k2, n3, c - k2)];
              p2[quad_index(m, k1, n2, n3, c)] = acc;
            }
      const double pref = e.prefactor(a, b);
      double* out = lambda.data() + static_cast<std::size_t>(b) * nk;
      for (std::size_t j = 0; j < nk; ++j) {
        const auto& nu = idx_[j];
        const int budget = m - nu[0] - nu[1] - nu[2];
        double acc = 0.0;
        for (int k1 = 0; k1 <= budget; ++k1)
          acc += e1[k1 * n1 + nu[0]] * p2[quad_index(m, k1, nu[1], nu[2], budget - k1)];
        out[j] += pref * acc;
      }
    }
  }
}

void FmmOperator::nearfield_apply(int leaf, std::span<const double> w,
                                  std::span<double> f) const {
  const auto& z = tree_->cluster(leaf);
  const int ex = tree_->mesh().n_space();
  thread_local Eigen::VectorXd acc, ws;
  acc.setZero(static_cast<Eigen::Index>(z.n_elements()));
  for (int bi : nearfield_.by_target[leaf]) {
    const auto& block = nearfield_.blocks[bi];
    const auto& y = tree_->cluster(block.source);
    ws.resize(static_cast<Eigen::Index>(y.n_elements()));
    Eigen::Index c = 0;
    for (int jt = y.step_begin; jt < y.step_end; ++jt)
      for (int jx : y.triangles) ws[c++] = w[static_cast<std::size_t>(jt) * ex + jx];
    acc.noalias() += block.values * ws;
  }
  Eigen::Index r = 0;
  for (int kt = z.step_begin; kt < z.step_end; ++kt)
    for (int kx : z.triangles) f[static_cast<std::size_t>(kt) * ex + kx] += acc[r++];
}

void FmmOperator::apply(std::span<const double> w, std::span<double> f) const {
  const auto& tree = *tree_;
  const std::size_t n = tree.clusters().size();
  const std::size_t ts = tensor_size_;
  std::vector<double> mu(n * ts, 0.0), lam_m2l(n * ts, 0.0), lam_down(n * ts, 0.0);
  auto slot = [&](std::vector<double>& v, int id) {
    return std::span<double>(v.data() + static_cast<std::size_t>(id) * ts, ts);
  };

  for (int level = tree.depth(); level >= 0; --level) {
    for (int id : tree.level(level).clusters) {
      if (!needs_moments_[id]) continue;
      const auto& z = tree.cluster(id);
      if (z.is_leaf()) s2m(id, w, slot(mu, id));
      else
        for (int c : z.children) m2m(c, slot(mu, c), slot(mu, id));
    }
  }

  for (const auto& z : tree.clusters())
    for (int src : z.interaction) m2l(z.id, src, slot(mu, src), slot(lam_m2l, z.id));

  std::vector<double> f_far(n_dofs(), 0.0), f_near(n_dofs(), 0.0);
  std::vector<double> total(ts);
  for (int level = 0; level <= tree.depth(); ++level) {
    for (int id : tree.level(level).clusters) {
      if (!needs_locals_[id]) continue;
      const auto a = slot(lam_m2l, id);
      const auto b = slot(lam_down, id);
      for (std::size_t i = 0; i < ts; ++i) total[i] = a[i] + b[i];
      const auto& z = tree.cluster(id);
      if (z.is_leaf()) l2t(id, total, f_far);
      else
        for (int c : z.children) l2l(c, total, slot(lam_down, c));
    }
  }

  for (int leaf : tree.leaves()) nearfield_apply(leaf, w, f_near);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = f_far[i] + f_near[i];
}

std::vector<double> FmmOperator::apply(const std::vector<double>& w) const {
  if (w.size() != n_dofs()) throw std::invalid_argument("vector length does not match the mesh");
  std::vector<double> f(w.size());
  apply(std::span<const double>(w), std::span<double>(f));
  return f;
}

OpCounts FmmOperator::op_counts() const {
  const auto& tree = *tree_;
  const double na = orders_.mt + 1;
  const double nk = static_cast<double>(idx_.size());
  const double m1 = orders_.mx + 1;
  const double transfer = 2.0 * (na * na * nk + na * 3.0 * m1 * m1 * m1 * m1);
  double budget_terms = 0.0;
  const int m = orders_.mx;
  for (int k1 = 0; k1 <= m; ++k1)
    for (int k2 = 0; k1 + k2 <= m; ++k2)
      for (int n3 = 0; k1 + k2 + n3 <= m; ++n3)
        for (int c = 0; k1 + k2 + n3 + c <= m; ++c) budget_terms += 1.0 + (c + 1.0);
  for (const auto& nu : idx_.list()) budget_terms += m - nu[0] - nu[1] - nu[2] + 1.0;
  const double m2l_pair = options_.naive_m2l ? 0.0 : 2.0 * na * na * budget_terms;
  double naive_pair = 0.0;
  if (options_.naive_m2l) {
    for (const auto& kappa : idx_.list())
      for (const auto& nu : idx_.list())
        if (kappa[0] + kappa[1] + kappa[2] + nu[0] + nu[1] + nu[2] <= m) naive_pair += 1.0;
    naive_pair *= 6.0 * na * na;
  }
  OpCounts c;
  for (const auto& z : tree.clusters()) {
    const double steps = z.step_end - z.step_begin;
    const double tris = static_cast<double>(z.triangles.size());
    if (z.is_leaf() && needs_moments_[z.id]) c.s2m += 2.0 * (steps * tris * na + tris * na * nk);
    if (z.is_leaf() && needs_locals_[z.id]) c.l2t += 2.0 * (steps * tris * na + tris * na * nk);
    if (z.parent >= 0 && needs_moments_[z.id]) c.m2m += transfer;
    if (z.parent >= 0 && needs_locals_[z.parent]) c.l2l += transfer;
    c.m2l += static_cast<double>(z.interaction.size()) * (m2l_pair + naive_pair);
  }
  c.nearfield = 2.0 * static_cast<double>(nearfield_.entries());
  return c;
}

}  // namespace stfmm
