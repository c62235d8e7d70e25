#include "stfmm/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "stfmm/errors.hpp"

namespace stfmm {

double heat_kernel(Vec3 diff, double dt, double alpha) {
  if (dt == 0.0) throw DomainError("heat_kernel: zero time difference");
  if (dt < 0.0) return 0.0;
  const double s = 4.0 * alpha * dt;
  return std::exp(-dot(diff, diff) / s) / (std::numbers::pi * s * std::sqrt(std::numbers::pi * s));
}

bool check_box_relation(double hx, double ht, double alpha, double c_st) {
  return hx * hx / (4.0 * alpha * ht) <= c_st;
}

std::vector<double> expansion_coeff_1d_table(double r, double d, int m) {
  if (!(d > 0.0)) throw DomainError("expansion coefficient requires d > 0");
  const auto n = static_cast<std::size_t>(m) + 1;
  const auto xi = chebyshev_nodes(m);
  // tk[i * n + k] = T_k(xi_i)
  std::vector<double> tk(n * n);
  for (std::size_t i = 0; i < n; ++i) chebyshev_values(m, xi[i], {tk.data() + i * n, n});
  std::vector<double> g(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double u = r + xi[i] - xi[j];
      g[i * n + j] = std::exp(-u * u / d);
    }
  }
  // gt[i * n + k] = sum_j g(i, j) T_k(xi_j)
  std::vector<double> gt(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) gt[i * n + k] += g[i * n + j] * tk[j * n + k];
  std::vector<double> out(n * n, 0.0);
  const double scale = 1.0 / static_cast<double>(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = 0; l < n; ++l) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += tk[i * n + l] * gt[i * n + k];
      const double lk = k == 0 ? 1.0 : 2.0;
      const double ll = l == 0 ? 1.0 : 2.0;
      out[k * n + l] = lk * ll * scale * acc;
    }
  }
  return out;
}

double expansion_coeff_1d(int k, int l, double r, double d, int m) {
  if (!(d > 0.0)) throw DomainError("expansion coefficient requires d > 0");
  if (k < 0 || l < 0 || k > m || l > m) throw std::out_of_range("expansion index out of range");
  const auto xi = chebyshev_nodes(m);
  std::vector<double> t(static_cast<std::size_t>(m) + 1);
  double acc = 0.0;
  for (int n = 0; n <= m; ++n) {
    chebyshev_values(m, xi[n], t);
    const double tl = t[l];
    for (int j = 0; j <= m; ++j) {
      const double u = r + xi[n] - xi[j];
      acc += std::exp(-u * u / d) * tl * std::cos(k * std::acos(xi[j]));
    }
  }
  const double lk = k == 0 ? 1.0 : 2.0;
  const double ll = l == 0 ? 1.0 : 2.0;
  return lk * ll / ((m + 1.0) * (m + 1.0)) * acc;
}

CoeffTensor::CoeffTensor(int mt, int mx)
    : mt_(mt),
      mx_(mx),
      pref_(static_cast<std::size_t>(mt + 1) * (mt + 1), 0.0),
      e1d_(static_cast<std::size_t>(mt + 1) * (mt + 1) * 3 * (mx + 1) * (mx + 1), 0.0) {}

CoeffTensor expansion_coeffs(const Box4& z_tar, const Box4& z_src, const ExpansionOrders& orders) {
  const double hx = z_tar.half_x;
  if (std::abs(z_src.half_x - hx) > 1e-12 * hx) {
    throw AdmissibilityError("expansion requires equal spatial half-sizes");
  }
  if (!(z_tar.time.lo - z_src.time.hi > 0.0)) {
    throw AdmissibilityError("source interval (" + std::to_string(z_src.time.lo) + ", " +
                             std::to_string(z_src.time.hi) +
                             "] does not strictly precede target interval (" +
                             std::to_string(z_tar.time.lo) + ", " + std::to_string(z_tar.time.hi) +
                             "]");
  }
  const int mt = orders.mt;
  const int mx = orders.mx;
  const LagrangeBasis basis(mt);
  std::array<double, 3> r{};
  for (int j = 0; j < 3; ++j) r[j] = (z_tar.corner[j] - z_src.corner[j]) / hx;

  CoeffTensor e(mt, mx);
  for (int a = 0; a <= mt; ++a) {
    for (int b = 0; b <= mt; ++b) {
      const double lag = basis.node(z_tar.time, b) - basis.node(z_src.time, a);
      const double s = 4.0 * std::numbers::pi * orders.alpha * lag;
      e.prefactor_ref(a, b) = 1.0 / (s * std::sqrt(s));
      const double d = 4.0 * orders.alpha * lag / (hx * hx);
      for (int j = 0; j < 3; ++j) {
        const auto table = expansion_coeff_1d_table(r[j], d, mx);
        std::copy(table.begin(), table.end(), e.axis_table_mut(a, b, j));
      }
    }
  }
  return e;
}

double kernel_approx(const Box4& z_tar, const Box4& z_src, Vec3 x, double t, Vec3 y, double tau,
                     const ExpansionOrders& orders) {
  const CoeffTensor e = expansion_coeffs(z_tar, z_src, orders);
  const int mt = orders.mt;
  const int mx = orders.mx;
  const LagrangeBasis basis(mt);
  std::vector<double> lt(mt + 1), ltau(mt + 1);
  basis.values(z_tar.time, t, lt);
  basis.values(z_src.time, tau, ltau);
  std::array<std::vector<double>, 3> tx, ty;
  for (int j = 0; j < 3; ++j) {
    tx[j].resize(mx + 1);
    ty[j].resize(mx + 1);
    chebyshev_values(mx, z_tar.axis(j).to_ref(x[j]), tx[j]);
    chebyshev_values(mx, z_src.axis(j).to_ref(y[j]), ty[j]);
  }
  const MultiIndexSet idx(mx);
  double sum = 0.0;
  for (int a = 0; a <= mt; ++a) {
    for (int b = 0; b <= mt; ++b) {
      double spatial = 0.0;
      for (const auto& kappa : idx.list()) {
        const double yk = ty[0][kappa[0]] * ty[1][kappa[1]] * ty[2][kappa[2]];
        for (const auto& nu : idx.list()) {
          if (kappa[0] + kappa[1] + kappa[2] + nu[0] + nu[1] + nu[2] > mx) break;
          spatial += e.axis(a, b, 0, kappa[0], nu[0]) * e.axis(a, b, 1, kappa[1], nu[1]) *
                     e.axis(a, b, 2, kappa[2], nu[2]) * yk * tx[0][nu[0]] * tx[1][nu[1]] *
                     tx[2][nu[2]];
        }
      }
      sum += e.prefactor(a, b) * spatial * lt[b] * ltau[a];
    }
  }
  return sum;
}

}  // namespace stfmm
