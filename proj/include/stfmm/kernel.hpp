#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "stfmm/chebyshev.hpp"
#include "stfmm/geometry.hpp"

namespace stfmm {

/// G_alpha(diff, dt) = (4 pi alpha dt)^{-3/2} exp(-|diff|^2 / (4 alpha dt)) for dt > 0,
/// exactly 0 for dt < 0. Throws DomainError for dt == 0.
double heat_kernel(Vec3 diff, double dt, double alpha);

struct ExpansionOrders {
  int mt = 6;
  int mx = 6;
  double alpha = 1.0;
};

/// True iff hx^2 / (4 alpha ht) <= c_st.
bool check_box_relation(double hx, double ht, double alpha, double c_st);

/// One-dimensional expansion coefficient E_{k,l}(r, d): k is the source
/// Chebyshev index, l the target index.
double expansion_coeff_1d(int k, int l, double r, double d, int m);

/// All E_{k,l}(r, d) for k, l = 0..m, row-major in k.
std::vector<double> expansion_coeff_1d_table(double r, double d, int m);

/// Coefficients E[a, kappa, b, nu] for one target/source box pair, stored in
/// factorized form: a temporal prefactor per (a, b) times three 1D tables.
class CoeffTensor {
 public:
  CoeffTensor() = default;
  CoeffTensor(int mt, int mx);

  int mt() const { return mt_; }
  int mx() const { return mx_; }

  double prefactor(int a, int b) const { return pref_[pair(a, b)]; }
  /// E_{k,l}(r_j, d_ab) for axis j.
  double axis(int a, int b, int j, int k, int l) const {
    return e1d_[((pair(a, b) * 3 + j) * (mx_ + 1) + k) * (mx_ + 1) + l];
  }
  const double* axis_table(int a, int b, int j) const {
    return e1d_.data() + (pair(a, b) * 3 + j) * (mx_ + 1) * (mx_ + 1);
  }
  double at(int a, const std::array<int, 3>& kappa, int b, const std::array<int, 3>& nu) const {
    return prefactor(a, b) * axis(a, b, 0, kappa[0], nu[0]) * axis(a, b, 1, kappa[1], nu[1]) *
           axis(a, b, 2, kappa[2], nu[2]);
  }

  double& prefactor_ref(int a, int b) { return pref_[pair(a, b)]; }
  double* axis_table_mut(int a, int b, int j) {
    return e1d_.data() + (pair(a, b) * 3 + j) * (mx_ + 1) * (mx_ + 1);
  }

 private:
  std::size_t pair(int a, int b) const { return static_cast<std::size_t>(a) * (mt_ + 1) + b; }

  int mt_ = 0;
  int mx_ = 0;
  std::vector<double> pref_;
  std::vector<double> e1d_;
};

/// Expansion coefficients for target box z_tar and source box z_src.
/// Requires equal spatial half-sizes and a source interval strictly before the
/// target interval; throws AdmissibilityError otherwise.
CoeffTensor expansion_coeffs(const Box4& z_tar, const Box4& z_src, const ExpansionOrders& orders);

/// Separable approximation of G_alpha(x - y, t - tau) for (x, t) in z_tar and
/// (y, tau) in z_src.
double kernel_approx(const Box4& z_tar, const Box4& z_src, Vec3 x, double t, Vec3 y, double tau,
                     const ExpansionOrders& orders);

}  // namespace stfmm
