#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "stfmm/geometry.hpp"

namespace stfmm {

/// Half-open interval (lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double half() const { return 0.5 * (hi - lo); }
  double center() const { return 0.5 * (lo + hi); }
  double length() const { return hi - lo; }
  bool contains(double t) const { return t > lo && t <= hi; }
  /// Affine map [-1, 1] -> [lo, hi].
  double from_ref(double s) const { return center() + half() * s; }
  double to_ref(double t) const { return (t - center()) / half(); }
};

/// Spatial cube (corner, corner + 2 half_x] times a time interval.
struct Box4 {
  Vec3 corner;
  double half_x = 0.5;
  Interval time;

  Vec3 center() const { return corner + Vec3{half_x, half_x, half_x}; }
  Interval axis(int j) const { return {corner[j], corner[j] + 2.0 * half_x}; }
};

/// Roots of T_{m+1}: xi_k = cos(pi (2k+1) / (2m+2)), k = 0..m (descending).
std::vector<double> chebyshev_nodes(int m);

/// T_0(x) .. T_m(x) by the three-term recurrence.
void chebyshev_values(int m, double x, std::span<double> out);

/// T_k(phi^{-1}(x)) for the affine map phi from [-1, 1] onto the interval.
double chebyshev_eval_transformed(const Interval& interval, int k, double x);

/// Lagrange basis on the m+1 transformed Chebyshev nodes of an interval.
/// Evaluated in barycentric form; exact Kronecker values at the nodes.
class LagrangeBasis {
 public:
  explicit LagrangeBasis(int m);

  int degree() const { return m_; }
  const std::vector<double>& nodes() const { return nodes_; }

  /// L_{I,0}(t) .. L_{I,m}(t).
  void values(const Interval& interval, double t, std::span<double> out) const;
  double value(const Interval& interval, int b, double t) const;
  /// Node b of the interval: phi_I(xi_b).
  double node(const Interval& interval, int b) const { return interval.from_ref(nodes_[b]); }

 private:
  int m_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

double lagrange_eval(const Interval& interval, int b, double t, int m);

/// Multi-indices kappa in N_0^3 with |kappa| <= m, ordered by total degree and
/// lexicographically (kappa_1, kappa_2, kappa_3) within a degree.
class MultiIndexSet {
 public:
  explicit MultiIndexSet(int m);

  int order() const { return m_; }
  std::size_t size() const { return list_.size(); }
  const std::array<int, 3>& operator[](std::size_t i) const { return list_[i]; }
  const std::vector<std::array<int, 3>>& list() const { return list_; }
  /// Position of (k1, k2, k3); -1 when |k| > m.
  int position(int k1, int k2, int k3) const {
    return table_[(static_cast<std::size_t>(k1) * (m_ + 1) + k2) * (m_ + 1) + k3];
  }

 private:
  int m_;
  std::vector<std::array<int, 3>> list_;
  std::vector<int> table_;
};

inline std::size_t multi_index_count(int m) {
  return static_cast<std::size_t>(m + 1) * (m + 2) * (m + 3) / 6;
}

}  // namespace stfmm
