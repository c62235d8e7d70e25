#include "stfmm/chebyshev.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace stfmm {

std::vector<double> chebyshev_nodes(int m) {
  if (m < 0) throw std::invalid_argument("chebyshev_nodes: negative order");
  std::vector<double> xi(static_cast<std::size_t>(m) + 1);
  for (int k = 0; k <= m; ++k) {
    xi[k] = std::cos(std::numbers::pi * (2 * k + 1) / (2.0 * m + 2.0));
  }
  // cos(pi/2) is not exactly representable; the middle node of an odd count is 0.
  if (m % 2 == 0) xi[m / 2] = 0.0;
  return xi;
}

void chebyshev_values(int m, double x, std::span<double> out) {
  out[0] = 1.0;
  if (m == 0) return;
  out[1] = x;
  for (int k = 2; k <= m; ++k) out[k] = 2.0 * x * out[k - 1] - out[k - 2];
}

double chebyshev_eval_transformed(const Interval& interval, int k, double x) {
  if (k < 0) throw std::invalid_argument("negative Chebyshev degree");
  const double s = interval.to_ref(x);
  double t0 = 1.0;
  if (k == 0) return t0;
  double t1 = s;
  for (int j = 2; j <= k; ++j) {
    const double t2 = 2.0 * s * t1 - t0;
    t0 = t1;
    t1 = t2;
  }
  return t1;
}

LagrangeBasis::LagrangeBasis(int m) : m_(m), nodes_(chebyshev_nodes(m)), weights_(m + 1) {
  // Barycentric weights of first-kind Chebyshev points (common factors dropped).
  for (int k = 0; k <= m; ++k) {
    const double s = std::sin(std::numbers::pi * (2 * k + 1) / (2.0 * m + 2.0));
    weights_[k] = (k % 2 == 0 ? 1.0 : -1.0) * s;
  }
}

void LagrangeBasis::values(const Interval& interval, double t, std::span<double> out) const {
  const double s = interval.to_ref(t);
  double denom = 0.0;
  for (int k = 0; k <= m_; ++k) {
    const double diff = s - nodes_[k];
    if (diff == 0.0 || t == interval.from_ref(nodes_[k])) {
      for (int j = 0; j <= m_; ++j) out[j] = j == k ? 1.0 : 0.0;
      return;
    }
    out[k] = weights_[k] / diff;
    denom += out[k];
  }
  for (int k = 0; k <= m_; ++k) out[k] /= denom;
}

double LagrangeBasis::value(const Interval& interval, int b, double t) const {
  std::vector<double> v(static_cast<std::size_t>(m_) + 1);
  values(interval, t, v);
  return v[b];
}

double lagrange_eval(const Interval& interval, int b, double t, int m) {
  if (b < 0 || b > m) throw std::out_of_range("lagrange_eval: index out of range");
  return LagrangeBasis(m).value(interval, b, t);
}

MultiIndexSet::MultiIndexSet(int m) : m_(m) {
  if (m < 0) throw std::invalid_argument("MultiIndexSet: negative order");
  const auto n = static_cast<std::size_t>(m + 1);
  table_.assign(n * n * n, -1);
  for (int deg = 0; deg <= m; ++deg) {
    for (int k1 = 0; k1 <= deg; ++k1) {
      for (int k2 = 0; k1 + k2 <= deg; ++k2) {
        const int k3 = deg - k1 - k2;
        table_[(static_cast<std::size_t>(k1) * n + k2) * n + k3] = static_cast<int>(list_.size());
        list_.push_back({k1, k2, k3});
      }
    }
  }
}

}  // namespace stfmm
