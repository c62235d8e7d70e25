#include "stfmm/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace stfmm {

Rule1D gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  Rule1D rule;
  rule.x.resize(n);
  rule.w.resize(n);
  // Newton iteration on P_n starting from the Chebyshev-like guess; nodes on
  // [-1, 1] are mapped to [0, 1] at the end.
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0;
    double p1 = z;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (z * p1 - p0) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.x[i] = 0.5 * (1.0 - z);
    rule.x[n - 1 - i] = 0.5 * (1.0 + z);
    rule.w[i] = 0.5 * w;
    rule.w[n - 1 - i] = 0.5 * w;
  }
  if (n % 2 == 1) rule.x[n / 2] = 0.5;
  return rule;
}

TriangleRule triangle_rule(int n) {
  const Rule1D g = gauss_legendre(n);
  TriangleRule t;
  t.pts.reserve(n * n);
  t.w.reserve(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = g.x[i];
      t.pts.push_back({u, u * g.x[j]});
      t.w.push_back(g.w[i] * g.w[j] * u);
    }
  }
  return t;
}

const char* adjacency_name(Adjacency a) {
  switch (a) {
    case Adjacency::disjoint: return "disjoint";
    case Adjacency::vertex: return "vertex";
    case Adjacency::edge: return "edge";
    case Adjacency::coincident: return "coincident";
  }
  return "?";
}

namespace {

template <class F>
void for_each_4d(const Rule1D& g, F&& f) {
  const auto n = g.x.size();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t d = 0; d < n; ++d)
          f(g.x[a], g.x[b], g.x[c], g.x[d], g.w[a] * g.w[b] * g.w[c] * g.w[d]);
}

}  // namespace

PairRule coincident_rule(int n) {
  const Rule1D g = gauss_legendre(n);
  PairRule r;
  for_each_4d(g, [&](double xi, double e1, double e2, double e3, double w) {
    const double wt = w * xi * xi * xi * e1 * e1 * e2;
    const double a = xi;
    auto add = [&](double x1, double x2, double y1, double y2) {
      r.pts.push_back({a * x1, a * x2, a * y1, a * y2});
      r.w.push_back(wt);
    };
    add(1.0, 1.0 - e1 + e1 * e2, 1.0 - e1 * e2 * e3, 1.0 - e1);
    add(1.0 - e1 * e2 * e3, 1.0 - e1, 1.0, 1.0 - e1 + e1 * e2);
    add(1.0, e1 * (1.0 - e2 + e2 * e3), 1.0 - e1 * e2, e1 * (1.0 - e2));
    add(1.0 - e1 * e2, e1 * (1.0 - e2), 1.0, e1 * (1.0 - e2 + e2 * e3));
    add(1.0 - e1 * e2 * e3, e1 * (1.0 - e2 * e3), 1.0, e1 * (1.0 - e2));
    add(1.0, e1 * (1.0 - e2), 1.0 - e1 * e2 * e3, e1 * (1.0 - e2 * e3));
  });
  return r;
}

PairRule edge_rule(int n) {
  const Rule1D g = gauss_legendre(n);
  PairRule r;
  for_each_4d(g, [&](double xi, double e1, double e2, double e3, double w) {
    const double w1 = w * xi * xi * xi * e1 * e1;
    const double w2 = w1 * e2;
    const double a = xi;
    auto add = [&](double wt, double x1, double x2, double y1, double y2) {
      r.pts.push_back({a * x1, a * x2, a * y1, a * y2});
      r.w.push_back(wt);
    };
    add(w1, 1.0, e1 * e3, 1.0 - e1 * e2, e1 * (1.0 - e2));
    add(w2, 1.0, e1, 1.0 - e1 * e2 * e3, e1 * e2 * (1.0 - e3));
    add(w2, 1.0 - e1 * e2, e1 * (1.0 - e2), 1.0, e1 * e2 * e3);
    add(w2, 1.0 - e1 * e2 * e3, e1 * e2 * (1.0 - e3), 1.0, e1);
    add(w2, 1.0 - e1 * e2 * e3, e1 * (1.0 - e2 * e3), 1.0, e1 * e2);
  });
  return r;
}

PairRule vertex_rule(int n) {
  const Rule1D g = gauss_legendre(n);
  PairRule r;
  for_each_4d(g, [&](double xi, double e1, double e2, double e3, double w) {
    const double wt = w * xi * xi * xi * e2;
    r.pts.push_back({xi, xi * e1, xi * e2, xi * e2 * e3});
    r.w.push_back(wt);
    r.pts.push_back({xi * e2, xi * e2 * e3, xi, xi * e1});
    r.w.push_back(wt);
  });
  return r;
}

PairRule disjoint_rule(int n) {
  const TriangleRule t = triangle_rule(n);
  PairRule r;
  r.pts.reserve(t.w.size() * t.w.size());
  for (std::size_t i = 0; i < t.w.size(); ++i) {
    for (std::size_t j = 0; j < t.w.size(); ++j) {
      r.pts.push_back({t.pts[i][0], t.pts[i][1], t.pts[j][0], t.pts[j][1]});
      r.w.push_back(t.w[i] * t.w[j]);
    }
  }
  return r;
}

PairRule pair_rule(Adjacency kind, int n) {
  switch (kind) {
    case Adjacency::coincident: return coincident_rule(n);
    case Adjacency::edge: return edge_rule(n);
    case Adjacency::vertex: return vertex_rule(n);
    case Adjacency::disjoint: return disjoint_rule(n);
  }
  throw std::invalid_argument("unknown adjacency");
}

}  // namespace stfmm
