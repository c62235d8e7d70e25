#pragma once

#include <array>
#include <vector>

namespace stfmm {

/// Gauss-Legendre rule on [0, 1].
struct Rule1D {
  std::vector<double> x;
  std::vector<double> w;
};

Rule1D gauss_legendre(int n);

/// Rule on the reference triangle {0 <= x2 <= x1 <= 1} (area 1/2), obtained by
/// collapsing an n x n Gauss rule; exact for polynomials of total degree 2n - 2.
struct TriangleRule {
  std::vector<std::array<double, 2>> pts;
  std::vector<double> w;
};

TriangleRule triangle_rule(int n);

enum class Adjacency { disjoint = 0, vertex = 1, edge = 2, coincident = 3 };

const char* adjacency_name(Adjacency a);

/// Rule for integrals over T x T with T the reference triangle. Points are
/// (x1, x2, y1, y2). The singular rules assume the shared vertex is the image
/// of the origin and the shared edge the image of {x2 = 0} in both triangles.
struct PairRule {
  std::vector<std::array<double, 4>> pts;
  std::vector<double> w;
};

/// Sauter-Schwab regularizing transforms (n Gauss points per direction in
/// [0,1]^4) and a plain tensor rule for separated triangles.
PairRule coincident_rule(int n);
PairRule edge_rule(int n);
PairRule vertex_rule(int n);
PairRule disjoint_rule(int n);

PairRule pair_rule(Adjacency kind, int n);

}  // namespace stfmm
