#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "stfmm/cluster_tree.hpp"
#include "stfmm/fmm.hpp"
#include "stfmm/galerkin.hpp"
#include "stfmm/geometry.hpp"

namespace stfmm::testing {

/// Cube with 48 triangles times 16 steps; nmax 40 without the oversize rule
/// gives temporal and space-time levels with nonempty interaction lists.
struct SmallProblem {
  SpaceTimeMesh mesh;
  ClusterTree tree;
  SingleLayerIntegrator integrator;
  FmmOperator op;

  explicit SmallProblem(int mt = 6, int mx = 6, int n_tr = 5, bool naive = false)
      : mesh(build_tensor_mesh(generate_cube_surface(2), 1.0, 16)),
        tree(mesh, params(n_tr)),
        integrator(mesh, 1.0),
        op(tree, assemble_nearfield(tree, integrator), {mt, mx, 1.0}, {naive}) {}

  static TreeParams params(int n_tr) {
    TreeParams p;
    p.n_max = 40;
    p.oversize = 0.0;
    p.n_tr = n_tr;
    return p;
  }
};

inline std::vector<double> random_vector(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double relative_error(std::span<const double> a, std::span<const double> ref) {
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) num += (a[i] - ref[i]) * (a[i] - ref[i]);
  return std::sqrt(num) / norm(ref);
}

inline std::vector<double> dense_apply(const Eigen::MatrixXd& m, const std::vector<double>& w) {
  Eigen::VectorXd f = m * Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
  return {f.data(), f.data() + f.size()};
}

}  // namespace stfmm::testing
