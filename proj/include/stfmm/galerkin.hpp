#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "stfmm/chebyshev.hpp"
#include "stfmm/cluster_tree.hpp"
#include "stfmm/geometry.hpp"
#include "stfmm/quadrature.hpp"

namespace stfmm {

/// Gauss orders per adjacency class of a triangle pair.
struct QuadratureSpec {
  int coincident = 8;
  int edge = 8;
  int vertex = 6;
  int disjoint = 4;

  int order(Adjacency a) const;
  bool operator==(const QuadratureSpec&) const = default;
};

/// Integral of G_alpha(r, t - tau) over tau in source and t in target.
/// Returns 0 when the source starts at or after the end of the target and
/// +inf for r = 0 on identical intervals. Throws DomainError for r < 0.
double time_integrated_kernel(double r, const Interval& target, const Interval& source,
                              double alpha);

/// Time-integrated kernel for uniform steps h as a function of the lag
/// d = k_t - j_t >= 0. Every lag is formed from the same per-step
/// antiderivative values, so the result for lag d does not depend on how many
/// lags are requested.
class LagKernel {
 public:
  LagKernel(double h, double alpha);

  /// out[d] for d = 0..out.size()-1.
  void eval(double r, std::span<double> out) const;
  double eval(double r, int lag) const;

 private:
  double h_;
  double alpha_;
};

/// Galerkin single-layer entries of a tensor mesh.
class SingleLayerIntegrator {
 public:
  SingleLayerIntegrator(const SpaceTimeMesh& mesh, double alpha, QuadratureSpec spec = {});

  const SpaceTimeMesh& mesh() const { return *mesh_; }
  double alpha() const { return alpha_; }
  const QuadratureSpec& spec() const { return spec_; }

  Adjacency adjacency(int kx, int jx) const;

  /// out[d] = entry for target triangle kx, source triangle jx and lag d.
  void lag_integrals(int kx, int jx, std::span<double> out) const;

  /// Entry for 0-based target element (kt, kx) and source element (jt, jx).
  double entry(int kt, int kx, int jt, int jx) const;

 private:
  struct Oriented {
    std::array<Vec3, 3> x;
    std::array<Vec3, 3> y;
    Adjacency kind;
  };
  Oriented orient(int kx, int jx) const;

  const SpaceTimeMesh* mesh_;
  double alpha_;
  QuadratureSpec spec_;
  LagKernel lag_kernel_;
  std::array<PairRule, 4> rules_;
};

/// Full matrix in 0-based DOF order kt * E_x + kx. Throws when the DOF count
/// exceeds cap.
Eigen::MatrixXd assemble_dense(const SingleLayerIntegrator& integrator, std::size_t cap = 16384,
                               int threads = 1);

/// Dense block V_h restricted to a target leaf and one of its nearfield
/// sources. Rows and columns follow ClusterTree::dofs of the two clusters.
struct NearfieldBlock {
  int target = -1;
  int source = -1;
  Eigen::MatrixXd values;
};

struct NearfieldSet {
  std::vector<NearfieldBlock> blocks;
  /// Block indices per target cluster id, in nearfield-list order.
  std::vector<std::vector<int>> by_target;

  std::size_t entries() const;
};

/// Stored entries needed for all nearfield blocks of the tree.
std::size_t nearfield_entry_count(const ClusterTree& tree);

/// One block per (leaf target, nearfield source). Throws std::length_error
/// before allocating when the entry count exceeds cap.
NearfieldSet assemble_nearfield(const ClusterTree& tree, const SingleLayerIntegrator& integrator,
                                std::size_t cap = std::size_t{1} << 27, int threads = 1);

/// One matrix row per line, entries separated by spaces.
void export_dense(std::ostream& out, const Eigen::MatrixXd& m);

}  // namespace stfmm
