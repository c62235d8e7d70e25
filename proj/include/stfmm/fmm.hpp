#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <tuple>
#include <vector>

#include "stfmm/cluster_tree.hpp"
#include "stfmm/galerkin.hpp"
#include "stfmm/kernel.hpp"

namespace stfmm {

struct FmmOptions {
  /// Evaluate M2L by the plain quadruple loop instead of 1D transforms.
  bool naive_m2l = false;
};

/// Integrals of the basis functions over the elements of one cluster, in
/// factorized form: temporal[s * (m_t+1) + a] is the integral of L_{J,a} over
/// time-step step_begin + s, spatial[i * n_kappa + k] the integral of T_{Y,kappa}
/// over the i-th triangle of the cluster.
struct BasisIntegrals {
  int n_steps = 0;
  int n_triangles = 0;
  std::vector<double> temporal;
  std::vector<double> spatial;
};

BasisIntegrals compute_basis_integrals(const ClusterTree& tree, int cluster,
                                       const ExpansionOrders& orders);

/// Estimated floating-point operations of one matvec per phase.
struct OpCounts {
  double s2m = 0, m2m = 0, m2l = 0, l2l = 0, l2t = 0, nearfield = 0;
  double total() const { return s2m + m2m + m2l + l2l + l2t + nearfield; }
};

/// FMM approximation of V_h on a cluster tree. Moments and local
/// contributions are tensors of size (m_t+1) * |{kappa : |kappa| <= m_x}|,
/// a-major with kappa in MultiIndexSet order. Operators accumulate (+=) into
/// their output span; f and w are global vectors in 0-based DOF order.
class FmmOperator {
 public:
  FmmOperator(const ClusterTree& tree, NearfieldSet nearfield, ExpansionOrders orders,
              FmmOptions options = {});

  const ClusterTree& tree() const { return *tree_; }
  const ExpansionOrders& orders() const { return orders_; }
  const NearfieldSet& nearfield() const { return nearfield_; }
  const MultiIndexSet& indices() const { return idx_; }
  std::size_t tensor_size() const { return tensor_size_; }
  std::size_t n_dofs() const { return tree_->mesh().n_dofs(); }
  const BasisIntegrals& basis(int leaf) const { return basis_[leaf]; }

  /// True when the moments of the cluster feed some M2L.
  bool needs_moments(int cluster) const { return needs_moments_[cluster]; }
  /// True when the cluster or an ancestor has a nonempty interaction list.
  bool needs_locals(int cluster) const { return needs_locals_[cluster]; }

  void s2m(int leaf, std::span<const double> w, std::span<double> mu) const;
  void m2m(int child, std::span<const double> mu_child, std::span<double> mu_parent) const;
  void m2l(int target, int source, std::span<const double> mu, std::span<double> lambda) const;
  void l2l(int child, std::span<const double> lambda_parent, std::span<double> lambda_child) const;
  void l2t(int leaf, std::span<const double> lambda, std::span<double> f) const;
  void nearfield_apply(int leaf, std::span<const double> w, std::span<double> f) const;

  /// Coefficients for an admissible pair; cached when the pair occurs in an
  /// interaction list, computed on the fly otherwise.
  CoeffTensor coefficients(int target, int source) const;

  /// Sequential matvec f = V_h w: upward pass, M2L, downward pass and L2T,
  /// nearfield. The far and near parts are accumulated separately and added
  /// at the end.
  void apply(std::span<const double> w, std::span<double> f) const;
  std::vector<double> apply(const std::vector<double>& w) const;

  OpCounts op_counts() const;
  std::size_t cached_coefficients() const { return cache_.size(); }

 private:
  using CacheKey = std::tuple<int, int, int, int, int, int>;
  CacheKey cache_key(int target, int source) const;

  struct Transfer {
    std::vector<double> qt;                     // qt[a_c * (m_t+1) + a_p]
    std::array<std::vector<double>, 3> qx;      // qx[j][k_c * (m_x+1) + k_p]
  };

  void m2l_fast(const CoeffTensor& e, std::span<const double> mu, std::span<double> lambda) const;
  void m2l_naive(const CoeffTensor& e, std::span<const double> mu, std::span<double> lambda) const;

  const ClusterTree* tree_;
  NearfieldSet nearfield_;
  ExpansionOrders orders_;
  FmmOptions options_;
  MultiIndexSet idx_;
  std::size_t tensor_size_;
  std::vector<BasisIntegrals> basis_;
  std::vector<Transfer> transfer_;
  std::vector<char> needs_moments_;
  std::vector<char> needs_locals_;
  std::map<CacheKey, CoeffTensor> cache_;
};

}  // namespace stfmm
