#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include "stfmm/chebyshev.hpp"
#include "stfmm/geometry.hpp"

namespace stfmm {

struct TreeParams {
  int n_max = 80;
  double c_st = 0.9;
  int n_tr = 5;
  double alpha = 1.0;
  /// Stop refining a box holding an element longer (in time) than its
  /// temporal half-size or wider (in space) than its spatial half-size, both
  /// scaled by this factor. Non-positive disables the rule.
  double oversize = 1.0;
  /// Refine in time until every interval lies inside one slice.
  int n_slices = 1;
  int max_depth = 32;
};

enum class Refinement { none, temporal, spacetime };

struct STCluster {
  int id = -1;
  int level = 0;
  int parent = -1;
  std::vector<int> children;
  Refinement child_kind = Refinement::none;

  /// Padded box; corner/half of the unpadded box are kept separately.
  Box4 box;
  Vec3 corner_unpadded;
  double half_unpadded = 0.0;

  std::array<int, 3> grid{};
  int temporal = -1;  // id of the TemporalCluster
  int t_index = 0;    // in-level index of the time interval

  /// Owned elements form the tensor product of a time-step range and a set of
  /// triangles (sorted ascending).
  int step_begin = 0;
  int step_end = 0;
  std::vector<int> triangles;

  std::vector<int> nearfield;
  std::vector<int> interaction;

  bool is_leaf() const { return children.empty(); }
  std::size_t n_elements() const {
    return static_cast<std::size_t>(step_end - step_begin) * triangles.size();
  }
};

struct TemporalCluster {
  int id = -1;
  int level = 0;
  int index = 0;
  int parent = -1;
  int left = -1;
  int right = -1;
  int step_begin = 0;
  int step_end = 0;
  Interval interval;
  std::vector<int> st_clusters;
  std::vector<int> nearfield;
  std::vector<int> interaction;

  bool is_leaf() const { return left < 0 && right < 0; }
};

struct LevelInfo {
  int lx = 0;                 // number of spatial refinements above this level
  double half_unpadded = 0.0;
  double padding = 0.0;
  Refinement child_kind = Refinement::none;
  bool uniform_time = true;   // all intervals of the level have equal length
  std::vector<int> clusters;  // ST cluster ids, ascending
  std::vector<int> temporal;  // temporal cluster ids, ascending index
};

/// Splits the time-steps [step_begin, step_end) at the time-step closest to
/// the interval center (earlier on ties). Returns the first step of the right
/// part. Throws for a single-step range.
int split_interval(const std::vector<double>& time_points, int step_begin, int step_end);

/// Grid cells within Chebyshev distance n_tr of cell, clipped to the grid of
/// 2^lx cells per axis.
std::vector<std::array<int, 3>> interaction_area(const std::array<int, 3>& cell, int lx, int n_tr);

class ClusterTree {
 public:
  ClusterTree(const SpaceTimeMesh& mesh, TreeParams params);

  const SpaceTimeMesh& mesh() const { return *mesh_; }
  const TreeParams& params() const { return params_; }

  const std::vector<STCluster>& clusters() const { return clusters_; }
  const STCluster& cluster(int id) const { return clusters_[id]; }
  const std::vector<TemporalCluster>& temporal() const { return temporal_; }
  const TemporalCluster& temporal(int id) const { return temporal_[id]; }
  const LevelInfo& level(int l) const { return levels_[l]; }
  int depth() const { return static_cast<int>(levels_.size()) - 1; }
  std::vector<int> leaves() const;

  /// Temporal cluster id at (level, index); -1 when absent.
  int temporal_at(int level, int index) const;

  /// Global 0-based DOFs of a cluster in (k_t, k_x) order.
  std::vector<std::size_t> dofs(int cluster) const;

  /// Text dump, one line per cluster: level k_interval gx,gy,gz n_elements is_leaf.
  void dump(std::ostream& out) const;

 private:
  void build();
  void pad();
  void build_temporal_tree();
  void build_lists();

  const SpaceTimeMesh* mesh_;
  TreeParams params_;
  std::vector<STCluster> clusters_;
  std::vector<TemporalCluster> temporal_;
  std::vector<LevelInfo> levels_;
};

/// Temporal nearfield and interaction lists of a temporal cluster, as ids.
const std::vector<int>& temporal_nearfield(const ClusterTree& tree, int temporal_id);
const std::vector<int>& temporal_interaction(const ClusterTree& tree, int temporal_id);

/// Result of checking that the block partition covers every causal DOF pair.
struct CoverageReport {
  std::size_t causal_pairs = 0;
  std::size_t uncovered = 0;   // causal pairs covered by no block
  std::size_t duplicated = 0;  // pairs covered more than once
  std::size_t anticausal_admissible = 0;  // anti-causal pairs inside admissible blocks
  bool exact() const { return uncovered == 0 && duplicated == 0 && anticausal_admissible == 0; }
};

/// Exhaustive audit over all (target DOF, source DOF) pairs.
CoverageReport audit_coverage(const ClusterTree& tree);

}  // namespace stfmm
