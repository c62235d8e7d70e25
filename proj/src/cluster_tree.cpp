#include "stfmm/cluster_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

#include "stfmm/kernel.hpp"

namespace stfmm {

int split_interval(const std::vector<double>& time_points, int step_begin, int step_end) {
  if (step_end - step_begin < 2) throw std::invalid_argument("cannot split a single time-step");
  const double lo = time_points[step_begin];
  const double hi = time_points[step_end];
  const double center = 0.5 * (lo + hi);
  const double tol = 1e-12 * (hi - lo);
  int best = step_begin + 1;
  double best_dist = std::abs(time_points[best] - center);
  for (int k = step_begin + 2; k < step_end; ++k) {
    const double d = std::abs(time_points[k] - center);
    if (d < best_dist - tol) {
      best = k;
      best_dist = d;
    }
  }
  return best;
}

std::vector<std::array<int, 3>> interaction_area(const std::array<int, 3>& cell, int lx,
                                                 int n_tr) {
  const int n = 1 << lx;
  std::array<int, 3> lo{}, hi{};
  for (int j = 0; j < 3; ++j) {
    lo[j] = std::max(0, cell[j] - n_tr);
    hi[j] = std::min(n - 1, cell[j] + n_tr);
  }
  std::vector<std::array<int, 3>> out;
  for (int a = lo[0]; a <= hi[0]; ++a)
    for (int b = lo[1]; b <= hi[1]; ++b)
      for (int c = lo[2]; c <= hi[2]; ++c) out.push_back({a, b, c});
  return out;
}

namespace {

int grid_distance(const std::array<int, 3>& a, const std::array<int, 3>& b) {
  return std::max({std::abs(a[0] - b[0]), std::abs(a[1] - b[1]), std::abs(a[2] - b[2])});
}

// Split point for a range spanning several slices: the interior slice boundary
// closest to the center, earlier on ties.
int split_at_slice_boundary(const std::vector<double>& time_points, const TimeSlicePartition& p,
                            int step_begin, int step_end) {
  const double center = 0.5 * (time_points[step_begin] + time_points[step_end]);
  const double tol = 1e-12 * (time_points[step_end] - time_points[step_begin]);
  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int s = 1; s < p.n_slices(); ++s) {
    const int k = p.begin(s);
    if (k <= step_begin || k >= step_end) continue;
    const double d = std::abs(time_points[k] - center);
    if (d < best_dist - tol) {
      best = k;
      best_dist = d;
    }
  }
  return best;
}

}  // namespace

ClusterTree::ClusterTree(const SpaceTimeMesh& mesh, TreeParams params)
    : mesh_(&mesh), params_(params) {
  if (params_.n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  if (!(params_.c_st > 0.0)) throw std::invalid_argument("c_st must be positive");
  if (params_.n_tr < 0) throw std::invalid_argument("n_tr must be >= 0");
  if (!(params_.alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  build();
  pad();
  build_temporal_tree();
  build_lists();
}

void ClusterTree::build() {
  const auto& space = mesh_->space();
  const int ex = mesh_->n_space();
  const auto& tp = mesh_->time_points();
  const TimeSlicePartition slices = partition_time_slices(mesh_->n_timesteps(), params_.n_slices);

  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi = -1.0 * lo;
  double max_diam = 0.0;
  for (int k = 0; k < ex; ++k) {
    const Vec3 c = space.centroid(k);
    for (int j = 0; j < 3; ++j) {
      lo[j] = std::min(lo[j], c[j]);
      hi[j] = std::max(hi[j], c[j]);
    }
    max_diam = std::max(max_diam, space.diameter(k));
  }
  double half = 0.0;
  for (int j = 0; j < 3; ++j) half = std::max(half, 0.5 * (hi[j] - lo[j]));
  const bool degenerate = half == 0.0;
  if (degenerate) half = std::max(max_diam, 1.0);
  // Enlarge slightly so that no centroid sits on the excluded lower face.
  half = half * (1.0 + 1e-9) + 1e-300;
  const Vec3 center = 0.5 * (lo + hi);

  STCluster root;
  root.id = 0;
  root.level = 0;
  root.corner_unpadded = center - Vec3{half, half, half};
  root.half_unpadded = half;
  root.step_begin = 0;
  root.step_end = mesh_->n_timesteps();
  root.triangles.resize(ex);
  for (int k = 0; k < ex; ++k) root.triangles[k] = k;
  clusters_.push_back(root);

  LevelInfo l0;
  l0.lx = 0;
  l0.half_unpadded = half;
  l0.clusters = {0};
  levels_.push_back(l0);

  const double h = mesh_->timestep();
  for (int level = 0;; ++level) {
    LevelInfo& info = levels_[level];
    const double ht_next = std::ldexp(0.5 * mesh_->t_end(), -level - 1);
    const Refinement kind =
        check_box_relation(info.half_unpadded, ht_next, params_.alpha, params_.c_st)
            ? Refinement::temporal
            : Refinement::spacetime;
    std::vector<STCluster> next;
    for (int id : info.clusters) {
      STCluster& z = clusters_[id];
      if (degenerate || level >= params_.max_depth) continue;
      const int steps = z.step_end - z.step_begin;
      const bool spans_slices = slices.slice_of(z.step_begin) != slices.slice_of(z.step_end - 1);
      if (!spans_slices && z.n_elements() < static_cast<std::size_t>(params_.n_max)) continue;
      if (steps < 2) continue;
      if (!spans_slices && params_.oversize > 0.0) {
        const double ht = 0.5 * (tp[z.step_end] - tp[z.step_begin]);
        double diam = 0.0;
        for (int k : z.triangles) diam = std::max(diam, space.diameter(k));
        if (h > params_.oversize * ht || diam > params_.oversize * z.half_unpadded) continue;
      }
      int split = spans_slices ? split_at_slice_boundary(tp, slices, z.step_begin, z.step_end)
                               : split_interval(tp, z.step_begin, z.step_end);
      z.child_kind = kind;
      const std::array<std::array<int, 2>, 2> halves{
          {{z.step_begin, split}, {split, z.step_end}}};
      for (int th = 0; th < 2; ++th) {
        if (kind == Refinement::temporal) {
          STCluster c;
          c.level = level + 1;
          c.parent = id;
          c.corner_unpadded = z.corner_unpadded;
          c.half_unpadded = z.half_unpadded;
          c.grid = z.grid;
          c.t_index = 2 * z.t_index + th;
          c.step_begin = halves[th][0];
          c.step_end = halves[th][1];
          c.triangles = z.triangles;
          next.push_back(std::move(c));
          continue;
        }
        const double ch = 0.5 * z.half_unpadded;
        std::array<std::vector<int>, 8> octants;
        const Vec3 mid = z.corner_unpadded + Vec3{z.half_unpadded, z.half_unpadded, z.half_unpadded};
        for (int k : z.triangles) {
          const Vec3 c = space.centroid(k);
          const int o = (c.x > mid.x ? 1 : 0) | (c.y > mid.y ? 2 : 0) | (c.z > mid.z ? 4 : 0);
          octants[o].push_back(k);
        }
        for (int o = 0; o < 8; ++o) {
          if (octants[o].empty()) continue;
          STCluster c;
          c.level = level + 1;
          c.parent = id;
          c.half_unpadded = ch;
          for (int j = 0; j < 3; ++j) {
            const int bit = (o >> j) & 1;
            c.corner_unpadded[j] = z.corner_unpadded[j] + bit * 2.0 * ch;
            c.grid[j] = 2 * z.grid[j] + bit;
          }
          c.t_index = 2 * z.t_index + th;
          c.step_begin = halves[th][0];
          c.step_end = halves[th][1];
          c.triangles = std::move(octants[o]);
          next.push_back(std::move(c));
        }
      }
    }
    if (next.empty()) break;
    info.child_kind = kind;
    std::stable_sort(next.begin(), next.end(), [](const STCluster& a, const STCluster& b) {
      if (a.t_index != b.t_index) return a.t_index < b.t_index;
      return a.grid < b.grid;
    });
    LevelInfo child_info;
    child_info.lx = info.lx + (kind == Refinement::spacetime ? 1 : 0);
    child_info.half_unpadded =
        kind == Refinement::spacetime ? 0.5 * info.half_unpadded : info.half_unpadded;
    for (auto& c : next) {
      c.id = static_cast<int>(clusters_.size());
      clusters_[c.parent].children.push_back(c.id);
      child_info.clusters.push_back(c.id);
      clusters_.push_back(std::move(c));
    }
    levels_.push_back(std::move(child_info));
  }
}

void ClusterTree::pad() {
  const auto& space = mesh_->space();
  const auto& tp = mesh_->time_points();
  double below = 0.0;
  for (int level = depth(); level >= 0; --level) {
    double computed = 0.0;
    for (int id : levels_[level].clusters) {
      const STCluster& z = clusters_[id];
      for (int k : z.triangles) {
        for (int v : space.triangles()[k]) {
          const Vec3 p = space.vertex(v);
          for (int j = 0; j < 3; ++j) {
            const double a = z.corner_unpadded[j];
            const double b = a + 2.0 * z.half_unpadded;
            computed = std::max({computed, a - p[j], p[j] - b});
          }
        }
      }
    }
    below = std::max(computed, below);
    levels_[level].padding = below;
  }
  for (auto& z : clusters_) {
    const double pad = levels_[z.level].padding;
    z.box.corner = z.corner_unpadded - Vec3{pad, pad, pad};
    z.box.half_x = z.half_unpadded + pad;
    z.box.time = {tp[z.step_begin], tp[z.step_end]};
  }
}

void ClusterTree::build_temporal_tree() {
  std::map<std::pair<int, int>, int> index;
  for (int level = 0; level <= depth(); ++level) {
    std::map<int, std::vector<int>> by_index;
    for (int id : levels_[level].clusters) by_index[clusters_[id].t_index].push_back(id);
    for (auto& [k, members] : by_index) {
      TemporalCluster t;
      t.id = static_cast<int>(temporal_.size());
      t.level = level;
      t.index = k;
      const STCluster& any = clusters_[members.front()];
      t.step_begin = any.step_begin;
      t.step_end = any.step_end;
      t.interval = any.box.time;
      t.st_clusters = members;
      if (level > 0) {
        t.parent = index.at({level - 1, k / 2});
        auto& p = temporal_[t.parent];
        (k % 2 == 0 ? p.left : p.right) = t.id;
      }
      for (int id : members) clusters_[id].temporal = t.id;
      index[{level, k}] = t.id;
      levels_[level].temporal.push_back(t.id);
      temporal_.push_back(std::move(t));
    }
    std::size_t len = 0;
    bool uniform = true;
    for (int tid : levels_[level].temporal) {
      const auto& t = temporal_[tid];
      const auto n = static_cast<std::size_t>(t.step_end - t.step_begin);
      if (len != 0 && n != len) uniform = false;
      len = n;
    }
    levels_[level].uniform_time = uniform;
  }
}

int ClusterTree::temporal_at(int level, int index) const {
  if (level < 0 || level > depth()) return -1;
  const auto& ids = levels_[level].temporal;
  auto it = std::lower_bound(ids.begin(), ids.end(), index,
                             [&](int id, int k) { return temporal_[id].index < k; });
  if (it == ids.end() || temporal_[*it].index != index) return -1;
  return *it;
}

void ClusterTree::build_lists() {
  for (auto& t : temporal_) {
    const int k = t.index;
    std::vector<int> near;
    if (k == 0) {
      near.push_back(t.id);
    } else {
      if (int prev = temporal_at(t.level, k - 1); prev >= 0) near.push_back(prev);
      near.push_back(t.id);
      if (t.parent >= 0) {
        for (int j : temporal_[t.parent].nearfield)
          if (temporal_[j].is_leaf()) near.push_back(j);
      }
    }
    std::sort(near.begin(), near.end());
    near.erase(std::unique(near.begin(), near.end()), near.end());
    t.nearfield = std::move(near);

    std::vector<int> inter;
    if (k >= 2) {
      if (k % 2 == 1) {
        if (int j = temporal_at(t.level, k - 3); j >= 0) inter.push_back(j);
      }
      if (int j = temporal_at(t.level, k - 2); j >= 0) inter.push_back(j);
    }
    std::sort(inter.begin(), inter.end());
    t.interaction = std::move(inter);
  }

  const int n_tr = params_.n_tr;
  for (auto& z : clusters_) {
    const TemporalCluster& ti = temporal_[z.temporal];
    std::vector<int> near;
    for (int j : ti.nearfield) {
      if (temporal_[j].level != z.level) continue;
      for (int src : temporal_[j].st_clusters)
        if (grid_distance(z.grid, clusters_[src].grid) <= n_tr) near.push_back(src);
    }
    if (z.parent >= 0) {
      for (int src : clusters_[z.parent].nearfield)
        if (clusters_[src].is_leaf()) near.push_back(src);
    }
    std::sort(near.begin(), near.end());
    near.erase(std::unique(near.begin(), near.end()), near.end());
    z.nearfield = std::move(near);

    std::vector<int> inter;
    for (int j : ti.interaction) {
      for (int src : temporal_[j].st_clusters)
        if (grid_distance(z.grid, clusters_[src].grid) <= n_tr) inter.push_back(src);
    }
    std::sort(inter.begin(), inter.end());
    z.interaction = std::move(inter);
  }
}

std::vector<int> ClusterTree::leaves() const {
  std::vector<int> out;
  for (const auto& z : clusters_)
    if (z.is_leaf()) out.push_back(z.id);
  return out;
}

std::vector<std::size_t> ClusterTree::dofs(int cluster) const {
  const STCluster& z = clusters_[cluster];
  std::vector<std::size_t> out;
  out.reserve(z.n_elements());
  for (int kt = z.step_begin; kt < z.step_end; ++kt)
    for (int kx : z.triangles) out.push_back(mesh_->dof(kt, kx));
  return out;
}

void ClusterTree::dump(std::ostream& out) const {
  for (const auto& z : clusters_) {
    out << z.level << ' ' << z.t_index << ' ' << z.grid[0] << ',' << z.grid[1] << ','
        << z.grid[2] << ' ' << z.n_elements() << ' ' << (z.is_leaf() ? 1 : 0) << '\n';
  }
}

const std::vector<int>& temporal_nearfield(const ClusterTree& tree, int temporal_id) {
  return tree.temporal(temporal_id).nearfield;
}

const std::vector<int>& temporal_interaction(const ClusterTree& tree, int temporal_id) {
  return tree.temporal(temporal_id).interaction;
}

CoverageReport audit_coverage(const ClusterTree& tree) {
  const auto& mesh = tree.mesh();
  const std::size_t n = mesh.n_dofs();
  CoverageReport report;
  std::vector<unsigned> near_count(n), far_count(n);
  for (int leaf : tree.leaves()) {
    std::fill(near_count.begin(), near_count.end(), 0u);
    std::fill(far_count.begin(), far_count.end(), 0u);
    for (int src : tree.cluster(leaf).nearfield)
      for (auto j : tree.dofs(src)) ++near_count[j];
    for (int z = leaf; z >= 0; z = tree.cluster(z).parent)
      for (int src : tree.cluster(z).interaction)
        for (auto j : tree.dofs(src)) ++far_count[j];
    for (auto i : tree.dofs(leaf)) {
      const int kt = mesh.element(i).first;
      for (std::size_t j = 0; j < n; ++j) {
        const int jt = mesh.element(j).first;
        const unsigned total = near_count[j] + far_count[j];
        if (jt <= kt) {
          ++report.causal_pairs;
          if (total == 0) ++report.uncovered;
        } else if (far_count[j] > 0) {
          ++report.anticausal_admissible;
        }
        if (total > 1) ++report.duplicated;
      }
    }
  }
  return report;
}

}  // namespace stfmm
