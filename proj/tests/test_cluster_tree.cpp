#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "common.hpp"
#include "stfmm/cluster_tree.hpp"
#include "stfmm/kernel.hpp"

using namespace stfmm;

namespace {

ClusterTree sliced_tree(const SpaceTimeMesh& mesh, int slices) {
  TreeParams p;
  p.n_slices = slices;
  return ClusterTree(mesh, p);
}

int temporal_id(const ClusterTree& t, int level, int index) {
  const int id = t.temporal_at(level, index);
  REQUIRE(id >= 0);
  return id;
}

std::set<int> indices(const ClusterTree& t, const std::vector<int>& ids) {
  std::set<int> out;
  for (int id : ids) out.insert(t.temporal(id).index);
  return out;
}

}  // namespace

TEST_CASE("split_interval picks the step closest to the center") {
  CHECK(split_interval({0.0, 0.25, 0.5, 0.75, 1.0}, 0, 4) == 2);
  CHECK(split_interval({0.0, 0.1, 0.2, 0.4}, 0, 3) == 2);
  CHECK(split_interval({0.0, 1.0, 2.0, 3.0}, 0, 3) == 1);
  CHECK_THROWS(split_interval({0.0, 1.0}, 0, 1));
}

TEST_CASE("interaction area") {
  CHECK(interaction_area({3, 3, 3}, 3, 0).size() == 1);
  CHECK(interaction_area({3, 3, 3}, 3, 1).size() == 27);
  CHECK(interaction_area({0, 0, 0}, 2, 2).size() == 27);
  CHECK(interaction_area({0, 0, 0}, 1, 5).size() == 8);
}

TEST_CASE("small mesh stays a single leaf") {
  const SpaceTimeMesh mesh = build_tensor_mesh(generate_cube_surface(1), 1.0, 4);
  const ClusterTree t(mesh, {});
  CHECK(t.clusters().size() == 1);
  CHECK(t.depth() == 0);
  CHECK(t.cluster(0).nearfield == std::vector<int>{0});
  CHECK(t.cluster(0).interaction.empty());
}

TEST_CASE("degenerate mesh gives a single leaf") {
  std::vector<Vec3> v{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  std::istringstream in("3 2\n0 0 0\n1 0 0\n0 1 0\n0 1 2\n0 1 2\n");
  const SpaceTimeMesh mesh = build_tensor_mesh(read_spatial_mesh(in), 1.0, 64);
  TreeParams p;
  p.n_max = 2;
  const ClusterTree t(mesh, p);
  CHECK(t.leaves().size() >= 1);
  std::size_t total = 0;
  for (int l : t.leaves()) total += t.cluster(l).n_elements();
  CHECK(total == mesh.n_dofs());
}

TEST_CASE("standard tree structure") {
  const SpaceTimeMesh mesh = build_tensor_mesh(generate_cube_surface(4), 1.0, 16);
  const ClusterTree t(mesh, {});
  REQUIRE(t.depth() == 3);
  CHECK(t.level(0).child_kind == Refinement::temporal);
  CHECK(t.level(1).child_kind == Refinement::temporal);
  CHECK(t.level(2).child_kind == Refinement::spacetime);
  for (int l = 0; l <= t.depth(); ++l)
    for (int id : t.level(l).clusters)
      CHECK(check_box_relation(t.cluster(id).half_unpadded, ldexp(0.5, -l), 1.0, 0.9));
  // The level-2 boxes would violate the relation after one more temporal split.
  CHECK_FALSE(check_box_relation(t.level(2).half_unpadded, ldexp(0.5, -3), 1.0, 0.9));

  std::vector<int> seen(mesh.n_dofs(), 0);
  for (int leaf : t.leaves()) {
    CHECK(t.cluster(leaf).n_elements() < 80);
    for (auto d : t.dofs(leaf)) ++seen[d];
  }
  for (int s : seen) CHECK(s == 1);

  for (const auto& z : t.clusters()) {
    if (z.child_kind == Refinement::temporal) CHECK(z.children.size() == 2);
    if (z.child_kind == Refinement::spacetime) CHECK(z.children.size() <= 16);
    if (z.is_leaf()) continue;
    std::size_t sum = 0;
    std::set<std::pair<int, int>> owned;
    for (int c : z.children) {
      const auto& ch = t.cluster(c);
      sum += ch.n_elements();
      CHECK(ch.step_begin >= z.step_begin);
      CHECK(ch.step_end <= z.step_end);
      for (int kt = ch.step_begin; kt < ch.step_end; ++kt)
        for (int kx : ch.triangles) CHECK(owned.insert({kt, kx}).second);
    }
    CHECK(sum == z.n_elements());
  }
}

TEST_CASE("padding contains the owned elements and shrinks with depth") {
  const SpaceTimeMesh mesh = build_tensor_mesh(generate_cube_surface(8), 1.0, 16);
  const ClusterTree t(mesh, {});
  for (int l = 0; l + 1 <= t.depth(); ++l) CHECK(t.level(l).padding >= t.level(l + 1).padding);
  for (int l = 0; l <= t.depth(); ++l) {
    const double h = t.cluster(t.level(l).clusters.front()).box.half_x;
    for (int id : t.level(l).clusters) CHECK(t.cluster(id).box.half_x == h);
  }
  for (const auto& z : t.clusters()) {
    for (int kx : z.triangles)
      for (const Vec3& v : mesh.space().corners(kx))
        for (int j = 0; j < 3; ++j) {
          CHECK(v[j] >= z.box.corner[j] - 1e-12);
          CHECK(v[j] <= z.box.corner[j] + 2.0 * z.box.half_x + 1e-12);
        }
    CHECK(mesh.time(z.step_begin) >= z.box.time.lo - 1e-12);
    CHECK(mesh.time(z.step_end) <= z.box.time.hi + 1e-12);
  }
}

TEST_CASE("temporal tree links") {
  const SpaceTimeMesh mesh = build_tensor_mesh(generate_cube_surface(4), 1.0, 16);
  const ClusterTree t(mesh, {});
  int max_level = 0;
  for (const auto& tc : t.temporal()) {
    max_level = std::max(max_level, tc.level);
    CHECK(static_cast<std::size_t>(tc.index) < (std::size_t{1} << tc.level));
    if (tc.left >= 0) CHECK(t.temporal(tc.left).index == 2 * tc.index);
    if (tc.right >= 0) CHECK(t.temporal(tc.right).index == 2 * tc.index + 1);
    for (int z : tc.st_clusters) {
      CHECK(t.cluster(z).temporal == tc.id);
      CHECK(t.cluster(z).level == tc.level);
    }
  }
  CHECK(max_level == t.depth());
  for (int l = 0; l <= t.depth(); ++l) CHECK(t.level(l).temporal.size() == (std::size_t{1} << l));
}

TEST_CASE("temporal lists of a depth-3 tree") {
  const SpaceTimeMesh mesh = build_tensor_mesh(generate_cube_surface(1), 1.0, 32);
  const ClusterTree t = sliced_tree(mesh, 8);
  REQUIRE(t.depth() == 3);
  const int i6 = temporal_id(t, 3, 6);
  CHECK(indices(t, temporal_nearfield(t, i6)) == std::set<int>{5, 6});
  CHECK(indices(t, temporal_interaction(t, i6)) == std::set<int>{4});
  CHECK(indices(t, temporal_interaction(t, temporal_id(t, 3, 7))) == std::set<int>{4, 5});
  CHECK(temporal_interaction(t, temporal_id(t, 3, 0)).empty());
  CHECK(temporal_interaction(t, temporal_id(t, 3, 1)).empty());
  CHECK(indices(t, temporal_nearfield(t, temporal_id(t, 3, 0))) == std::set<int>{0});
}

TEST_CASE("temporal lists never look into the future") {
  const SpaceTimeMesh mesh = build_tensor_mesh(generate_cube_surface(1), 1.0, 64);
  const ClusterTree t = sliced_tree(mesh, 32);
  REQUIRE(t.depth() == 5);
  for (const auto& tc : t.temporal()) {
    for (int j : tc.nearfield) CHECK(t.temporal(j).index <= tc.index);
    for (int j : tc.interaction) {
      CHECK(t.temporal(j).index <= tc.index - 2);
      CHECK(t.temporal(j).level == tc.level);
    }
  }
}

TEST_CASE("space-time lists") {
  testing::SmallProblem p;
  const ClusterTree& t = p.tree;
  CHECK(t.cluster(0).interaction.empty());
  for (const auto& z : t.clusters()) {
    for (int s : z.interaction) {
      const auto& src = t.cluster(s);
      CHECK(src.box.time.hi <= z.box.time.lo);
      CHECK(src.level == z.level);
      int dist = 0;
      for (int j = 0; j < 3; ++j) dist = std::max(dist, std::abs(src.grid[j] - z.grid[j]));
      CHECK(dist <= t.params().n_tr);
    }
    for (int s : z.nearfield) CHECK(t.cluster(s).step_begin <= z.step_end - 1);
  }
}

TEST_CASE("coverage is exact without truncation") {
  for (auto [n, steps, slices] : {std::tuple{4, 16, 1}, {2, 64, 4}, {1, 256, 16}, {3, 32, 1}}) {
    const SpaceTimeMesh mesh = build_tensor_mesh(generate_cube_surface(n), 1.0, steps);
    TreeParams p;
    p.n_tr = 1 << 20;
    p.n_slices = slices;
    const ClusterTree t(mesh, p);
    const CoverageReport r = audit_coverage(t);
    INFO("n=", n, " steps=", steps);
    CHECK(r.causal_pairs == mesh.n_space() * mesh.n_space() * steps * (steps + 1) / 2);
    CHECK(r.exact());
  }
}

TEST_CASE("truncation leaves pairs uncovered") {
  const SpaceTimeMesh mesh = build_tensor_mesh(generate_cube_surface(4), 1.0, 16);
  TreeParams p;
  p.n_tr = 0;
  const CoverageReport r = audit_coverage(ClusterTree(mesh, p));
  CHECK(r.uncovered > 0);
  CHECK(r.duplicated == 0);
}

TEST_CASE("tree dump format") {
  const SpaceTimeMesh mesh = build_tensor_mesh(generate_cube_surface(4), 1.0, 16);
  const ClusterTree t(mesh, {});
  std::ostringstream out;
  t.dump(out);
  std::istringstream in(out.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    int level, k, leaf;
    std::string grid;
    std::size_t n;
    CHECK(static_cast<bool>(ls >> level >> k >> grid >> n >> leaf));
    CHECK(std::count(grid.begin(), grid.end(), ',') == 2);
    ++lines;
  }
  CHECK(lines == t.clusters().size());
  CHECK(out.str().substr(0, 12) == "0 0 0,0,0 30");
}
