#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "stfmm/errors.hpp"
#include "stfmm/galerkin.hpp"
#include "stfmm/schedule.hpp"

using namespace stfmm;

namespace {

// 64 steps in 16 slices: uniform temporal tree with 16 leaves on level 4.
struct SliceProblem {
  SpaceTimeMesh mesh;
  ClusterTree tree;
  SingleLayerIntegrator integrator;
  FmmOperator op;
  std::vector<TemporalWork> work;

  SliceProblem()
      : mesh(build_tensor_mesh(generate_cube_surface(1), 1.0, 64)),
        tree(mesh, params()),
        integrator(mesh, 1.0),
        op(tree, assemble_nearfield(tree, integrator), {2, 2, 1.0}),
        work(temporal_work(op)) {}

  static TreeParams params() {
    TreeParams p;
    p.n_slices = 16;
    return p;
  }

  int at(int level, int index) const { return tree.temporal_at(level, index); }
};

const SliceProblem& slices() {
  static const SliceProblem p;
  return p;
}

// Interaction indices of a uniform binary temporal tree, enumerated by hand:
// the earlier children of the parent's left neighbour outside the nearfield.
std::vector<int> uniform_interaction(int level, int index) {
  if (level < 2) return {};
  if (index % 2 == 0) return index >= 2 ? std::vector<int>{index - 2} : std::vector<int>{};
  return index >= 3 ? std::vector<int>{index - 3, index - 2} : std::vector<int>{};
}

// Moments are needed by interaction sources and by the children of such clusters.
std::vector<char> needs_moments(const ClusterTree& tree) {
  std::vector<char> source(tree.temporal().size(), 0), needed(source.size(), 0);
  for (const auto& t : tree.temporal())
    for (int j : uniform_interaction(t.level, t.index)) source[tree.temporal_at(t.level, j)] = 1;
  for (const auto& t : tree.temporal())  // parents precede children
    needed[t.id] = source[t.id] || (t.parent >= 0 && needed[t.parent]);
  return needed;
}

}  // namespace

TEST_CASE("uniform temporal tree") {
  const auto& p = slices();
  REQUIRE(p.tree.temporal().size() == 31);
  for (const auto& t : p.tree.temporal()) {
    CHECK(t.is_leaf() == (t.level == 4));
    std::vector<int> got;
    for (int j : t.interaction) got.push_back(p.tree.temporal(j).index);
    std::sort(got.begin(), got.end());
    CHECK(got == uniform_interaction(t.level, t.index));
  }
  const auto& i6 = p.tree.temporal(p.at(3, 6));
  std::set<int> near, inter;
  for (int j : i6.nearfield) near.insert(p.tree.temporal(j).index);
  for (int j : i6.interaction) inter.insert(p.tree.temporal(j).index);
  CHECK(near == std::set<int>{5, 6});
  CHECK(inter == std::set<int>{4});
}

TEST_CASE("assignment reproduces the sixteen-slice eight-rank pattern") {
  const auto& p = slices();
  const auto a = assign_clusters(p.tree, 8);
  REQUIRE(a.owner.size() == p.tree.temporal().size());
  for (int i = 0; i < 16; ++i) CHECK(a.owner[p.at(4, i)] == i / 2);
  for (int i = 0; i < 8; ++i) CHECK(a.owner[p.at(3, i)] == i);
  for (int i = 0; i < 4; ++i) CHECK(a.owner[p.at(2, i)] == a.owner[p.tree.temporal(p.at(2, i)).left]);
  CHECK(a.owner[p.at(1, 0)] == 1);
  CHECK(a.owner[p.at(1, 1)] == 5);
  CHECK(a.owner[p.at(0, 0)] == 3);
  int total = 0;
  for (int r = 0; r < 8; ++r) total += a.owned_count(r);
  CHECK(total == 31);

  CHECK(m2l_load(p.tree, a, {0, 0, 1, 1, 4})[6] == 15);
  CHECK(m2l_load(p.tree, a, {0, 0, 1, 1, 4})[7] == 14);
  CHECK(m2l_load(p.tree, a, {0, 0, 1, 4, 4})[6] == 18);
  CHECK(m2l_load(p.tree, a, {0, 0, 1, 4, 4})[7] == 20);
}

TEST_CASE("assignment edge cases") {
  const auto& p = slices();
  const auto one = assign_clusters(p.tree, 1);
  for (int o : one.owner) CHECK(o == 0);
  for (int n : {2, 3, 4, 16}) {
    const auto a = assign_clusters(p.tree, n);
    int last = 0;
    for (int i = 0; i < 16; ++i) {
      const int o = a.owner[p.at(4, i)];
      CHECK(o >= last);
      last = o;
    }
    CHECK(last == n - 1);
  }
  CHECK_THROWS_AS(assign_clusters(p.tree, 17), ConfigError);
  CHECK_THROWS_AS(assign_clusters(p.tree, 0), ConfigError);
}

TEST_CASE("temporal work flags") {
  const auto& p = slices();
  const auto needed = needs_moments(p.tree);
  CHECK(std::count(needed.begin(), needed.end(), 0) == 9);
  for (const auto& t : p.tree.temporal()) {
    const auto& w = p.work[t.id];
    CHECK(w.m == static_cast<bool>(needed[t.id]));
    CHECK(w.m2l == !t.interaction.empty());
    if (t.index == 0) CHECK_FALSE(w.m2l);
    CHECK(w.n == t.is_leaf());
    CHECK(w.l2t == (t.is_leaf() && (w.m2l || w.l)));
  }
}

TEST_CASE("locally essential trees") {
  const auto& p = slices();
  const auto one = assign_clusters(p.tree, 1);
  const auto full = build_let(0, p.tree, one);
  CHECK(full.owned.size() == p.tree.temporal().size());
  CHECK(full.ghosts.empty());

  const auto a = assign_clusters(p.tree, 8);
  const auto let4 = build_let(4, p.tree, a);
  CHECK(let4.contains(p.at(4, 7)));
  CHECK(a.owner[p.at(4, 7)] == 3);

  const auto messages = planned_messages(p.tree, p.work, a);
  for (int r = 0; r < 8; ++r) {
    const auto let = build_let(r, p.tree, a);
    REQUIRE(let.ghosts.size() == let.ghost_owner.size());
    for (std::size_t i = 0; i < let.ghosts.size(); ++i) {
      CHECK(let.ghost_owner[i] != r);
      CHECK(let.ghost_owner[i] == a.owner[let.ghosts[i]]);
    }
    for (int id : let.owned) {
      CHECK(a.owner[id] == r);
      for (int j : p.tree.temporal(id).nearfield) CHECK(let.contains(j));
      for (int j : p.tree.temporal(id).interaction) CHECK(let.contains(j));
    }
    for (const auto& m : messages)
      if (m.to == r) CHECK(let.contains(m.cluster));
  }
}

TEST_CASE("task lists and dependencies") {
  const auto& p = slices();
  const auto a = assign_clusters(p.tree, 8);
  // Which clusters hold local contributions, from the hand-enumerated lists.
  std::vector<char> has_locals(p.tree.temporal().size(), 0);
  for (const auto& t : p.tree.temporal())  // parents precede children
    has_locals[t.id] = !uniform_interaction(t.level, t.index).empty() ||
                       (t.parent >= 0 && has_locals[t.parent]);

  const auto needed = needs_moments(p.tree);
  std::map<int, int> seen;
  for (int r = 0; r < 8; ++r) {
    const auto let = build_let(r, p.tree, a);
    const auto lists = build_task_lists(let, p.tree, p.work, a);
    for (const auto* l : {&lists.m_list, &lists.m2l_list, &lists.l_list, &lists.n_list}) {
      CHECK(std::is_sorted(l->begin(), l->end()));
      CHECK(std::adjacent_find(l->begin(), l->end()) == l->end());
    }
    for (int id : lists.m_list) ++seen[id];
    for (int id : let.owned) {
      const auto& t = p.tree.temporal(id);
      const bool in_m2l = std::count(lists.m2l_list.begin(), lists.m2l_list.end(), id) > 0;
      const bool in_l = std::count(lists.l_list.begin(), lists.l_list.end(), id) > 0;
      const bool in_n = std::count(lists.n_list.begin(), lists.n_list.end(), id) > 0;
      const auto inter = uniform_interaction(t.level, t.index);
      const bool in_m = std::count(lists.m_list.begin(), lists.m_list.end(), id) > 0;
      CHECK(in_m == static_cast<bool>(needed[id]));
      if (in_m) CHECK(lists.m_deps[id] == (t.is_leaf() ? 0 : 2));
      CHECK(in_m2l == !inter.empty());
      if (in_m2l) CHECK(lists.m2l_deps[id] == static_cast<int>(inter.size()));
      CHECK(in_l == (t.parent >= 0 && has_locals[t.parent]));
      if (in_l) CHECK(lists.l_deps[id] == 1);
      CHECK(in_n == t.is_leaf());
      if (in_m && !t.is_leaf())
        CHECK(lists.m_remote[id] ==
              (a.owner[t.left] != r || a.owner[t.right] != r ? 1 : 0));
      if (in_l) CHECK(lists.l_remote[id] == (a.owner[t.parent] != r ? 1 : 0));
    }
  }
  CHECK(seen.size() == p.tree.temporal().size() - 9);
  for (const auto& [id, count] : seen) CHECK(count == 1);
}

TEST_CASE("planned messages") {
  const auto& p = slices();
  CHECK(planned_messages(p.tree, p.work, assign_clusters(p.tree, 1)).empty());
  for (int n : {2, 4, 8}) {
    const auto a = assign_clusters(p.tree, n);
    const auto messages = planned_messages(p.tree, p.work, a);
    CHECK(!messages.empty());
    std::set<std::tuple<int, int, int, int>> tags;
    for (const auto& m : messages) {
      CHECK(m.from == a.owner[m.cluster]);
      CHECK(m.from != m.to);
      CHECK(tags.insert({m.from, m.to, m.cluster, static_cast<int>(m.kind)}).second);
      const auto& s = p.tree.temporal(m.cluster);
      switch (m.kind) {
        case MessageKind::moments_to_parent:
          CHECK(m.to == a.owner[s.parent]);
          CHECK(s.interval.hi <= p.tree.temporal(s.parent).interval.hi);
          break;
        case MessageKind::moments_to_interaction: {
          bool partner = false;
          for (const auto& t : p.tree.temporal())
            if (a.owner[t.id] == m.to &&
                std::count(t.interaction.begin(), t.interaction.end(), m.cluster)) {
              partner = true;
              CHECK(s.interval.hi <= t.interval.lo);
            }
          CHECK(partner);
          break;
        }
        case MessageKind::locals_to_child:
          CHECK((a.owner[s.left] == m.to || a.owner[s.right] == m.to));
          break;
      }
    }
    // Every remote dependency is served by a planned message.
    for (int r = 0; r < n; ++r) {
      const auto lists = build_task_lists(build_let(r, p.tree, a), p.tree, p.work, a);
      for (int id : lists.m_list) {
        const auto& t = p.tree.temporal(id);
        for (int c : {t.left, t.right})
          if (c >= 0 && a.owner[c] != r)
            CHECK(tags.count({a.owner[c], r, c, 0}) == 1);
      }
      for (int id : lists.m2l_list)
        for (int j : p.tree.temporal(id).interaction)
          if (a.owner[j] != r) CHECK(tags.count({a.owner[j], r, j, 1}) == 1);
      for (int id : lists.l_list) {
        const int parent = p.tree.temporal(id).parent;
        if (a.owner[parent] != r) CHECK(tags.count({a.owner[parent], r, parent, 2}) == 1);
      }
    }
  }
}
