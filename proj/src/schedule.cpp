#include "stfmm/schedule.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "stfmm/errors.hpp"

namespace stfmm {

int RankAssignment::owned_count(int rank) const {
  int n = 0;
  for (const auto& level : per_level[rank]) n += static_cast<int>(level.size());
  return n;
}

RankAssignment assign_clusters(const ClusterTree& tree, int n_ranks) {
  if (n_ranks < 1) throw ConfigError("rank count must be >= 1");
  int n_leaves = 0;
  for (const auto& t : tree.temporal()) n_leaves += t.is_leaf() ? 1 : 0;
  if (n_leaves < n_ranks) {
    throw ConfigError("the temporal tree has " + std::to_string(n_leaves) +
                      " leaves, fewer than the " + std::to_string(n_ranks) + " ranks");
  }
  int split_level = 0;
  while ((1 << split_level) < n_ranks) ++split_level;

  RankAssignment a;
  a.n_ranks = n_ranks;
  a.owner.assign(tree.temporal().size(), -1);
  a.per_level.assign(n_ranks, std::vector<std::vector<int>>(tree.depth() + 1));
  std::vector<int> count(n_ranks, 0);

  auto pick_from_group = [&](int level, int index) {
    const long groups = 1L << level;
    const int lo = static_cast<int>(index * n_ranks / groups);
    int hi = static_cast<int>((index + 1) * n_ranks / groups);
    hi = std::max(hi, lo + 1);
    int best = lo;
    for (int r = lo; r < hi && r < n_ranks; ++r)
      if (count[r] < count[best]) best = r;
    return best;
  };

  for (int level = tree.depth(); level >= 0; --level) {
    const auto& ids = tree.level(level).temporal;
    const auto k = static_cast<long>(ids.size());
    for (long i = 0; i < k; ++i) {
      const auto& t = tree.temporal(ids[i]);
      int r;
      if (level >= split_level) {
        r = static_cast<int>(i * n_ranks / k);
      } else if (level == split_level - 1 && t.left >= 0) {
        r = a.owner[t.left];
      } else {
        r = pick_from_group(level, t.index);
      }
      a.owner[t.id] = r;
      a.per_level[r][level].push_back(t.id);
      ++count[r];
    }
  }
  for (auto& levels : a.per_level)
    for (auto& ids : levels) std::sort(ids.begin(), ids.end());
  return a;
}

std::vector<long> m2l_load(const ClusterTree& tree, const RankAssignment& assignment,
                           const std::vector<long>& cost) {
  std::vector<long> w(assignment.n_ranks, 0);
  for (const auto& t : tree.temporal()) {
    if (t.level >= static_cast<int>(cost.size())) continue;
    w[assignment.owner[t.id]] += static_cast<long>(t.interaction.size()) * cost[t.level];
  }
  return w;
}

std::vector<TemporalWork> temporal_work(const FmmOperator& op) {
  const auto& tree = op.tree();
  std::vector<TemporalWork> work(tree.temporal().size());
  for (const auto& t : tree.temporal()) {
    auto& w = work[t.id];
    for (int id : t.st_clusters) {
      const auto& z = tree.cluster(id);
      w.m = w.m || op.needs_moments(id);
      w.m2l = w.m2l || !z.interaction.empty();
      w.l = w.l || (z.parent >= 0 && op.needs_locals(z.parent));
      w.n = w.n || (z.is_leaf() && !op.nearfield().by_target[id].empty());
      w.l2t = w.l2t || (z.is_leaf() && op.needs_locals(id));
    }
  }
  return work;
}

namespace {

std::vector<std::vector<int>> interaction_targets(const ClusterTree& tree) {
  std::vector<std::vector<int>> targets(tree.temporal().size());
  for (const auto& t : tree.temporal())
    for (int j : t.interaction) targets[j].push_back(t.id);
  return targets;
}

}  // namespace

bool LocallyEssentialTree::contains(int temporal_id) const {
  return std::binary_search(owned.begin(), owned.end(), temporal_id) ||
         std::binary_search(ghosts.begin(), ghosts.end(), temporal_id);
}

LocallyEssentialTree build_let(int rank, const ClusterTree& tree,
                               const RankAssignment& assignment) {
  const auto targets = interaction_targets(tree);
  LocallyEssentialTree let;
  let.rank = rank;
  std::set<int> all;
  for (const auto& t : tree.temporal()) {
    if (assignment.owner[t.id] != rank) continue;
    let.owned.push_back(t.id);
    all.insert(t.id);
    for (int j : {t.parent, t.left, t.right})
      if (j >= 0) all.insert(j);
    all.insert(t.interaction.begin(), t.interaction.end());
    all.insert(targets[t.id].begin(), targets[t.id].end());
    all.insert(t.nearfield.begin(), t.nearfield.end());
  }
  for (int id : all) {
    if (assignment.owner[id] == rank) continue;
    let.ghosts.push_back(id);
    let.ghost_owner.push_back(assignment.owner[id]);
  }
  return let;
}

const char* message_kind_name(MessageKind kind) {
  switch (kind) {
    case MessageKind::moments_to_parent: return "moments-to-parent";
    case MessageKind::moments_to_interaction: return "moments-to-interaction";
    case MessageKind::locals_to_child: return "locals-to-child";
  }
  return "?";
}

std::vector<PlannedMessage> planned_messages(const ClusterTree& tree,
                                             const std::vector<TemporalWork>& work,
                                             const RankAssignment& assignment) {
  const auto targets = interaction_targets(tree);
  const auto& owner = assignment.owner;
  std::vector<PlannedMessage> out;
  for (const auto& t : tree.temporal()) {
    const int from = owner[t.id];
    if (work[t.id].m) {
      if (t.parent >= 0 && work[t.parent].m && owner[t.parent] != from)
        out.push_back({from, owner[t.parent], t.id, MessageKind::moments_to_parent});
      std::set<int> ranks;
      for (int j : targets[t.id])
        if (work[j].m2l && owner[j] != from) ranks.insert(owner[j]);
      for (int r : ranks) out.push_back({from, r, t.id, MessageKind::moments_to_interaction});
    }
    if (work[t.id].m2l || work[t.id].l) {
      std::set<int> ranks;
      for (int c : {t.left, t.right})
        if (c >= 0 && work[c].l && owner[c] != from) ranks.insert(owner[c]);
      for (int r : ranks) out.push_back({from, r, t.id, MessageKind::locals_to_child});
    }
  }
  return out;
}

TaskLists build_task_lists(const LocallyEssentialTree& let, const ClusterTree& tree,
                           const std::vector<TemporalWork>& work,
                           const RankAssignment& assignment) {
  const std::size_t n = tree.temporal().size();
  TaskLists lists;
  lists.m_deps.assign(n, 0);
  lists.m2l_deps.assign(n, 0);
  lists.l_deps.assign(n, 0);
  lists.m_remote.assign(n, 0);
  lists.m2l_remote.assign(n, 0);
  lists.l_remote.assign(n, 0);
  const auto& owner = assignment.owner;
  for (int id : let.owned) {
    const auto& t = tree.temporal(id);
    const auto& w = work[id];
    if (w.m) {
      lists.m_list.push_back(id);
      for (int c : {t.left, t.right}) {
        if (c < 0 || !work[c].m) continue;
        ++lists.m_deps[id];
        if (owner[c] != let.rank) lists.m_remote[id] = 1;
      }
    }
    if (w.m2l) {
      lists.m2l_list.push_back(id);
      for (int j : t.interaction) {
        if (!work[j].m) continue;
        ++lists.m2l_deps[id];
        if (owner[j] != let.rank) lists.m2l_remote[id] = 1;
      }
    }
    if (w.l) {
      lists.l_list.push_back(id);
      lists.l_deps[id] = 1;
      if (owner[t.parent] != let.rank) lists.l_remote[id] = 1;
    }
    if (w.n) lists.n_list.push_back(id);
  }
  return lists;
}

}  // namespace stfmm
