#pragma once

#include <cstdint>
#include <vector>

#include "stfmm/cluster_tree.hpp"
#include "stfmm/fmm.hpp"

namespace stfmm {

/// Owner rank of every temporal cluster.
struct RankAssignment {
  int n_ranks = 1;
  std::vector<int> owner;                  // by temporal cluster id
  std::vector<std::vector<std::vector<int>>> per_level;  // [rank][level] -> owned clusters

  int owned_count(int rank) const;
};

/// Finest levels first: levels >= ceil(log2 N) are split into contiguous
/// blocks in ascending order, level ceil(log2 N) - 1 follows the left child,
/// coarser levels pick from 2^l ascending rank groups the member owning the
/// fewest clusters so far (lowest rank on ties). Throws ConfigError when the
/// tree has fewer leaves than ranks.
RankAssignment assign_clusters(const ClusterTree& tree, int n_ranks);

/// M2L effort per rank: sum over owned clusters of |I(cluster)| * cost[level]
/// (levels beyond cost.size() count zero).
std::vector<long> m2l_load(const ClusterTree& tree, const RankAssignment& assignment,
                           const std::vector<long>& cost);

/// Which temporal tasks exist for a temporal cluster, independent of ranks.
struct TemporalWork {
  bool m = false;     // S2M/M2M for some attached space-time cluster
  bool m2l = false;   // some attached cluster has a nonempty interaction list
  bool l = false;     // some attached cluster receives L2L from its parent
  bool n = false;     // some attached leaf has nearfield blocks
  bool l2t = false;   // some attached leaf evaluates local contributions
};

std::vector<TemporalWork> temporal_work(const FmmOperator& op);

/// Owned clusters plus ghosts: parents and children of owned clusters,
/// interaction partners in both directions and the temporal nearfield.
struct LocallyEssentialTree {
  int rank = 0;
  std::vector<int> owned;   // ascending temporal id
  std::vector<int> ghosts;  // ascending temporal id, owner != rank
  std::vector<int> ghost_owner;

  bool contains(int temporal_id) const;
};

LocallyEssentialTree build_let(int rank, const ClusterTree& tree,
                               const RankAssignment& assignment);

enum class MessageKind : std::uint8_t {
  moments_to_parent = 0,
  moments_to_interaction = 1,
  locals_to_child = 2,
};

const char* message_kind_name(MessageKind kind);

/// A message implied by the assignment: cluster is the sending temporal cluster.
struct PlannedMessage {
  int from = 0;
  int to = 0;
  int cluster = 0;
  MessageKind kind = MessageKind::moments_to_parent;
};

/// Every message of one matvec, in a fixed order.
std::vector<PlannedMessage> planned_messages(const ClusterTree& tree,
                                             const std::vector<TemporalWork>& work,
                                             const RankAssignment& assignment);

enum class TaskList { m = 0, l = 1, m2l = 2, n = 3 };

/// Per-rank task lists in ascending temporal id with dependency counts.
/// deps and remote are indexed by temporal cluster id.
struct TaskLists {
  std::vector<int> m_list, m2l_list, l_list, n_list;
  std::vector<int> m_deps, m2l_deps, l_deps;
  std::vector<char> m_remote, m2l_remote, l_remote;
};

/// M-task waits for children M-tasks, M2L-task for the M-tasks of its
/// interaction partners, L-task for its parent's M2L- and L-tasks (counted as
/// one dependency on the parent's completed local contributions).
TaskLists build_task_lists(const LocallyEssentialTree& let, const ClusterTree& tree,
                           const std::vector<TemporalWork>& work,
                           const RankAssignment& assignment);

}  // namespace stfmm
