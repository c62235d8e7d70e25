#pragma once

#include <array>
#include <climits>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stfmm/fmm.hpp"
#include "stfmm/schedule.hpp"
#include "stfmm/transport.hpp"

namespace stfmm {

enum class TransportKind { inproc, tcp };

inline constexpr int threshold_never = INT_MAX;

struct RuntimeOptions {
  /// Pool threads per rank besides the scheduling thread.
  int workers = 1;
  /// The scheduling thread executes a queued work item itself whenever more
  /// than this many are waiting. Negative selects 2 * workers;
  /// threshold_never keeps it out of the computation.
  int threshold = -1;
  /// Space-time clusters per work item.
  int grain = 1;
  bool trace = false;
  bool audit_writes = false;
  /// Abort a matvec that makes no progress for this long.
  double watchdog_seconds = 120.0;

  int effective_threshold() const;
};

/// One executed operation or communication. worker 0 is the scheduling thread.
struct TraceEvent {
  std::string name;
  std::string category;  // S2M, M2M, M2L, L2L, L2T, NF, SEND, RECV
  int rank = 0;
  int worker = 0;
  double start_us = 0.0;
  double dur_us = 0.0;
};

struct MessageRecord {
  int from = 0;
  int to = 0;
  int cluster = 0;
  MessageKind kind = MessageKind::moments_to_parent;
  std::size_t bytes = 0;
};

/// Matvec over n_ranks simulated ranks, each running the list scheduler with
/// its own worker pool and its own copies of moments and local contributions.
class DistributedFmm {
 public:
  DistributedFmm(const FmmOperator& op, int n_ranks, RuntimeOptions options = {},
                 TransportKind transport = TransportKind::inproc, DeliveryDelay delay = {});
  ~DistributedFmm();

  const FmmOperator& op() const { return *op_; }
  int n_ranks() const { return assignment_.n_ranks; }
  const RankAssignment& assignment() const { return assignment_; }
  const std::vector<TemporalWork>& work() const { return work_; }
  const std::vector<LocallyEssentialTree>& lets() const { return lets_; }
  const std::vector<TaskLists>& task_lists() const { return lists_; }
  const std::vector<PlannedMessage>& planned() const { return planned_; }

  void apply(std::span<const double> w, std::span<double> f);
  std::vector<double> apply(const std::vector<double>& w);

  /// Records of the last apply.
  const std::vector<TraceEvent>& trace() const { return trace_; }
  const std::vector<MessageRecord>& messages() const { return messages_; }
  std::size_t write_collisions() const { return write_collisions_; }
  /// Executed tasks per list (M, L, M2L, N) in the last apply.
  std::array<std::size_t, 4> tasks_executed() const { return tasks_executed_; }

 private:
  class Rank;
  friend class Rank;

  const FmmOperator* op_;
  RuntimeOptions options_;
  RankAssignment assignment_;
  std::vector<TemporalWork> work_;
  std::vector<LocallyEssentialTree> lets_;
  std::vector<TaskLists> lists_;
  std::vector<PlannedMessage> planned_;
  std::vector<std::vector<int>> targets_;  // temporal interaction targets per source
  std::unique_ptr<InProcessNetwork> inproc_;
  std::unique_ptr<TcpNetwork> tcp_;
  std::vector<Transport*> endpoints_;

  std::vector<TraceEvent> trace_;
  std::vector<MessageRecord> messages_;
  std::size_t write_collisions_ = 0;
  std::array<std::size_t, 4> tasks_executed_{};
};

/// Messages whose moments flow against time: the sending cluster must end no
/// later than every receiving cluster that uses the moments.
std::size_t count_backward_messages(const ClusterTree& tree,
                                    const std::vector<MessageRecord>& messages);

/// JSON array of events with the fields of TraceEvent plus ph/ts/dur/pid/tid
/// for trace viewers.
void write_trace_json(std::ostream& out, const std::vector<TraceEvent>& events);

struct TraceSummary {
  std::map<std::string, double> total_us;  // per category
  double max_idle_gap_us = 0.0;            // largest gap between compute events of a pool worker
  std::size_t scheduler_compute_events = 0;
};

TraceSummary summarize_trace(const std::vector<TraceEvent>& events);

}  // namespace stfmm
