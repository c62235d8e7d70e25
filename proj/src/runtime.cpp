#include "stfmm/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <mutex>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "stfmm/errors.hpp"

namespace stfmm {

int RuntimeOptions::effective_threshold() const {
  if (workers <= 0) return 0;
  if (threshold < 0) return 2 * workers;
  return threshold;
}

namespace {

enum class Job { m = 0, l = 1, m2l = 2, n = 3, l2t = 4 };
constexpr int n_jobs = 5;

struct Item {
  Job job;
  int temporal;
  std::vector<int> st;
};

using Clock = std::chrono::steady_clock;

double micros(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::micro>(b - a).count();
}

// Write-audit slots per space-time cluster.
enum Slot { slot_mu = 0, slot_lam_m2l, slot_lam_down, slot_total, slot_f_far, slot_f_near, n_slots };

}  // namespace

class DistributedFmm::Rank {
 public:
  Rank(DistributedFmm& d, int rank, std::span<const double> w, std::atomic<bool>& abort,
       Clock::time_point t0)
      : d_(d),
        op_(*d.op_),
        tree_(d.op_->tree()),
        rank_(rank),
        w_(w),
        abort_(abort),
        t0_(t0),
        transport_(*d.endpoints_[rank]),
        ts_(op_.tensor_size()),
        n_st_(tree_.clusters().size()),
        n_t_(tree_.temporal().size()),
        remaining_(std::make_unique<std::atomic<int>[]>(n_jobs * n_t_)),
        writers_(std::make_unique<std::atomic<int>[]>(n_slots * n_st_)) {
    mu_.assign(n_st_ * ts_, 0.0);
    lam_m2l_.assign(n_st_ * ts_, 0.0);
    lam_down_.assign(n_st_ * ts_, 0.0);
    total_.assign(n_st_ * ts_, 0.0);
    f_far_.assign(op_.n_dofs(), 0.0);
    f_near_.assign(op_.n_dofs(), 0.0);
    for (std::size_t i = 0; i < n_jobs * n_t_; ++i) remaining_[i] = 0;
    for (std::size_t i = 0; i < n_slots * n_st_; ++i) writers_[i] = 0;
  }

  std::vector<TraceEvent> events;
  std::vector<MessageRecord> sent;
  std::array<std::size_t, 4> executed{};
  std::size_t collisions() const { return collisions_.load(); }

  void run(std::span<double> f) {
    const auto& work = d_.work_;
    const auto& let = d_.lets_[rank_];
    TaskLists lists = d_.lists_[rank_];
    for (const auto& p : d_.planned_)
      if (p.to == rank_) expected_.insert({p.from, p.cluster, static_cast<int>(p.kind)});
    final_pending_.assign(n_t_, 0);
    for (int t : let.owned) final_pending_[t] = (work[t].m2l ? 1 : 0) + (work[t].l ? 1 : 0);
    m_deps_ = lists.m_deps;
    m2l_deps_ = lists.m2l_deps;
    l_deps_ = lists.l_deps;

    std::array<std::deque<int>, 4> pending{
        std::deque<int>(lists.m_list.begin(), lists.m_list.end()),
        std::deque<int>(lists.l_list.begin(), lists.l_list.end()),
        std::deque<int>(lists.m2l_list.begin(), lists.m2l_list.end()),
        std::deque<int>(lists.n_list.begin(), lists.n_list.end())};

    const int threshold = d_.options_.effective_threshold();
    std::vector<std::thread> pool;
    for (int k = 1; k <= d_.options_.workers; ++k) pool.emplace_back([this, k] { worker_loop(k); });
    auto stop_pool = [&] {
      {
        std::lock_guard lock(qmutex_);
        stop_ = true;
      }
      qcv_.notify_all();
      for (auto& th : pool) th.join();
      pool.clear();
    };

    try {
      auto last_progress = Clock::now();
      for (;;) {
        if (abort_.load()) throw TransportError("rank " + std::to_string(rank_) + ": aborted");
        rethrow_worker_error();
        bool progress = false;

        for (auto& msg : transport_.poll()) {
          handle(std::move(msg));
          progress = true;
        }

        std::vector<std::pair<Job, int>> done;
        {
          std::lock_guard lock(cmutex_);
          done.swap(done_);
        }
        for (const auto& [job, t] : done) {
          complete(job, t);
          progress = true;
        }

        // FindNextCluster: M, then L, then M2L, then N; first ready task in list order.
        bool issued = false;
        for (int list = 0; list < 4 && !issued; ++list) {
          auto& q = pending[list];
          for (auto it = q.begin(); it != q.end(); ++it) {
            if (!ready(list, *it)) continue;
            const int t = *it;
            q.erase(it);
            issue(static_cast<Job>(list), t);
            ++executed[list];
            issued = true;
            break;
          }
        }
        progress = progress || issued;

        std::size_t queued;
        {
          std::lock_guard lock(qmutex_);
          queued = queue_.size();
        }
        if (queued > static_cast<std::size_t>(threshold)) {
          Item item;
          bool got = false;
          {
            std::lock_guard lock(qmutex_);
            if (!queue_.empty()) {
              item = std::move(queue_.front());
              queue_.pop_front();
              got = true;
            }
          }
          if (got) {
            execute(item, 0);
            progress = true;
          }
        }

        const bool lists_empty = std::all_of(pending.begin(), pending.end(),
                                             [](const auto& q) { return q.empty(); });
        if (lists_empty && outstanding_ == 0 && received_.size() == expected_.size()) break;

        const auto now = Clock::now();
        if (progress) {
          last_progress = now;
          continue;
        }
        if (!lists_empty && outstanding_ == 0 && received_.size() == expected_.size()) {
          throw ProtocolError("rank " + std::to_string(rank_) +
                              ": no task can become ready (dependency cycle)");
        }
        if (std::chrono::duration<double>(now - last_progress).count() >
            d_.options_.watchdog_seconds) {
          throw TransportError("rank " + std::to_string(rank_) + ": no progress within " +
                               std::to_string(d_.options_.watchdog_seconds) + " s");
        }
        std::unique_lock lock(cmutex_);
        ccv_.wait_for(lock, std::chrono::microseconds(100), [&] { return !done_.empty(); });
      }
    } catch (...) {
      abort_.store(true);
      stop_pool();
      throw;
    }
    stop_pool();
    rethrow_worker_error();

    for (int t : let.owned) {
      if (m_deps_[t] != 0 || m2l_deps_[t] != 0 || l_deps_[t] != 0)
        throw ProtocolError("dependency counters not drained for temporal cluster " +
                            std::to_string(t));
      for (int z : tree_.temporal(t).st_clusters) {
        const auto& c = tree_.cluster(z);
        if (!c.is_leaf()) continue;
        const int ex = tree_.mesh().n_space();
        for (int kt = c.step_begin; kt < c.step_end; ++kt)
          for (int kx : c.triangles) {
            const std::size_t i = static_cast<std::size_t>(kt) * ex + kx;
            f[i] = f_far_[i] + f_near_[i];
          }
      }
    }
  }

 private:
  std::span<double> slot(std::vector<double>& v, int z) {
    return {v.data() + static_cast<std::size_t>(z) * ts_, ts_};
  }

  bool ready(int list, int t) const {
    switch (list) {
      case 0: return m_deps_[t] == 0;
      case 1: return l_deps_[t] == 0;
      case 2: return m2l_deps_[t] == 0;
      default: return true;
    }
  }

  std::atomic<int>& remaining(Job job, int t) {
    return remaining_[static_cast<std::size_t>(job) * n_t_ + t];
  }

  void issue(Job job, int t) {
    std::vector<int> st;
    for (int z : tree_.temporal(t).st_clusters) {
      const auto& c = tree_.cluster(z);
      bool use = false;
      switch (job) {
        case Job::m: use = op_.needs_moments(z); break;
        case Job::m2l: use = !c.interaction.empty(); break;
        case Job::l: use = c.parent >= 0 && op_.needs_locals(c.parent); break;
        case Job::n: use = c.is_leaf() && !op_.nearfield().by_target[z].empty(); break;
        case Job::l2t: use = c.is_leaf() && op_.needs_locals(z); break;
      }
      if (use) st.push_back(z);
    }
    const int grain = std::max(1, d_.options_.grain);
    std::vector<Item> items;
    for (std::size_t i = 0; i < st.size(); i += grain) {
      Item item{job, t, {}};
      for (std::size_t j = i; j < std::min(st.size(), i + grain); ++j) item.st.push_back(st[j]);
      items.push_back(std::move(item));
    }
    ++outstanding_;
    if (items.empty()) {
      complete(job, t);
      return;
    }
    remaining(job, t).store(static_cast<int>(items.size()));
    {
      std::lock_guard lock(qmutex_);
      for (auto& item : items) queue_.push_back(std::move(item));
    }
    qcv_.notify_all();
  }

  void enter(Slot s, int z) {
    if (!d_.options_.audit_writes) return;
    if (writers_[static_cast<std::size_t>(s) * n_st_ + z].fetch_add(1) != 0) ++collisions_;
  }
  void leave(Slot s, int z) {
    if (!d_.options_.audit_writes) return;
    writers_[static_cast<std::size_t>(s) * n_st_ + z].fetch_sub(1);
  }

  void record(std::string name, const char* category, int worker, Clock::time_point start,
              Clock::time_point end) {
    if (!d_.options_.trace) return;
    std::lock_guard lock(trace_mutex_);
    events.push_back({std::move(name), category, rank_, worker, micros(t0_, start),
                      micros(start, end)});
  }

  void execute(const Item& item, int worker) {
    for (int z : item.st) {
      const auto& c = tree_.cluster(z);
      const auto start = Clock::now();
      const char* cat = "";
      switch (item.job) {
        case Job::m:
          enter(slot_mu, z);
          if (c.is_leaf()) {
            op_.s2m(z, w_, slot(mu_, z));
            cat = "S2M";
          } else {
            for (int ch : c.children) op_.m2m(ch, slot(mu_, ch), slot(mu_, z));
            cat = "M2M";
          }
          leave(slot_mu, z);
          break;
        case Job::m2l:
          enter(slot_lam_m2l, z);
          for (int src : c.interaction) op_.m2l(z, src, slot(mu_, src), slot(lam_m2l_, z));
          leave(slot_lam_m2l, z);
          cat = "M2L";
          break;
        case Job::l:
          enter(slot_lam_down, z);
          op_.l2l(z, slot(total_, c.parent), slot(lam_down_, z));
          leave(slot_lam_down, z);
          cat = "L2L";
          break;
        case Job::l2t:
          enter(slot_f_far, z);
          op_.l2t(z, slot(total_, z), f_far_);
          leave(slot_f_far, z);
          cat = "L2T";
          break;
        case Job::n:
          enter(slot_f_near, z);
          op_.nearfield_apply(z, w_, f_near_);
          leave(slot_f_near, z);
          cat = "NF";
          break;
      }
      record(std::string(cat) + " z" + std::to_string(z), cat, worker, start, Clock::now());
    }
    if (remaining(item.job, item.temporal).fetch_sub(1) == 1) {
      {
        std::lock_guard lock(cmutex_);
        done_.push_back({item.job, item.temporal});
      }
      ccv_.notify_one();
    }
  }

  void worker_loop(int worker) {
    for (;;) {
      Item item;
      {
        std::unique_lock lock(qmutex_);
        qcv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
        if (queue_.empty()) return;
        item = std::move(queue_.front());
        queue_.pop_front();
      }
      try {
        execute(item, worker);
      } catch (...) {
        std::lock_guard lock(emutex_);
        if (!error_) error_ = std::current_exception();
        abort_.store(true);
      }
    }
  }

  void rethrow_worker_error() {
    std::lock_guard lock(emutex_);
    if (error_) std::rethrow_exception(error_);
  }

  std::vector<double> pack(const std::vector<double>& buffer, int t) const {
    const auto& st = tree_.temporal(t).st_clusters;
    std::vector<double> out;
    out.reserve(st.size() * ts_);
    for (int z : st) {
      const auto* p = buffer.data() + static_cast<std::size_t>(z) * ts_;
      out.insert(out.end(), p, p + ts_);
    }
    return out;
  }

  void send(int dest, int t, MessageKind kind, const std::vector<double>& buffer) {
    const auto start = Clock::now();
    Message msg{rank_, t, kind, pack(buffer, t)};
    const std::size_t bytes = wire_header_size + 8 * msg.payload.size();
    transport_.send(dest, msg);
    sent.push_back({rank_, dest, t, kind, bytes});
    record(std::string("SEND ") + message_kind_name(kind) + " t" + std::to_string(t), "SEND", 0,
           start, Clock::now());
  }

  void complete(Job job, int t) {
    --outstanding_;
    const auto& work = d_.work_;
    const auto& owner = d_.assignment_.owner;
    const auto& tc = tree_.temporal(t);
    switch (job) {
      case Job::m: {
        if (tc.parent >= 0 && work[tc.parent].m) {
          if (owner[tc.parent] == rank_) --m_deps_[tc.parent];
          else send(owner[tc.parent], t, MessageKind::moments_to_parent, mu_);
        }
        std::set<int> remote;
        for (int j : d_.targets_[t]) {
          if (!work[j].m2l) continue;
          if (owner[j] == rank_) --m2l_deps_[j];
          else remote.insert(owner[j]);
        }
        for (int r : remote) send(r, t, MessageKind::moments_to_interaction, mu_);
        break;
      }
      case Job::m2l:
      case Job::l:
        if (--final_pending_[t] == 0) finalize(t);
        break;
      case Job::n:
      case Job::l2t:
        break;
    }
  }

  void finalize(int t) {
    const auto& tc = tree_.temporal(t);
    bool any_leaf = false;
    for (int z : tc.st_clusters) {
      if (!op_.needs_locals(z)) continue;
      enter(slot_total, z);
      auto a = slot(lam_m2l_, z);
      auto b = slot(lam_down_, z);
      auto out = slot(total_, z);
      for (std::size_t i = 0; i < ts_; ++i) out[i] = a[i] + b[i];
      leave(slot_total, z);
      any_leaf = any_leaf || tree_.cluster(z).is_leaf();
    }
    if (any_leaf) issue(Job::l2t, t);
    const auto& work = d_.work_;
    const auto& owner = d_.assignment_.owner;
    std::set<int> remote;
    for (int c : {tc.left, tc.right}) {
      if (c < 0 || !work[c].l) continue;
      if (owner[c] == rank_) --l_deps_[c];
      else remote.insert(owner[c]);
    }
    for (int r : remote) send(r, t, MessageKind::locals_to_child, total_);
  }

  void handle(Message&& msg) {
    const auto start = Clock::now();
    const auto key = std::make_tuple(msg.sender, msg.cluster, static_cast<int>(msg.kind));
    if (!expected_.count(key) || !received_.insert(key).second) {
      throw ProtocolError("rank " + std::to_string(rank_) + ": unexpected message (cluster " +
                          std::to_string(msg.cluster) + ", " + message_kind_name(msg.kind) +
                          ") from rank " + std::to_string(msg.sender));
    }
    const auto& tc = tree_.temporal(msg.cluster);
    if (msg.payload.size() != tc.st_clusters.size() * ts_)
      throw ProtocolError("payload size does not match the cluster");
    auto& target = msg.kind == MessageKind::locals_to_child ? total_ : mu_;
    for (std::size_t i = 0; i < tc.st_clusters.size(); ++i) {
      const int z = tc.st_clusters[i];
      std::copy_n(msg.payload.data() + i * ts_, ts_, target.data() + static_cast<std::size_t>(z) * ts_);
    }
    const auto& work = d_.work_;
    const auto& owner = d_.assignment_.owner;
    switch (msg.kind) {
      case MessageKind::moments_to_parent:
        --m_deps_[tc.parent];
        break;
      case MessageKind::moments_to_interaction:
        for (int j : d_.targets_[msg.cluster])
          if (work[j].m2l && owner[j] == rank_) --m2l_deps_[j];
        break;
      case MessageKind::locals_to_child:
        for (int c : {tc.left, tc.right})
          if (c >= 0 && work[c].l && owner[c] == rank_) --l_deps_[c];
        break;
    }
    record(std::string("RECV ") + message_kind_name(msg.kind) + " t" + std::to_string(msg.cluster),
           "RECV", 0, start, Clock::now());
  }

  DistributedFmm& d_;
  const FmmOperator& op_;
  const ClusterTree& tree_;
  int rank_;
  std::span<const double> w_;
  std::atomic<bool>& abort_;
  Clock::time_point t0_;
  Transport& transport_;
  std::size_t ts_;
  std::size_t n_st_;
  std::size_t n_t_;

  std::vector<double> mu_, lam_m2l_, lam_down_, total_, f_far_, f_near_;
  std::vector<int> m_deps_, m2l_deps_, l_deps_, final_pending_;
  std::set<std::tuple<int, int, int>> expected_, received_;
  int outstanding_ = 0;

  std::mutex qmutex_;
  std::condition_variable qcv_;
  std::deque<Item> queue_;
  bool stop_ = false;

  std::mutex cmutex_;
  std::condition_variable ccv_;
  std::vector<std::pair<Job, int>> done_;
  std::unique_ptr<std::atomic<int>[]> remaining_;

  std::unique_ptr<std::atomic<int>[]> writers_;
  std::atomic<std::size_t> collisions_{0};

  std::mutex trace_mutex_;
  std::mutex emutex_;
  std::exception_ptr error_;
};

DistributedFmm::DistributedFmm(const FmmOperator& op, int n_ranks, RuntimeOptions options,
                               TransportKind transport, DeliveryDelay delay)
    : op_(&op), options_(options) {
  if (options_.workers < 0) throw ConfigError("worker count must be >= 0");
  const auto& tree = op.tree();
  assignment_ = assign_clusters(tree, n_ranks);
  work_ = temporal_work(op);
  for (int r = 0; r < n_ranks; ++r) {
    lets_.push_back(build_let(r, tree, assignment_));
    lists_.push_back(build_task_lists(lets_.back(), tree, work_, assignment_));
  }
  planned_ = planned_messages(tree, work_, assignment_);
  targets_.assign(tree.temporal().size(), {});
  for (const auto& t : tree.temporal())
    for (int j : t.interaction) targets_[j].push_back(t.id);
  if (transport == TransportKind::tcp) {
    tcp_ = std::make_unique<TcpNetwork>(n_ranks);
    for (int r = 0; r < n_ranks; ++r) endpoints_.push_back(&tcp_->endpoint(r));
  } else {
    inproc_ = std::make_unique<InProcessNetwork>(n_ranks, delay);
    for (int r = 0; r < n_ranks; ++r) endpoints_.push_back(&inproc_->endpoint(r));
  }
}

DistributedFmm::~DistributedFmm() = default;

void DistributedFmm::apply(std::span<const double> w, std::span<double> f) {
  if (w.size() != op_->n_dofs() || f.size() != op_->n_dofs())
    throw std::invalid_argument("vector length does not match the mesh");
  for (auto* ep : endpoints_) ep->begin_round();
  std::atomic<bool> abort{false};
  const auto t0 = Clock::now();
  const int n = n_ranks();
  std::vector<std::unique_ptr<Rank>> ranks;
  for (int r = 0; r < n; ++r) ranks.push_back(std::make_unique<Rank>(*this, r, w, abort, t0));
  std::vector<std::exception_ptr> errors(n);
  std::mutex first_mutex;
  int first = -1;
  {
    std::vector<std::thread> threads;
    for (int r = 0; r < n; ++r) {
      threads.emplace_back([&, r] {
        try {
          ranks[r]->run(f);
        } catch (...) {
          errors[r] = std::current_exception();
          std::lock_guard lock(first_mutex);
          if (first < 0 && !abort.exchange(true)) first = r;
          abort.store(true);
        }
      });
    }
    for (auto& th : threads) th.join();
  }
  trace_.clear();
  messages_.clear();
  write_collisions_ = 0;
  tasks_executed_ = {};
  for (auto& r : ranks) {
    trace_.insert(trace_.end(), r->events.begin(), r->events.end());
    messages_.insert(messages_.end(), r->sent.begin(), r->sent.end());
    write_collisions_ += r->collisions();
    for (int k = 0; k < 4; ++k) tasks_executed_[k] += r->executed[k];
  }
  std::sort(trace_.begin(), trace_.end(), [](const TraceEvent& a, const TraceEvent& b) {
    return std::tie(a.start_us, a.rank, a.worker) < std::tie(b.start_us, b.rank, b.worker);
  });
  if (first >= 0) std::rethrow_exception(errors[first]);
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<double> DistributedFmm::apply(const std::vector<double>& w) {
  std::vector<double> f(w.size(), 0.0);
  apply(std::span<const double>(w), std::span<double>(f));
  return f;
}

std::size_t count_backward_messages(const ClusterTree& tree,
                                    const std::vector<MessageRecord>& messages) {
  std::size_t bad = 0;
  for (const auto& m : messages) {
    const auto& s = tree.temporal(m.cluster);
    if (m.kind == MessageKind::moments_to_parent) {
      if (s.parent < 0 || s.interval.hi > tree.temporal(s.parent).interval.hi) ++bad;
    } else if (m.kind == MessageKind::moments_to_interaction) {
      for (const auto& t : tree.temporal()) {
        if (std::find(t.interaction.begin(), t.interaction.end(), m.cluster) ==
            t.interaction.end())
          continue;
        if (s.interval.hi > t.interval.lo) ++bad;
      }
    }
  }
  return bad;
}

void write_trace_json(std::ostream& out, const std::vector<TraceEvent>& events) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : events) {
    arr.push_back({{"name", e.name},
                   {"category", e.category},
                   {"rank", e.rank},
                   {"worker", e.worker},
                   {"start_us", e.start_us},
                   {"dur_us", e.dur_us},
                   {"cat", e.category},
                   {"ph", "X"},
                   {"ts", e.start_us},
                   {"dur", e.dur_us},
                   {"pid", e.rank},
                   {"tid", e.worker}});
  }
  out << arr.dump(1) << '\n';
}

TraceSummary summarize_trace(const std::vector<TraceEvent>& events) {
  TraceSummary s;
  std::map<std::pair<int, int>, std::vector<const TraceEvent*>> lanes;
  for (const auto& e : events) {
    s.total_us[e.category] += e.dur_us;
    const bool compute = e.category != "SEND" && e.category != "RECV";
    if (!compute) continue;
    if (e.worker == 0) ++s.scheduler_compute_events;
    else lanes[{e.rank, e.worker}].push_back(&e);
  }
  for (auto& [lane, ev] : lanes) {
    std::sort(ev.begin(), ev.end(),
              [](const TraceEvent* a, const TraceEvent* b) { return a->start_us < b->start_us; });
    for (std::size_t i = 1; i < ev.size(); ++i) {
      const double gap = ev[i]->start_us - (ev[i - 1]->start_us + ev[i - 1]->dur_us);
      s.max_idle_gap_us = std::max(s.max_idle_gap_us, gap);
    }
  }
  return s;
}

}  // namespace stfmm
