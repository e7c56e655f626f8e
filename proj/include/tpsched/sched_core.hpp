#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tpsched/frame_config.hpp"
#include "tpsched/model.hpp"
#include "tpsched/runqueue.hpp"

namespace tpsched {

inline constexpr usec_t kNoCeiling = std::numeric_limits<usec_t>::max();

struct SchedulerConfig {
  int num_cpus = 1;
  usec_t tick_quantum = 4000;  // 250 Hz
  int cap_window_frames = 1;   // cap window length N, in major frames
  bool cap_enforcement = true;
};

// Minor-frame cursor driven by the global tick.
struct FrameClock {
  usec_t hp_start = 0;      // start of the current hyperperiod
  usec_t mf_start = 0;      // start of the current minor frame
  std::size_t cur_frame = 0;
  usec_t next_switch = 0;   // mf_start + cur_frame.duration
  bool firstrun = false;    // frame installed, hyperperiod not yet started
  bool started = false;
  usec_t start_offset = 0;  // delay from install to hp_start
  usec_t hp_target = 0;     // install time + start_offset
};

struct CapAccounting {
  int window_frames = 1;
  usec_t window_start = 0;
  int wraps_since_reset = 0;
};

// Execution ceiling per cap window. Application tasks are bounded against
// their partition duration, critical tasks against the whole hyperperiod;
// both scale with the window length and the CPU count.
inline usec_t cap_ceiling(const TaskControlBlock& task, const MajorFrame& frame,
                          const CapAccounting& window, int num_cpus) {
  if (task.cap_percent >= 100) return kNoCeiling;
  usec_t base = 0;
  switch (task.criticality) {
    case Criticality::Critical:
      base = frame.hyperperiod;
      break;
    case Criticality::Application: {
      const PartitionSpec* p = frame.find_partition(task.partition);
      base = p ? p->duration : 0;
      break;
    }
    case Criticality::BestEffort:
      return kNoCeiling;
  }
  return static_cast<usec_t>(task.cap_percent) * base * window.window_frames * num_cpus / 100;
}

struct FrameSwitchOutcome {
  bool started = false;   // hyperperiod began at this tick
  int advanced = 0;       // minor frames passed
  bool wrapped = false;
  bool window_reset = false;
};

struct PickResult {
  int prio_index = kMaxRtPrio;  // kMaxRtPrio means no task
  std::optional<task_id_t> task;
};

struct DispatchDecision {
  std::optional<task_id_t> task;  // empty -> CPU idles
  bool switched = false;
};

// Per-node scheduler: per-CPU runqueue sets, the minor-frame clock, CPU-cap
// accounting and online frame reconfiguration. All mutation is serialized
// through the owning event loop; reconfiguration must stay atomic with
// respect to dispatch even if CPUs are ever spread over real threads.
class Scheduler {
 public:
  Scheduler(std::string node, SchedulerConfig cfg, TraceSink* sink)
      : node_(std::move(node)), cfg_(cfg), sink_(sink) {
    window_.window_frames = cfg.cap_window_frames;
    rqs_.resize(static_cast<std::size_t>(cfg.num_cpus));
    for (int c = 0; c < cfg.num_cpus; ++c) rqs_[static_cast<std::size_t>(c)].cpu = c;
  }

  const std::string& node() const noexcept { return node_; }
  const SchedulerConfig& config() const noexcept { return cfg_; }
  SchedulerState state() const noexcept { return state_; }
  const FrameClock& clock() const noexcept { return clock_; }
  const CapAccounting& cap_window() const noexcept { return window_; }
  bool has_frame() const noexcept { return has_frame_; }
  const MajorFrame& installed_frame() const { return installed_; }
  int last_pick_inspections() const noexcept { return last_pick_inspections_; }

  void add_task(TaskControlBlock tcb) {
    check_tcb(tcb);
    if (tcb.cpu_affinity < 0 || tcb.cpu_affinity >= cfg_.num_cpus)
      fail(Errc::ScenarioInvalid, "task " + std::to_string(tcb.task_id) + ": cpu affinity out of range");
    if (tasks_.count(tcb.task_id))
      fail(Errc::ScenarioInvalid, "duplicate task id " + std::to_string(tcb.task_id));
    tasks_.emplace(tcb.task_id, TaskState{std::move(tcb), false});
  }

  TaskControlBlock& task(task_id_t id) { return tasks_.at(id).tcb; }
  const TaskControlBlock& task(task_id_t id) const { return tasks_.at(id).tcb; }
  bool runnable(task_id_t id) const { return tasks_.at(id).queued; }

  std::optional<task_id_t> current(int cpu) const { return rqs_[static_cast<std::size_t>(cpu)].current_task; }

  // Partition owning the CPU right now: the current minor frame when the
  // clock runs, idle otherwise.
  partition_id_t active_partition() const noexcept {
    if (!clock_.started) return kIdlePartition;
    return installed_.minors[clock_.cur_frame].partition;
  }

  void make_runnable(task_id_t id, usec_t) {
    TaskState& ts = tasks_.at(id);
    if (ts.queued) return;
    RunQueueSet& rq = rqs_[static_cast<std::size_t>(ts.tcb.cpu_affinity)];
    switch (ts.tcb.criticality) {
      case Criticality::Critical:
        rq.system_queue.enqueue_tail(id, ts.tcb.priority);
        break;
      case Criticality::Application:
        rq.queue_for(ts.tcb.partition).enqueue_tail(id, ts.tcb.priority);
        break;
      case Criticality::BestEffort:
        rq.best_effort_queue.add(id);
        break;
    }
    ts.queued = true;
  }

  void block_task(task_id_t id, usec_t) {
    TaskState& ts = tasks_.at(id);
    if (!ts.queued) return;
    RunQueueSet& rq = rqs_[static_cast<std::size_t>(ts.tcb.cpu_affinity)];
    switch (ts.tcb.criticality) {
      case Criticality::Critical:
        rq.system_queue.remove(id, ts.tcb.priority);
        break;
      case Criticality::Application:
        rq.queue_for(ts.tcb.partition).remove(id, ts.tcb.priority);
        break;
      case Criticality::BestEffort:
        rq.best_effort_queue.remove(id);
        break;
    }
    ts.queued = false;
  }

  // Charge the task currently on `cpu` for dt of execution.
  void account_execution(int cpu, usec_t dt) {
    auto cur = rqs_[static_cast<std::size_t>(cpu)].current_task;
    if (!cur || dt <= 0) return;
    TaskControlBlock& t = tasks_.at(*cur).tcb;
    t.exec_time_in_window += dt;
    t.total_exec_time += dt;
  }

  // Hyperperiod start delay, used to line hyperperiods up across nodes.
  // Must be set before the clock starts for the pending frame.
  void set_hyperperiod_offset(usec_t offset) {
    if (offset < 0) fail(Errc::ScenarioInvalid, "negative hyperperiod offset");
    if (has_frame_ && clock_.started)
      fail(Errc::OffsetAfterStart, "hyperperiod offset set after the global tick started");
    clock_.start_offset = offset;
    if (has_frame_) clock_.hp_target = install_time_ + offset;
  }

  // Installs a new major frame without stopping the node. Application
  // dispatch is gated off for the duration of the swap and the in-flight
  // minor frame is abandoned; the next global tick restarts the
  // hyperperiod at hp_target. The first installation of a node's frame is
  // configuration rather than reconfiguration and is not traced.
  void update_major_frame(const MajorFrame& frame, usec_t now, bool emit_trace = true) {
    if (in_update_) fail(Errc::ConcurrentUpdate, "major frame update already in progress");
    auto report = validate_major_frame(frame);
    if (!report.valid)
      fail(Errc::InvalidFrame, "frame rejected: " + std::string(to_string(report.violations.front().constraint)) +
                                   " (" + report.violations.front().detail + ")");
    in_update_ = true;
    if (emit_trace) emit_reconfig(now, "phase=app_inactive");
    state_ = SchedulerState::AppInactive;

    installed_ = fill_empty(frame);
    has_frame_ = true;
    install_time_ = now;
    clock_.firstrun = true;
    clock_.started = false;
    clock_.cur_frame = 0;
    clock_.hp_target = now + clock_.start_offset;

    state_ = SchedulerState::AppActive;
    if (emit_trace)
      emit_reconfig(now, "phase=app_active;hp_target=" + std::to_string(clock_.hp_target) +
                             ";hyperperiod=" + std::to_string(installed_.hyperperiod));
    in_update_ = false;
  }

  // Runs on CPU0 every tick quantum. Starts the hyperperiod once hp_target
  // is reached, then walks the circular minor-frame list. Boundaries are
  // exact; only their observation is tick-quantized.
  FrameSwitchOutcome global_tick(usec_t now) {
    FrameSwitchOutcome out;
    if (!has_frame_) return out;
    if (clock_.firstrun) {
      if (now < clock_.hp_target) return out;
      clock_.firstrun = false;
      clock_.started = true;
      clock_.hp_start = clock_.hp_target;
      clock_.mf_start = clock_.hp_start;
      clock_.cur_frame = 0;
      clock_.next_switch = clock_.mf_start + installed_.minors[0].duration;
      window_.window_start = clock_.hp_start;
      window_.wraps_since_reset = 0;
      reset_window_usage();
      out.started = true;
      out.window_reset = true;
      emit_frame_switch(now, clock_.hp_start, true, true, true);
    }
    while (clock_.started && now >= clock_.next_switch) {
      usec_t boundary = clock_.next_switch;
      clock_.cur_frame = (clock_.cur_frame + 1) % installed_.minors.size();
      clock_.mf_start = boundary;
      clock_.next_switch = boundary + installed_.minors[clock_.cur_frame].duration;
      bool wrap = clock_.cur_frame == 0;
      bool window_reset = false;
      if (wrap) {
        clock_.hp_start = boundary;
        out.wrapped = true;
        if (++window_.wraps_since_reset >= window_.window_frames) {
          window_.window_start = boundary;
          window_.wraps_since_reset = 0;
          reset_window_usage();
          window_reset = true;
          out.window_reset = true;
        }
      }
      ++out.advanced;
      emit_frame_switch(now, boundary, wrap, window_reset, false);
    }
    return out;
  }

  // Highest-priority choice from one partition queue (system or
  // application). With cap enforcement off this reads one list head. With
  // it on, disabled tasks from a previous window are re-enabled on sight;
  // tasks disabled in the current window are skipped. When everything is
  // disabled an application partition still yields its top task (work
  // conservation); the system partition yields nothing — the critical cap
  // is a hard limit there.
  PickResult pick_next_task(int cpu, partition_id_t partition, bool cap_enabled, usec_t now) {
    if (partition != kSystemPartition && !is_app_partition(partition))
      fail(Errc::ScenarioInvalid, "pick_next_task wants the system partition or an application partition");
    RunQueueSet& rq = rqs_[static_cast<std::size_t>(cpu)];
    ScanResult s = scan_queue(rq, rq.queue_for(partition), cap_enabled, now);
    if (s.task) return {s.index, s.task};
    if (is_app_partition(partition) && s.fallback) return {s.fallback_index, s.fallback};
    return {};
  }

  // Full dispatch for one CPU: system partition first, then the partition
  // owning the current minor frame (unless the scheduler is APP_INACTIVE
  // or the clock has not started), then best effort. A cap-exhausted
  // critical task is used only when nothing else in the system is ready.
  DispatchDecision schedule(int cpu, usec_t now, const std::string& reason) {
    RunQueueSet& rq = rqs_[static_cast<std::size_t>(cpu)];
    std::optional<task_id_t> prev = rq.current_task;
    bool cap = cfg_.cap_enforcement;

    if (cap && prev) update_disabled_bit(*prev, cpu, now);

    ScanResult sys = scan_queue(rq, rq.system_queue, cap, now);
    std::optional<task_id_t> next = sys.task;
    if (!next && state_ == SchedulerState::AppActive) {
      partition_id_t p = active_partition();
      if (is_app_partition(p)) {
        ScanResult app = scan_queue(rq, rq.queue_for(p), cap, now);
        next = app.task ? app.task : app.fallback;
      }
    }
    if (!next) next = pick_best_effort(rq);
    if (!next) next = sys.fallback;

    DispatchDecision out{next, false};
    if (prev != next) {
      rq.current_task = next;
      out.switched = true;
      TraceEvent ev;
      ev.timestamp = now;
      ev.node = node_;
      ev.cpu = cpu;
      ev.kind = TraceEventKind::ContextSwitch;
      ev.prev_task = prev;
      ev.next_task = next;
      ev.partition = next ? tasks_.at(*next).tcb.partition : active_partition();
      ev.detail = "reason=" + reason;
      emit(ev);
    }
    return out;
  }

  usec_t ceiling_for(const TaskControlBlock& t) const {
    if (!has_frame_) return kNoCeiling;
    return cap_ceiling(t, installed_, window_, cfg_.num_cpus);
  }

 private:
  struct TaskState {
    TaskControlBlock tcb;
    bool queued = false;
  };

  struct ScanResult {
    int index = kMaxRtPrio;
    std::optional<task_id_t> task;
    int fallback_index = kMaxRtPrio;
    std::optional<task_id_t> fallback;  // head of the highest occupied level
  };

  void emit(const TraceEvent& ev) {
    if (sink_) sink_->emit(ev);
  }

  void emit_reconfig(usec_t now, std::string detail) {
    TraceEvent ev;
    ev.timestamp = now;
    ev.node = node_;
    ev.cpu = 0;
    ev.kind = TraceEventKind::Reconfig;
    ev.partition = kIdlePartition;
    ev.detail = std::move(detail);
    emit(ev);
  }

  void emit_frame_switch(usec_t now, usec_t boundary, bool wrap, bool window_reset, bool start) {
    TraceEvent ev;
    ev.timestamp = now;
    ev.node = node_;
    ev.cpu = 0;
    ev.kind = TraceEventKind::FrameSwitch;
    ev.partition = installed_.minors[clock_.cur_frame].partition;
    ev.detail = "boundary=" + std::to_string(boundary) + ";hp=" + (wrap ? "1" : "0");
    if (window_reset) ev.detail += ";win=1";
    if (start) ev.detail += ";start=1";
    emit(ev);
  }

  void reset_window_usage() {
    for (auto& [id, ts] : tasks_) ts.tcb.exec_time_in_window = 0;
  }

  void update_disabled_bit(task_id_t id, int cpu, usec_t now) {
    TaskControlBlock& t = tasks_.at(id).tcb;
    if (t.cap_percent >= 100 || t.disabled) return;
    usec_t ceiling = ceiling_for(t);
    if (ceiling != kNoCeiling && t.exec_time_in_window >= ceiling) {
      t.disabled = true;
      t.last_disabled_time = now;
      TraceEvent ev;
      ev.timestamp = now;
      ev.node = node_;
      ev.cpu = cpu;
      ev.kind = TraceEventKind::CapDisable;
      ev.prev_task = id;
      ev.partition = t.partition;
      ev.detail = "used=" + std::to_string(t.exec_time_in_window) + ";ceiling=" + std::to_string(ceiling);
      emit(ev);
    }
  }

  ScanResult scan_queue(RunQueueSet& rq, PriorityQueue& q, bool cap_enabled, usec_t now) {
    last_pick_inspections_ = 0;
    ScanResult r;
    int prio = q.highest_prio();
    if (prio < 0) return r;
    if (!cap_enabled) {
      last_pick_inspections_ = 1;
      r.index = prio;
      r.task = q.list_at(prio).front();
      r.fallback_index = prio;
      r.fallback = r.task;
      return r;
    }
    r.fallback_index = prio;
    r.fallback = q.list_at(prio).front();
    while (prio >= 0) {
      for (task_id_t id : q.list_at(prio)) {
        ++last_pick_inspections_;
        TaskControlBlock& t = tasks_.at(id).tcb;
        if (t.disabled) {
          if (t.last_disabled_time < window_.window_start) {
            // Disabled in a previous cap window: bring it back.
            t.disabled = false;
            TraceEvent ev;
            ev.timestamp = now;
            ev.node = node_;
            ev.cpu = rq.cpu;
            ev.kind = TraceEventKind::CapReenable;
            ev.next_task = id;
            ev.partition = t.partition;
            ev.detail = "window_start=" + std::to_string(window_.window_start);
            emit(ev);
            r.index = prio;
            r.task = id;
            return r;
          }
          continue;  // exhausted in this window
        }
        r.index = prio;
        r.task = id;
        return r;
      }
      prio = q.next_prio_below(prio);
    }
    return r;  // every task is disabled in this window
  }

  std::optional<task_id_t> pick_best_effort(RunQueueSet& rq) {
    std::optional<task_id_t> best;
    usec_t best_rt = 0;
    for (task_id_t id : rq.best_effort_queue.tasks()) {
      usec_t rt = tasks_.at(id).tcb.total_exec_time;
      if (!best || rt < best_rt || (rt == best_rt && id < *best)) {
        best = id;
        best_rt = rt;
      }
    }
    return best;
  }

  std::string node_;
  SchedulerConfig cfg_;
  TraceSink* sink_ = nullptr;

  std::map<task_id_t, TaskState> tasks_;
  std::vector<RunQueueSet> rqs_;
  SchedulerState state_ = SchedulerState::AppActive;
  MajorFrame installed_;
  bool has_frame_ = false;
  usec_t install_time_ = 0;
  bool in_update_ = false;
  FrameClock clock_;
  CapAccounting window_;
  int last_pick_inspections_ = 0;
};

}  // namespace tpsched
