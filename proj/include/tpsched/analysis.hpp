#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tpsched/frame_config.hpp"
#include "tpsched/io_util.hpp"
#include "tpsched/model.hpp"
#include "tpsched/scenario.hpp"
#include "tpsched/sched_core.hpp"

namespace tpsched {

// ---------------------------------------------------------------------------
// Interval machinery shared by the audits.

struct Interval {
  usec_t start = 0;
  usec_t end = 0;  // half-open
  bool empty() const noexcept { return end <= start; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

// Sorted, disjoint, half-open intervals.
class IntervalSet {
 public:
  void add(usec_t a, usec_t b) {
    if (b <= a) return;
    std::vector<Interval> merged;
    bool placed = false;
    for (const auto& iv : v_) {
      if (iv.end < a || iv.start > b) {
        if (!placed && iv.start > b) {
          merged.push_back({a, b});
          placed = true;
        }
        merged.push_back(iv);
      } else {
        a = std::min(a, iv.start);
        b = std::max(b, iv.end);
      }
    }
    if (!placed) merged.push_back({a, b});
    std::sort(merged.begin(), merged.end(),
              [](const Interval& x, const Interval& y) { return x.start < y.start; });
    v_ = std::move(merged);
  }

  void add(const Interval& iv) { add(iv.start, iv.end); }

  bool intersects(usec_t a, usec_t b) const noexcept {
    for (const auto& iv : v_)
      if (iv.start < b && a < iv.end) return true;
    return false;
  }

  // Earliest instant inside both this set and [a, b), if any.
  std::optional<usec_t> first_overlap(usec_t a, usec_t b) const noexcept {
    for (const auto& iv : v_)
      if (iv.start < b && a < iv.end) return std::max(a, iv.start);
    return std::nullopt;
  }

  usec_t measure_within(usec_t a, usec_t b) const noexcept {
    usec_t total = 0;
    for (const auto& iv : v_) {
      usec_t lo = std::max(a, iv.start);
      usec_t hi = std::min(b, iv.end);
      if (hi > lo) total += hi - lo;
    }
    return total;
  }

  IntervalSet clipped(usec_t a, usec_t b) const {
    IntervalSet out;
    for (const auto& iv : v_) {
      usec_t lo = std::max(a, iv.start);
      usec_t hi = std::min(b, iv.end);
      if (hi > lo) out.add(lo, hi);
    }
    return out;
  }

  IntervalSet intersect(const IntervalSet& other) const {
    IntervalSet out;
    for (const auto& a : v_)
      for (const auto& b : other.v_) {
        usec_t lo = std::max(a.start, b.start);
        usec_t hi = std::min(a.end, b.end);
        if (hi > lo) out.add(lo, hi);
      }
    return out;
  }

  IntervalSet subtract(const IntervalSet& other) const {
    IntervalSet out;
    for (const auto& iv : v_) {
      usec_t cursor = iv.start;
      for (const auto& cut : other.v_) {
        if (cut.end <= cursor || cut.start >= iv.end) continue;
        if (cut.start > cursor) out.add(cursor, cut.start);
        cursor = std::max(cursor, cut.end);
      }
      if (cursor < iv.end) out.add(cursor, iv.end);
    }
    return out;
  }

  bool empty() const noexcept { return v_.empty(); }
  const std::vector<Interval>& intervals() const noexcept { return v_; }

 private:
  std::vector<Interval> v_;
};

// ---------------------------------------------------------------------------
// Trace reconstruction helpers.

struct ExecSlice {
  task_id_t task = 0;
  int cpu = 0;
  usec_t start = 0;
  usec_t end = 0;
};

inline usec_t trace_end(const TraceLog& trace) {
  return trace.events.empty() ? 0 : trace.events.back().timestamp;
}

// Execution intervals recovered from the context-switch log. Open slices
// are closed at `horizon`.
inline std::vector<ExecSlice> execution_slices(const TraceLog& trace, usec_t horizon) {
  std::map<int, std::pair<std::optional<task_id_t>, usec_t>> current;
  std::vector<ExecSlice> out;
  for (const auto& ev : trace.events) {
    if (ev.kind != TraceEventKind::ContextSwitch) continue;
    auto& [task, since] = current[ev.cpu];
    if (task && ev.timestamp > since) out.push_back({*task, ev.cpu, since, ev.timestamp});
    task = ev.next_task;
    since = ev.timestamp;
  }
  for (auto& [cpu, state] : current)
    if (state.first && horizon > state.second) out.push_back({*state.first, cpu, state.second, horizon});
  return out;
}

inline IntervalSet exec_intervals_of(const std::vector<ExecSlice>& slices, task_id_t task) {
  IntervalSet out;
  for (const auto& s : slices)
    if (s.task == task) out.add(s.start, s.end);
  return out;
}

struct PartitionSlice {
  partition_id_t partition = kIdlePartition;
  usec_t start = 0;
  usec_t end = 0;
};

// Active-partition timeline as observed: a FRAME_SWITCH opens a window at
// its (tick-quantized) timestamp; a reconfiguration closes it.
inline std::vector<PartitionSlice> partition_slices(const TraceLog& trace, usec_t horizon) {
  std::vector<PartitionSlice> out;
  std::optional<partition_id_t> active;
  usec_t since = 0;
  for (const auto& ev : trace.events) {
    bool closes = ev.kind == TraceEventKind::Reconfig &&
                  ioutil::detail_value(ev.detail, "phase") == "app_inactive";
    if (ev.kind != TraceEventKind::FrameSwitch && !closes) continue;
    if (active && ev.timestamp > since) out.push_back({*active, since, ev.timestamp});
    active = closes ? std::nullopt : std::optional<partition_id_t>(ev.partition);
    since = ev.timestamp;
  }
  if (active && horizon > since) out.push_back({*active, since, horizon});
  return out;
}

inline IntervalSet partition_active_intervals(const std::vector<PartitionSlice>& slices, partition_id_t p) {
  IntervalSet out;
  for (const auto& s : slices)
    if (s.partition == p) out.add(s.start, s.end);
  return out;
}

// Cap-window reset instants, as enforced (event timestamps of win=1
// FRAME_SWITCH records).
inline std::vector<usec_t> cap_window_starts(const TraceLog& trace) {
  std::vector<usec_t> out;
  for (const auto& ev : trace.events)
    if (ev.kind == TraceEventKind::FrameSwitch && ioutil::detail_value(ev.detail, "win") == "1")
      out.push_back(ev.timestamp);
  return out;
}

// Workload arrivals reconstructed from the scenario plus the message log —
// the ground truth for "was this task runnable", independent of what the
// scheduler chose to run.
inline std::vector<std::pair<usec_t, usec_t>> work_arrivals(const TaskSpec& task, const TraceLog& trace,
                                                            usec_t horizon) {
  std::vector<std::pair<usec_t, usec_t>> out;
  const WorkloadModel& w = task.workload;
  switch (w.kind) {
    case WorkloadModel::Kind::Periodic:
      for (usec_t t = 0; t < horizon; t += w.period) out.emplace_back(t, w.budget);
      break;
    case WorkloadModel::Kind::OneShot:
      if (w.at < horizon) out.emplace_back(w.at, w.busy);
      break;
    case WorkloadModel::Kind::EventDriven:
      for (const auto& ev : trace.events)
        if (ev.kind == TraceEventKind::MessageRecv && ev.next_task &&
            *ev.next_task == task.tcb.task_id)
          out.emplace_back(ev.timestamp, w.service_time);
      break;
    case WorkloadModel::Kind::CpuBound:
      break;
  }
  return out;
}

// Replays the backlog of one task: work arrives in bursts and drains at
// slope one while the trace shows the task executing. The task counts as
// runnable while backlog is positive or it is on the CPU.
inline IntervalSet replay_runnable_intervals(const TaskSpec& task, const TraceLog& trace, usec_t horizon) {
  IntervalSet out;
  if (task.workload.kind == WorkloadModel::Kind::CpuBound) {
    out.add(0, horizon);
    return out;
  }
  auto slices = execution_slices(trace, horizon);
  IntervalSet exec = exec_intervals_of(slices, task.tcb.task_id);

  enum class PointKind : int { ExecEnd = 0, Arrival = 1, ExecStart = 2 };
  struct Point {
    usec_t t;
    PointKind kind;
    usec_t amount;
  };
  std::vector<Point> points;
  for (const auto& [t, amount] : work_arrivals(task, trace, horizon))
    points.push_back({t, PointKind::Arrival, amount});
  for (const auto& iv : exec.intervals()) {
    points.push_back({iv.start, PointKind::ExecStart, 0});
    points.push_back({iv.end, PointKind::ExecEnd, 0});
  }
  std::stable_sort(points.begin(), points.end(), [](const Point& a, const Point& b) {
    return a.t != b.t ? a.t < b.t : static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });

  bool executing = false;
  usec_t backlog = 0;
  usec_t last_t = 0;
  std::optional<usec_t> open;
  auto advance = [&](usec_t t) {
    if (executing && backlog > 0) {
      usec_t used = std::min(backlog, t - last_t);
      if (used == backlog) {
        if (open) {
          out.add(*open, last_t + backlog);
          open.reset();
        }
        backlog = 0;
      } else {
        backlog -= used;
      }
    }
    last_t = t;
  };
  for (const auto& p : points) {
    advance(p.t);
    switch (p.kind) {
      case PointKind::Arrival:
        if (backlog == 0 && p.amount > 0 && !open) open = p.t;
        backlog += p.amount;
        break;
      case PointKind::ExecStart:
        executing = true;
        break;
      case PointKind::ExecEnd:
        executing = false;
        break;
    }
  }
  advance(horizon);
  if (open) out.add(*open, horizon);
  for (const auto& iv : exec.intervals()) out.add(iv.start, iv.end);  // running implies runnable
  return out;
}

// Windows during which the task was cap-blocked: from each CAP_DISABLE
// until the next cap-window reset.
inline IntervalSet cap_blocked_intervals(task_id_t task, const TraceLog& trace, usec_t horizon) {
  auto resets = cap_window_starts(trace);
  IntervalSet out;
  for (const auto& ev : trace.events) {
    if (ev.kind != TraceEventKind::CapDisable || !ev.prev_task || *ev.prev_task != task) continue;
    usec_t until = horizon;
    for (usec_t r : resets)
      if (r > ev.timestamp) {
        until = std::min(until, r);
        break;
      }
    out.add(ev.timestamp, until);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Emergency-response latency extraction.

struct LatencyRecord {
  std::int64_t command_id = 0;
  std::string node;
  usec_t send_ts = 0;        // command reception at the origin node
  usec_t activation_ts = 0;  // final task of the chain starts executing
  usec_t latency = 0;
};

struct LatencyReport {
  std::vector<LatencyRecord> records;
  std::int64_t mean_milli_us = 0;      // mean latency, milli-microseconds
  std::int64_t variance_milli_us2 = 0; // population variance, milli-us^2
};

inline void finish_latency_stats(LatencyReport& report) {
  if (report.records.empty()) return;
  __int128 sum = 0, sum_sq = 0;
  auto n = static_cast<__int128>(report.records.size());
  for (const auto& r : report.records) {
    sum += r.latency;
    sum_sq += static_cast<__int128>(r.latency) * r.latency;
  }
  report.mean_milli_us = static_cast<std::int64_t>((sum * 1000 + n / 2) / n);
  __int128 num = (n * sum_sq - sum * sum) * 1000;
  report.variance_milli_us2 = static_cast<std::int64_t>((num + (n * n) / 2) / (n * n));
}

// One record per node per command. The command's send timestamp is its
// reception at the origin (origin=1 recv); activation is the first dispatch
// of the last task that received the command on each node.
inline LatencyReport emergency_latencies(const std::map<std::string, TraceLog>& traces) {
  std::map<std::int64_t, usec_t> origin_ts;
  for (const auto& [name, log] : traces)
    for (const auto& ev : log.events)
      if (ev.kind == TraceEventKind::MessageRecv && ioutil::detail_value(ev.detail, "origin") == "1") {
        std::int64_t cmd = ioutil::detail_i64(ev.detail, "cmd");
        if (!origin_ts.count(cmd)) origin_ts[cmd] = ev.timestamp;
      }
  if (origin_ts.empty()) fail(Errc::IncompleteChain, "no injected command in the traces");

  LatencyReport report;
  for (const auto& [cmd, send_ts] : origin_ts) {
    for (const auto& [name, log] : traces) {
      // Last reception of this command on the node ends the chain there.
      std::ptrdiff_t recv_idx = -1;
      for (std::size_t i = 0; i < log.events.size(); ++i) {
        const auto& ev = log.events[i];
        if (ev.kind == TraceEventKind::MessageRecv && ev.next_task &&
            ioutil::detail_value(ev.detail, "cmd") == std::to_string(cmd))
          recv_idx = static_cast<std::ptrdiff_t>(i);
      }
      if (recv_idx < 0)
        fail(Errc::IncompleteChain, "command " + std::to_string(cmd) + " never reached node " + name);
      const auto& recv = log.events[static_cast<std::size_t>(recv_idx)];
      task_id_t target = *recv.next_task;

      std::optional<usec_t> activation;
      std::optional<task_id_t> running;  // on the target's cpu, just before the recv
      for (std::ptrdiff_t i = 0; i < recv_idx; ++i) {
        const auto& ev = log.events[static_cast<std::size_t>(i)];
        if (ev.kind == TraceEventKind::ContextSwitch && ev.cpu == recv.cpu) running = ev.next_task;
      }
      if (running && *running == target) {
        activation = recv.timestamp;
      } else {
        for (std::size_t i = static_cast<std::size_t>(recv_idx); i < log.events.size(); ++i) {
          const auto& ev = log.events[i];
          if (ev.kind == TraceEventKind::ContextSwitch && ev.next_task && *ev.next_task == target) {
            activation = ev.timestamp;
            break;
          }
        }
      }
      if (!activation)
        fail(Errc::IncompleteChain,
             "no activation of task " + std::to_string(target) + " on node " + name);
      report.records.push_back({cmd, name, send_ts, *activation, *activation - send_ts});
    }
  }
  finish_latency_stats(report);
  return report;
}

// ---------------------------------------------------------------------------
// Frame-switch jitter.

struct JitterStats {
  std::int64_t mean_milli_us = 0;
  usec_t max_us = 0;
  std::size_t samples = 0;
};

// Deviation of each observed FRAME_SWITCH from its ideal boundary (carried
// in the event). Boundaries restart cleanly at reconfigurations because the
// scheduler re-anchors them.
inline JitterStats jitter_stats(const TraceLog& trace) {
  __int128 sum = 0;
  JitterStats out;
  for (const auto& ev : trace.events) {
    if (ev.kind != TraceEventKind::FrameSwitch) continue;
    usec_t boundary = ioutil::detail_i64(ev.detail, "boundary");
    usec_t dev = ev.timestamp - boundary;
    sum += dev;
    out.max_us = std::max(out.max_us, dev);
    ++out.samples;
  }
  if (out.samples < 2) fail(Errc::InsufficientData, "need at least two frame switches");
  auto n = static_cast<__int128>(out.samples);
  out.mean_milli_us = static_cast<std::int64_t>((sum * 1000 + n / 2) / n);
  return out;
}

// ---------------------------------------------------------------------------
// CPU-cap audit.

struct CapViolation {
  std::string node;
  task_id_t task = 0;
  usec_t window_start = 0;
  usec_t window_end = 0;
  usec_t used = 0;
  usec_t ceiling = 0;
  usec_t instant = 0;        // first moment past the ceiling with a competitor
  task_id_t competitor = 0;  // the enabled runnable task that was passed over
};

// Flags every cap window in which a task ran past its ceiling while some
// other enabled task could have used the CPU. Runnability comes from the
// workload replay, never from the scheduler's own decisions; overruns with
// no eligible competitor are the work-conserving allowance and stay
// unflagged.
inline std::vector<CapViolation> cap_audit(const TraceLog& trace, const Scenario& scenario,
                                           usec_t tolerance = 0) {
  const NodeSpec* node = scenario.find_node(trace.node);
  if (!node) fail(Errc::ScenarioInvalid, "trace node " + trace.node + " not in scenario");
  usec_t horizon = trace_end(trace);
  auto slices = execution_slices(trace, horizon);
  auto part_slices = partition_slices(trace, horizon);
  auto resets = cap_window_starts(trace);
  std::vector<CapViolation> out;
  if (resets.empty()) return out;

  // Frame timeline for ceilings: the scenario's initial frame plus any
  // injected reconfigurations.
  std::vector<std::pair<usec_t, MajorFrame>> frames;
  if (auto f = build_node_frame(*node)) frames.emplace_back(0, *f);
  for (const auto& r : scenario.reconfigs)
    if (r.node == node->name) frames.emplace_back(r.at, r.frame);
  std::sort(frames.begin(), frames.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  auto frame_at = [&](usec_t t) -> const MajorFrame* {
    const MajorFrame* cur = nullptr;
    for (const auto& [at, f] : frames)
      if (at <= t) cur = &f;
    return cur;
  };

  std::vector<const TaskSpec*> node_tasks;
  for (const auto& t : scenario.tasks)
    if (t.node == node->name) node_tasks.push_back(&t);

  std::map<task_id_t, IntervalSet> runnable, blocked, exec;
  for (const TaskSpec* t : node_tasks) {
    runnable[t->tcb.task_id] = replay_runnable_intervals(*t, trace, horizon);
    blocked[t->tcb.task_id] = cap_blocked_intervals(t->tcb.task_id, trace, horizon);
    exec[t->tcb.task_id] = exec_intervals_of(slices, t->tcb.task_id);
  }

  CapAccounting acct;
  acct.window_frames = scenario.cap_window_frames;

  for (std::size_t w = 0; w < resets.size(); ++w) {
    usec_t w0 = resets[w];
    usec_t w1 = w + 1 < resets.size() ? resets[w + 1] : horizon;
    if (w1 <= w0) continue;
    for (const TaskSpec* t : node_tasks) {
      if (t->tcb.cap_percent >= 100) continue;
      const MajorFrame* frame = frame_at(w0);
      if (!frame) continue;
      usec_t ceiling = cap_ceiling(t->tcb, *frame, acct, node->cpus);
      const IntervalSet& own = exec[t->tcb.task_id];
      usec_t used = own.measure_within(w0, w1);
      if (used <= ceiling + tolerance) continue;

      // Instant at which cumulative use crossed the allowance.
      usec_t allowance = ceiling + tolerance;
      usec_t acc = 0;
      usec_t crossing = w1;
      IntervalSet in_window = own.clipped(w0, w1);
      for (const auto& iv : in_window.intervals()) {
        usec_t len = iv.end - iv.start;
        if (acc + len >= allowance) {
          crossing = iv.start + (allowance - acc);
          break;
        }
        acc += len;
      }

      // Look for an enabled competitor that was runnable while this task
      // ran beyond its allowance.
      std::optional<CapViolation> found;
      IntervalSet overrun = own.clipped(crossing, w1);
      for (const auto& seg : overrun.intervals()) {
        for (const TaskSpec* other : node_tasks) {
          if (other == t || other->tcb.cpu_affinity != t->tcb.cpu_affinity) continue;
          bool in_scope;
          if (t->tcb.criticality == Criticality::Critical) {
            in_scope = true;  // the critical cap yields to any ready task
          } else {
            in_scope = other->tcb.criticality == Criticality::Critical ||
                       (other->tcb.criticality == Criticality::Application &&
                        other->tcb.partition == t->tcb.partition);
          }
          if (!in_scope) continue;
          IntervalSet eligible =
              runnable[other->tcb.task_id].clipped(seg.start, seg.end).subtract(blocked[other->tcb.task_id]);
          if (other->tcb.criticality == Criticality::Application &&
              t->tcb.criticality == Criticality::Critical) {
            // Out-of-window application tasks cannot be dispatched and so
            // cannot indict the overrun.
            eligible = eligible.intersect(partition_active_intervals(part_slices, other->tcb.partition));
          }
          if (auto instant = eligible.first_overlap(seg.start, seg.end)) {
            CapViolation v;
            v.node = node->name;
            v.task = t->tcb.task_id;
            v.window_start = w0;
            v.window_end = w1;
            v.used = used;
            v.ceiling = ceiling;
            v.instant = *instant;
            v.competitor = other->tcb.task_id;
            if (!found || v.instant < found->instant) found = v;
          }
        }
        if (found) break;
      }
      if (found) out.push_back(*found);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Availability / response time.

// Monotone step-linear function: cumulative CPU time a partition can hand
// to its tasks, net of critical-task consumption.
struct AvailabilityCurve {
  std::vector<std::pair<usec_t, usec_t>> breakpoints;  // (time, cumulative)
  usec_t horizon = 0;

  usec_t value_at(usec_t t) const noexcept {
    if (breakpoints.empty() || t <= breakpoints.front().first) return 0;
    for (std::size_t i = 1; i < breakpoints.size(); ++i) {
      if (t <= breakpoints[i].first) {
        auto [t0, v0] = breakpoints[i - 1];
        auto [t1, v1] = breakpoints[i];
        if (v1 == v0) return v0;
        return v0 + std::min(t, t1) - t0;  // slope-1 segment
      }
    }
    return breakpoints.back().second;
  }

  usec_t total() const noexcept { return breakpoints.empty() ? 0 : breakpoints.back().second; }
};

// Default analysis span for response-time questions.
inline usec_t default_response_horizon(const MajorFrame& frame) { return 10 * frame.hyperperiod; }

// Availability of `partition` over [0, horizon): slope one inside the
// partition's windows minus the critical busy intervals, flat elsewhere.
inline AvailabilityCurve availability_curve(const MajorFrame& frame,
                                            const std::vector<Interval>& critical_load,
                                            partition_id_t partition, usec_t horizon) {
  auto report = validate_major_frame(frame);
  if (!report.valid) fail(Errc::InvalidFrame, "availability needs a valid frame");
  AvailabilityCurve curve;
  curve.horizon = horizon;
  if (horizon <= 0) return curve;

  IntervalSet windows;
  for (usec_t base = 0; base < horizon; base += frame.hyperperiod)
    for (const auto& m : frame.minors)
      if (m.partition == partition)
        windows.add(std::min(base + m.offset, horizon), std::min(base + m.end(), horizon));
  IntervalSet busy;
  for (const auto& iv : critical_load) busy.add(iv.start, iv.end);
  IntervalSet avail = windows.subtract(busy);

  curve.breakpoints.emplace_back(0, 0);
  usec_t t = 0, v = 0;
  for (const auto& iv : avail.intervals()) {
    if (iv.start > t) curve.breakpoints.emplace_back(iv.start, v);
    v += iv.end - iv.start;
    curve.breakpoints.emplace_back(iv.end, v);
    t = iv.end;
  }
  if (t < horizon) curve.breakpoints.emplace_back(horizon, v);
  return curve;
}

inline AvailabilityCurve availability_curve(const MajorFrame& frame,
                                            const std::vector<Interval>& critical_load,
                                            partition_id_t partition) {
  return availability_curve(frame, critical_load, partition, default_response_horizon(frame));
}

struct PeerDemand {
  usec_t budget = 0;
  usec_t period = 0;
};

// First time the submitted load staircase (own budget plus released peer
// demand) dips under the availability curve, scanned at 1 ms resolution.
// Empty result means unbounded within the curve's horizon.
inline std::optional<usec_t> response_time(usec_t budget, const std::vector<PeerDemand>& peers,
                                           const AvailabilityCurve& curve) {
  for (usec_t t = 0; t <= curve.horizon; t += 1000) {
    usec_t demand = budget;
    for (const auto& p : peers) demand += ((t + p.period - 1) / p.period) * p.budget;
    if (demand <= curve.value_at(t)) return t;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Gantt export.

enum class GanttFormat { Intervals, Svg };

inline GanttFormat gantt_format_from_string(const std::string& s) {
  if (s == "intervals") return GanttFormat::Intervals;
  if (s == "svg") return GanttFormat::Svg;
  fail(Errc::UnsupportedFormat, "unknown gantt format '" + s + "' (intervals|svg)");
}

inline constexpr const char* kGanttHeader = "# tpsched-gantt v1";

inline std::string export_gantt(const std::map<std::string, TraceLog>& traces, GanttFormat format) {
  if (traces.empty()) fail(Errc::InsufficientData, "no traces to render");
  std::ostringstream os;
  if (format == GanttFormat::Intervals) {
    os << kGanttHeader << '\n';
    for (const auto& [name, log] : traces) {
      usec_t horizon = trace_end(log);
      std::set<int> cpus;
      for (const auto& ev : log.events) cpus.insert(ev.cpu);
      if (cpus.empty()) cpus.insert(0);
      for (int cpu : cpus) os << "lane " << name << ' ' << cpu << '\n';
      for (const auto& ps : partition_slices(log, horizon))
        os << "frame " << name << ' ' << ps.start << ' ' << ps.end << ' '
           << ioutil::part_to_string(ps.partition) << '\n';
      auto slices = execution_slices(log, horizon);
      std::map<int, usec_t> cursor;
      for (const auto& s : slices) {
        usec_t& cur = cursor.emplace(s.cpu, 0).first->second;
        if (s.start > cur)
          os << "interval " << name << ' ' << s.cpu << ' ' << cur << ' ' << s.start << " idle -\n";
        os << "interval " << name << ' ' << s.cpu << ' ' << s.start << ' ' << s.end << ' ' << s.task
           << " -\n";
        cur = s.end;
      }
      for (auto& [cpu, cur] : cursor)
        if (cur < horizon) os << "interval " << name << ' ' << cpu << ' ' << cur << ' ' << horizon
                              << " idle -\n";
    }
    return os.str();
  }

  // Minimal deterministic SVG: one lane per (node, cpu), partition shading
  // behind task rectangles.
  usec_t horizon = 0;
  for (const auto& [name, log] : traces) horizon = std::max(horizon, trace_end(log));
  if (horizon == 0) horizon = 1;
  const int width = 1000, lane_h = 28, pad = 40;
  std::vector<std::pair<std::string, int>> lanes;
  for (const auto& [name, log] : traces) {
    std::set<int> cpus;
    for (const auto& ev : log.events) cpus.insert(ev.cpu);
    if (cpus.empty()) cpus.insert(0);
    for (int cpu : cpus) lanes.emplace_back(name, cpu);
  }
  auto x_of = [&](usec_t t) { return pad + static_cast<long long>(t) * width / horizon; };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << (width + 2 * pad) << "\" height=\""
     << (static_cast<int>(lanes.size()) * lane_h + 2 * pad) << "\">\n";
  static const char* palette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                  "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};
  for (std::size_t li = 0; li < lanes.size(); ++li) {
    const auto& [name, cpu] = lanes[li];
    const TraceLog& log = traces.at(name);
    int y = pad + static_cast<int>(li) * lane_h;
    os << "<text x=\"2\" y=\"" << (y + 18) << "\" font-size=\"10\">" << name << "/cpu" << cpu
       << "</text>\n";
    for (const auto& ps : partition_slices(log, trace_end(log)))
      os << "<rect x=\"" << x_of(ps.start) << "\" y=\"" << y << "\" width=\""
         << std::max<long long>(1, x_of(ps.end) - x_of(ps.start)) << "\" height=\"" << lane_h - 8
         << "\" fill=\"#eeeeee\"/>\n";
    std::map<task_id_t, int> color;
    for (const auto& s : execution_slices(log, trace_end(log))) {
      if (s.cpu != cpu) continue;
      int c = color.emplace(s.task, static_cast<int>(color.size()) % 10).first->second;
      os << "<rect x=\"" << x_of(s.start) << "\" y=\"" << (y + 2) << "\" width=\""
         << std::max<long long>(1, x_of(s.end) - x_of(s.start)) << "\" height=\"" << lane_h - 12
         << "\" fill=\"" << palette[c] << "\"><title>task " << s.task << " [" << s.start << ","
         << s.end << ")</title></rect>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

struct GanttInterval {
  std::string node;
  int cpu = 0;
  usec_t start = 0;
  usec_t end = 0;
  std::optional<task_id_t> task;  // empty = idle
};

// Re-parses the interval schema; the export/parse pair round-trips.
inline std::vector<GanttInterval> parse_gantt_intervals(const std::string& doc) {
  std::istringstream is(doc);
  std::string line;
  int line_no = 0;
  if (!std::getline(is, line) || line != kGanttHeader)
    fail(Errc::ParseError, "unsupported gantt document");
  std::vector<GanttInterval> out;
  while (std::getline(is, line)) {
    ++line_no;
    auto tok = ioutil::split(line);
    if (tok.empty() || tok[0] != "interval") continue;
    if (tok.size() != 7) fail(Errc::ParseError, "bad interval line " + std::to_string(line_no));
    GanttInterval gi;
    gi.node = tok[1];
    gi.cpu = static_cast<int>(ioutil::parse_i64(tok[2], line_no, "cpu"));
    gi.start = ioutil::parse_i64(tok[3], line_no, "start");
    gi.end = ioutil::parse_i64(tok[4], line_no, "end");
    if (tok[5] != "idle") gi.task = ioutil::parse_i64(tok[5], line_no, "task");
    out.push_back(std::move(gi));
  }
  return out;
}

}  // namespace tpsched
