#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tpsched/scenario.hpp"
#include "tpsched/sched_core.hpp"

namespace tpsched {

enum class SimEventKind : std::uint8_t {
  Tick,  // internal; ticks are generated, never queued
  TaskRelease,
  TaskBlock,
  MessageArrival,
  InjectReconfig,
  InjectCommand,
};

struct SimMessage {
  std::optional<task_id_t> from;
  task_id_t to = 0;
  std::int64_t command_id = 0;
  bool origin = false;  // true for injected commands entering the system
};

struct SimEvent {
  usec_t at = 0;
  SimEventKind kind = SimEventKind::TaskRelease;
  task_id_t task = 0;     // TaskRelease / TaskBlock
  SimMessage message;     // MessageArrival / InjectCommand
  std::string node;       // InjectReconfig
  MajorFrame frame;       // InjectReconfig
};

// Time-ordered pending set; ties resolve by insertion sequence so replays
// are exact.
class EventQueue {
 public:
  void push(SimEvent ev) { pending_.emplace(Key{ev.at, seq_++}, std::move(ev)); }
  bool empty() const noexcept { return pending_.empty(); }
  usec_t next_time() const noexcept { return pending_.begin()->first.at; }
  SimEvent pop() {
    SimEvent ev = std::move(pending_.begin()->second);
    pending_.erase(pending_.begin());
    return ev;
  }

 private:
  struct Key {
    usec_t at;
    std::uint64_t seq;
    bool operator<(const Key& o) const noexcept { return at != o.at ? at < o.at : seq < o.seq; }
  };
  std::map<Key, SimEvent> pending_;
  std::uint64_t seq_ = 0;
};

// Deterministic event-driven execution of a scenario: nodes advance in
// lock-step over one shared timeline; every TICK runs the global tick and
// then the per-CPU dispatch; workload completions are exact while
// scheduling acts at ticks and at the events that invoke it.
class SimEngine {
 public:
  explicit SimEngine(Scenario scenario) : scenario_(std::move(scenario)) {
    validate_scenario(scenario_);
    rng_.seed(scenario_.seed);
    for (const auto& ns : scenario_.nodes) {
      auto node = std::make_unique<NodeRuntime>(ns, scenario_);
      node_index_[ns.name] = nodes_.size();
      nodes_.push_back(std::move(node));
    }
    for (const auto& ts : scenario_.tasks) {
      TaskRuntime rt;
      rt.spec = ts;
      if (ts.workload.kind == WorkloadModel::Kind::CpuBound) rt.infinite = true;
      tasks_.emplace(ts.tcb.task_id, std::move(rt));
      node_of_task_[ts.tcb.task_id] = node_index_.at(ts.node);
      nodes_[node_index_.at(ts.node)]->sched.add_task(ts.tcb);
    }
    // Install frames, apply offsets, seed workloads and injections. All of
    // this happens at t = 0, before the first tick.
    for (auto& node : nodes_) {
      if (auto frame = build_node_frame(node->spec))
        node->sched.update_major_frame(*frame, 0, /*emit_trace=*/false);
      node->sched.set_hyperperiod_offset(node->spec.hyperperiod_offset);
    }
    for (auto& [id, rt] : tasks_) {
      switch (rt.spec.workload.kind) {
        case WorkloadModel::Kind::CpuBound:
          scheduler_of(id).make_runnable(id, 0);
          break;
        case WorkloadModel::Kind::Periodic:
          queue_.push({0, SimEventKind::TaskRelease, id, {}, {}, {}});
          break;
        case WorkloadModel::Kind::OneShot:
          queue_.push({rt.spec.workload.at, SimEventKind::TaskRelease, id, {}, {}, {}});
          break;
        case WorkloadModel::Kind::EventDriven:
          break;
      }
    }
    for (const auto& c : scenario_.commands) {
      SimEvent ev;
      ev.at = c.at;
      ev.kind = SimEventKind::InjectCommand;
      ev.message = SimMessage{std::nullopt, c.target, c.command_id, true};
      queue_.push(std::move(ev));
    }
    for (const auto& r : scenario_.reconfigs) {
      SimEvent ev;
      ev.at = r.at;
      ev.kind = SimEventKind::InjectReconfig;
      ev.node = r.node;
      ev.frame = r.frame;
      queue_.push(std::move(ev));
    }
    for (auto& node : nodes_) mark_all_dirty(*node, "start");
  }

  // Queue an event mid-run. Injections cannot be scheduled in the past.
  void inject(SimEvent ev) {
    if (ev.at < now_) fail(Errc::PastTimestamp, "injection at " + std::to_string(ev.at) + " before now");
    queue_.push(std::move(ev));
  }

  void inject_command(usec_t at, task_id_t target, std::int64_t command_id) {
    SimEvent ev;
    ev.at = at;
    ev.kind = SimEventKind::InjectCommand;
    ev.message = SimMessage{std::nullopt, target, command_id, true};
    inject(std::move(ev));
  }

  void inject_reconfig(usec_t at, std::string node, MajorFrame frame) {
    SimEvent ev;
    ev.at = at;
    ev.kind = SimEventKind::InjectReconfig;
    ev.node = std::move(node);
    ev.frame = std::move(frame);
    inject(std::move(ev));
  }

  Scheduler& scheduler(const std::string& node) { return nodes_[node_index_.at(node)]->sched; }

  // Runs the clock forward to `until` (exclusive) and returns one trace per
  // node.
  std::map<std::string, TraceLog> run(usec_t until) {
    if (until <= 0) fail(Errc::HorizonZero, "simulation horizon must be positive");
    while (true) {
      usec_t next = next_tick_;
      if (!queue_.empty()) next = std::min(next, queue_.next_time());
      for (auto& node : nodes_)
        for (int cpu = 0; cpu < node->spec.cpus; ++cpu)
          if (auto t = completion_time(*node, cpu)) next = std::min(next, *t);
      if (next >= until) {
        advance_to(until);
        break;
      }
      advance_to(next);
      int guard = 0;
      bool progressed = true;
      while (progressed) {
        if (++guard > 1000000)
          fail(Errc::ScenarioInvalid, "live-lock at t=" + std::to_string(now_) +
                                          " (zero-cost event cycle in the interaction graph?)");
        progressed = false;
        progressed |= handle_completions();
        progressed |= process_due_events();
        if (now_ == next_tick_) {
          for (auto& node : nodes_) {
            node->sched.global_tick(now_);
            mark_all_dirty(*node, "tick");
          }
          next_tick_ += scenario_.tick_quantum;
          progressed = true;
        }
        reschedule_dirty();
      }
    }
    std::map<std::string, TraceLog> out;
    for (auto& node : nodes_) out.emplace(node->spec.name, node->sink.log());
    return out;
  }

 private:
  struct NodeRuntime {
    NodeRuntime(const NodeSpec& ns, const Scenario& sc)
        : spec(ns),
          sink(ns.name),
          sched(ns.name,
                SchedulerConfig{ns.cpus, sc.tick_quantum, sc.cap_window_frames, sc.cap_enabled()},
                &sink) {
      dirty.assign(static_cast<std::size_t>(ns.cpus), std::string());
    }
    NodeSpec spec;
    TraceCollector sink;
    Scheduler sched;
    std::vector<std::string> dirty;  // non-empty = needs reschedule, value = reason
  };

  struct TaskRuntime {
    TaskSpec spec;
    bool infinite = false;
    usec_t remaining = 0;
    bool serving = false;
    SimMessage current_msg;
    std::deque<SimMessage> mailbox;
    bool done = false;
  };

  NodeRuntime& node_of(task_id_t id) { return *nodes_[node_of_task_.at(id)]; }
  Scheduler& scheduler_of(task_id_t id) { return node_of(id).sched; }

  void mark_dirty(NodeRuntime& node, int cpu, const std::string& reason) {
    auto& slot = node.dirty[static_cast<std::size_t>(cpu)];
    if (slot.empty()) slot = reason;
  }

  void mark_all_dirty(NodeRuntime& node, const std::string& reason) {
    for (int cpu = 0; cpu < node.spec.cpus; ++cpu) mark_dirty(node, cpu, reason);
  }

  std::optional<usec_t> completion_time(NodeRuntime& node, int cpu) {
    auto cur = node.sched.current(cpu);
    if (!cur) return std::nullopt;
    const TaskRuntime& rt = tasks_.at(*cur);
    if (rt.infinite) return std::nullopt;
    return now_ + rt.remaining;
  }

  void advance_to(usec_t t) {
    usec_t dt = t - now_;
    if (dt <= 0) return;
    for (auto& node : nodes_) {
      for (int cpu = 0; cpu < node->spec.cpus; ++cpu) {
        auto cur = node->sched.current(cpu);
        if (!cur) continue;
        node->sched.account_execution(cpu, dt);
        TaskRuntime& rt = tasks_.at(*cur);
        if (!rt.infinite) rt.remaining -= dt;
      }
    }
    now_ = t;
  }

  bool handle_completions() {
    bool any = false;
    for (auto& node : nodes_) {
      for (int cpu = 0; cpu < node->spec.cpus; ++cpu) {
        auto cur = node->sched.current(cpu);
        if (!cur || !node->sched.runnable(*cur)) continue;
        TaskRuntime& rt = tasks_.at(*cur);
        if (rt.infinite || rt.remaining > 0) continue;
        any = true;
        complete_burst(*node, cpu, rt);
      }
    }
    return any;
  }

  void complete_burst(NodeRuntime& node, int cpu, TaskRuntime& rt) {
    task_id_t id = rt.spec.tcb.task_id;
    switch (rt.spec.workload.kind) {
      case WorkloadModel::Kind::Periodic:
        emit_sends(node, cpu, rt, 0);
        node.sched.block_task(id, now_);
        mark_dirty(node, cpu, "block");
        break;
      case WorkloadModel::Kind::OneShot:
        rt.done = true;
        node.sched.block_task(id, now_);
        mark_dirty(node, cpu, "block");
        break;
      case WorkloadModel::Kind::EventDriven:
        emit_sends(node, cpu, rt, rt.current_msg.command_id);
        if (!rt.mailbox.empty()) {
          // Next pending message; the task stays runnable.
          rt.current_msg = rt.mailbox.front();
          rt.mailbox.pop_front();
          rt.remaining = rt.spec.workload.service_time;
        } else {
          rt.serving = false;
          node.sched.block_task(id, now_);
          mark_dirty(node, cpu, "block");
        }
        break;
      case WorkloadModel::Kind::CpuBound:
        break;
    }
  }

  // One message per outgoing interaction edge; group publishes were
  // expanded to per-subscriber edges when the graph was built.
  void emit_sends(NodeRuntime& node, int cpu, TaskRuntime& rt, std::int64_t command_id) {
    task_id_t from = rt.spec.tcb.task_id;
    for (const auto& edge : scenario_.graph.edges) {
      if (edge.from != from) continue;
      const TaskSpec& to_spec = tasks_.at(edge.to).spec;
      usec_t deliver = now_;
      if (to_spec.node != rt.spec.node) {
        const Link* link = find_link(rt.spec.node, to_spec.node);
        usec_t jitter = 0;
        if (link->jitter > 0)
          jitter = static_cast<usec_t>(std::uniform_int_distribution<std::int64_t>(0, link->jitter)(rng_));
        deliver = now_ + link->latency + jitter;
        // FIFO per link: never deliver before an earlier send on the same link.
        usec_t& last = last_delivery_[{rt.spec.node, to_spec.node}];
        deliver = std::max(deliver, last);
        last = deliver;
      }
      TraceEvent ev;
      ev.timestamp = now_;
      ev.node = rt.spec.node;
      ev.cpu = cpu;
      ev.kind = TraceEventKind::MessageSend;
      ev.prev_task = from;
      ev.partition = rt.spec.tcb.partition;
      ev.detail = "cmd=" + std::to_string(command_id) + ";to=" + std::to_string(edge.to) +
                  ";to_node=" + to_spec.node + ";deliver=" + std::to_string(deliver);
      node.sink.emit(ev);

      SimEvent arrival;
      arrival.at = deliver;
      arrival.kind = SimEventKind::MessageArrival;
      arrival.message = SimMessage{from, edge.to, command_id, false};
      queue_.push(std::move(arrival));
    }
  }

  const Link* find_link(const std::string& from, const std::string& to) {
    for (const auto& l : scenario_.links)
      if (l.from == from && l.to == to) return &l;
    return nullptr;  // unreachable: validate_scenario checked every edge
  }

  bool process_due_events() {
    bool any = false;
    while (!queue_.empty() && queue_.next_time() == now_) {
      SimEvent ev = queue_.pop();
      any = true;
      switch (ev.kind) {
        case SimEventKind::TaskRelease:
          handle_release(ev.task);
          break;
        case SimEventKind::TaskBlock: {
          NodeRuntime& node = node_of(ev.task);
          node.sched.block_task(ev.task, now_);
          mark_dirty(node, tasks_.at(ev.task).spec.tcb.cpu_affinity, "block");
          break;
        }
        case SimEventKind::MessageArrival:
        case SimEventKind::InjectCommand:
          handle_arrival(ev.message);
          break;
        case SimEventKind::InjectReconfig: {
          if (!scenario_.reconfig_privilege)
            fail(Errc::NoPrivilege, "scenario lacks reconfiguration privilege");
          auto idx = node_index_.find(ev.node);
          if (idx == node_index_.end())
            fail(Errc::ScenarioInvalid, "reconfiguration for unknown node " + ev.node);
          NodeRuntime& node = *nodes_[idx->second];
          node.sched.update_major_frame(ev.frame, now_);
          mark_all_dirty(node, "reconfig");
          break;
        }
        case SimEventKind::Tick:
          break;  // ticks are generated internally
      }
    }
    return any;
  }

  void handle_release(task_id_t id) {
    auto it = tasks_.find(id);
    if (it == tasks_.end()) fail(Errc::ScenarioInvalid, "release for unknown task " + std::to_string(id));
    TaskRuntime& rt = it->second;
    NodeRuntime& node = node_of(id);
    const WorkloadModel& wl = rt.spec.workload;
    if (wl.kind == WorkloadModel::Kind::Periodic) {
      rt.remaining += wl.budget;
      queue_.push({now_ + wl.period, SimEventKind::TaskRelease, id, {}, {}, {}});
    } else if (wl.kind == WorkloadModel::Kind::OneShot) {
      if (rt.done) return;
      rt.remaining = wl.busy;
    }
    if (!node.sched.runnable(id)) {
      node.sched.make_runnable(id, now_);
      mark_dirty(node, rt.spec.tcb.cpu_affinity, "release");
    }
  }

  void handle_arrival(const SimMessage& msg) {
    auto it = tasks_.find(msg.to);
    if (it == tasks_.end()) fail(Errc::ScenarioInvalid, "message for unknown task " + std::to_string(msg.to));
    TaskRuntime& rt = it->second;
    NodeRuntime& node = node_of(msg.to);
    TraceEvent ev;
    ev.timestamp = now_;
    ev.node = rt.spec.node;
    ev.cpu = rt.spec.tcb.cpu_affinity;
    ev.kind = TraceEventKind::MessageRecv;
    ev.next_task = msg.to;
    if (msg.from) ev.prev_task = msg.from;
    ev.partition = rt.spec.tcb.partition;
    ev.detail = "cmd=" + std::to_string(msg.command_id) + ";origin=" + (msg.origin ? "1" : "0");
    node.sink.emit(ev);

    if (rt.spec.workload.kind != WorkloadModel::Kind::EventDriven) return;  // others ignore mail
    rt.mailbox.push_back(msg);
    if (!rt.serving) {
      rt.serving = true;
      rt.current_msg = rt.mailbox.front();
      rt.mailbox.pop_front();
      rt.remaining = rt.spec.workload.service_time;
      node.sched.make_runnable(msg.to, now_);
      mark_dirty(node, rt.spec.tcb.cpu_affinity, "msg");
    }
  }

  void reschedule_dirty() {
    for (auto& node : nodes_) {
      for (int cpu = 0; cpu < node->spec.cpus; ++cpu) {
        auto& reason = node->dirty[static_cast<std::size_t>(cpu)];
        if (reason.empty()) continue;
        std::string why = reason;
        reason.clear();
        node->sched.schedule(cpu, now_, why);
      }
    }
  }

  Scenario scenario_;
  std::vector<std::unique_ptr<NodeRuntime>> nodes_;
  std::map<std::string, std::size_t> node_index_;
  std::map<task_id_t, TaskRuntime> tasks_;
  std::map<task_id_t, std::size_t> node_of_task_;
  std::map<std::pair<std::string, std::string>, usec_t> last_delivery_;
  EventQueue queue_;
  std::mt19937_64 rng_;
  usec_t now_ = 0;
  usec_t next_tick_ = 0;
};

// Single-node convenience wrapper over the engine.
inline TraceLog run_node(const Scenario& scenario, usec_t until) {
  if (scenario.nodes.size() != 1)
    fail(Errc::ScenarioInvalid, "run_node expects exactly one node");
  SimEngine engine(scenario);
  auto traces = engine.run(until);
  return traces.begin()->second;
}

}  // namespace tpsched
