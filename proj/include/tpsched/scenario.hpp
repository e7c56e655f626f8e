#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tpsched/frame_config.hpp"
#include "tpsched/model.hpp"

namespace tpsched {

// How a task consumes CPU. Periodic tasks run `budget` once per `period`;
// cpu-bound tasks never block; event-driven tasks burn `service_time` per
// received message; oneshot tasks run a single burst at a fixed time.
struct WorkloadModel {
  enum class Kind : std::uint8_t { CpuBound, Periodic, EventDriven, OneShot };
  Kind kind = Kind::CpuBound;
  usec_t period = 0;        // Periodic
  usec_t budget = 0;        // Periodic
  usec_t service_time = 0;  // EventDriven
  usec_t at = 0;            // OneShot
  usec_t busy = 0;          // OneShot

  friend bool operator==(const WorkloadModel&, const WorkloadModel&) = default;
};

struct NodeSpec {
  std::string name;
  int cpus = 1;
  usec_t hyperperiod_offset = 0;
  std::vector<PartitionSpec> partitions;
  std::vector<MinorFrame> minors;  // empty: frame is generated from partitions

  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

struct TaskSpec {
  std::string node;
  TaskControlBlock tcb;  // static attributes; accounting fields start zeroed
  WorkloadModel workload;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

// Directed network link. Delivery keeps FIFO order per link even under
// jitter.
struct Link {
  std::string from;
  std::string to;
  usec_t latency = 0;
  usec_t jitter = 0;  // uniform bound added to latency

  friend bool operator==(const Link&, const Link&) = default;
};

enum class EdgeKind : std::uint8_t { PointToPoint, GroupPublish };

struct InteractionEdge {
  task_id_t from = 0;
  task_id_t to = 0;
  EdgeKind kind = EdgeKind::PointToPoint;

  friend bool operator==(const InteractionEdge&, const InteractionEdge&) = default;
};

struct InteractionGraph {
  std::vector<InteractionEdge> edges;

  friend bool operator==(const InteractionGraph&, const InteractionGraph&) = default;
};

struct CommandInjection {
  usec_t at = 0;
  task_id_t target = 0;
  std::int64_t command_id = 0;

  friend bool operator==(const CommandInjection&, const CommandInjection&) = default;
};

struct ReconfigInjection {
  usec_t at = 0;
  std::string node;
  MajorFrame frame;

  friend bool operator==(const ReconfigInjection&, const ReconfigInjection&) = default;
};

// Declarative description of a whole experiment: nodes, frames, tasks,
// workloads, links, interaction graph and injected events.
struct Scenario {
  std::string name = "scenario";
  usec_t tick_quantum = 4000;
  int cap_window_frames = 1;
  std::optional<bool> cap_enforcement;  // unset: enabled iff any task has cap < 100
  bool reconfig_privilege = true;
  usec_t horizon = 0;
  std::uint64_t seed = 1;
  std::vector<NodeSpec> nodes;
  std::vector<TaskSpec> tasks;
  std::vector<Link> links;
  InteractionGraph graph;
  std::vector<CommandInjection> commands;
  std::vector<ReconfigInjection> reconfigs;

  const NodeSpec* find_node(const std::string& name_) const noexcept {
    for (const auto& n : nodes)
      if (n.name == name_) return &n;
    return nullptr;
  }
  const TaskSpec* find_task(task_id_t id) const noexcept {
    for (const auto& t : tasks)
      if (t.tcb.task_id == id) return &t;
    return nullptr;
  }
  bool cap_enabled() const noexcept {
    if (cap_enforcement) return *cap_enforcement;
    for (const auto& t : tasks)
      if (t.tcb.cap_percent < 100) return true;
    return false;
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// Builds the node's major frame: explicit minors when given, otherwise
// generated from the partition set. Nodes without partitions have no frame
// (only critical and best-effort tasks may live there).
inline std::optional<MajorFrame> build_node_frame(const NodeSpec& node) {
  if (node.partitions.empty()) return std::nullopt;
  if (node.minors.empty()) return generate_major_frame(node.partitions);
  std::vector<usec_t> periods;
  for (const auto& p : node.partitions) periods.push_back(p.period);
  MajorFrame frame;
  frame.hyperperiod = hyperperiod_of(periods);
  frame.partitions = node.partitions;
  frame.minors = node.minors;
  return frame;
}

// Referential integrity plus frame validity for every node. Throws
// Errc::ScenarioInvalid / InvalidFrame with a description of the first
// problem found.
inline void validate_scenario(const Scenario& s) {
  auto bad = [](const std::string& why) { fail(Errc::ScenarioInvalid, why); };
  if (s.tick_quantum <= 0) bad("tick quantum must be positive");
  if (s.cap_window_frames < 1) bad("cap window must span at least one major frame");
  if (s.horizon < 0) bad("negative horizon");
  if (s.nodes.empty()) bad("scenario has no nodes");

  std::set<std::string> node_names;
  for (const auto& n : s.nodes) {
    if (!node_names.insert(n.name).second) bad("duplicate node " + n.name);
    if (n.cpus < 1) bad("node " + n.name + ": needs at least one cpu");
    if (n.hyperperiod_offset < 0) bad("node " + n.name + ": negative hyperperiod offset");
    if (auto frame = build_node_frame(n)) {
      auto report = validate_major_frame(*frame);
      if (!report.valid)
        fail(Errc::InvalidFrame, "node " + n.name + ": frame violates " +
                                     std::string(to_string(report.violations.front().constraint)) + " (" +
                                     report.violations.front().detail + ")");
    }
  }

  std::set<task_id_t> task_ids;
  std::map<std::string, Criticality> actor_crit;
  for (const auto& t : s.tasks) {
    if (!task_ids.insert(t.tcb.task_id).second) bad("duplicate task " + std::to_string(t.tcb.task_id));
    const NodeSpec* n = s.find_node(t.node);
    if (!n) bad("task " + std::to_string(t.tcb.task_id) + ": unknown node " + t.node);
    check_tcb(t.tcb);
    if (t.tcb.cpu_affinity >= n->cpus) bad("task " + std::to_string(t.tcb.task_id) + ": affinity out of range");
    if (t.tcb.criticality == Criticality::Application) {
      bool found = false;
      for (const auto& p : n->partitions) found = found || p.id == t.tcb.partition;
      if (!found)
        bad("task " + std::to_string(t.tcb.task_id) + ": partition " + std::to_string(t.tcb.partition) +
            " not defined on node " + t.node);
    }
    if (!t.tcb.actor.empty()) {
      auto [it, inserted] = actor_crit.emplace(t.tcb.actor, t.tcb.criticality);
      if (!inserted && it->second != t.tcb.criticality)
        bad("actor " + t.tcb.actor + ": tasks with mixed criticality levels");
    }
    const auto& w = t.workload;
    switch (w.kind) {
      case WorkloadModel::Kind::Periodic:
        if (w.period <= 0 || w.budget <= 0) bad("task " + std::to_string(t.tcb.task_id) + ": periodic workload needs positive period and budget");
        if (w.budget > w.period) bad("task " + std::to_string(t.tcb.task_id) + ": budget exceeds period");
        break;
      case WorkloadModel::Kind::EventDriven:
        if (w.service_time < 0) bad("task " + std::to_string(t.tcb.task_id) + ": negative service time");
        break;
      case WorkloadModel::Kind::OneShot:
        if (w.at < 0 || w.busy <= 0) bad("task " + std::to_string(t.tcb.task_id) + ": oneshot needs positive busy time");
        break;
      case WorkloadModel::Kind::CpuBound:
        break;
    }
  }

  for (const auto& l : s.links) {
    if (!s.find_node(l.from) || !s.find_node(l.to)) bad("link references unknown node");
    if (l.latency < 0 || l.jitter < 0) bad("link " + l.from + "->" + l.to + ": negative latency or jitter");
  }

  auto has_link = [&](const std::string& from, const std::string& to) {
    for (const auto& l : s.links)
      if (l.from == from && l.to == to) return true;
    return false;
  };
  for (const auto& e : s.graph.edges) {
    const TaskSpec* from = s.find_task(e.from);
    const TaskSpec* to = s.find_task(e.to);
    if (!from || !to) bad("interaction edge references unknown task");
    if (from->node != to->node && !has_link(from->node, to->node))
      bad("edge " + std::to_string(e.from) + "->" + std::to_string(e.to) + ": no link " + from->node + "->" +
          to->node);
  }

  for (const auto& c : s.commands) {
    if (c.at < 0) bad("command injection before time zero");
    if (!s.find_task(c.target)) bad("command targets unknown task " + std::to_string(c.target));
  }
  for (const auto& r : s.reconfigs) {
    if (r.at < 0) bad("reconfiguration before time zero");
    if (!s.find_node(r.node)) bad("reconfiguration targets unknown node " + r.node);
    auto report = validate_major_frame(r.frame);
    if (!report.valid)
      fail(Errc::InvalidFrame, "reconfiguration frame for " + r.node + " violates " +
                                   std::string(to_string(report.violations.front().constraint)));
  }
}

}  // namespace tpsched
