#pragma once

#include <map>
#include <string>
#include <vector>

#include "tpsched/scenario.hpp"
#include "tpsched/sim.hpp"

namespace tpsched {

// Runs every node of the scenario over one shared simulated timeline.
// Hyperperiods follow each node's configured offset; messages flow over
// the scenario links with global timestamps.
inline std::map<std::string, TraceLog> run_cluster(const Scenario& scenario, usec_t until) {
  SimEngine engine(scenario);
  return engine.run(until);
}

struct ScatterParams {
  usec_t hyperperiod = 250000;  // 250 ms or 100 ms
  int ipa_load_percent = 100;   // <= 50, or 100
};

// Three satellites, each running the emergency-response chain as critical
// tasks, an orbital-maintenance actor in a short partition and four image
// processing actors in two partitions. Satellite 1 receives a scatter
// command that fans out to a 500 ms thruster activation on every node.
//
// Task id layout, node n in {1,2,3}:
//   n001 command proxy   n002/n003 trajectory planning (publish/subscribe)
//   n004 state feed      n005 thruster control (the activation task)
//   n010/n011 orbital maintenance (publish/subscribe)
//   n021..n024 image processing
inline Scenario scatter_scenario(const ScatterParams& params) {
  if (params.hyperperiod != 250000 && params.hyperperiod != 100000)
    fail(Errc::UnsupportedParams, "hyperperiod must be 250 ms or 100 ms");
  if (params.ipa_load_percent != 100 && !(params.ipa_load_percent > 0 && params.ipa_load_percent <= 50))
    fail(Errc::UnsupportedParams, "image-processing load must be <= 50 or exactly 100 percent");

  Scenario s;
  s.name = "scatter_h" + std::to_string(params.hyperperiod / 1000) + "_l" +
           std::to_string(params.ipa_load_percent);
  s.tick_quantum = 4000;
  s.cap_window_frames = 1;
  s.horizon = 2000000;
  s.seed = 1;

  // Two image-processing partitions take 40% of the hyperperiod each, the
  // orbital-maintenance partition 8%; the rest is idle fill.
  usec_t h = params.hyperperiod;
  usec_t ipa_dur = h * 2 / 5;
  usec_t om_dur = h * 2 / 25;

  for (int n = 1; n <= 3; ++n) {
    NodeSpec node;
    node.name = "sat" + std::to_string(n);
    node.cpus = 1;
    node.hyperperiod_offset = 0;
    node.partitions = {
        {1, h, ipa_dur, "ipa_a"},
        {2, h, ipa_dur, "ipa_b"},
        {3, h, om_dur, "orbital"},
    };
    s.nodes.push_back(std::move(node));
  }

  auto add_task = [&](int n, task_id_t local, const std::string& actor, Criticality crit, int prio,
                      partition_id_t part, WorkloadModel wl) {
    TaskSpec t;
    t.node = "sat" + std::to_string(n);
    t.tcb.task_id = n * 1000 + local;
    t.tcb.actor = actor + std::to_string(n);
    t.tcb.criticality = crit;
    t.tcb.priority = prio;
    t.tcb.partition = part;
    t.tcb.cpu_affinity = 0;
    t.tcb.cap_percent = 100;
    t.workload = wl;
    s.tasks.push_back(std::move(t));
  };

  WorkloadModel ipa_wl;
  if (params.ipa_load_percent == 100) {
    ipa_wl.kind = WorkloadModel::Kind::CpuBound;
  } else {
    // Each partition hosts two actors; each takes half the configured
    // partition load, released once per partition period.
    ipa_wl.kind = WorkloadModel::Kind::Periodic;
    ipa_wl.period = h;
    ipa_wl.budget = ipa_dur * params.ipa_load_percent / 200;
  }

  auto event_driven = [](usec_t service) {
    WorkloadModel w;
    w.kind = WorkloadModel::Kind::EventDriven;
    w.service_time = service;
    return w;
  };
  auto periodic = [](usec_t period, usec_t budget) {
    WorkloadModel w;
    w.kind = WorkloadModel::Kind::Periodic;
    w.period = period;
    w.budget = budget;
    return w;
  };

  for (int n = 1; n <= 3; ++n) {
    add_task(n, 1, "command_proxy", Criticality::Critical, 90, kSystemPartition, event_driven(1000));
    add_task(n, 2, "trajectory", Criticality::Critical, 88, kSystemPartition, event_driven(2000));
    add_task(n, 3, "trajectory", Criticality::Critical, 87, kSystemPartition, event_driven(2000));
    add_task(n, 4, "module_proxy", Criticality::Critical, 80, kSystemPartition, periodic(1000000, 2000));
    add_task(n, 5, "module_proxy", Criticality::Critical, 85, kSystemPartition, event_driven(500000));
    add_task(n, 10, "orbital", Criticality::Application, 50, 3, event_driven(1000));
    add_task(n, 11, "orbital", Criticality::Application, 50, 3, event_driven(1000));
    add_task(n, 21, "ipa_a1_", Criticality::Application, 30, 1, ipa_wl);
    add_task(n, 22, "ipa_a2_", Criticality::Application, 29, 1, ipa_wl);
    add_task(n, 23, "ipa_b1_", Criticality::Application, 30, 2, ipa_wl);
    add_task(n, 24, "ipa_b2_", Criticality::Application, 29, 2, ipa_wl);
  }

  // Full mesh, symmetric latency, no jitter: emergency latency must depend
  // only on the chain itself.
  for (int a = 1; a <= 3; ++a)
    for (int b = 1; b <= 3; ++b)
      if (a != b) s.links.push_back({"sat" + std::to_string(a), "sat" + std::to_string(b), 1000, 0});

  auto edge = [&](task_id_t from, task_id_t to, EdgeKind kind) { s.graph.edges.push_back({from, to, kind}); };
  for (int n = 1; n <= 3; ++n) {
    task_id_t base = n * 1000;
    edge(base + 1, base + 2, EdgeKind::PointToPoint);  // command -> trajectory publish
    for (int m = 1; m <= 3; ++m)                       // new command fans out cluster-wide
      edge(base + 2, m * 1000 + 3, EdgeKind::GroupPublish);
    edge(base + 3, base + 5, EdgeKind::PointToPoint);  // trajectory subscribe -> thrusters
    edge(base + 4, base + 10, EdgeKind::PointToPoint); // state feed -> orbital publish
    for (int m = 1; m <= 3; ++m)                       // state fans out to every subscriber
      edge(base + 10, m * 1000 + 11, EdgeKind::GroupPublish);
  }

  // The scatter command reaches satellite 1 at a fixed phase (30 ms) past a
  // hyperperiod boundary, for both supported hyperperiods.
  s.commands.push_back({1030000, 1001, 1});
  return s;
}

}  // namespace tpsched
