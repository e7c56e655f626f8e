#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tpsched/io_util.hpp"
#include "tpsched/scenario.hpp"

namespace tpsched {

// Scenario file format: line-oriented, space-separated, one statement per
// line. '#' starts a comment.
//
//   # tpsched-scenario v1
//   name <label>
//   tick_us <quantum> | cap_window <frames> | cap_enforcement auto|on|off
//   reconfig_privilege 0|1 | horizon_us <t> | seed <n>
//   node <name> cpus <k> offset_us <t>
//   partition <node> <id> <period_us> <duration_us> [name]
//   minor <node> <partition> <offset_us> <duration_us>
//   task <id> <node> actor <a> crit <level> prio <p> part <sys|be|N> cpu <c>
//        cap <pct> wl cpu_bound|periodic <per> <bud>|event_driven <svc>|oneshot <at> <busy>
//   link <from> <to> latency_us <t> jitter_us <t>
//   edge <from_task> -> <to_task> p2p|publish
//   inject_command at_us <t> target <task> cmd <id>
//   reframe <label> node <node>
//   reframe <label> partition <id> <period_us> <duration_us> [name]
//   reframe <label> minor <partition> <offset_us> <duration_us>
//   inject_reconfig at_us <t> node <node> frame <label>
//
// Nodes whose partitions carry no `minor` lines get a generated frame.
inline constexpr const char* kScenarioHeader = "# tpsched-scenario v1";

namespace detail {

struct FrameDef {
  std::string node;
  std::vector<PartitionSpec> partitions;
  std::vector<MinorFrame> minors;
};

inline Criticality crit_from_string(std::string_view s, int line_no) {
  if (s == "critical") return Criticality::Critical;
  if (s == "application") return Criticality::Application;
  if (s == "best_effort") return Criticality::BestEffort;
  fail(Errc::ParseError, "line " + std::to_string(line_no) + ": unknown criticality '" + std::string(s) + "'");
}

}  // namespace detail

inline Scenario read_scenario(std::istream& is) {
  std::string line;
  int line_no = 0;
  if (!std::getline(is, line)) fail(Errc::ParseError, "empty scenario file");
  ++line_no;
  if (line != kScenarioHeader)
    fail(Errc::ParseError, "unsupported scenario format or version: '" + line + "'");

  Scenario s;
  std::map<std::string, detail::FrameDef> frames;
  struct PendingReconfig {
    usec_t at;
    std::string node;
    std::string frame;
    int line_no;
  };
  std::vector<PendingReconfig> pending;

  auto expect = [&](const std::vector<std::string>& tok, std::size_t n) {
    if (tok.size() != n)
      fail(Errc::ParseError,
           "line " + std::to_string(line_no) + ": expected " + std::to_string(n) + " fields");
  };

  while (std::getline(is, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto tok = ioutil::split(line);
    if (tok.empty()) continue;
    const std::string& key = tok[0];

    if (key == "name") {
      expect(tok, 2);
      s.name = tok[1];
    } else if (key == "tick_us") {
      expect(tok, 2);
      s.tick_quantum = ioutil::parse_i64(tok[1], line_no, "tick");
    } else if (key == "cap_window") {
      expect(tok, 2);
      s.cap_window_frames = static_cast<int>(ioutil::parse_i64(tok[1], line_no, "cap window"));
    } else if (key == "cap_enforcement") {
      expect(tok, 2);
      if (tok[1] == "auto")
        s.cap_enforcement.reset();
      else if (tok[1] == "on")
        s.cap_enforcement = true;
      else if (tok[1] == "off")
        s.cap_enforcement = false;
      else
        fail(Errc::ParseError, "line " + std::to_string(line_no) + ": cap_enforcement auto|on|off");
    } else if (key == "reconfig_privilege") {
      expect(tok, 2);
      s.reconfig_privilege = ioutil::parse_i64(tok[1], line_no, "flag") != 0;
    } else if (key == "horizon_us") {
      expect(tok, 2);
      s.horizon = ioutil::parse_i64(tok[1], line_no, "horizon");
    } else if (key == "seed") {
      expect(tok, 2);
      s.seed = static_cast<std::uint64_t>(ioutil::parse_i64(tok[1], line_no, "seed"));
    } else if (key == "node") {
      expect(tok, 6);
      if (tok[2] != "cpus" || tok[4] != "offset_us")
        fail(Errc::ParseError, "line " + std::to_string(line_no) + ": node <name> cpus <k> offset_us <t>");
      NodeSpec n;
      n.name = tok[1];
      n.cpus = static_cast<int>(ioutil::parse_i64(tok[3], line_no, "cpus"));
      n.hyperperiod_offset = ioutil::parse_i64(tok[5], line_no, "offset");
      s.nodes.push_back(std::move(n));
    } else if (key == "partition") {
      if (tok.size() != 5 && tok.size() != 6)
        fail(Errc::ParseError, "line " + std::to_string(line_no) + ": partition <node> <id> <period> <duration> [name]");
      PartitionSpec p;
      p.id = static_cast<partition_id_t>(ioutil::parse_i64(tok[2], line_no, "partition id"));
      p.period = ioutil::parse_i64(tok[3], line_no, "period");
      p.duration = ioutil::parse_i64(tok[4], line_no, "duration");
      if (tok.size() == 6) p.name = tok[5];
      bool found = false;
      for (auto& n : s.nodes)
        if (n.name == tok[1]) {
          n.partitions.push_back(std::move(p));
          found = true;
          break;
        }
      if (!found) fail(Errc::ParseError, "line " + std::to_string(line_no) + ": unknown node " + tok[1]);
    } else if (key == "minor") {
      expect(tok, 5);
      MinorFrame m;
      m.partition = ioutil::part_from_string(tok[2], line_no);
      m.offset = ioutil::parse_i64(tok[3], line_no, "offset");
      m.duration = ioutil::parse_i64(tok[4], line_no, "duration");
      bool found = false;
      for (auto& n : s.nodes)
        if (n.name == tok[1]) {
          n.minors.push_back(m);
          found = true;
          break;
        }
      if (!found) fail(Errc::ParseError, "line " + std::to_string(line_no) + ": unknown node " + tok[1]);
    } else if (key == "task") {
      if (tok.size() < 17)
        fail(Errc::ParseError, "line " + std::to_string(line_no) + ": truncated task statement");
      if (tok[3] != "actor" || tok[5] != "crit" || tok[7] != "prio" || tok[9] != "part" ||
          tok[11] != "cpu" || tok[13] != "cap")
        fail(Errc::ParseError, "line " + std::to_string(line_no) + ": malformed task statement");
      TaskSpec t;
      t.tcb.task_id = ioutil::parse_i64(tok[1], line_no, "task id");
      t.node = tok[2];
      t.tcb.actor = tok[4];
      t.tcb.criticality = detail::crit_from_string(tok[6], line_no);
      t.tcb.priority = static_cast<int>(ioutil::parse_i64(tok[8], line_no, "priority"));
      t.tcb.partition = ioutil::part_from_string(tok[10], line_no);
      t.tcb.cpu_affinity = static_cast<int>(ioutil::parse_i64(tok[12], line_no, "cpu"));
      t.tcb.cap_percent = static_cast<int>(ioutil::parse_i64(tok[14], line_no, "cap"));
      if (tok[15] != "wl")
        fail(Errc::ParseError, "line " + std::to_string(line_no) + ": task needs a workload");
      const std::string& kind = tok[16];
      if (kind == "cpu_bound") {
        expect(tok, 17);
        t.workload.kind = WorkloadModel::Kind::CpuBound;
      } else if (kind == "periodic") {
        expect(tok, 19);
        t.workload.kind = WorkloadModel::Kind::Periodic;
        t.workload.period = ioutil::parse_i64(tok[17], line_no, "period");
        t.workload.budget = ioutil::parse_i64(tok[18], line_no, "budget");
      } else if (kind == "event_driven") {
        expect(tok, 18);
        t.workload.kind = WorkloadModel::Kind::EventDriven;
        t.workload.service_time = ioutil::parse_i64(tok[17], line_no, "service time");
      } else if (kind == "oneshot") {
        expect(tok, 19);
        t.workload.kind = WorkloadModel::Kind::OneShot;
        t.workload.at = ioutil::parse_i64(tok[17], line_no, "release time");
        t.workload.busy = ioutil::parse_i64(tok[18], line_no, "busy time");
      } else {
        fail(Errc::ParseError, "line " + std::to_string(line_no) + ": unknown workload '" + kind + "'");
      }
      s.tasks.push_back(std::move(t));
    } else if (key == "link") {
      expect(tok, 7);
      if (tok[3] != "latency_us" || tok[5] != "jitter_us")
        fail(Errc::ParseError, "line " + std::to_string(line_no) + ": link <from> <to> latency_us <t> jitter_us <t>");
      Link l;
      l.from = tok[1];
      l.to = tok[2];
      l.latency = ioutil::parse_i64(tok[4], line_no, "latency");
      l.jitter = ioutil::parse_i64(tok[6], line_no, "jitter");
      s.links.push_back(std::move(l));
    } else if (key == "edge") {
      expect(tok, 5);
      if (tok[2] != "->")
        fail(Errc::ParseError, "line " + std::to_string(line_no) + ": edge <from> -> <to> p2p|publish");
      InteractionEdge e;
      e.from = ioutil::parse_i64(tok[1], line_no, "task id");
      e.to = ioutil::parse_i64(tok[3], line_no, "task id");
      if (tok[4] == "p2p")
        e.kind = EdgeKind::PointToPoint;
      else if (tok[4] == "publish")
        e.kind = EdgeKind::GroupPublish;
      else
        fail(Errc::ParseError, "line " + std::to_string(line_no) + ": edge kind p2p|publish");
      s.graph.edges.push_back(e);
    } else if (key == "inject_command") {
      expect(tok, 7);
      if (tok[1] != "at_us" || tok[3] != "target" || tok[5] != "cmd")
        fail(Errc::ParseError, "line " + std::to_string(line_no) + ": inject_command at_us <t> target <task> cmd <id>");
      CommandInjection c;
      c.at = ioutil::parse_i64(tok[2], line_no, "time");
      c.target = ioutil::parse_i64(tok[4], line_no, "task id");
      c.command_id = ioutil::parse_i64(tok[6], line_no, "command id");
      s.commands.push_back(c);
    } else if (key == "reframe") {
      if (tok.size() < 3) fail(Errc::ParseError, "line " + std::to_string(line_no) + ": truncated reframe");
      detail::FrameDef& def = frames[tok[1]];
      if (tok[2] == "node") {
        expect(tok, 4);
        def.node = tok[3];
      } else if (tok[2] == "partition") {
        if (tok.size() != 6 && tok.size() != 7)
          fail(Errc::ParseError, "line " + std::to_string(line_no) + ": reframe <l> partition <id> <period> <duration> [name]");
        PartitionSpec p;
        p.id = static_cast<partition_id_t>(ioutil::parse_i64(tok[3], line_no, "partition id"));
        p.period = ioutil::parse_i64(tok[4], line_no, "period");
        p.duration = ioutil::parse_i64(tok[5], line_no, "duration");
        if (tok.size() == 7) p.name = tok[6];
        def.partitions.push_back(std::move(p));
      } else if (tok[2] == "minor") {
        expect(tok, 6);
        MinorFrame m;
        m.partition = ioutil::part_from_string(tok[3], line_no);
        m.offset = ioutil::parse_i64(tok[4], line_no, "offset");
        m.duration = ioutil::parse_i64(tok[5], line_no, "duration");
        def.minors.push_back(m);
      } else {
        fail(Errc::ParseError, "line " + std::to_string(line_no) + ": reframe node|partition|minor");
      }
    } else if (key == "inject_reconfig") {
      expect(tok, 7);
      if (tok[1] != "at_us" || tok[3] != "node" || tok[5] != "frame")
        fail(Errc::ParseError, "line " + std::to_string(line_no) + ": inject_reconfig at_us <t> node <n> frame <label>");
      pending.push_back({ioutil::parse_i64(tok[2], line_no, "time"), tok[4], tok[6], line_no});
    } else {
      fail(Errc::ParseError, "line " + std::to_string(line_no) + ": unknown statement '" + key + "'");
    }
  }

  for (const auto& pr : pending) {
    auto it = frames.find(pr.frame);
    if (it == frames.end())
      fail(Errc::ParseError, "line " + std::to_string(pr.line_no) + ": undefined frame '" + pr.frame + "'");
    const detail::FrameDef& def = it->second;
    ReconfigInjection r;
    r.at = pr.at;
    r.node = pr.node;
    if (def.minors.empty()) {
      r.frame = generate_major_frame(def.partitions);
    } else {
      std::vector<usec_t> periods;
      for (const auto& p : def.partitions) periods.push_back(p.period);
      r.frame.hyperperiod = hyperperiod_of(periods);
      r.frame.partitions = def.partitions;
      r.frame.minors = def.minors;
    }
    s.reconfigs.push_back(std::move(r));
  }
  return s;
}

inline Scenario scenario_from_string(const std::string& text) {
  std::istringstream is(text);
  return read_scenario(is);
}

inline void write_scenario(std::ostream& os, const Scenario& s) {
  os << kScenarioHeader << '\n';
  os << "name " << s.name << '\n';
  os << "tick_us " << s.tick_quantum << '\n';
  os << "cap_window " << s.cap_window_frames << '\n';
  os << "cap_enforcement " << (s.cap_enforcement ? (*s.cap_enforcement ? "on" : "off") : "auto") << '\n';
  os << "reconfig_privilege " << (s.reconfig_privilege ? 1 : 0) << '\n';
  os << "horizon_us " << s.horizon << '\n';
  os << "seed " << s.seed << '\n';
  for (const auto& n : s.nodes) {
    os << "node " << n.name << " cpus " << n.cpus << " offset_us " << n.hyperperiod_offset << '\n';
    for (const auto& p : n.partitions) {
      os << "partition " << n.name << ' ' << p.id << ' ' << p.period << ' ' << p.duration;
      if (!p.name.empty()) os << ' ' << p.name;
      os << '\n';
    }
    for (const auto& m : n.minors)
      os << "minor " << n.name << ' ' << ioutil::part_to_string(m.partition) << ' ' << m.offset << ' '
         << m.duration << '\n';
  }
  for (const auto& t : s.tasks) {
    os << "task " << t.tcb.task_id << ' ' << t.node << " actor " << t.tcb.actor << " crit "
       << to_string(t.tcb.criticality) << " prio " << t.tcb.priority << " part "
       << ioutil::part_to_string(t.tcb.partition) << " cpu " << t.tcb.cpu_affinity << " cap "
       << t.tcb.cap_percent << " wl ";
    switch (t.workload.kind) {
      case WorkloadModel::Kind::CpuBound: os << "cpu_bound"; break;
      case WorkloadModel::Kind::Periodic: os << "periodic " << t.workload.period << ' ' << t.workload.budget; break;
      case WorkloadModel::Kind::EventDriven: os << "event_driven " << t.workload.service_time; break;
      case WorkloadModel::Kind::OneShot: os << "oneshot " << t.workload.at << ' ' << t.workload.busy; break;
    }
    os << '\n';
  }
  for (const auto& l : s.links)
    os << "link " << l.from << ' ' << l.to << " latency_us " << l.latency << " jitter_us " << l.jitter << '\n';
  for (const auto& e : s.graph.edges)
    os << "edge " << e.from << " -> " << e.to << ' '
       << (e.kind == EdgeKind::PointToPoint ? "p2p" : "publish") << '\n';
  for (const auto& c : s.commands)
    os << "inject_command at_us " << c.at << " target " << c.target << " cmd " << c.command_id << '\n';
  for (std::size_t i = 0; i < s.reconfigs.size(); ++i) {
    const auto& r = s.reconfigs[i];
    std::string label = "f" + std::to_string(i);
    os << "reframe " << label << " node " << r.node << '\n';
    for (const auto& p : r.frame.partitions) {
      os << "reframe " << label << " partition " << p.id << ' ' << p.period << ' ' << p.duration;
      if (!p.name.empty()) os << ' ' << p.name;
      os << '\n';
    }
    for (const auto& m : r.frame.minors)
      os << "reframe " << label << " minor " << ioutil::part_to_string(m.partition) << ' ' << m.offset << ' '
         << m.duration << '\n';
    os << "inject_reconfig at_us " << r.at << " node " << r.node << " frame " << label << '\n';
  }
}

inline std::string scenario_to_string(const Scenario& s) {
  std::ostringstream os;
  write_scenario(os, s);
  return os.str();
}

}  // namespace tpsched
