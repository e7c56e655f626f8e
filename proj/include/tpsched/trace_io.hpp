#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "tpsched/io_util.hpp"
#include "tpsched/model.hpp"

namespace tpsched {

// Trace file format, one event per line, append-only and diffable:
//
//   # tpsched-trace v1
//   # node <name>
//   <ts_us> <node> <cpu> <KIND> <prev|-> <next|-> <partition> <detail|->
//
// Detail keys by kind:
//   FRAME_SWITCH   boundary= ideal switch time; hp=1 on hyperperiod wrap;
//                  win=1 when the cap window reset; start=1 on clock start
//   RECONFIG       phase=app_inactive|app_active; hp_target=; hyperperiod=
//   CAP_DISABLE    used=; ceiling=          (task in the prev column)
//   CAP_REENABLE   window_start=            (task in the next column)
//   MESSAGE_SEND   cmd=; to=; to_node=; deliver=
//   MESSAGE_RECV   cmd=; origin=1 for injected commands (sender in prev)
//   CONTEXT_SWITCH reason=tick|block|release|msg|reconfig|start
inline constexpr const char* kTraceHeader = "# tpsched-trace v1";

inline void write_trace(std::ostream& os, const std::map<std::string, TraceLog>& traces) {
  os << kTraceHeader << '\n';
  for (const auto& [name, log] : traces) {
    os << "# node " << name << '\n';
    for (const auto& ev : log.events) {
      os << ev.timestamp << ' ' << ev.node << ' ' << ev.cpu << ' ' << to_string(ev.kind) << ' ';
      if (ev.prev_task)
        os << *ev.prev_task;
      else
        os << '-';
      os << ' ';
      if (ev.next_task)
        os << *ev.next_task;
      else
        os << '-';
      os << ' ' << ioutil::part_to_string(ev.partition) << ' ' << (ev.detail.empty() ? "-" : ev.detail)
         << '\n';
    }
  }
}

inline std::string trace_to_string(const std::map<std::string, TraceLog>& traces) {
  std::ostringstream os;
  write_trace(os, traces);
  return os.str();
}

inline TraceEventKind kind_from_string(std::string_view s, int line_no) {
  for (auto k : {TraceEventKind::ContextSwitch, TraceEventKind::FrameSwitch, TraceEventKind::Reconfig,
                 TraceEventKind::CapDisable, TraceEventKind::CapReenable, TraceEventKind::MessageSend,
                 TraceEventKind::MessageRecv})
    if (s == to_string(k)) return k;
  fail(Errc::ParseError, "line " + std::to_string(line_no) + ": unknown event kind '" + std::string(s) + "'");
}

inline std::map<std::string, TraceLog> read_trace(std::istream& is) {
  std::string line;
  int line_no = 0;
  if (!std::getline(is, line)) fail(Errc::ParseError, "empty trace file");
  ++line_no;
  if (line != kTraceHeader)
    fail(Errc::ParseError, "unsupported trace format or version: '" + line + "'");

  std::map<std::string, TraceLog> traces;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# node ", 0) == 0) {
      std::string name = line.substr(7);
      traces[name].node = name;
      continue;
    }
    if (line[0] == '#') continue;
    auto tok = ioutil::split(line);
    if (tok.size() != 8)
      fail(Errc::ParseError, "line " + std::to_string(line_no) + ": expected 8 fields, got " +
                                 std::to_string(tok.size()));
    TraceEvent ev;
    ev.timestamp = ioutil::parse_i64(tok[0], line_no, "timestamp");
    ev.node = tok[1];
    ev.cpu = static_cast<int>(ioutil::parse_i64(tok[2], line_no, "cpu"));
    ev.kind = kind_from_string(tok[3], line_no);
    if (tok[4] != "-") ev.prev_task = ioutil::parse_i64(tok[4], line_no, "prev task");
    if (tok[5] != "-") ev.next_task = ioutil::parse_i64(tok[5], line_no, "next task");
    ev.partition = ioutil::part_from_string(tok[6], line_no);
    if (tok[7] != "-") ev.detail = tok[7];
    auto& log = traces[ev.node];
    log.node = ev.node;
    log.events.push_back(std::move(ev));
  }
  return traces;
}

inline std::map<std::string, TraceLog> trace_from_string(const std::string& text) {
  std::istringstream is(text);
  return read_trace(is);
}

}  // namespace tpsched
