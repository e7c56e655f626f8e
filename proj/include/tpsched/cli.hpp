#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tpsched/analysis.hpp"
#include "tpsched/cluster.hpp"
#include "tpsched/scenario_io.hpp"
#include "tpsched/sim.hpp"
#include "tpsched/trace_io.hpp"

namespace tpsched::cli {

// Exit codes: 0 ok, 1 domain violation, 2 usage / IO / parse error.
inline constexpr int kOk = 0;
inline constexpr int kDomainError = 1;
inline constexpr int kUsageError = 2;

inline constexpr const char* kOutDirEnv = "TPSCHED_OUT_DIR";

// Relative output paths land in $TPSCHED_OUT_DIR when it is set.
inline std::string resolve_out_path(const std::string& path) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  const char* dir = std::getenv(kOutDirEnv);
  if (!dir || !*dir) return path;
  return (std::filesystem::path(dir) / p).string();
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(Errc::IoFailure, "cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::string resolved = resolve_out_path(path);
  std::ofstream os(resolved, std::ios::binary);
  if (!os) fail(Errc::IoFailure, "cannot write " + resolved);
  os << content;
  if (!os) fail(Errc::IoFailure, "write failed for " + resolved);
}

inline std::string fmt_milli(std::int64_t milli) {
  std::int64_t whole = milli / 1000;
  std::int64_t frac = milli % 1000;
  if (frac < 0) frac = -frac;
  std::ostringstream os;
  os << whole << '.';
  os.width(3);
  os.fill('0');
  os << frac;
  return os.str();
}

inline int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::ParseError:
    case Errc::IoFailure:
    case Errc::UnsupportedFormat:
    case Errc::UnsupportedParams:
      return kUsageError;
    default:
      return kDomainError;
  }
}

// ---------------------------------------------------------------------------
// validate: frame constraint reports, one per node.

inline int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err) {
  Scenario s;
  try {
    s = scenario_from_string(read_file(path));
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  bool all_valid = true;
  for (const auto& node : s.nodes) {
    if (node.partitions.empty()) {
      out << "node " << node.name << ": no partitions (nothing to validate)\n";
      continue;
    }
    try {
      MajorFrame frame = *build_node_frame(node);
      auto report = validate_major_frame(frame);
      if (report.valid) {
        out << "node " << node.name << ": valid\n";
      } else {
        all_valid = false;
        out << "node " << node.name << ": INVALID\n";
        for (const auto& v : report.violations) {
          out << "  " << to_string(v.constraint) << ": " << v.detail;
          if (!v.offending_frames.empty()) {
            out << " (minors";
            for (auto i : v.offending_frames) out << ' ' << i;
            out << ')';
          }
          out << '\n';
        }
      }
    } catch (const Error& e) {
      all_valid = false;
      out << "node " << node.name << ": INVALID (" << e.what() << ")\n";
    }
  }
  if (all_valid) {
    try {
      validate_scenario(s);
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return kDomainError;
    }
  }
  return all_valid ? kOk : kDomainError;
}

// ---------------------------------------------------------------------------
// generate-frame: rate-monotonic greedy placement per node.

inline int cmd_generate_frame(const std::string& path, std::ostream& out, std::ostream& err) {
  Scenario s;
  try {
    s = scenario_from_string(read_file(path));
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  int rc = kOk;
  for (const auto& node : s.nodes) {
    if (node.partitions.empty()) continue;
    try {
      MajorFrame frame = generate_major_frame(node.partitions);
      out << "# node " << node.name << " hyperperiod_us " << frame.hyperperiod << '\n';
      for (const auto& m : frame.minors)
        out << "minor " << node.name << ' ' << ioutil::part_to_string(m.partition) << ' ' << m.offset
            << ' ' << m.duration << '\n';
    } catch (const Error& e) {
      err << "node " << node.name << ": " << e.what() << '\n';
      rc = kDomainError;
    }
  }
  return rc;
}

// ---------------------------------------------------------------------------
// run: simulate and persist trace + report.

inline std::string make_report(const Scenario& s, const std::map<std::string, TraceLog>& traces,
                               usec_t until, int threads) {
  struct NodeSummary {
    std::string text;
  };
  std::vector<std::string> names;
  for (const auto& [name, log] : traces) names.push_back(name);
  std::vector<NodeSummary> summaries(names.size());

  auto summarize = [&](std::size_t idx) {
    const TraceLog& log = traces.at(names[idx]);
    std::size_t switches = 0, frames = 0, wraps = 0;
    for (const auto& ev : log.events) {
      if (ev.kind == TraceEventKind::ContextSwitch) ++switches;
      if (ev.kind == TraceEventKind::FrameSwitch) {
        ++frames;
        if (ioutil::detail_value(ev.detail, "hp") == "1") ++wraps;
      }
    }
    std::ostringstream os;
    os << "node " << names[idx] << " events " << log.events.size() << " context_switches " << switches
       << " frame_switches " << frames << " hyperperiods " << wraps << '\n';
    auto slices = execution_slices(log, until);
    std::map<task_id_t, usec_t> exec;
    for (const auto& sl : slices) exec[sl.task] += sl.end - sl.start;
    for (const auto& [task, us] : exec) os << "task " << task << " node " << names[idx] << " exec_us " << us << '\n';
    summaries[idx].text = os.str();
  };

  if (threads > 1 && names.size() > 1) {
    std::vector<std::thread> pool;
    std::size_t stride = static_cast<std::size_t>(threads);
    for (std::size_t t = 0; t < stride; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < names.size(); i += stride) summarize(i);
      });
    for (auto& th : pool) th.join();
  } else {
    for (std::size_t i = 0; i < names.size(); ++i) summarize(i);
  }

  std::ostringstream os;
  os << "# tpsched-report v1\n";
  os << "scenario " << s.name << '\n';
  os << "until_us " << until << '\n';
  for (const auto& summary : summaries) os << summary.text;
  return os.str();
}

inline int cmd_run(const std::string& path, std::optional<usec_t> until_flag,
                   const std::string& trace_out, const std::string& report_out, int threads,
                   std::ostream& out, std::ostream& err) {
  try {
    Scenario s = scenario_from_string(read_file(path));
    usec_t until = until_flag.value_or(s.horizon);
    std::map<std::string, TraceLog> traces;
    if (until > 0) {
      traces = run_cluster(s, until);
    } else {
      for (const auto& n : s.nodes) traces[n.name].node = n.name;  // empty trace, still stamped
    }
    std::string trace_path = trace_out.empty() ? s.name + ".trace" : trace_out;
    write_file(trace_path, trace_to_string(traces));
    out << "trace: " << resolve_out_path(trace_path) << '\n';
    if (!report_out.empty()) {
      write_file(report_out, make_report(s, traces, until, threads));
      out << "report: " << resolve_out_path(report_out) << '\n';
    }
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

// ---------------------------------------------------------------------------
// analyze: latency / jitter / cap-audit / gantt over a stored trace.

enum class AnalyzeMode { Latency, Jitter, CapAudit, Gantt };

inline int cmd_analyze(const std::string& trace_path, AnalyzeMode mode,
                       const std::string& scenario_path, const std::string& format,
                       const std::string& out_path, std::ostream& out, std::ostream& err) {
  std::map<std::string, TraceLog> traces;
  try {
    traces = trace_from_string(read_file(trace_path));
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  std::ostringstream doc;
  int rc = kOk;
  try {
    switch (mode) {
      case AnalyzeMode::Latency: {
        auto report = emergency_latencies(traces);
        for (const auto& r : report.records)
          doc << "latency cmd " << r.command_id << " node " << r.node << " send_us " << r.send_ts
              << " activation_us " << r.activation_ts << " latency_us " << r.latency << '\n';
        doc << "mean_us " << fmt_milli(report.mean_milli_us) << '\n';
        doc << "variance_us2 " << fmt_milli(report.variance_milli_us2) << '\n';
        break;
      }
      case AnalyzeMode::Jitter: {
        for (const auto& [name, log] : traces) {
          auto stats = jitter_stats(log);
          doc << "jitter node " << name << " samples " << stats.samples << " mean_us "
              << fmt_milli(stats.mean_milli_us) << " max_us " << stats.max_us << '\n';
        }
        break;
      }
      case AnalyzeMode::CapAudit: {
        if (scenario_path.empty()) {
          err << "error: --cap-audit needs --scenario\n";
          return kUsageError;
        }
        Scenario s = scenario_from_string(read_file(scenario_path));
        std::size_t total = 0;
        for (const auto& [name, log] : traces) {
          for (const auto& v : cap_audit(log, s)) {
            ++total;
            doc << "violation node " << v.node << " task " << v.task << " window " << v.window_start
                << ".." << v.window_end << " used_us " << v.used << " ceiling_us " << v.ceiling
                << " at_us " << v.instant << " competitor " << v.competitor << '\n';
          }
        }
        doc << "violations " << total << '\n';
        if (total > 0) rc = kDomainError;
        break;
      }
      case AnalyzeMode::Gantt: {
        doc << export_gantt(traces, gantt_format_from_string(format));
        break;
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  if (out_path.empty())
    out << doc.str();
  else {
    try {
      write_file(out_path, doc.str());
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return exit_code_for(e);
    }
  }
  return rc;
}

}  // namespace tpsched::cli
