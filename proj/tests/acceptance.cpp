// Acceptance suite: every criterion prints one PASS/FAIL line; the binary
// exits nonzero if any fails. Tolerances are pinned in the checks below.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tpsched/analysis.hpp"
#include "tpsched/cli.hpp"
#include "tpsched/cluster.hpp"
#include "tpsched/frame_config.hpp"
#include "tpsched/scenario_io.hpp"
#include "tpsched/sim.hpp"
#include "tpsched/trace_io.hpp"

using namespace tpsched;
namespace fs = std::filesystem;

namespace {

const std::string kDir = TPSCHED_SCENARIO_DIR;
int g_failures = 0;

struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw CheckFailed(what);
}

template <typename T, typename U>
void require_eq(const T& got, const U& want, const std::string& what) {
  if (!(got == static_cast<T>(want))) {
    std::ostringstream os;
    os << what << " (got " << got << ", want " << want << ")";
    throw CheckFailed(os.str());
  }
}

void criterion(int id, const std::string& name, const std::function<void()>& body) {
  try {
    body();
    std::printf("PASS criterion %d: %s\n", id, name.c_str());
  } catch (const std::exception& e) {
    ++g_failures;
    std::printf("FAIL criterion %d: %s -- %s\n", id, name.c_str(), e.what());
  }
  std::fflush(stdout);
}

Scenario load(const std::string& file) {
  std::ifstream is(kDir + "/" + file);
  require(is.good(), "cannot open " + file);
  return read_scenario(is);
}

std::map<std::string, usec_t> latencies_by_node(const std::map<std::string, TraceLog>& traces) {
  std::map<std::string, usec_t> out;
  for (const auto& r : emergency_latencies(traces).records) out[r.node] = r.latency;
  return out;
}

std::vector<usec_t> wrap_boundaries(const TraceLog& log) {
  std::vector<usec_t> out;
  for (const auto& info : oracles::frame_switches(log))
    if (info.wrap) out.push_back(info.boundary);
  return out;
}

}  // namespace

int main() {
  criterion(1, "frame feasibility: four-partition layout and 200 random admissible sets", [] {
    auto t0 = std::chrono::steady_clock::now();

    Scenario fig1 = load("fig1.scn");
    MajorFrame layout = *build_node_frame(fig1.nodes[0]);
    require(validate_major_frame(layout).valid, "bundled layout must validate");
    require(oracles::tick_walk_violations(layout).empty(), "tick walk must confirm the layout");

    MajorFrame generated = generate_major_frame(fig1.nodes[0].partitions);
    require(validate_major_frame(generated).valid, "generated frame must validate");
    require(oracles::tick_walk_violations(generated).empty(), "tick walk must confirm the generated frame");

    std::mt19937_64 rng(20260808);
    int confirmed = 0, attempts = 0;
    while (confirmed < 200) {
      require(++attempts <= 600, "too many infeasible draws");
      auto parts = oracles::random_admissible_set(rng);
      MajorFrame frame;
      try {
        frame = generate_major_frame(parts);
      } catch (const Error& e) {
        if (e.code() == Errc::Infeasible) continue;  // admissibility is only necessary
        throw;
      }
      require(validate_major_frame(frame).valid, "random frame must validate");
      auto walked = oracles::tick_walk_violations(frame);
      require(walked.empty(), "tick walk found " + (walked.empty() ? "" : walked.front()));
      ++confirmed;
    }
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - t0);
    require(elapsed.count() < 10000, "runtime must stay under 10 s");
  });

  criterion(2, "CPU cap sharing: 12 ms ceiling per 60 ms window, work conserving alone", [] {
    Scenario s = load("fig3.scn");
    TraceLog trace = run_node(s, 600000);
    for (int w = 0; w < 10; ++w) {
      usec_t a = w * 60000, b = a + 60000;
      require_eq(oracles::exec_within(trace, 1001, a, b), 12000,
                 "capped task usage in window " + std::to_string(w));
      require_eq(oracles::exec_within(trace, 1000, a, b), 48000,
                 "open task usage in window " + std::to_string(w));
    }
    auto stats = jitter_stats(trace);
    require(stats.max_us < 4000, "frame-switch jitter must stay under one 4 ms tick");

    Scenario alone = s;
    for (auto it = alone.tasks.begin(); it != alone.tasks.end();)
      it = it->tcb.task_id == 1000 ? alone.tasks.erase(it) : it + 1;
    TraceLog solo = run_node(alone, 600000);
    for (int w = 0; w < 10; ++w)
      require_eq(oracles::exec_within(solo, 1001, w * 60000, (w + 1) * 60000), 60000,
                 "work-conserving full window " + std::to_string(w));
  });

  criterion(3, "dynamic reconfiguration: durations double, active window cut short, no app dispatch in the gap", [] {
    Scenario s = load("fig2.scn");
    TraceLog trace = run_node(s, s.horizon);

    std::ptrdiff_t inactive = -1, active = -1;
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
      const auto& ev = trace.events[i];
      if (ev.kind != TraceEventKind::Reconfig) continue;
      if (ioutil::detail_value(ev.detail, "phase") == "app_inactive") inactive = static_cast<std::ptrdiff_t>(i);
      if (ioutil::detail_value(ev.detail, "phase") == "app_active") active = static_cast<std::ptrdiff_t>(i);
    }
    require(inactive >= 0 && active > inactive, "both reconfiguration markers present");
    require_eq(trace.events[static_cast<std::size_t>(inactive)].timestamp, 330000, "reconfiguration instant");
    for (std::ptrdiff_t i = inactive; i <= active; ++i) {
      const auto& ev = trace.events[static_cast<std::size_t>(i)];
      require(!(ev.kind == TraceEventKind::ContextSwitch && ev.next_task && is_app_partition(ev.partition)),
              "application dispatch between APP_INACTIVE and APP_ACTIVE");
    }

    bool curtailed = false;
    for (const auto& ev : trace.events)
      if (ev.kind == TraceEventKind::ContextSwitch && ev.timestamp == 330000 && ev.prev_task == 2002 &&
          !ev.next_task)
        curtailed = true;
    require(curtailed, "running application task evicted at the update instant");

    auto switches = oracles::frame_switches(trace);
    std::vector<oracles::FrameSwitchInfo> pre, post;
    for (const auto& info : switches) (info.ts < 330000 ? pre : post).push_back(info);
    require(pre.size() >= 2 && post.size() >= 4, "switches on both sides of the update");
    for (std::size_t i = 1; i < pre.size(); ++i)
      require_eq(pre[i].boundary - pre[i - 1].boundary, 60000, "pre-update window length");
    require_eq(post.front().ts, 332000, "first switch at the first tick after the update");
    require_eq(post.front().boundary, 330000, "new schedule anchored at the update instant");
    for (const auto& info : post)
      require(info.boundary != 360000, "the abandoned boundary must never fire");
    for (std::size_t i = 1; i < post.size(); ++i)
      require_eq(post[i].boundary - post[i - 1].boundary, 120000, "post-update window length");
  });

  criterion(4, "mixed criticality: image processing never overlaps runnable critical work", [] {
    Scenario s = load("scatter_2.scn");
    auto traces = run_cluster(s, s.horizon);
    auto lat = latencies_by_node(traces);
    for (int n = 1; n <= 3; ++n) {
      std::string name = "sat" + std::to_string(n);
      const TraceLog& log = traces.at(name);
      usec_t horizon = trace_end(log);
      auto slices = execution_slices(log, horizon);

      IntervalSet critical_runnable;
      for (const auto& t : s.tasks) {
        if (t.node != name || t.tcb.criticality != Criticality::Critical) continue;
        IntervalSet r = replay_runnable_intervals(t, log, horizon);
        for (const auto& iv : r.intervals()) critical_runnable.add(iv.start, iv.end);
      }
      for (const auto& sl : slices) {
        const TaskSpec* spec = s.find_task(sl.task);
        require(spec != nullptr, "trace references an unknown task");
        if (spec->tcb.criticality == Criticality::Critical) continue;
        // Covers the image-processing actors and every other non-critical
        // task: none of them may run while critical work is runnable.
        require(critical_runnable.measure_within(sl.start, sl.end) == 0,
                name + ": task " + std::to_string(sl.task) + " ran while critical work was runnable");
      }

      // Frame switching continues through the 500 ms thruster activation.
      usec_t act = 1030000 + lat.at(name);
      MajorFrame filled = fill_empty(*build_node_frame(*s.find_node(name)));
      std::vector<usec_t> expected;
      for (usec_t base = 0; base < act + 500000; base += filled.hyperperiod) {
        usec_t cursor = base;
        for (const auto& m : filled.minors) {
          cursor += m.duration;
          if (cursor > act && cursor <= act + 500000) expected.push_back(cursor);
        }
      }
      std::vector<usec_t> observed;
      for (const auto& info : oracles::frame_switches(log))
        if (info.boundary > act && info.boundary <= act + 500000) observed.push_back(info.boundary);
      require(observed == expected, name + ": frame switching paused during the activation");
      require(!expected.empty(), "activation must span frame boundaries");
    }
  });

  criterion(5, "latency invariance across load and hyperperiod; exact cluster alignment", [] {
    std::map<std::string, usec_t> first;
    for (const char* file : {"scatter_1.scn", "scatter_2.scn", "scatter_3.scn"}) {
      Scenario s = load(file);
      auto traces = run_cluster(s, s.horizon);
      auto lat = latencies_by_node(traces);
      require_eq(lat.size(), std::size_t{3}, "three satellites must activate");
      if (first.empty()) {
        first = lat;
      } else {
        for (const auto& [node, us] : lat)
          require_eq(us, first.at(node), std::string(file) + ": latency on " + node +
                                             " must match scenario 1 to the microsecond");
      }
      auto wraps1 = wrap_boundaries(traces.at("sat1"));
      for (const char* other : {"sat2", "sat3"}) {
        auto w = wrap_boundaries(traces.at(other));
        require(w == wraps1, std::string(file) + ": hyperperiod misalignment on " + other);
      }
      require(!wraps1.empty(), "wraps must be observed");
    }
  });

  criterion(6, "dispatch complexity: one list head with caps off, at most n with caps on", [] {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> nd(0, 12), prio_d(0, kMaxRtPrio - 1), state_d(0, 2);
    for (int trial = 0; trial < 1000; ++trial) {
      bool is_app = trial % 2 == 0;
      int n = nd(rng);
      std::vector<oracles::OracleTask> tasks;
      for (int i = 0; i < n; ++i)
        tasks.push_back({100 + i, prio_d(rng), static_cast<oracles::OracleTaskState>(state_d(rng))});

      for (bool cap_enabled : {false, true}) {
        TraceCollector sink("n");
        Scheduler sched("n", {1, 4000, 1, cap_enabled}, &sink);
        MajorFrame f;
        f.hyperperiod = 10000;
        f.partitions = {{1, 10000, 10000, ""}};
        f.minors = {{1, 0, 10000}};
        sched.update_major_frame(f, 0, false);
        for (usec_t t = 0; t <= 12000; t += 4000) sched.global_tick(t);
        partition_id_t part = is_app ? 1 : kSystemPartition;
        for (const auto& ot : tasks) {
          auto crit = is_app ? Criticality::Application : Criticality::Critical;
          TaskControlBlock tcb;
          tcb.task_id = ot.id;
          tcb.criticality = crit;
          tcb.priority = ot.prio;
          tcb.partition = part;
          tcb.cap_percent = 20;
          if (ot.state != oracles::OracleTaskState::Enabled) {
            tcb.disabled = true;
            tcb.last_disabled_time = ot.state == oracles::OracleTaskState::DisabledThisWindow ? 11000 : 5000;
          }
          sched.add_task(tcb);
          sched.make_runnable(ot.id, 12000);
        }
        auto pick = sched.pick_next_task(0, part, cap_enabled, 12000);
        auto [want_prio, want_task] = oracles::pick_oracle(tasks, is_app, cap_enabled);
        require(pick.task == want_task && pick.prio_index == want_prio, "pick matches the rule table");
        if (n > 0) {
          if (!cap_enabled)
            require_eq(sched.last_pick_inspections(), 1, "caps off must touch exactly one list head");
          else
            require(sched.last_pick_inspections() <= n, "caps on must touch at most n tasks");
        }
      }
    }
  });

  criterion(7, "response time: 60 ms and 12 ms on the shared-partition setup, monotone elsewhere", [] {
    MajorFrame full;
    full.hyperperiod = 60000;
    full.partitions = {{1, 60000, 60000, ""}};
    full.minors = {{1, 0, 60000}};
    auto curve = availability_curve(full, {}, 1, 600000);  // ten hyperperiods
    require_eq(response_time(48000, {{12000, 60000}}, curve).value_or(-1), 60000, "open task response");
    require_eq(response_time(12000, {}, curve).value_or(-1), 12000, "capped task response");
    require(response_time(48000, {{12000, 60000}}, curve) ==
                oracles::response_oracle(48000, {{12000, 60000}}, full, {}, 1, 600000),
            "intersection must match the step-function oracle");
    require(response_time(12000, {}, curve) == oracles::response_oracle(12000, {}, full, {}, 1, 600000),
            "intersection must match the step-function oracle");

    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> d(1, 40);
    for (int trial = 0; trial < 100; ++trial) {
      MajorFrame f;
      f.hyperperiod = 120000;
      usec_t dur = d(rng) * 1000;
      f.partitions = {{1, 120000, dur, ""}};
      f.minors = {{1, 0, dur}};
      std::vector<PeerDemand> peers;
      for (int i = 0; i < d(rng) % 3; ++i) peers.push_back({static_cast<usec_t>(d(rng)) * 250, 120000});
      usec_t budget = static_cast<usec_t>(d(rng)) * 500;
      auto base = availability_curve(f, {}, 1, 1200000);
      auto r0 = response_time(budget, peers, base);
      require(r0 == oracles::response_oracle(budget, peers, f, {}, 1, 1200000), "random setup matches oracle");

      auto more = peers;
      more.push_back({static_cast<usec_t>(d(rng)) * 250, 120000});
      auto r1 = response_time(budget, more, base);
      if (r0 && r1) require(*r1 >= *r0, "more demand cannot shorten the response");
      if (!r0) require(!r1, "unbounded stays unbounded under extra demand");

      MajorFrame wider = f;
      wider.partitions[0].duration = std::min<usec_t>(120000, dur + 20000);
      wider.minors[0].duration = wider.partitions[0].duration;
      auto r2 = response_time(budget, peers, availability_curve(wider, {}, 1, 1200000));
      if (r2 && r0) require(*r2 <= *r0, "more availability cannot lengthen the response");
      if (r0 && !r2) require(false, "more availability cannot lose the intersection");
    }
  });

  criterion(8, "determinism: byte-identical traces across runs and thread counts", [] {
    fs::path tmp = fs::temp_directory_path() / "tpsched_acceptance";
    fs::create_directories(tmp);
    for (const char* file : {"fig1.scn", "fig2.scn", "fig3.scn", "scatter_1.scn", "scatter_2.scn",
                             "scatter_3.scn"}) {
      std::map<int, std::string> traces, reports;
      int variant = 0;
      for (int threads : {1, 1, 4}) {
        fs::path trace_path = tmp / (std::string(file) + "." + std::to_string(variant) + ".trace");
        fs::path report_path = tmp / (std::string(file) + "." + std::to_string(variant) + ".report");
        std::ostringstream out, err;
        int rc = cli::cmd_run(kDir + "/" + file, std::nullopt, trace_path.string(),
                              report_path.string(), threads, out, err);
        require_eq(rc, 0, std::string(file) + ": run must succeed (" + err.str() + ")");
        std::ifstream ts(trace_path, std::ios::binary), rs(report_path, std::ios::binary);
        std::ostringstream tb, rb;
        tb << ts.rdbuf();
        rb << rs.rdbuf();
        traces[variant] = tb.str();
        reports[variant] = rb.str();
        ++variant;
      }
      require(!traces[0].empty(), std::string(file) + ": trace must not be empty");
      require(traces[0] == traces[1], std::string(file) + ": repeated runs must match bytewise");
      require(traces[0] == traces[2], std::string(file) + ": thread count must not change the trace");
      require(reports[0] == reports[1] && reports[0] == reports[2],
              std::string(file) + ": reports must match bytewise");
    }
    std::error_code ec;
    fs::remove_all(tmp, ec);
  });

  if (g_failures == 0) std::printf("acceptance: all criteria passed\n");
  return g_failures == 0 ? 0 : 1;
}
