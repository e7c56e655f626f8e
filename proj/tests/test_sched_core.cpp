#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "tpsched/sched_core.hpp"

using namespace tpsched;

namespace {

TaskControlBlock make_tcb(task_id_t id, Criticality crit, int prio, partition_id_t part,
                          int cap = 100, int cpu = 0) {
  TaskControlBlock t;
  t.task_id = id;
  t.actor = "a" + std::to_string(id);
  t.criticality = crit;
  t.priority = prio;
  t.partition = part;
  t.cpu_affinity = cpu;
  t.cap_percent = cap;
  return t;
}

MajorFrame full_frame(usec_t h) {
  MajorFrame f;
  f.hyperperiod = h;
  f.partitions = {{1, h, h, ""}};
  f.minors = {{1, 0, h}};
  return f;
}

MajorFrame two_sixty_ms_partitions() {
  MajorFrame f;
  f.hyperperiod = 120000;
  f.partitions = {{1, 120000, 60000, ""}, {2, 120000, 60000, ""}};
  f.minors = {{1, 0, 60000}, {2, 60000, 60000}};
  return f;
}

struct Fixture {
  TraceCollector sink{"node"};
  Scheduler sched;
  explicit Fixture(SchedulerConfig cfg = {1, 4000, 1, true}) : sched("node", cfg, &sink) {}
};

}  // namespace

TEST_CASE("cap ceiling arithmetic") {
  CapAccounting one_frame{1, 0, 0};
  MajorFrame frame;
  frame.hyperperiod = 120000;
  frame.partitions = {{1, 120000, 60000, ""}, {2, 80000, 40000, ""}};

  // 20% of a 60 ms partition over one major frame on one CPU.
  auto app = make_tcb(1, Criticality::Application, 72, 1, 20);
  CHECK(cap_ceiling(app, frame, one_frame, 1) == 12000);

  // 100% means no ceiling and the disabled bit can never be set.
  auto uncapped = make_tcb(2, Criticality::Application, 70, 1, 100);
  CHECK(cap_ceiling(uncapped, frame, one_frame, 1) == kNoCeiling);

  // Direct arithmetic oracle: 0.5 * 40 ms * 2 frames * 2 cpus = 80 ms.
  CapAccounting two_frames{2, 0, 0};
  auto half = make_tcb(3, Criticality::Application, 10, 2, 50);
  CHECK(static_cast<usec_t>(0.5 * 40000 * 2 * 2) == 80000);
  CHECK(cap_ceiling(half, frame, two_frames, 2) == 80000);

  // Critical tasks are bounded against the hyperperiod.
  auto crit = make_tcb(4, Criticality::Critical, 90, kSystemPartition, 25);
  CHECK(cap_ceiling(crit, frame, one_frame, 1) == 30000);

  auto be = make_tcb(5, Criticality::BestEffort, 0, kBestEffortPartition, 10);
  CHECK(cap_ceiling(be, frame, one_frame, 1) == kNoCeiling);
}

namespace {

// Drives the fixture so the cap window has wrapped once: window_start ends
// up at 10 ms, which gives "previous window" timestamps room below it.
void start_with_window_at_10ms(Fixture& fx) {
  fx.sched.update_major_frame(full_frame(10000), 0, false);
  fx.sched.global_tick(0);
  fx.sched.global_tick(4000);
  fx.sched.global_tick(8000);
  fx.sched.global_tick(12000);
  REQUIRE(fx.sched.cap_window().window_start == 10000);
}

}  // namespace

TEST_CASE("pick_next_task skips tasks disabled in the current window") {
  Fixture fx;
  start_with_window_at_10ms(fx);
  // Higher-priority 1001 exhausted its 20% cap this window; 1000 is open.
  auto t1001 = make_tcb(1001, Criticality::Application, 72, 1, 20);
  t1001.disabled = true;
  t1001.last_disabled_time = 11000;
  fx.sched.add_task(t1001);
  fx.sched.add_task(make_tcb(1000, Criticality::Application, 70, 1, 100));
  fx.sched.make_runnable(1001, 12000);
  fx.sched.make_runnable(1000, 12000);

  auto pick = fx.sched.pick_next_task(0, 1, true, 12000);
  REQUIRE(pick.task.has_value());
  CHECK(*pick.task == 1000);
  CHECK(pick.prio_index == 70);
}

TEST_CASE("pick_next_task on an empty queue") {
  Fixture fx;
  start_with_window_at_10ms(fx);
  auto pick = fx.sched.pick_next_task(0, 1, true, 12000);
  CHECK_FALSE(pick.task.has_value());
  CHECK(pick.prio_index == kMaxRtPrio);
  auto sys = fx.sched.pick_next_task(0, kSystemPartition, false, 12000);
  CHECK_FALSE(sys.task.has_value());
}

TEST_CASE("pick_next_task re-enables tasks disabled in a previous window") {
  Fixture fx;
  start_with_window_at_10ms(fx);
  auto stale = make_tcb(7, Criticality::Application, 40, 1, 20);
  stale.disabled = true;
  stale.last_disabled_time = 5000;  // before window_start = 10000
  fx.sched.add_task(stale);
  fx.sched.add_task(make_tcb(8, Criticality::Application, 60, 1, 100));
  fx.sched.make_runnable(7, 12000);
  fx.sched.make_runnable(8, 12000);

  // The enabled higher-priority task wins; the stale one is untouched.
  auto pick = fx.sched.pick_next_task(0, 1, true, 12000);
  CHECK(*pick.task == 8);
  CHECK(fx.sched.task(7).disabled);

  // Once it is the best candidate, it is re-enabled on sight.
  fx.sched.block_task(8, 12000);
  pick = fx.sched.pick_next_task(0, 1, true, 12000);
  CHECK(*pick.task == 7);
  CHECK_FALSE(fx.sched.task(7).disabled);
  bool saw_reenable = false;
  for (const auto& ev : fx.sink.log().events)
    if (ev.kind == TraceEventKind::CapReenable && ev.next_task == 7) saw_reenable = true;
  CHECK(saw_reenable);
}

TEST_CASE("all-disabled queues: application partitions work-conserve, the system queue does not") {
  Fixture fx;
  start_with_window_at_10ms(fx);
  auto app = make_tcb(21, Criticality::Application, 50, 1, 20);
  app.disabled = true;
  app.last_disabled_time = 11000;
  fx.sched.add_task(app);
  fx.sched.make_runnable(21, 12000);
  auto pick = fx.sched.pick_next_task(0, 1, true, 12000);
  REQUIRE(pick.task.has_value());
  CHECK(*pick.task == 21);  // returned anyway

  auto crit = make_tcb(22, Criticality::Critical, 90, kSystemPartition, 20);
  crit.disabled = true;
  crit.last_disabled_time = 11000;
  fx.sched.add_task(crit);
  fx.sched.make_runnable(22, 12000);
  auto sys = fx.sched.pick_next_task(0, kSystemPartition, true, 12000);
  CHECK_FALSE(sys.task.has_value());  // hard limit for critical tasks
  CHECK(sys.prio_index == kMaxRtPrio);
}

TEST_CASE("pick_next_task matches the rule-table oracle on every small queue") {
  using oracles::OracleTask;
  using oracles::OracleTaskState;
  const OracleTaskState states[] = {OracleTaskState::Enabled, OracleTaskState::DisabledThisWindow,
                                    OracleTaskState::DisabledPrevWindow};
  const int prios[] = {70, 72};
  // Each of up to 3 slots: empty, or one of (2 prios x 3 states).
  for (int mask = 0; mask < 7 * 7 * 7; ++mask) {
    for (bool is_app : {true, false}) {
      for (bool cap_enabled : {true, false}) {
        std::vector<OracleTask> tasks;
        int m = mask;
        for (int slot = 0; slot < 3; ++slot, m /= 7) {
          int v = m % 7;
          if (v == 0) continue;
          tasks.push_back({100 + slot, prios[(v - 1) % 2], states[(v - 1) / 2]});
        }
        Fixture fx({1, 4000, 1, cap_enabled});
        start_with_window_at_10ms(fx);
        partition_id_t part = is_app ? 1 : kSystemPartition;
        for (const auto& ot : tasks) {
          auto tcb = make_tcb(ot.id, is_app ? Criticality::Application : Criticality::Critical,
                              ot.prio, part, 20);
          if (ot.state != OracleTaskState::Enabled) {
            tcb.disabled = true;
            tcb.last_disabled_time = ot.state == OracleTaskState::DisabledThisWindow ? 11000 : 5000;
          }
          fx.sched.add_task(tcb);
          fx.sched.make_runnable(ot.id, 12000);
        }
        auto [oracle_prio, oracle_task] = oracles::pick_oracle(tasks, is_app, cap_enabled);
        auto pick = fx.sched.pick_next_task(0, part, cap_enabled, 12000);
        CAPTURE(mask);
        CAPTURE(is_app);
        CAPTURE(cap_enabled);
        CHECK(pick.task == oracle_task);
        CHECK(pick.prio_index == oracle_prio);
        if (!tasks.empty()) {
          if (!cap_enabled)
            CHECK(fx.sched.last_pick_inspections() == 1);  // one list head
          else
            CHECK(fx.sched.last_pick_inspections() <= static_cast<int>(tasks.size()));
        }
      }
    }
  }
}

TEST_CASE("global tick switches frames within one quantum of the boundary") {
  Fixture fx;
  fx.sched.update_major_frame(two_sixty_ms_partitions(), 0, false);
  auto started = fx.sched.global_tick(0);
  CHECK(started.started);
  CHECK(fx.sched.active_partition() == 1);
  for (usec_t t = 4000; t < 60000; t += 4000) CHECK(fx.sched.global_tick(t).advanced == 0);
  auto sw = fx.sched.global_tick(60000);  // boundary is tick-aligned here
  CHECK(sw.advanced == 1);
  CHECK(fx.sched.active_partition() == 2);

  // Misaligned install: the switch lands on the next tick, under 4 ms late.
  Fixture fx2;
  fx2.sched.update_major_frame(two_sixty_ms_partitions(), 2000, false);
  for (usec_t t = 4000; t <= 60000; t += 4000) fx2.sched.global_tick(t);
  CHECK(fx2.sched.active_partition() == 1);  // boundary 62000 not reached yet
  auto late = fx2.sched.global_tick(64000);
  CHECK(late.advanced == 1);
  CHECK(fx2.sched.clock().mf_start == 62000);  // exact boundary, observed 2 ms late
}

TEST_CASE("single-minor frames wrap in place and hp_start advances by H") {
  Fixture fx;
  fx.sched.update_major_frame(full_frame(20000), 0, false);
  fx.sched.global_tick(0);
  CHECK(fx.sched.clock().hp_start == 0);
  usec_t expected = 0;
  for (usec_t t = 4000; t <= 100000; t += 4000) {
    auto out = fx.sched.global_tick(t);
    if (out.wrapped) {
      expected += 20000;
      CHECK(fx.sched.clock().hp_start == expected);
      CHECK(fx.sched.clock().cur_frame == 0);
    }
  }
  CHECK(expected == 100000);
}

TEST_CASE("four-partition frame over 16 seconds: wraps and window counts") {
  Fixture fx;
  MajorFrame fig1;
  fig1.hyperperiod = 8000000;
  fig1.partitions = {{1, 2000000, 250000, ""},
                     {2, 2000000, 250000, ""},
                     {3, 4000000, 1000000, ""},
                     {4, 8000000, 1500000, ""}};
  fig1.minors = {{1, 0, 250000},       {2, 250000, 250000},  {3, 500000, 1000000},
                 {1, 2000000, 250000}, {2, 2250000, 250000}, {4, 2500000, 1500000},
                 {1, 4000000, 250000}, {2, 4250000, 250000}, {3, 4500000, 1000000},
                 {1, 6000000, 250000}, {2, 6250000, 250000}};
  fx.sched.update_major_frame(fig1, 0, false);
  for (usec_t t = 0; t < 16000000; t += 4000) fx.sched.global_tick(t);

  // Tick-walk oracle: replay the filled minor list over two hyperperiods.
  MajorFrame filled = fill_empty(fig1);
  std::map<partition_id_t, int> expected;
  int expected_wraps = 0;
  for (usec_t base = 0; base < 16000000; base += filled.hyperperiod) {
    ++expected_wraps;
    for (const auto& m : filled.minors) ++expected[m.partition];
  }
  std::map<partition_id_t, int> counted;
  int wraps = 0;
  for (const auto& ev : fx.sink.log().events) {
    if (ev.kind != TraceEventKind::FrameSwitch) continue;
    ++counted[ev.partition];
    if (ioutil::detail_value(ev.detail, "hp") == "1") ++wraps;
  }
  CHECK(wraps == expected_wraps);
  CHECK(wraps == 2);
  CHECK(counted[1] == expected[1]);
  CHECK(counted[1] == 8);
  CHECK(counted[2] == 8);
  CHECK(counted[3] == 4);
  CHECK(counted[4] == 2);
}

TEST_CASE("dispatch order: system, then the active partition, then best effort") {
  Fixture fx({1, 4000, 1, false});
  fx.sched.update_major_frame(full_frame(60000), 0, false);
  fx.sched.global_tick(0);
  fx.sched.add_task(make_tcb(1, Criticality::Critical, 90, kSystemPartition));
  fx.sched.add_task(make_tcb(2, Criticality::Application, 50, 1));
  fx.sched.add_task(make_tcb(3, Criticality::BestEffort, 0, kBestEffortPartition));
  fx.sched.make_runnable(3, 0);
  auto d = fx.sched.schedule(0, 0, "tick");
  CHECK(*d.task == 3);  // nothing above best effort is runnable
  fx.sched.make_runnable(2, 0);
  d = fx.sched.schedule(0, 0, "tick");
  CHECK(*d.task == 2);
  fx.sched.make_runnable(1, 0);
  d = fx.sched.schedule(0, 0, "tick");
  CHECK(*d.task == 1);  // critical preempts at the scheduling point
  fx.sched.block_task(1, 4000);
  d = fx.sched.schedule(0, 4000, "block");
  CHECK(*d.task == 2);  // application resumes after the critical task blocks
  fx.sched.block_task(2, 8000);
  fx.sched.block_task(3, 8000);
  d = fx.sched.schedule(0, 8000, "block");
  CHECK_FALSE(d.task.has_value());  // idle
}

TEST_CASE("no application dispatch while APP_INACTIVE or before the clock starts") {
  Fixture fx({1, 4000, 1, false});
  fx.sched.add_task(make_tcb(2, Criticality::Application, 50, 1));
  fx.sched.update_major_frame(full_frame(60000), 0, false);
  fx.sched.make_runnable(2, 0);
  // Clock not started yet: nothing to run.
  auto d = fx.sched.schedule(0, 0, "start");
  CHECK_FALSE(d.task.has_value());
  fx.sched.global_tick(0);
  d = fx.sched.schedule(0, 0, "tick");
  CHECK(*d.task == 2);
}

TEST_CASE("a cap-exhausted critical task runs only when nothing else is ready") {
  Fixture fx;
  fx.sched.update_major_frame(full_frame(10000), 0, false);
  fx.sched.global_tick(0);
  auto crit = make_tcb(1, Criticality::Critical, 90, kSystemPartition, 20);  // ceiling 2 ms
  fx.sched.add_task(crit);
  fx.sched.add_task(make_tcb(2, Criticality::Application, 50, 1));
  fx.sched.add_task(make_tcb(3, Criticality::BestEffort, 0, kBestEffortPartition));
  fx.sched.make_runnable(1, 0);
  CHECK(*fx.sched.schedule(0, 0, "tick").task == 1);
  fx.sched.account_execution(0, 2000);  // hits the ceiling
  CHECK(*fx.sched.schedule(0, 4000, "tick").task == 1);  // alone: keeps the CPU
  CHECK(fx.sched.task(1).disabled);

  fx.sched.make_runnable(3, 4000);
  CHECK(*fx.sched.schedule(0, 4000, "wake").task == 3);  // best effort beats a capped critical
  fx.sched.make_runnable(2, 4000);
  CHECK(*fx.sched.schedule(0, 4000, "wake").task == 2);
  fx.sched.block_task(2, 6000);
  fx.sched.block_task(3, 6000);
  CHECK(*fx.sched.schedule(0, 6000, "block").task == 1);  // no other ready task in the system
}

TEST_CASE("equal-priority tasks run in queue order") {
  Fixture fx({1, 4000, 1, false});
  fx.sched.update_major_frame(full_frame(60000), 0, false);
  fx.sched.global_tick(0);
  fx.sched.add_task(make_tcb(1, Criticality::Application, 50, 1));
  fx.sched.add_task(make_tcb(2, Criticality::Application, 50, 1));
  fx.sched.make_runnable(1, 0);
  fx.sched.make_runnable(2, 0);
  CHECK(*fx.sched.schedule(0, 0, "tick").task == 1);
  CHECK(*fx.sched.schedule(0, 4000, "tick").task == 1);  // FIFO: no round-robin
  fx.sched.block_task(1, 8000);
  CHECK(*fx.sched.schedule(0, 8000, "block").task == 2);
  fx.sched.make_runnable(1, 9000);  // wakes to the tail
  CHECK(*fx.sched.schedule(0, 9000, "wake").task == 2);
}

TEST_CASE("best-effort picks the task with minimum cumulative runtime") {
  Fixture fx({1, 4000, 1, false});
  fx.sched.add_task(make_tcb(1, Criticality::BestEffort, 0, kBestEffortPartition));
  fx.sched.add_task(make_tcb(2, Criticality::BestEffort, 0, kBestEffortPartition));
  fx.sched.make_runnable(1, 0);
  fx.sched.make_runnable(2, 0);
  CHECK(*fx.sched.schedule(0, 0, "tick").task == 1);  // tie: lower id
  fx.sched.account_execution(0, 5000);
  CHECK(*fx.sched.schedule(0, 5000, "tick").task == 2);  // 2 has run less
  fx.sched.account_execution(0, 2000);
  CHECK(*fx.sched.schedule(0, 7000, "tick").task == 2);  // still behind
}

TEST_CASE("update_major_frame validates, restarts the clock, and is guarded") {
  Fixture fx({1, 4000, 1, false});
  fx.sched.update_major_frame(two_sixty_ms_partitions(), 0, false);
  for (usec_t t = 0; t <= 80000; t += 4000) fx.sched.global_tick(t);
  CHECK(fx.sched.active_partition() == 2);

  // Reinstalling the identical frame restarts the hyperperiod phase.
  fx.sched.update_major_frame(two_sixty_ms_partitions(), 82000);
  CHECK_FALSE(fx.sched.clock().started);
  fx.sched.global_tick(84000);
  CHECK(fx.sched.clock().hp_start == 82000);
  CHECK(fx.sched.active_partition() == 1);

  MajorFrame bad;
  bad.hyperperiod = 100000;
  bad.partitions = {{1, 100000, 60000, ""}, {2, 100000, 60000, ""}};
  bad.minors = {{1, 0, 60000}, {2, 50000, 60000}};
  CHECK_THROWS_AS(fx.sched.update_major_frame(bad, 90000), Error);
}

namespace {

struct ReentrantSink final : TraceSink {
  Scheduler* sched = nullptr;
  MajorFrame frame;
  bool attempted = false;
  bool got_concurrent = false;
  void emit(const TraceEvent& ev) override {
    if (attempted || ev.kind != TraceEventKind::Reconfig) return;
    attempted = true;
    try {
      sched->update_major_frame(frame, ev.timestamp);
    } catch (const Error& e) {
      got_concurrent = e.code() == Errc::ConcurrentUpdate;
    }
  }
};

}  // namespace

TEST_CASE("a second updater during an update is rejected") {
  ReentrantSink sink;
  Scheduler sched("node", {1, 4000, 1, false}, &sink);
  sink.sched = &sched;
  sink.frame = full_frame(50000);
  sched.update_major_frame(full_frame(60000), 0);
  CHECK(sink.attempted);
  CHECK(sink.got_concurrent);
}

TEST_CASE("hyperperiod offsets delay the clock start") {
  Fixture fx({1, 4000, 1, false});
  fx.sched.update_major_frame(full_frame(60000), 0, false);
  fx.sched.set_hyperperiod_offset(8000);
  CHECK_FALSE(fx.sched.global_tick(0).started);
  CHECK_FALSE(fx.sched.global_tick(4000).started);
  auto out = fx.sched.global_tick(8000);
  CHECK(out.started);
  CHECK(fx.sched.clock().hp_start == 8000);

  CHECK_THROWS_AS(fx.sched.set_hyperperiod_offset(4000), Error);
  try {
    fx.sched.set_hyperperiod_offset(4000);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::OffsetAfterStart);
  }
}

TEST_CASE("offset zero starts immediately") {
  Fixture fx({1, 4000, 1, false});
  fx.sched.update_major_frame(full_frame(60000), 0, false);
  fx.sched.set_hyperperiod_offset(0);
  CHECK(fx.sched.global_tick(0).started);
  CHECK(fx.sched.clock().hp_start == 0);
}
