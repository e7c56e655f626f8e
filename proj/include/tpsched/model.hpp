#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tpsched {

// All time is integer microseconds. No floating-point clocks anywhere;
// traces must compare exactly and replays must be deterministic.
using usec_t = std::int64_t;
using task_id_t = std::int64_t;
using partition_id_t = std::int32_t;

inline constexpr int kMaxRtPrio = 100;  // priorities 0..99, larger number wins
inline constexpr int kMaxPartitions = 64;

// Reserved partition sentinels, outside the application range 1..64.
inline constexpr partition_id_t kSystemPartition = 0;
inline constexpr partition_id_t kBestEffortPartition = -1;
inline constexpr partition_id_t kIdlePartition = -2;

constexpr bool is_app_partition(partition_id_t p) noexcept {
  return p >= 1 && p <= kMaxPartitions;
}

enum class Errc {
  EmptyPartitionSet,
  MalformedFrame,
  InvalidFrame,
  Infeasible,
  OffsetAfterStart,
  ConcurrentUpdate,
  PastTimestamp,
  ScenarioInvalid,
  HorizonZero,
  UnsupportedParams,
  UnsupportedFormat,
  InsufficientData,
  IncompleteChain,
  ParseError,
  IoFailure,
  NoPrivilege,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

// A temporal partition: its tasks get the CPU for `duration` out of every
// `period`, exclusively.
struct PartitionSpec {
  partition_id_t id = 0;  // 1..64
  usec_t period = 0;
  usec_t duration = 0;
  std::string name;

  friend bool operator==(const PartitionSpec&, const PartitionSpec&) = default;
};

// One contiguous window of the schedule, assigned to a partition.
struct MinorFrame {
  partition_id_t partition = 0;
  usec_t offset = 0;  // from major-frame start
  usec_t duration = 0;

  usec_t end() const noexcept { return offset + duration; }

  friend bool operator==(const MinorFrame&, const MinorFrame&) = default;
};

// The repeating schedule. `minors` are sorted by offset and tile (or
// partially cover) [0, hyperperiod).
struct MajorFrame {
  usec_t hyperperiod = 0;
  std::vector<MinorFrame> minors;
  std::vector<PartitionSpec> partitions;

  const PartitionSpec* find_partition(partition_id_t id) const noexcept {
    for (const auto& p : partitions)
      if (p.id == id) return &p;
    return nullptr;
  }

  friend bool operator==(const MajorFrame&, const MajorFrame&) = default;
};

// Total order: Critical > Application > BestEffort.
enum class Criticality : std::uint8_t {
  BestEffort = 0,
  Application = 1,
  Critical = 2,
};

constexpr bool operator<(Criticality a, Criticality b) noexcept {
  return static_cast<std::uint8_t>(a) < static_cast<std::uint8_t>(b);
}
constexpr bool operator>(Criticality a, Criticality b) noexcept { return b < a; }

inline const char* to_string(Criticality c) noexcept {
  switch (c) {
    case Criticality::Critical: return "critical";
    case Criticality::Application: return "application";
    case Criticality::BestEffort: return "best_effort";
  }
  return "?";
}

// Scheduler gate for application partitions. While AppInactive no
// application task is dispatched on any CPU.
enum class SchedulerState : std::uint8_t { AppActive, AppInactive };

struct TaskControlBlock {
  task_id_t task_id = 0;
  std::string actor;
  Criticality criticality = Criticality::Application;
  int priority = 0;  // 0..kMaxRtPrio-1, larger wins (ignored for best effort)
  partition_id_t partition = 0;
  int cpu_affinity = 0;
  int cap_percent = 100;  // execution ceiling per cap window, 100 = uncapped

  // Cap accounting state, owned by the scheduler.
  bool disabled = false;
  usec_t last_disabled_time = 0;
  usec_t exec_time_in_window = 0;
  usec_t total_exec_time = 0;

  friend bool operator==(const TaskControlBlock&, const TaskControlBlock&) = default;
};

// Criticality fixes the partition class and vice versa.
inline void check_tcb(const TaskControlBlock& t) {
  auto bad = [&](const std::string& why) {
    fail(Errc::ScenarioInvalid, "task " + std::to_string(t.task_id) + ": " + why);
  };
  if (t.priority < 0 || t.priority >= kMaxRtPrio) bad("priority out of range");
  if (t.cap_percent < 0 || t.cap_percent > 100) bad("cap_percent out of range");
  switch (t.criticality) {
    case Criticality::Critical:
      if (t.partition != kSystemPartition) bad("critical tasks belong to the system partition");
      break;
    case Criticality::BestEffort:
      if (t.partition != kBestEffortPartition) bad("best-effort tasks belong to the best-effort queue");
      break;
    case Criticality::Application:
      if (!is_app_partition(t.partition)) bad("application tasks need a partition in 1..64");
      break;
  }
  if (t.disabled && t.cap_percent >= 100) bad("a task with 100% cap can never be disabled");
}

enum class TraceEventKind : std::uint8_t {
  ContextSwitch,
  FrameSwitch,
  Reconfig,
  CapDisable,
  CapReenable,
  MessageSend,
  MessageRecv,
};

inline const char* to_string(TraceEventKind k) noexcept {
  switch (k) {
    case TraceEventKind::ContextSwitch: return "CONTEXT_SWITCH";
    case TraceEventKind::FrameSwitch: return "FRAME_SWITCH";
    case TraceEventKind::Reconfig: return "RECONFIG";
    case TraceEventKind::CapDisable: return "CAP_DISABLE";
    case TraceEventKind::CapReenable: return "CAP_REENABLE";
    case TraceEventKind::MessageSend: return "MESSAGE_SEND";
    case TraceEventKind::MessageRecv: return "MESSAGE_RECV";
  }
  return "?";
}

// One schedule log record. `detail` is a ';'-separated key=value list whose
// keys per kind are documented in trace_io.hpp.
struct TraceEvent {
  usec_t timestamp = 0;
  std::string node;
  int cpu = 0;
  TraceEventKind kind = TraceEventKind::ContextSwitch;
  std::optional<task_id_t> prev_task;
  std::optional<task_id_t> next_task;
  partition_id_t partition = kIdlePartition;
  std::string detail;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct TraceLog {
  std::string node;
  std::vector<TraceEvent> events;

  friend bool operator==(const TraceLog&, const TraceLog&) = default;
};

// Scheduler output port. Implementations must not mutate scheduler state.
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void emit(const TraceEvent& ev) = 0;
};

class TraceCollector final : public TraceSink {
 public:
  explicit TraceCollector(std::string node) { log_.node = std::move(node); }
  void emit(const TraceEvent& ev) override { log_.events.push_back(ev); }
  const TraceLog& log() const noexcept { return log_; }
  TraceLog take() { return std::move(log_); }

 private:
  TraceLog log_;
};

// Least common multiple of all partition periods.
inline usec_t hyperperiod_of(const std::vector<usec_t>& periods) {
  if (periods.empty()) fail(Errc::EmptyPartitionSet, "hyperperiod of an empty partition set");
  usec_t h = 1;
  for (usec_t p : periods) {
    if (p <= 0) fail(Errc::EmptyPartitionSet, "period must be positive");
    h = std::lcm(h, p);
  }
  return h;
}

}  // namespace tpsched
