#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "tpsched/model.hpp"

namespace tpsched {

enum class FrameConstraint : std::uint8_t {
  C0_Hyperperiod,     // hyperperiod = lcm of partition periods
  C1_FirstOffset,     // first minor of each partition starts within one period
  C2_PeriodStride,    // consecutive minors of a partition are exactly one period apart
  K1_FitsHyperperiod, // every minor ends at or before the hyperperiod
  K2_NoOverlap,       // minors are pairwise disjoint
};

inline const char* to_string(FrameConstraint c) noexcept {
  switch (c) {
    case FrameConstraint::C0_Hyperperiod: return "C0";
    case FrameConstraint::C1_FirstOffset: return "C1";
    case FrameConstraint::C2_PeriodStride: return "C2";
    case FrameConstraint::K1_FitsHyperperiod: return "K1_FITS_HYPERPERIOD";
    case FrameConstraint::K2_NoOverlap: return "K2_NO_OVERLAP";
  }
  return "?";
}

struct FrameViolation {
  FrameConstraint constraint;
  std::string detail;
  std::vector<std::size_t> offending_frames;  // indices into frame.minors
};

struct FrameValidationReport {
  bool valid = true;
  std::vector<FrameViolation> violations;

  void add(FrameConstraint c, std::string detail, std::vector<std::size_t> frames = {}) {
    valid = false;
    violations.push_back({c, std::move(detail), std::move(frames)});
  }
};

namespace detail {

// Structural sanity, prior to any constraint check. Unsorted minors or
// negative fields are a malformed input, not a reportable violation.
inline void check_frame_shape(const MajorFrame& frame) {
  if (frame.hyperperiod <= 0) fail(Errc::MalformedFrame, "hyperperiod must be positive");
  for (const auto& p : frame.partitions) {
    if (p.period <= 0 || p.duration <= 0)
      fail(Errc::MalformedFrame, "partition " + std::to_string(p.id) + ": period and duration must be positive");
    if (p.duration > p.period)
      fail(Errc::MalformedFrame, "partition " + std::to_string(p.id) + ": duration exceeds period");
    if (!is_app_partition(p.id))
      fail(Errc::MalformedFrame, "partition id " + std::to_string(p.id) + " outside 1..64");
  }
  if (frame.partitions.size() > static_cast<std::size_t>(kMaxPartitions))
    fail(Errc::MalformedFrame, "more than 64 application partitions");
  for (std::size_t i = 0; i < frame.partitions.size(); ++i)
    for (std::size_t j = i + 1; j < frame.partitions.size(); ++j)
      if (frame.partitions[i].id == frame.partitions[j].id)
        fail(Errc::MalformedFrame, "duplicate partition id " + std::to_string(frame.partitions[i].id));
  for (std::size_t i = 0; i < frame.minors.size(); ++i) {
    const auto& m = frame.minors[i];
    if (m.offset < 0 || m.duration <= 0)
      fail(Errc::MalformedFrame, "minor " + std::to_string(i) + ": negative offset or non-positive duration");
    if (m.partition != kIdlePartition && frame.find_partition(m.partition) == nullptr)
      fail(Errc::MalformedFrame, "minor " + std::to_string(i) + ": unknown partition " + std::to_string(m.partition));
    if (i > 0 && frame.minors[i - 1].offset > m.offset)
      fail(Errc::MalformedFrame, "minors not sorted by offset");
  }
}

}  // namespace detail

// Runs the full constraint battery in order C0, C1, C2, K1, K2 without
// short-circuiting, so a report lists everything that is wrong at once.
// Idle filler minors participate only in K1/K2.
inline FrameValidationReport validate_major_frame(const MajorFrame& frame) {
  detail::check_frame_shape(frame);
  FrameValidationReport report;

  // C0: hyperperiod is the lcm of the partition periods.
  if (frame.partitions.empty()) {
    report.add(FrameConstraint::C0_Hyperperiod, "frame has no partitions");
  } else {
    std::vector<usec_t> periods;
    periods.reserve(frame.partitions.size());
    for (const auto& p : frame.partitions) periods.push_back(p.period);
    usec_t lcm = hyperperiod_of(periods);
    if (lcm != frame.hyperperiod)
      report.add(FrameConstraint::C0_Hyperperiod,
                 "hyperperiod " + std::to_string(frame.hyperperiod) + " != lcm " + std::to_string(lcm));
  }

  // Per-partition instance lists, in offset order (minors are sorted).
  for (const auto& p : frame.partitions) {
    std::vector<std::size_t> instances;
    for (std::size_t i = 0; i < frame.minors.size(); ++i)
      if (frame.minors[i].partition == p.id) instances.push_back(i);

    // C1: the first instance starts within one period of the frame start.
    if (!instances.empty() && frame.minors[instances.front()].offset > p.period)
      report.add(FrameConstraint::C1_FirstOffset,
                 "partition " + std::to_string(p.id) + ": first offset beyond its period",
                 {instances.front()});

    // C2: instances recur with exactly the partition period, and there is
    // one per period across the hyperperiod.
    bool stride_ok = true;
    for (std::size_t k = 0; k + 1 < instances.size(); ++k) {
      usec_t gap = frame.minors[instances[k + 1]].offset - frame.minors[instances[k]].offset;
      if (gap != p.period) {
        report.add(FrameConstraint::C2_PeriodStride,
                   "partition " + std::to_string(p.id) + ": consecutive offsets " +
                       std::to_string(gap) + "us apart, expected " + std::to_string(p.period) + "us",
                   {instances[k], instances[k + 1]});
        stride_ok = false;
      }
    }
    usec_t expected = frame.hyperperiod / p.period;
    if (stride_ok && static_cast<usec_t>(instances.size()) != expected)
      report.add(FrameConstraint::C2_PeriodStride,
                 "partition " + std::to_string(p.id) + ": " + std::to_string(instances.size()) +
                     " instances, expected " + std::to_string(expected),
                 instances);
    for (std::size_t idx : instances) {
      if (frame.minors[idx].duration != p.duration)
        report.add(FrameConstraint::C2_PeriodStride,
                   "partition " + std::to_string(p.id) + ": minor duration " +
                       std::to_string(frame.minors[idx].duration) + "us != partition duration " +
                       std::to_string(p.duration) + "us",
                   {idx});
    }
  }

  // K1: all minors finish before the end of the hyperperiod.
  for (std::size_t i = 0; i < frame.minors.size(); ++i)
    if (frame.minors[i].end() > frame.hyperperiod)
      report.add(FrameConstraint::K1_FitsHyperperiod,
                 "minor " + std::to_string(i) + " ends at " + std::to_string(frame.minors[i].end()) +
                     "us, past hyperperiod",
                 {i});

  // K2: no two minors overlap.
  for (std::size_t i = 0; i + 1 < frame.minors.size(); ++i)
    if (frame.minors[i].end() > frame.minors[i + 1].offset)
      report.add(FrameConstraint::K2_NoOverlap,
                 "minor " + std::to_string(i) + " overlaps minor " + std::to_string(i + 1),
                 {i, i + 1});

  return report;
}

// Tiles [0, hyperperiod) by inserting idle minors into the gaps. Idle
// windows may run critical and best-effort work but never application
// tasks. Idempotent; original minors are kept as-is.
inline MajorFrame fill_empty(const MajorFrame& frame) {
  auto report = validate_major_frame(frame);
  if (!report.valid)
    fail(Errc::InvalidFrame, "fill_empty requires a frame that passes validation (" +
                                 std::string(to_string(report.violations.front().constraint)) + ")");
  MajorFrame out = frame;
  std::vector<MinorFrame> tiled;
  usec_t cursor = 0;
  for (const auto& m : frame.minors) {
    if (m.offset > cursor) tiled.push_back({kIdlePartition, cursor, m.offset - cursor});
    tiled.push_back(m);
    cursor = m.end();
  }
  if (cursor < frame.hyperperiod) tiled.push_back({kIdlePartition, cursor, frame.hyperperiod - cursor});
  out.minors = std::move(tiled);
  return out;
}

// Places every partition instance with a rate-monotonic greedy sweep: the
// first offset is the only free variable (the stride is fixed by C2), so
// each conflict bumps the candidate first-offset forward and the scan
// restarts one level up. Deterministic for a given input ordering.
inline MajorFrame generate_major_frame(const std::vector<PartitionSpec>& partitions) {
  if (partitions.empty()) fail(Errc::EmptyPartitionSet, "no partitions to schedule");
  std::vector<usec_t> periods;
  for (const auto& p : partitions) {
    if (p.period <= 0 || p.duration <= 0 || p.duration > p.period)
      fail(Errc::MalformedFrame, "partition " + std::to_string(p.id) + ": bad period/duration");
    periods.push_back(p.period);
  }
  usec_t h = hyperperiod_of(periods);

  // Utilization admissibility (necessary, not sufficient): sum of
  // duration/period must not exceed 1. Checked exactly in integers.
  {
    // sum(d_i/p_i) <= 1  <=>  sum(d_i * (H/p_i)) <= H
    usec_t demand = 0;
    for (const auto& p : partitions) demand += p.duration * (h / p.period);
    if (demand > h)
      fail(Errc::Infeasible, "utilization " + std::to_string(demand) + "/" + std::to_string(h) + " exceeds 1");
  }

  std::vector<PartitionSpec> order = partitions;
  std::stable_sort(order.begin(), order.end(),
                   [](const PartitionSpec& a, const PartitionSpec& b) { return a.period < b.period; });

  std::vector<MinorFrame> placed;  // kept sorted by offset
  auto conflict = [&](usec_t start, usec_t dur) -> const MinorFrame* {
    for (const auto& m : placed)
      if (start < m.end() && m.offset < start + dur) return &m;
    return nullptr;
  };

  for (const auto& p : order) {
    usec_t instances = h / p.period;
    usec_t first = 0;
    usec_t first_max = p.period - p.duration;  // beyond this, the last instance spills past H
    bool done = false;
    while (!done) {
      const MinorFrame* clash = nullptr;
      usec_t clash_k = 0;
      for (usec_t k = 0; k < instances; ++k) {
        clash = conflict(first + k * p.period, p.duration);
        if (clash) {
          clash_k = k;
          break;
        }
      }
      if (!clash) {
        done = true;
        break;
      }
      // Move the first offset just far enough that instance k clears the
      // window it collided with.
      usec_t shifted = clash->end() - clash_k * p.period;
      first = std::max(first + 1, shifted);
      if (first > first_max)
        fail(Errc::Infeasible, "no feasible placement for partition " + std::to_string(p.id) +
                                   " (period " + std::to_string(p.period) + "us)");
    }
    for (usec_t k = 0; k < instances; ++k) placed.push_back({p.id, first + k * p.period, p.duration});
    std::sort(placed.begin(), placed.end(),
              [](const MinorFrame& a, const MinorFrame& b) { return a.offset < b.offset; });
  }

  MajorFrame frame;
  frame.hyperperiod = h;
  frame.partitions = partitions;
  frame.minors = std::move(placed);
  return frame;
}

}  // namespace tpsched
