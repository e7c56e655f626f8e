#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <deque>
#include <optional>

#include "tpsched/model.hpp"

namespace tpsched {

// Occupancy bitmap over kMaxRtPrio priority levels. find_highest() is a
// constant number of word scans, which is what keeps the cap-disabled
// dispatch path O(1).
class PrioBitmap {
  static constexpr int kWords = (kMaxRtPrio + 63) / 64;

 public:
  void set(int prio) noexcept { words_[prio >> 6] |= (std::uint64_t{1} << (prio & 63)); }
  void clear(int prio) noexcept { words_[prio >> 6] &= ~(std::uint64_t{1} << (prio & 63)); }
  bool test(int prio) const noexcept { return (words_[prio >> 6] >> (prio & 63)) & 1; }
  bool any() const noexcept {
    for (auto w : words_)
      if (w) return true;
    return false;
  }

  // Highest occupied priority, or -1 when empty.
  int find_highest() const noexcept {
    for (int w = kWords - 1; w >= 0; --w)
      if (words_[w]) return w * 64 + (63 - std::countl_zero(words_[w]));
    return -1;
  }

  // Highest occupied priority strictly below `prio`, or -1.
  int find_next_below(int prio) const noexcept {
    int w = prio >> 6;
    std::uint64_t mask = (prio & 63) ? (std::uint64_t{1} << (prio & 63)) - 1 : 0;
    std::uint64_t cur = words_[w] & mask;
    while (true) {
      if (cur) return w * 64 + (63 - std::countl_zero(cur));
      if (--w < 0) return -1;
      cur = words_[w];
    }
  }

 private:
  std::array<std::uint64_t, kWords> words_{};
};

// FIFO lists indexed by priority with a find-first-set bitmap. A task id
// appears in at most one list at a time; the caller keeps that invariant.
class PriorityQueue {
 public:
  bool empty() const noexcept { return !bitmap_.any(); }

  void enqueue_tail(task_id_t task, int prio) {
    lists_[prio].push_back(task);
    bitmap_.set(prio);
  }

  void enqueue_head(task_id_t task, int prio) {
    lists_[prio].push_front(task);
    bitmap_.set(prio);
  }

  bool remove(task_id_t task, int prio) {
    auto& l = lists_[prio];
    for (auto it = l.begin(); it != l.end(); ++it) {
      if (*it == task) {
        l.erase(it);
        if (l.empty()) bitmap_.clear(prio);
        return true;
      }
    }
    return false;
  }

  bool contains(task_id_t task, int prio) const {
    const auto& l = lists_[prio];
    for (auto t : l)
      if (t == task) return true;
    return false;
  }

  int highest_prio() const noexcept { return bitmap_.find_highest(); }
  int next_prio_below(int prio) const noexcept { return bitmap_.find_next_below(prio); }
  const std::deque<task_id_t>& list_at(int prio) const noexcept { return lists_[prio]; }

 private:
  PrioBitmap bitmap_;
  std::array<std::deque<task_id_t>, kMaxRtPrio> lists_;
};

// Best-effort runnable set. Selection (minimum cumulative runtime) is done
// by the scheduler, which owns the accounting.
class FairQueue {
 public:
  void add(task_id_t task) { tasks_.push_back(task); }
  bool remove(task_id_t task) {
    for (auto it = tasks_.begin(); it != tasks_.end(); ++it) {
      if (*it == task) {
        tasks_.erase(it);
        return true;
      }
    }
    return false;
  }
  bool empty() const noexcept { return tasks_.empty(); }
  const std::deque<task_id_t>& tasks() const noexcept { return tasks_; }

 private:
  std::deque<task_id_t> tasks_;
};

// Per-CPU queue family: one priority queue per application partition, one
// for the system partition, one fair queue for best effort.
struct RunQueueSet {
  int cpu = 0;
  std::array<PriorityQueue, kMaxPartitions> partition_queues;
  PriorityQueue system_queue;
  FairQueue best_effort_queue;
  std::optional<task_id_t> current_task;

  PriorityQueue& queue_for(partition_id_t p) {
    return p == kSystemPartition ? system_queue : partition_queues[p - 1];
  }
  const PriorityQueue& queue_for(partition_id_t p) const {
    return p == kSystemPartition ? system_queue : partition_queues[p - 1];
  }
};

}  // namespace tpsched
