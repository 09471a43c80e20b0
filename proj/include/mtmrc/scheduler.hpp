#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mtmrc/common.hpp"

namespace mtmrc {

struct ScheduleEntry {
  int task = 0;
  std::size_t batch = 0;
  bool operator==(const ScheduleEntry&) const = default;
};

struct BatchSchedule {
  int epoch = 0;
  std::uint64_t seed = 0;
  std::vector<ScheduleEntry> entries;
};

/// Number of tasks is batch_counts.size(); task ids are 1-based, task 1 the target.
using BatchCounts = std::vector<std::size_t>;

/// Every batch of every task, uniformly shuffled.
BatchSchedule schedule_simple(const BatchCounts& batch_counts, Rng& rng);

/// floor(alpha * n_target), guarded against representation error such as 0.29 * 100.
std::size_t auxiliary_quota(double alpha, std::size_t n_target);

/// All target batches plus floor(alpha * N_1) auxiliary batches drawn without
/// replacement from the pooled auxiliary tasks, shuffled together.
/// Throws ScheduleError when the pool is too small.
BatchSchedule schedule_mixture(const BatchCounts& batch_counts, double alpha, Rng& rng);

/// One "epoch<TAB>task<TAB>batch" line per entry.
std::string dump_schedule(const BatchSchedule& s);

}  // namespace mtmrc
