#include "mtmrc/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mtmrc {

BatchSchedule schedule_simple(const BatchCounts& batch_counts, Rng& rng) {
  if (batch_counts.empty()) throw ScheduleError("at least one task is required");
  BatchSchedule s;
  for (std::size_t k = 0; k < batch_counts.size(); ++k) {
    for (std::size_t b = 0; b < batch_counts[k]; ++b) s.entries.push_back({static_cast<int>(k + 1), b});
  }
  std::shuffle(s.entries.begin(), s.entries.end(), rng);
  return s;
}

std::size_t auxiliary_quota(double alpha, std::size_t n_target) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ScheduleError("mixture ratio must be a finite value >= 0");
  return static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n_target) + 1e-9));
}

BatchSchedule schedule_mixture(const BatchCounts& batch_counts, double alpha, Rng& rng) {
  if (batch_counts.empty()) throw ScheduleError("at least one task is required");
  const std::size_t quota = auxiliary_quota(alpha, batch_counts[0]);
  std::vector<ScheduleEntry> pool;
  for (std::size_t k = 1; k < batch_counts.size(); ++k) {
    for (std::size_t b = 0; b < batch_counts[k]; ++b) pool.push_back({static_cast<int>(k + 1), b});
  }
  if (quota > pool.size()) {
    throw ScheduleError("mixture ratio needs " + std::to_string(quota) + " auxiliary batches but only " +
                        std::to_string(pool.size()) + " exist; lower alpha or sample with replacement");
  }
  // Partial Fisher-Yates: the first `quota` slots become a uniform draw without replacement.
  for (std::size_t i = 0; i < quota; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  BatchSchedule s;
  for (std::size_t b = 0; b < batch_counts[0]; ++b) s.entries.push_back({1, b});
  s.entries.insert(s.entries.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(quota));
  std::shuffle(s.entries.begin(), s.entries.end(), rng);
  return s;
}

std::string dump_schedule(const BatchSchedule& s) {
  std::ostringstream out;
  for (const auto& e : s.entries) out << s.epoch << '\t' << e.task << '\t' << e.batch << '\n';
  return out.str();
}

}  // namespace mtmrc
