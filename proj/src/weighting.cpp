#include "mtmrc/weighting.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace mtmrc {

std::vector<double> minmax_normalize(std::span<const double> scores) {
  std::vector<double> out(scores.size(), 0.0);
  if (scores.empty()) return out;
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double min = *lo, range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - min) / range;
  return out;
}

double ced(double h1q, double hkq, double h1a, double hka) { return (h1q - hkq) + (h1a - hka); }

std::map<int, double> ScoreTable::task_means() const {
  std::map<int, std::pair<double, std::size_t>> acc;
  for (const auto& r : rows) {
    auto& [sum, n] = acc[r.task];
    sum += r.ced_prime;
    ++n;
  }
  std::map<int, double> out;
  for (const auto& [task, p] : acc) out[task] = p.first / static_cast<double>(p.second);
  return out;
}

std::vector<ScoreRow> ScoreTable::sorted() const {
  std::vector<ScoreRow> out = rows;
  std::stable_sort(out.begin(), out.end(), [](const ScoreRow& a, const ScoreRow& b) {
    return a.task != b.task ? a.task < b.task : a.id < b.id;
  });
  return out;
}

namespace {

const TaskModels& models_for(const std::map<int, TaskModels>& models, int task) {
  auto it = models.find(task);
  if (it == models.end()) throw ConfigError("no language/length model for task " + std::to_string(task));
  return it->second;
}

void normalize_column(std::vector<ScoreRow>& rows, std::size_t begin, std::size_t end, double ScoreRow::*raw,
                      double ScoreRow::*norm) {
  std::vector<double> xs;
  xs.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) xs.push_back(rows[i].*raw);
  const auto ys = minmax_normalize(xs);
  for (std::size_t i = begin; i < end; ++i) rows[i].*norm = ys[i - begin];
}

}  // namespace

ScoreTable score_samples(const TaskDataset& target, const std::vector<TaskDataset>& auxiliaries,
                         const std::map<int, TaskModels>& models) {
  const TaskModels& tm = models_for(models, target.task_id);
  ScoreTable table;
  std::vector<std::pair<std::size_t, std::size_t>> task_ranges;
  for (const auto& aux : auxiliaries) {
    if (aux.task_id == target.task_id) throw ConfigError("auxiliary dataset reuses the target task id");
    const TaskModels& km = models_for(models, aux.task_id);
    const std::size_t first = table.rows.size();
    for (std::size_t i = 0; i < aux.samples.size(); ++i) {
      const Sample& s = aux.samples[i];
      const auto words = question_words(s);
      const auto len = s.answer_length();
      ScoreRow r;
      r.id = s.id;
      r.task = aux.task_id;
      r.index = i;
      r.h1q = tm.question.cross_entropy(words);
      r.hkq = km.question.cross_entropy(words);
      r.h1a = tm.length.score(len);
      r.hka = km.length.score(len);
      table.rows.push_back(std::move(r));
    }
    task_ranges.emplace_back(first, table.rows.size());
  }
  auto& rows = table.rows;
  for (const auto& [b, e] : task_ranges) {
    normalize_column(rows, b, e, &ScoreRow::hkq, &ScoreRow::hkq_norm);
    normalize_column(rows, b, e, &ScoreRow::hka, &ScoreRow::hka_norm);
  }
  normalize_column(rows, 0, rows.size(), &ScoreRow::h1q, &ScoreRow::h1q_norm);
  normalize_column(rows, 0, rows.size(), &ScoreRow::h1a, &ScoreRow::h1a_norm);
  for (auto& r : rows) r.ced = ced(r.h1q_norm, r.hkq_norm, r.h1a_norm, r.hka_norm);
  normalize_column(rows, 0, rows.size(), &ScoreRow::ced, &ScoreRow::ced_prime);
  for (auto& r : rows) r.ced_prime = 1.0 - r.ced_prime;
  return table;
}

void apply_weights(const ScoreTable& table, TaskDataset& target, std::vector<TaskDataset>& auxiliaries) {
  for (auto& s : target.samples) s.weight = 1.0;
  std::map<int, TaskDataset*> by_task;
  for (auto& aux : auxiliaries) by_task[aux.task_id] = &aux;
  for (const auto& r : table.rows) {
    auto it = by_task.find(r.task);
    if (it == by_task.end() || r.index >= it->second->samples.size()) {
      throw ConfigError("score row '" + r.id + "' does not match any auxiliary sample");
    }
    it->second->samples[r.index].weight = r.ced_prime;
  }
}

ScoreTable assign_weights(TaskDataset& target, std::vector<TaskDataset>& auxiliaries,
                          const std::map<int, TaskModels>& models) {
  ScoreTable table = score_samples(target, auxiliaries, models);
  apply_weights(table, target, auxiliaries);
  return table;
}

std::string to_tsv(const ScoreTable& table) {
  std::ostringstream out;
  out << "id\ttask\tH1Q\tHkQ\tH1A\tHkA\tCED\tCEDprime\n";
  char buf[256];
  for (const auto& r : table.sorted()) {
    std::snprintf(buf, sizeof buf, "\t%d\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n", r.task, r.h1q, r.hkq, r.h1a, r.hka,
                  r.ced, r.ced_prime);
    out << r.id << buf;
  }
  return out.str();
}

}  // namespace mtmrc
