#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mtmrc/corpus.hpp"
#include "mtmrc/lm.hpp"

namespace mtmrc {

/// (x - min) / (max - min); a constant input maps to all zeros.
std::vector<double> minmax_normalize(std::span<const double> scores);

/// Cross-entropy difference of normalized scores, in [-2, 2]. Lower means
/// more target-like and less typical of its own task.
double ced(double h1q, double hkq, double h1a, double hka);

struct ScoreRow {
  std::string id;
  int task = 0;
  std::size_t index = 0;  // position within its TaskDataset
  double h1q = 0, hkq = 0, h1a = 0, hka = 0;
  double h1q_norm = 0, hkq_norm = 0, h1a_norm = 0, hka_norm = 0;
  double ced = 0;
  double ced_prime = 0;
};

/// One row per auxiliary sample. Target samples carry weight 1 and are not listed.
struct ScoreTable {
  std::vector<ScoreRow> rows;

  /// Mean CED' per auxiliary task id.
  std::map<int, double> task_means() const;
  /// Rows ordered by (task, id).
  std::vector<ScoreRow> sorted() const;
};

/// Scores every auxiliary sample against the target and its own task.
///
/// Own-task scores are min-max normalized within each auxiliary task. Target
/// model scores are normalized jointly over the union of all auxiliary
/// samples, and so is the final CED -> CED' map. Target samples do not enter
/// any min/max.
ScoreTable score_samples(const TaskDataset& target, const std::vector<TaskDataset>& auxiliaries,
                         const std::map<int, TaskModels>& models);

/// Writes CED' into each auxiliary sample's weight and 1 into every target sample.
void apply_weights(const ScoreTable& table, TaskDataset& target, std::vector<TaskDataset>& auxiliaries);

ScoreTable assign_weights(TaskDataset& target, std::vector<TaskDataset>& auxiliaries,
                          const std::map<int, TaskModels>& models);

/// Header id, task, H1Q, HkQ, H1A, HkA, CED, CEDprime; six decimals; (task, id) order.
std::string to_tsv(const ScoreTable& table);

}  // namespace mtmrc
