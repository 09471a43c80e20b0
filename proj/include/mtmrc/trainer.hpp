#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtmrc/corpus.hpp"
#include "mtmrc/metrics.hpp"
#include "mtmrc/model.hpp"
#include "mtmrc/scheduler.hpp"
#include "mtmrc/optim.hpp"

namespace mtmrc {

enum class WeightingMode {
  None,     // every batch of every task, uniform weights
  Mixture,  // all target batches + floor(alpha * N_1) auxiliary batches
  Ced,      // every batch, per-sample CED' weights taken from Sample::weight
};

WeightingMode parse_mode(const std::string& s);
std::string mode_name(WeightingMode m);

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr = 0.002;
  double dropout = 0.3;
  double step_dropout = 0.3;
  std::size_t epochs = 50;
  std::optional<double> alpha;
  WeightingMode mode = WeightingMode::None;
  std::uint64_t seed = 1;
  double ema_decay = 0.995;
  double clip_norm = 5.0;
  std::size_t vocab_size = 10000;  // embedding rows besides OOV
  std::size_t threads = 1;         // 1 = strict deterministic single-threaded mode
  ModelConfig model;

  /// Throws ConfigError on out-of-range values or a missing/extra alpha.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  MetricReport dev;
  double lr = 0.0;
  double wall_ms = 0.0;
};

/// {epoch, train_loss, dev_em, dev_f1, lr, wall_ms}
nlohmann::json epoch_json(const EpochLog& e);

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::vector<double> batch_losses;  // weighted loss of every update, in order
  std::size_t best_epoch = 0;
  MetricReport best_dev;
  Checkpoint best;  // EMA parameters of the best epoch
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Runs the multi-task loop. Selection is by dev F1 (cloze accuracy for a
/// cloze dev set); ties keep the earlier epoch. Throws NumericError with
/// epoch/batch coordinates when the loss diverges.
TrainResult train(const TaskDataset& target, const TaskDataset& dev, const std::vector<TaskDataset>& auxiliaries,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// The minibatches of every task for one epoch (1-based), as training uses them.
std::vector<std::vector<Minibatch>> epoch_batches(const std::vector<const TaskDataset*>& tasks, const TrainConfig& cfg,
                                                  std::size_t epoch);
/// The epoch's batch order under cfg.mode, as training uses it.
BatchSchedule epoch_schedule(const BatchCounts& counts, const TrainConfig& cfg, std::size_t epoch);

MetricReport evaluate(const ModelParameters& params, const ModelVocab& vocab, const TaskDataset& dev);

/// Index of the first maximum of `scores`; earlier epochs win ties.
std::size_t best_index(const std::vector<double>& scores);

}  // namespace mtmrc
