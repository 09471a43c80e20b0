#include "mtmrc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "mtmrc/scheduler.hpp"

namespace mtmrc {

using nlohmann::json;

WeightingMode parse_mode(const std::string& s) {
  if (s == "none") return WeightingMode::None;
  if (s == "mixture") return WeightingMode::Mixture;
  if (s == "ced") return WeightingMode::Ced;
  throw ConfigError("train.mode must be one of none|mixture|ced, got '" + s + "'");
}

std::string mode_name(WeightingMode m) {
  switch (m) {
    case WeightingMode::None: return "none";
    case WeightingMode::Mixture: return "mixture";
    case WeightingMode::Ced: return "ced";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr > 0.0 && lr <= 1.0)) throw ConfigError("train.lr must be in (0,1]");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train.dropout must be in [0,1)");
  if (!(step_dropout >= 0.0 && step_dropout < 1.0)) throw ConfigError("train.step_dropout must be in [0,1)");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("train.ema_decay must be in [0,1)");
  if (epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (threads == 0) throw ConfigError("train.threads must be >= 1");
  if (mode == WeightingMode::Mixture && !alpha) throw ConfigError("train.alpha is required when train.mode = mixture");
  if (mode != WeightingMode::Mixture && alpha) throw ConfigError("train.alpha is only valid with train.mode = mixture");
  if (alpha && !(*alpha >= 0.0)) throw ConfigError("train.alpha must be >= 0");
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"batch_size", c.batch_size},
           {"lr", c.lr},
           {"dropout", c.dropout},
           {"step_dropout", c.step_dropout},
           {"epochs", c.epochs},
           {"mode", mode_name(c.mode)},
           {"seed", c.seed},
           {"ema_decay", c.ema_decay},
           {"clip_norm", c.clip_norm},
           {"vocab_size", c.vocab_size},
           {"threads", c.threads},
           {"model", c.model}};
  j["alpha"] = c.alpha ? json(*c.alpha) : json(nullptr);
}

json epoch_json(const EpochLog& e) {
  return json{{"epoch", e.epoch},   {"train_loss", e.train_loss}, {"dev_em", e.dev.em},
              {"dev_f1", e.dev.f1}, {"lr", e.lr},                 {"wall_ms", e.wall_ms}};
}

std::size_t best_index(const std::vector<double>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

MetricReport evaluate(const ModelParameters& params, const ModelVocab& vocab, const TaskDataset& dev) {
  MetricAccumulator acc;
  for (const auto& s : dev.samples) {
    const Prediction pred = predict(params, encode_sample(s, vocab), s);
    if (s.is_span()) {
      const auto words = surfaces(s.passage);
      const auto& gold = s.span();
      const auto& sp = *pred.span;
      std::vector<std::string> p(words.begin() + static_cast<std::ptrdiff_t>(sp.begin),
                                 words.begin() + static_cast<std::ptrdiff_t>(sp.end + 1));
      std::vector<std::string> g(words.begin() + static_cast<std::ptrdiff_t>(gold.begin),
                                 words.begin() + static_cast<std::ptrdiff_t>(gold.end + 1));
      acc.add_span(p, g);
    } else {
      acc.add_choice(*pred.candidate == s.cloze().gold);
    }
  }
  return acc.report();
}

// Independent streams per task and for the schedule: adding auxiliary tasks
// never perturbs the target's batches or a ratio-0 schedule.
std::vector<std::vector<Minibatch>> epoch_batches(const std::vector<const TaskDataset*>& tasks, const TrainConfig& cfg,
                                                  std::size_t epoch) {
  std::vector<std::vector<Minibatch>> out;
  for (const auto* t : tasks) {
    Rng rng(derive_seed(cfg.seed, {epoch, 1, static_cast<std::uint64_t>(t->task_id)}));
    out.push_back(make_minibatches(*t, cfg.batch_size, rng));
  }
  return out;
}

BatchSchedule epoch_schedule(const BatchCounts& counts, const TrainConfig& cfg, std::size_t epoch) {
  Rng rng(derive_seed(cfg.seed, {epoch, 3}));
  BatchSchedule s = cfg.mode == WeightingMode::Mixture ? schedule_mixture(counts, *cfg.alpha, rng)
                                                       : schedule_simple(counts, rng);
  s.epoch = static_cast<int>(epoch);
  s.seed = cfg.seed;
  return s;
}

namespace {

struct TaskData {
  const TaskDataset* ds;
  std::vector<EncodedSample> encoded;
};

void add_into(ModelParameters& dst, const ModelParameters& src) {
  for (std::size_t i = 0; i < dst.tensor_count(); ++i) {
    auto& d = dst.tensor(i).data;
    const auto& s = src.tensor(i).data;
    for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
  }
}

}  // namespace

TrainResult train(const TaskDataset& target, const TaskDataset& dev, const std::vector<TaskDataset>& auxiliaries,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (target.samples.empty()) throw DataError("target training set is empty");
  if (dev.samples.empty()) throw DataError("target dev set is empty");
  if (cfg.mode == WeightingMode::Mixture && auxiliaries.empty() && *cfg.alpha > 0.0) {
    throw ScheduleError("mixture ratio > 0 needs at least one auxiliary dataset");
  }

  std::vector<const TaskDataset*> all{&target};
  for (const auto& a : auxiliaries) all.push_back(&a);
  for (std::size_t k = 0; k < all.size(); ++k) {
    if (all[k]->task_id != static_cast<int>(k + 1)) {
      throw ConfigError("datasets must carry task ids 1..K in order (got " + std::to_string(all[k]->task_id) + ")");
    }
  }
  const ModelVocab vocab = ModelVocab::build(all, cfg.vocab_size);
  std::vector<TaskData> tasks;
  for (const auto* ds : all) {
    TaskData t{ds, {}};
    t.encoded.reserve(ds->size());
    for (const auto& s : ds->samples) t.encoded.push_back(encode_sample(s, vocab));
    tasks.push_back(std::move(t));
  }

  Rng init_rng(derive_seed(cfg.seed, {0xA11CE}));
  ModelParameters params(cfg.model, vocab.size());
  params.init_random(init_rng);
  params.seed_embeddings(vocab, derive_seed(cfg.seed, {0xE3B}));
  ModelParameters grads = params.zeros_like();
  AdamaxState opt(params);
  EmaState ema(params, cfg.ema_decay);
  const AdamaxConfig adamax{cfg.lr};

  TrainResult result;
  result.best.vocab = vocab;
  std::vector<double> dev_scores;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto batches = epoch_batches(all, cfg, epoch);
    BatchCounts counts;
    for (const auto& b : batches) counts.push_back(b.size());
    const BatchSchedule schedule = epoch_schedule(counts, cfg, epoch);

    double epoch_loss = 0.0;
    std::size_t epoch_samples = 0;
    for (std::size_t pos = 0; pos < schedule.entries.size(); ++pos) {
      const auto& entry = schedule.entries[pos];
      const TaskData& task = tasks[static_cast<std::size_t>(entry.task - 1)];
      const auto& idx = batches[static_cast<std::size_t>(entry.task - 1)][entry.batch].indices;

      auto run_sample = [&](std::size_t i, ModelParameters& sink) {
        const Sample& s = task.ds->samples[i];
        const double w = cfg.mode == WeightingMode::Ced ? s.weight : 1.0;
        Rng sample_rng(derive_seed(cfg.seed, {epoch, static_cast<std::uint64_t>(entry.task), i, 2}));
        ForwardOptions fo{true, cfg.dropout, cfg.step_dropout, &sample_rng};
        return w * accumulate_gradient(params, sink, task.encoded[i], s, w, fo).loss;
      };

      double batch_loss = 0.0;
      if (cfg.mode == WeightingMode::Ced &&
          std::all_of(idx.begin(), idx.end(), [&](std::size_t i) { return task.ds->samples[i].weight == 0.0; })) {
        // Nothing to learn from: no optimizer or EMA step either.
        result.batch_losses.push_back(0.0);
        epoch_samples += idx.size();
        continue;
      }
      grads.zero();
      try {
        if (cfg.threads <= 1 || idx.size() < 2) {
          for (auto i : idx) batch_loss += run_sample(i, grads);
        } else {
          const std::size_t workers = std::min(cfg.threads, idx.size());
          std::vector<ModelParameters> partial(workers, params.zeros_like());
          std::vector<double> losses(workers, 0.0);
          std::vector<std::exception_ptr> errors(workers);
          {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < workers; ++w) {
              pool.emplace_back([&, w] {
                try {
                  for (std::size_t k = w; k < idx.size(); k += workers) losses[w] += run_sample(idx[k], partial[w]);
                } catch (...) {
                  errors[w] = std::current_exception();
                }
              });
            }
          }
          for (std::size_t w = 0; w < workers; ++w) {
            if (errors[w]) std::rethrow_exception(errors[w]);
            add_into(grads, partial[w]);
            batch_loss += losses[w];
          }
        }
      } catch (const NumericError& e) {
        throw NumericError("diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(pos) + ": " +
                           e.what());
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(pos));
      }
      clip_global_norm(grads, cfg.clip_norm);
      adamax_step(params, grads, opt, adamax);
      ema_update(ema, params);
      result.batch_losses.push_back(batch_loss);
      epoch_loss += batch_loss;
      epoch_samples += idx.size();
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_samples ? epoch_loss / static_cast<double>(epoch_samples) : 0.0;
    log.dev = evaluate(ema.shadow, vocab, dev);
    log.lr = cfg.lr;
    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    dev_scores.push_back(log.dev.f1);
    if (best_index(dev_scores) == dev_scores.size() - 1) {
      result.best_epoch = epoch;
      result.best_dev = log.dev;
      result.best.params = ema.shadow;
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  result.best.meta = json{{"best_epoch", result.best_epoch}, {"dev", result.best_dev}, {"train", cfg}};
  return result;
}

}  // namespace mtmrc
