#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mtmrc/config.hpp"
#include "mtmrc/corpus.hpp"
#include "mtmrc/lm.hpp"
#include "mtmrc/manifest.hpp"
#include "mtmrc/scheduler.hpp"
#include "mtmrc/trainer.hpp"
#include "mtmrc/weighting.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mtmrc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitInternal = 1;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool deterministic = false;
  std::vector<std::string> sets;
};

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

RunConfig resolve_config(const GlobalOptions& g) {
  std::vector<Override> overrides;
  for (const auto& s : g.sets) overrides.push_back(parse_override(s));
  if (g.seed) overrides.push_back({"run.seed", std::to_string(*g.seed)});
  if (!g.out.empty()) overrides.push_back({"run.out", g.out});
  if (g.deterministic) overrides.push_back({"train.threads", "1"});
  return g.config.empty() ? default_config(overrides) : load_config(g.config, overrides);
}

void write_text(const fs::path& path, const std::string& text, RunManifest& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InputError("write failed for '" + path.string() + "'");
  m.add_output(path);
}

std::string num(double x) { return json(x).dump(); }

/// Target (task 1), dev and auxiliaries (tasks 2..K), truncated as configured.
struct RunData {
  TaskDataset target;
  TaskDataset dev;
  std::vector<TaskDataset> aux;
};

TaskDataset load_input(const fs::path& path, DataFormat format, int task, std::size_t max_tokens, RunManifest& m) {
  if (!fs::exists(path)) throw InputError("input file '" + path.string() + "' does not exist");
  m.add_input(path);
  return truncate_passages(load_dataset(path, format, task), max_tokens);
}

RunData load_run_data(const RunConfig& c, RunManifest& m, bool need_dev) {
  if (c.data.target.empty()) throw ConfigError("data.target: required");
  if (need_dev && c.data.dev.empty()) throw ConfigError("data.dev: required");
  RunData d;
  d.target = load_input(c.data.target, c.data.format, kTargetTask, c.data.max_passage_tokens, m);
  if (need_dev) d.dev = load_input(c.data.dev, c.data.format, kTargetTask, c.data.max_passage_tokens, m);
  int task = kTargetTask;
  for (const auto& p : c.data.auxiliary) {
    d.aux.push_back(load_input(p, c.data.aux_format, ++task, c.data.max_passage_tokens, m));
  }
  return d;
}

std::map<int, TaskModels> task_models(const RunData& d, const RunConfig& c) {
  std::map<int, TaskModels> models;
  models.emplace(kTargetTask, train_task_models(d.target, c.lm, c.length_add));
  for (const auto& a : d.aux) models.emplace(a.task_id, train_task_models(a, c.lm, c.length_add));
  return models;
}

void warn_degenerate(const ScoreTable& table) {
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> cols;
  for (const auto& r : table.rows) {
    cols[r.task].first.push_back(r.hkq);
    cols[r.task].second.push_back(r.hka);
  }
  for (const auto& [task, c] : cols) {
    for (const auto* v : {&c.first, &c.second}) {
      const auto [lo, hi] = std::minmax_element(v->begin(), v->end());
      if (*lo == *hi) {
        warn("task " + std::to_string(task) + ": constant " + (v == &c.first ? "question" : "answer-length") +
             " entropy; its normalized scores are all 0");
      }
    }
  }
}

void print_table_summary(const ScoreTable& table, const RunData& d) {
  std::cout << "mean CED' per auxiliary task:\n";
  for (const auto& [task, mean] : table.task_means()) {
    const auto& name = d.aux[static_cast<std::size_t>(task - 2)].name;
    std::printf("  task %d (%s): %.6f\n", task, name.c_str(), mean);
  }
  auto sorted = table.sorted();
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ScoreRow& x, const ScoreRow& y) { return x.ced_prime > y.ced_prime; });
  const std::size_t k = std::min<std::size_t>(5, sorted.size());
  auto show = [](const ScoreRow& r) { std::printf("  %-24s task %d  CED'=%.6f\n", r.id.c_str(), r.task, r.ced_prime); };
  std::cout << "top " << k << ":\n";
  for (std::size_t i = 0; i < k; ++i) show(sorted[i]);
  std::cout << "bottom " << k << ":\n";
  for (std::size_t i = 0; i < k; ++i) show(sorted[sorted.size() - 1 - i]);
}

// ---- subcommands ----------------------------------------------------------

struct FileArgs {
  std::string input;
  std::string format = "span-json";
  double threshold = 0.5;
  std::string checkpoint;
  std::size_t epoch = 1;
};

int cmd_ingest(const RunConfig& c, const FileArgs& a, RunManifest& m) {
  const auto format = parse_format(a.format);
  if (format == DataFormat::GenerativeJson) throw ConfigError("--format: use convert-span for generative data");
  const auto ds = load_input(a.input, format, kTargetTask, c.data.max_passage_tokens, m);
  const fs::path out = c.out / (fs::path(a.input).stem().string() + ".ingested.json");
  write_text(out, serialize_dataset(ds), m);
  std::cout << "wrote " << ds.size() << " samples to " << out.string() << '\n';
  return kExitOk;
}

int cmd_stats(const RunConfig& c, const FileArgs& a, RunManifest& m) {
  const auto format = parse_format(a.format);
  if (format == DataFormat::GenerativeJson) throw ConfigError("--format: use convert-span for generative data");
  const auto ds = load_input(a.input, format, kTargetTask, c.data.max_passage_tokens, m);
  json j{{"name", ds.name},
         {"count", ds.stats.count},
         {"avg_passage_tokens", ds.stats.avg_passage_tokens},
         {"avg_answer_tokens", ds.stats.avg_answer_tokens ? json(*ds.stats.avg_answer_tokens) : json(nullptr)},
         {"vocab_size", ds.vocab.size()}};
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_convert(const RunConfig& c, const FileArgs& a, RunManifest& m) {
  if (!fs::exists(a.input)) throw InputError("input file '" + a.input + "' does not exist");
  m.add_input(a.input);
  const auto gen = load_generative(a.input);
  std::vector<Sample> kept;
  for (const auto& g : gen) {
    if (auto s = convert_generative_to_span(g, a.threshold)) kept.push_back(std::move(*s));
  }
  if (kept.empty()) throw DataError("no sample reached ROUGE-L " + num(a.threshold) + "; nothing to write");
  const std::size_t n_kept = kept.size();
  const auto name = fs::path(a.input).stem().string();
  const fs::path out = c.out / (name + ".span.json");
  write_text(out, serialize_dataset(make_dataset(kTargetTask, name, std::move(kept))), m);
  std::cout << "kept " << n_kept << " of " << gen.size() << " samples (ROUGE-L >= " << num(a.threshold) << ") in "
            << out.string() << '\n';
  return kExitOk;
}

int cmd_train_lm(const RunConfig& c, RunManifest& m) {
  const auto d = load_run_data(c, m, false);
  const auto models = task_models(d, c);
  for (const auto& [task, tm] : models) {
    const auto& ds = task == kTargetTask ? d.target : d.aux[static_cast<std::size_t>(task - 2)];
    double ce = 0.0;
    for (const auto& s : ds.samples) ce += tm.question.cross_entropy(question_words(s));
    ce /= static_cast<double>(std::max<std::size_t>(1, ds.size()));
    json j{{"task", task}, {"name", ds.name}, {"question", tm.question.to_json()}, {"length", tm.length.to_json()}};
    const fs::path out = c.out / ("lm-task" + std::to_string(task) + ".json");
    write_text(out, j.dump() + "\n", m);
    std::printf("task %d (%s): %zu vocab entries, mean question cross-entropy %.4f nats, perplexity %.3f\n", task,
                ds.name.c_str(), tm.question.vocab_entries(), ce, std::exp(ce));
  }
  return kExitOk;
}

int cmd_weights(const RunConfig& c, RunManifest& m) {
  auto d = load_run_data(c, m, false);
  const fs::path out = c.out / "weights.tsv";
  if (d.aux.empty()) {
    warn("no auxiliary tasks configured; writing an empty weight table");
    write_text(out, to_tsv({}), m);
    return kExitOk;
  }
  const auto table = score_samples(d.target, d.aux, task_models(d, c));
  warn_degenerate(table);
  write_text(out, to_tsv(table), m);
  print_table_summary(table, d);
  return kExitOk;
}

int cmd_schedule(const RunConfig& c, const FileArgs& a, RunManifest& m) {
  if (a.epoch < 1) throw ConfigError("--epoch: must be >= 1");
  const auto d = load_run_data(c, m, false);
  std::vector<const TaskDataset*> all{&d.target};
  for (const auto& x : d.aux) all.push_back(&x);
  BatchCounts counts;
  for (const auto& b : epoch_batches(all, c.train, a.epoch)) counts.push_back(b.size());
  const auto s = epoch_schedule(counts, c.train, a.epoch);
  const auto text = dump_schedule(s);
  write_text(c.out / ("schedule-epoch" + std::to_string(a.epoch) + ".tsv"), text, m);
  std::cout << text;
  std::cerr << s.entries.size() << " batches (mode " << mode_name(c.train.mode) << ")\n";
  return kExitOk;
}

TrainResult run_training(const RunConfig& c, RunData& d, const fs::path& dir, RunManifest& m) {
  if (c.train.mode == WeightingMode::Ced && !d.aux.empty()) {
    const auto table = assign_weights(d.target, d.aux, task_models(d, c));
    warn_degenerate(table);
    write_text(dir / "weights.tsv", to_tsv(table), m);
  }
  fs::create_directories(dir);
  const fs::path log_path = dir / "train_log.jsonl";
  std::ofstream log(log_path);
  if (!log) throw InputError("cannot write '" + log_path.string() + "'");
  m.add_output(log_path);
  auto on_epoch = [&](const EpochLog& e) {
    log << epoch_json(e).dump() << '\n' << std::flush;
    std::fprintf(stderr, "epoch %zu  loss %.4f  dev EM %.4f  F1 %.4f  (%.0f ms)\n", e.epoch, e.train_loss, e.dev.em,
                 e.dev.f1, e.wall_ms);
  };
  auto r = train(d.target, d.dev, d.aux, c.train, on_epoch);
  r.best.meta["seed"] = c.seed;
  const fs::path ckpt = dir / "best.ckpt";
  save_checkpoint(ckpt, r.best);
  m.add_output(ckpt);
  json metrics{{"best_epoch", r.best_epoch}, {"dev", r.best_dev}, {"mode", mode_name(c.train.mode)}};
  write_text(dir / "metrics.json", metrics.dump(2) + "\n", m);
  return r;
}

int cmd_train(const RunConfig& c, RunManifest& m) {
  auto d = load_run_data(c, m, true);
  const auto r = run_training(c, d, c.out, m);
  std::printf("best epoch %zu: dev EM %.4f  F1 %.4f\n", r.best_epoch, r.best_dev.em, r.best_dev.f1);
  return kExitOk;
}

int cmd_eval(const RunConfig& c, const FileArgs& a, RunManifest& m) {
  const fs::path ckpt_path = a.checkpoint.empty() ? c.out / "best.ckpt" : fs::path(a.checkpoint);
  if (!fs::exists(ckpt_path)) throw InputError("checkpoint '" + ckpt_path.string() + "' does not exist");
  if (c.data.dev.empty()) throw ConfigError("data.dev: required");
  m.add_input(ckpt_path);
  const auto ckpt = load_checkpoint(ckpt_path);
  const auto dev = load_input(c.data.dev, c.data.format, kTargetTask, c.data.max_passage_tokens, m);
  const json report{{"checkpoint", ckpt_path.string()}, {"dev", evaluate(ckpt.params, ckpt.vocab, dev)}};
  write_text(c.out / "eval.json", report.dump(2) + "\n", m);
  std::cout << report.dump(2) << '\n';
  return kExitOk;
}

int cmd_sweep(const RunConfig& c, RunManifest& m) {
  auto base = load_run_data(c, m, true);
  if (base.aux.empty()) throw ConfigError("data.aux: the sweep needs at least one auxiliary task");
  std::ostringstream csv;
  csv << "alpha,dev_em,dev_f1\n";
  for (double alpha : c.sweep.alphas) {
    RunConfig point = c;
    point.train.mode = WeightingMode::Mixture;
    point.train.alpha = alpha;
    RunData d = base;
    std::cerr << "alpha " << num(alpha) << '\n';
    const auto r = run_training(point, d, c.out / ("alpha-" + num(alpha)), m);
    csv << num(alpha) << ',' << num(r.best_dev.em) << ',' << num(r.best_dev.f1) << '\n';
  }
  write_text(c.out / "sweep.csv", csv.str(), m);
  std::cout << csv.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mtmrc: multi-task machine reading comprehension toolkit"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "INI run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "root seed (overrides run.seed)");
  app.add_option("--out", g.out, "output directory (overrides run.out)");
  app.add_flag("--deterministic", g.deterministic, "single-threaded, bit-reproducible execution");
  app.add_option("--set", g.sets, "override a config key: section.key=value (repeatable)");

  FileArgs a;
  auto* ingest = app.add_subcommand("ingest", "validate a dataset and write it in normalized form");
  auto* stats = app.add_subcommand("stats", "print dataset statistics");
  for (auto* s : {ingest, stats}) {
    s->add_option("-i,--input", a.input, "dataset file")->required();
    s->add_option("--format", a.format, "span-json or cloze-json");
  }
  auto* convert = app.add_subcommand("convert-span", "turn free-form answers into best ROUGE-L spans");
  convert->add_option("-i,--input", a.input, "generative dataset file")->required();
  convert->add_option("--threshold", a.threshold, "minimum ROUGE-L to keep a sample")->check(CLI::Range(0.0, 1.0));
  auto* train_lm = app.add_subcommand("train-lm", "train per-task question LMs and answer-length models");
  auto* weights = app.add_subcommand("weights", "score auxiliary samples and write the weight table");
  auto* schedule = app.add_subcommand("schedule", "dry-run the batch schedule of one epoch");
  schedule->add_option("--epoch", a.epoch, "1-based epoch");
  auto* train_cmd = app.add_subcommand("train", "train and keep the best checkpoint");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on data.dev");
  eval->add_option("--checkpoint", a.checkpoint, "checkpoint file (default <out>/best.ckpt)");
  auto* sweep = app.add_subcommand("sweep", "train across the mixture-ratio grid and write sweep.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  RunManifest manifest(command, g.seed.value_or(1));
  fs::path out_dir = g.out.empty() ? fs::path("mtmrc-out") : fs::path(g.out);
  int rc = kExitOk;
  try {
    const RunConfig c = resolve_config(g);
    out_dir = c.out;
    manifest = RunManifest(command, c.seed);
    manifest.set_config(c.to_json());
    if (!g.config.empty()) manifest.add_input(g.config);
    if (ingest->parsed()) rc = cmd_ingest(c, a, manifest);
    else if (stats->parsed()) rc = cmd_stats(c, a, manifest);
    else if (convert->parsed()) rc = cmd_convert(c, a, manifest);
    else if (train_lm->parsed()) rc = cmd_train_lm(c, manifest);
    else if (weights->parsed()) rc = cmd_weights(c, manifest);
    else if (schedule->parsed()) rc = cmd_schedule(c, a, manifest);
    else if (train_cmd->parsed()) rc = cmd_train(c, manifest);
    else if (eval->parsed()) rc = cmd_eval(c, a, manifest);
    else if (sweep->parsed()) rc = cmd_sweep(c, manifest);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    rc = kExitInput;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    rc = kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    rc = kExitInternal;
  }
  manifest.set_status(rc);
  try {
    manifest.write(out_dir);
  } catch (const std::exception& e) {
    warn(std::string("could not write the run manifest: ") + e.what());
  }
  return rc;
}
