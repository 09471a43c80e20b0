#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtmrc/corpus.hpp"
#include "mtmrc/lm.hpp"
#include "mtmrc/trainer.hpp"

namespace mtmrc {

struct DataConfig {
  std::filesystem::path target;
  std::filesystem::path dev;
  std::vector<std::filesystem::path> auxiliary;
  DataFormat format = DataFormat::SpanJson;
  DataFormat aux_format = DataFormat::SpanJson;
  std::size_t max_passage_tokens = 1000;
};

struct SweepConfig {
  std::vector<double> alphas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
};

/// Everything a run needs, read from one INI file:
///
///   [data]  target, dev, aux (comma list), format, aux_format, max_passage_tokens
///   [lm]    order, vocab_size, add_k, interpolation, length_add
///   [model] embed_dim, reduce_dim, hidden_dim, layers, steps, max_span_len
///   [train] batch_size, lr, dropout, step_dropout, epochs, mode, alpha,
///           ema_decay, clip_norm, vocab_size, threads
///   [sweep] alphas (comma list)
///   [run]   seed, out
///
/// Relative paths resolve against the config file's directory. Unknown
/// sections or keys are errors.
struct RunConfig {
  DataConfig data;
  LmConfig lm;
  double length_add = 1.0;
  TrainConfig train;
  SweepConfig sweep;
  std::filesystem::path out = "mtmrc-out";
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
};

/// One "section.key=value" assignment, as given to --set.
struct Override {
  std::string key;
  std::string value;
};

Override parse_override(const std::string& text);

/// Parses INI text, applies overrides (later ones win), validates. `base`
/// anchors relative paths.
RunConfig parse_config(const std::string& ini_text, const std::filesystem::path& base,
                       const std::vector<Override>& overrides = {});
RunConfig load_config(const std::filesystem::path& path, const std::vector<Override>& overrides = {});

/// Defaults plus overrides only; for commands that run without a file.
RunConfig default_config(const std::vector<Override>& overrides = {});

}  // namespace mtmrc
