#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "mtmrc/common.hpp"

namespace mtmrc {

struct Token {
  std::string surface;
  std::string lower;
  std::string lemma;

  bool operator==(const Token&) const = default;
};

using TokenSeq = std::vector<Token>;

std::string fold_case(std::string_view s);

/// Strips one of ing/es/ed/s (tried in that order) from the case-folded word
/// when the remaining stem keeps at least four characters.
std::string lemmatize(std::string_view lower);

Token make_token(std::string_view surface);

/// Splits on whitespace; every ASCII punctuation character becomes its own
/// token. Bytes >= 0x80 are word characters, so UTF-8 sequences stay intact.
TokenSeq tokenize(std::string_view text);

std::vector<std::string> surfaces(const TokenSeq& toks);
std::vector<std::string> lowers(const TokenSeq& toks);

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;  // inclusive
  bool operator==(const Span&) const = default;
};

struct Cloze {
  std::vector<std::vector<std::size_t>> candidates;  // passage positions per candidate
  std::size_t gold = 0;
  bool operator==(const Cloze&) const = default;
};

using Answer = std::variant<Span, Cloze>;

constexpr int kTargetTask = 1;

struct Sample {
  std::string id;
  int task_id = kTargetTask;
  TokenSeq question;
  TokenSeq passage;
  Answer answer;
  double weight = 1.0;

  bool is_span() const { return std::holds_alternative<Span>(answer); }
  const Span& span() const { return std::get<Span>(answer); }
  const Cloze& cloze() const { return std::get<Cloze>(answer); }
  /// Token count of the answer; cloze answers count as one entity token.
  std::size_t answer_length() const;
};

/// Throws DataError naming the sample when an answer index is out of range,
/// begin > end, a cloze candidate has no occurrence, or the weight is invalid.
void validate(const Sample& s);

struct DatasetStats {
  std::size_t count = 0;
  double avg_passage_tokens = 0.0;
  std::optional<double> avg_answer_tokens;  // absent when no span samples
};

struct TaskDataset {
  int task_id = kTargetTask;
  std::string name;
  std::vector<Sample> samples;
  std::unordered_map<std::string, std::size_t> vocab;  // lower-case word -> id
  DatasetStats stats;

  std::size_t size() const { return samples.size(); }
};

enum class DataFormat { SpanJson, ClozeJson, GenerativeJson };

DataFormat parse_format(std::string_view name);
std::string_view format_name(DataFormat f);

/// Builds vocab and stats; assigns task_id to every sample.
TaskDataset make_dataset(int task_id, std::string name, std::vector<Sample> samples);

TaskDataset load_dataset(const std::filesystem::path& path, DataFormat format, int task_id = kTargetTask);
TaskDataset parse_dataset(std::string_view json_text, DataFormat format, int task_id = kTargetTask,
                          std::string name = {});

/// A sample whose answer is free text, before span conversion.
struct GenerativeSample {
  std::string id;
  TokenSeq question;
  TokenSeq passage;
  TokenSeq answer_text;
};

std::vector<GenerativeSample> load_generative(const std::filesystem::path& path);
std::vector<GenerativeSample> parse_generative(std::string_view json_text);

struct SpanMatch {
  Span span;
  double score = 0.0;
};

/// Best-scoring passage span by ROUGE-L against the answer tokens (case-folded).
/// Ties go to the earliest begin, then the shortest span.
std::optional<SpanMatch> best_rouge_span(const TokenSeq& passage, const TokenSeq& answer);

std::optional<Sample> convert_generative_to_span(const GenerativeSample& g, double rouge_threshold = 0.5);

/// Serializes samples back to the loader's JSON schema. Token sequences are
/// written space-joined, so reloading reproduces them exactly.
std::string serialize_dataset(const TaskDataset& ds);

DatasetStats dataset_stats(const std::vector<Sample>& samples);

/// Cuts passages to max_tokens. Span samples whose end falls past the cut are
/// dropped; cloze occurrences past the cut are removed, empty non-gold
/// candidates disappear, and samples whose gold loses every occurrence are dropped.
TaskDataset truncate_passages(const TaskDataset& ds, std::size_t max_tokens);

struct Minibatch {
  int task_id = kTargetTask;
  std::vector<std::size_t> indices;
};

/// Shuffles sample indices with rng then chunks them; ceil(|ds|/batch_size) batches.
std::vector<Minibatch> make_minibatches(const TaskDataset& ds, std::size_t batch_size, Rng& rng);

}  // namespace mtmrc
