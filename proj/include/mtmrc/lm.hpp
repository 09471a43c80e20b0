#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "mtmrc/corpus.hpp"

namespace mtmrc {

struct LmConfig {
  int order = 3;
  std::size_t vocab_size = 10000;
  double add_k = 0.1;
  /// Weight of the higher-order estimate at every interpolation level.
  double interpolation = 0.7;
};

/// Interpolated add-k n-gram model over case-folded words.
///
/// Vocabulary is the vocab_size most frequent training words (ties broken
/// lexicographically) plus an OOV entry at id 0. Contexts shorter than
/// order-1 are padded with a begin marker that is never predicted, so every
/// per-context distribution ranges over exactly the vocabulary entries.
class QuestionLanguageModel {
 public:
  static constexpr std::uint32_t kOov = 0;

  static QuestionLanguageModel train(const std::vector<std::vector<std::string>>& questions, const LmConfig& cfg);

  const LmConfig& config() const { return cfg_; }
  /// Vocabulary entries including OOV.
  std::size_t vocab_entries() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  std::uint32_t word_id(const std::string& w) const;

  /// P(word | context) where context holds up to order-1 preceding word ids
  /// (older first); shorter contexts are begin-padded.
  double prob(std::uint32_t word, const std::vector<std::uint32_t>& context) const;

  /// Mean negative natural-log probability of the question's words.
  double cross_entropy(const std::vector<std::string>& question) const;

  nlohmann::json to_json() const;
  static QuestionLanguageModel from_json(const nlohmann::json& j);

 private:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::unordered_map<std::uint32_t, std::uint64_t> next;
  };
  using Table = std::map<std::vector<std::uint32_t>, ContextCounts>;

  std::uint32_t bos() const { return static_cast<std::uint32_t>(words_.size()); }
  double level_prob(int n, std::uint32_t word, const std::vector<std::uint32_t>& padded) const;

  LmConfig cfg_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<Table> tables_;  // tables_[n-1] keyed by the n-1 word context
};

/// Smoothed histogram of answer lengths.
///
/// Support is lengths 1..max_len with max_len = longest observed + margin;
/// each bucket gets `add` pseudo-counts. Longer lengths fall into the
/// max_len bucket, so the distribution always sums to one.
class AnswerLengthModel {
 public:
  static AnswerLengthModel train(const std::vector<std::size_t>& lengths, double add = 1.0, std::size_t margin = 5);

  std::size_t max_len() const { return counts_.size(); }
  double add() const { return add_; }
  double prob(std::size_t length) const;
  /// -log freq(length)
  double score(std::size_t length) const;

  nlohmann::json to_json() const;
  static AnswerLengthModel from_json(const nlohmann::json& j);

 private:
  std::vector<std::uint64_t> counts_;  // counts_[L-1]
  std::uint64_t total_ = 0;
  double add_ = 1.0;
};

struct TaskModels {
  QuestionLanguageModel question;
  AnswerLengthModel length;
};

std::vector<std::string> question_words(const Sample& s);

TaskModels train_task_models(const TaskDataset& ds, const LmConfig& cfg, double length_add = 1.0);

}  // namespace mtmrc
