#pragma once

#include <string>
#include <vector>

#include "mtmrc/corpus.hpp"

namespace mtmrc {

/// Where the answer sits relative to the segment whose entity the question names.
enum class AnswerRule {
  Entity,  // the entity token itself (copy task)
  After,   // the filler words following the entity
  Before,  // the filler words of the preceding segment
};

/// Generator for structured toy reading-comprehension data.
///
/// A passage is a run of segments "entity filler... ." with distinct entities.
/// A question is "<q> <q> entity <q> ?" built from the style's question words,
/// and the answer is located by `rule`. Words are namespaced by `prefix`, so
/// two styles with different prefixes share no vocabulary.
struct SynthStyle {
  std::string prefix = "g";
  std::string question_prefix;  // question words only; empty = prefix
  std::size_t entity_vocab = 60;
  std::size_t filler_vocab = 200;
  std::size_t question_vocab = 12;
  std::size_t min_segments = 4;
  std::size_t max_segments = 6;
  std::size_t min_answer = 1;
  std::size_t max_answer = 3;
  AnswerRule rule = AnswerRule::After;
};

Sample make_span_sample(const SynthStyle& style, Rng& rng, std::string id);

/// Cloze variant: the question quotes a filler word; candidates are the
/// passage entities and the gold one owns the quoted word's segment.
Sample make_cloze_sample(const SynthStyle& style, Rng& rng, std::string id);

TaskDataset make_synthetic(const SynthStyle& style, std::size_t count, std::uint64_t seed, int task_id,
                           const std::string& name, bool cloze = false);

/// Concatenates datasets into one task (ids stay as generated).
TaskDataset merge_datasets(const std::vector<TaskDataset>& parts, int task_id, const std::string& name);

struct Benchmark {
  TaskDataset target;
  TaskDataset dev;
  std::vector<TaskDataset> auxiliary;  // task ids 2..K
};

/// A style sharing nothing with the default one, with 4x longer answers.
SynthStyle disjoint_style();

/// Target G (default style) plus one related auxiliary task made of `same`
/// samples from G's generator and `variant` samples whose question words and
/// answer rule differ from G's.
Benchmark related_benchmark(std::uint64_t seed, std::size_t target = 1000, std::size_t dev = 300,
                            std::size_t same = 3000, std::size_t variant = 2000);

/// Target G plus two auxiliary tasks: one from G's generator, one in
/// disjoint_style().
Benchmark three_task_benchmark(std::uint64_t seed, std::size_t target, std::size_t dev, std::size_t aux_each);

}  // namespace mtmrc
