#include "mtmrc/synthetic.hpp"

#include <algorithm>
#include <numeric>

namespace mtmrc {

namespace {

struct Segment {
  std::size_t entity_pos = 0;
  std::size_t filler_begin = 0;
  std::size_t filler_end = 0;  // inclusive
};

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

struct Passage {
  TokenSeq tokens;
  std::vector<Segment> segments;
  std::vector<std::string> entities;
};

Passage make_passage(const SynthStyle& s, Rng& rng) {
  Passage p;
  const std::size_t count = uniform(rng, s.min_segments, s.max_segments);
  std::vector<std::size_t> ents(s.entity_vocab);
  std::iota(ents.begin(), ents.end(), std::size_t{0});
  for (std::size_t k = 0; k < count; ++k) std::swap(ents[k], ents[uniform(rng, k, ents.size() - 1)]);
  for (std::size_t k = 0; k < count; ++k) {
    Segment seg;
    seg.entity_pos = p.tokens.size();
    p.entities.push_back(s.prefix + "e" + std::to_string(ents[k]));
    p.tokens.push_back(make_token(p.entities.back()));
    const std::size_t len = uniform(rng, s.min_answer, s.max_answer);
    seg.filler_begin = p.tokens.size();
    for (std::size_t j = 0; j < len; ++j) {
      p.tokens.push_back(make_token(s.prefix + "w" + std::to_string(uniform(rng, 0, s.filler_vocab - 1))));
    }
    seg.filler_end = p.tokens.size() - 1;
    p.tokens.push_back(make_token("."));
    p.segments.push_back(seg);
  }
  return p;
}

Token question_word(const SynthStyle& s, Rng& rng) {
  return make_token((s.question_prefix.empty() ? s.prefix : s.question_prefix) + "q" + std::to_string(uniform(rng, 0, s.question_vocab - 1)));
}

}  // namespace

Sample make_span_sample(const SynthStyle& style, Rng& rng, std::string id) {
  if (style.rule == AnswerRule::Before && style.min_segments < 2) {
    throw ConfigError("the Before rule needs at least two segments");
  }
  Passage p = make_passage(style, rng);
  const std::size_t lo = style.rule == AnswerRule::Before ? 1 : 0;
  const std::size_t k = uniform(rng, lo, p.segments.size() - 1);
  const Segment& seg = p.segments[k];
  Sample out;
  out.id = std::move(id);
  out.question = {question_word(style, rng), question_word(style, rng), p.tokens[seg.entity_pos],
                  question_word(style, rng), make_token("?")};
  switch (style.rule) {
    case AnswerRule::Entity: out.answer = Span{seg.entity_pos, seg.entity_pos}; break;
    case AnswerRule::After: out.answer = Span{seg.filler_begin, seg.filler_end}; break;
    case AnswerRule::Before: {
      const Segment& prev = p.segments[k - 1];
      out.answer = Span{prev.filler_begin, prev.filler_end};
      break;
    }
  }
  out.passage = std::move(p.tokens);
  return out;
}

Sample make_cloze_sample(const SynthStyle& style, Rng& rng, std::string id) {
  Passage p = make_passage(style, rng);
  const std::size_t k = uniform(rng, 0, p.segments.size() - 1);
  const Segment& seg = p.segments[k];
  const std::size_t quoted = uniform(rng, seg.filler_begin, seg.filler_end);
  Sample out;
  out.id = std::move(id);
  out.question = {question_word(style, rng), p.tokens[quoted], question_word(style, rng), make_token("?")};
  Cloze c;
  for (const auto& s : p.segments) c.candidates.push_back({s.entity_pos});
  c.gold = k;
  out.answer = std::move(c);
  out.passage = std::move(p.tokens);
  return out;
}

TaskDataset make_synthetic(const SynthStyle& style, std::size_t count, std::uint64_t seed, int task_id,
                           const std::string& name, bool cloze) {
  Rng rng(seed);
  std::vector<Sample> samples;
  samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::string id = name + "-" + std::to_string(i);
    samples.push_back(cloze ? make_cloze_sample(style, rng, std::move(id)) : make_span_sample(style, rng, std::move(id)));
  }
  return make_dataset(task_id, name, std::move(samples));
}

TaskDataset merge_datasets(const std::vector<TaskDataset>& parts, int task_id, const std::string& name) {
  std::vector<Sample> all;
  for (const auto& p : parts) all.insert(all.end(), p.samples.begin(), p.samples.end());
  return make_dataset(task_id, name, std::move(all));
}

SynthStyle disjoint_style() {
  SynthStyle s;
  s.prefix = "b";
  s.min_answer = 4 * s.min_answer;
  s.max_answer = 4 * s.max_answer;
  return s;
}

Benchmark related_benchmark(std::uint64_t seed, std::size_t target, std::size_t dev, std::size_t same,
                            std::size_t variant) {
  const SynthStyle g;
  SynthStyle v = g;
  v.question_prefix = "o";
  v.rule = AnswerRule::Before;
  Benchmark b;
  b.target = make_synthetic(g, target, derive_seed(seed, {1}), 1, "G");
  b.dev = make_synthetic(g, dev, derive_seed(seed, {2}), 1, "G-dev");
  b.auxiliary.push_back(merge_datasets({make_synthetic(g, same, derive_seed(seed, {3}), 2, "A-same"),
                                        make_synthetic(v, variant, derive_seed(seed, {4}), 2, "A-variant")},
                                       2, "A"));
  return b;
}

Benchmark three_task_benchmark(std::uint64_t seed, std::size_t target, std::size_t dev, std::size_t aux_each) {
  const SynthStyle g;
  Benchmark b;
  b.target = make_synthetic(g, target, derive_seed(seed, {1}), 1, "G");
  b.dev = make_synthetic(g, dev, derive_seed(seed, {2}), 1, "G-dev");
  b.auxiliary.push_back(make_synthetic(g, aux_each, derive_seed(seed, {3}), 2, "A"));
  b.auxiliary.push_back(make_synthetic(disjoint_style(), aux_each, derive_seed(seed, {5}), 3, "B"));
  return b;
}

}  // namespace mtmrc
