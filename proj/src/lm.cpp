#include "mtmrc/lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mtmrc {

using nlohmann::json;

namespace {
constexpr const char* kOovWord = "<unk>";
constexpr int kLmVersion = 1;
constexpr int kLengthVersion = 1;
}  // namespace

QuestionLanguageModel QuestionLanguageModel::train(const std::vector<std::vector<std::string>>& questions,
                                                   const LmConfig& cfg) {
  if (cfg.order < 1) throw ConfigError("lm.order must be >= 1");
  if (cfg.add_k < 0.0) throw ConfigError("lm.add_k must be >= 0");
  if (cfg.interpolation < 0.0 || cfg.interpolation > 1.0) throw ConfigError("lm.interpolation must be in [0,1]");
  if (questions.empty()) throw DataError("cannot train a question language model on an empty corpus");

  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& q : questions) {
    for (const auto& w : q) ++freq[w];
  }
  std::vector<std::pair<std::string, std::uint64_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > cfg.vocab_size) ranked.resize(cfg.vocab_size);

  QuestionLanguageModel lm;
  lm.cfg_ = cfg;
  lm.words_.push_back(kOovWord);
  for (auto& [w, c] : ranked) {
    lm.ids_.emplace(w, static_cast<std::uint32_t>(lm.words_.size()));
    lm.words_.push_back(w);
  }
  lm.tables_.resize(static_cast<std::size_t>(cfg.order));

  const std::size_t ctx_len = static_cast<std::size_t>(cfg.order - 1);
  for (const auto& q : questions) {
    std::vector<std::uint32_t> seq(ctx_len, lm.bos());
    for (const auto& w : q) seq.push_back(lm.word_id(w));
    for (std::size_t i = ctx_len; i < seq.size(); ++i) {
      for (std::size_t n = 1; n <= static_cast<std::size_t>(cfg.order); ++n) {
        std::vector<std::uint32_t> key(seq.begin() + static_cast<std::ptrdiff_t>(i - (n - 1)),
                                       seq.begin() + static_cast<std::ptrdiff_t>(i));
        auto& cc = lm.tables_[n - 1][key];
        ++cc.total;
        ++cc.next[seq[i]];
      }
    }
  }
  return lm;
}

std::uint32_t QuestionLanguageModel::word_id(const std::string& w) const {
  auto it = ids_.find(w);
  return it == ids_.end() ? kOov : it->second;
}

double QuestionLanguageModel::level_prob(int n, std::uint32_t word, const std::vector<std::uint32_t>& padded) const {
  const double vocab = static_cast<double>(words_.size());
  const double k = cfg_.add_k;
  const auto& table = tables_[static_cast<std::size_t>(n - 1)];
  const std::vector<std::uint32_t> key(padded.end() - (n - 1), padded.end());
  double hist = 0.0, joint = 0.0;
  if (auto it = table.find(key); it != table.end()) {
    hist = static_cast<double>(it->second.total);
    if (auto jt = it->second.next.find(word); jt != it->second.next.end()) joint = static_cast<double>(jt->second);
  }
  const double denom = hist + k * vocab;
  if (n == 1) return denom > 0.0 ? (joint + k) / denom : 1.0 / vocab;
  const double lower = level_prob(n - 1, word, padded);
  if (denom <= 0.0) return lower;
  return cfg_.interpolation * (joint + k) / denom + (1.0 - cfg_.interpolation) * lower;
}

double QuestionLanguageModel::prob(std::uint32_t word, const std::vector<std::uint32_t>& context) const {
  const std::size_t ctx_len = static_cast<std::size_t>(cfg_.order - 1);
  std::vector<std::uint32_t> padded(ctx_len, bos());
  const std::size_t take = std::min(ctx_len, context.size());
  std::copy(context.end() - static_cast<std::ptrdiff_t>(take), context.end(),
            padded.end() - static_cast<std::ptrdiff_t>(take));
  return level_prob(cfg_.order, word, padded);
}

double QuestionLanguageModel::cross_entropy(const std::vector<std::string>& question) const {
  if (question.empty()) throw DataError("cross-entropy of an empty question");
  const std::size_t ctx_len = static_cast<std::size_t>(cfg_.order - 1);
  std::vector<std::uint32_t> window(ctx_len, bos());
  double total = 0.0;
  for (const auto& w : question) {
    const auto id = word_id(w);
    total -= std::log(level_prob(cfg_.order, id, window));
    if (ctx_len > 0) {
      window.erase(window.begin());
      window.push_back(id);
    }
  }
  return total / static_cast<double>(question.size());
}

json QuestionLanguageModel::to_json() const {
  json tables = json::array();
  for (const auto& table : tables_) {
    json rows = json::array();
    for (const auto& [ctx, cc] : table) {
      std::vector<std::pair<std::uint32_t, std::uint64_t>> next(cc.next.begin(), cc.next.end());
      std::sort(next.begin(), next.end());
      rows.push_back(json{{"context", ctx}, {"next", next}});
    }
    tables.push_back(std::move(rows));
  }
  return json{{"format", "mtmrc-ngram"},
              {"version", kLmVersion},
              {"order", cfg_.order},
              {"vocab_size", cfg_.vocab_size},
              {"add_k", cfg_.add_k},
              {"interpolation", cfg_.interpolation},
              {"words", words_},
              {"tables", std::move(tables)}};
}

QuestionLanguageModel QuestionLanguageModel::from_json(const json& j) {
  if (j.value("format", "") != "mtmrc-ngram" || j.value("version", 0) != kLmVersion) {
    throw DataError("not a version-1 n-gram model file");
  }
  QuestionLanguageModel lm;
  lm.cfg_.order = j.at("order").get<int>();
  lm.cfg_.vocab_size = j.at("vocab_size").get<std::size_t>();
  lm.cfg_.add_k = j.at("add_k").get<double>();
  lm.cfg_.interpolation = j.at("interpolation").get<double>();
  lm.words_ = j.at("words").get<std::vector<std::string>>();
  for (std::uint32_t i = 1; i < lm.words_.size(); ++i) lm.ids_.emplace(lm.words_[i], i);
  for (const auto& rows : j.at("tables")) {
    Table table;
    for (const auto& row : rows) {
      auto& cc = table[row.at("context").get<std::vector<std::uint32_t>>()];
      for (const auto& [w, c] : row.at("next").get<std::vector<std::pair<std::uint32_t, std::uint64_t>>>()) {
        cc.next[w] = c;
        cc.total += c;
      }
    }
    lm.tables_.push_back(std::move(table));
  }
  if (lm.tables_.size() != static_cast<std::size_t>(lm.cfg_.order)) throw DataError("n-gram table count does not match order");
  return lm;
}

AnswerLengthModel AnswerLengthModel::train(const std::vector<std::size_t>& lengths, double add, std::size_t margin) {
  if (add < 0.0) throw ConfigError("length smoothing must be >= 0");
  std::size_t longest = 0;
  for (auto l : lengths) {
    if (l == 0) throw DataError("answer length must be >= 1");
    longest = std::max(longest, l);
  }
  AnswerLengthModel m;
  m.add_ = add;
  m.counts_.assign(std::max<std::size_t>(longest + margin, 1), 0);
  for (auto l : lengths) ++m.counts_[l - 1];
  m.total_ = lengths.size();
  return m;
}

double AnswerLengthModel::prob(std::size_t length) const {
  const std::size_t bucket = std::clamp<std::size_t>(length, 1, counts_.size()) - 1;
  const double denom = static_cast<double>(total_) + add_ * static_cast<double>(counts_.size());
  if (denom <= 0.0) return 1.0 / static_cast<double>(counts_.size());
  return (static_cast<double>(counts_[bucket]) + add_) / denom;
}

double AnswerLengthModel::score(std::size_t length) const {
  const double p = prob(length);
  return p > 0.0 ? -std::log(p) : std::numeric_limits<double>::infinity();
}

json AnswerLengthModel::to_json() const {
  return json{{"format", "mtmrc-length"}, {"version", kLengthVersion}, {"add", add_}, {"counts", counts_}};
}

AnswerLengthModel AnswerLengthModel::from_json(const json& j) {
  if (j.value("format", "") != "mtmrc-length" || j.value("version", 0) != kLengthVersion) {
    throw DataError("not a version-1 answer-length model");
  }
  AnswerLengthModel m;
  m.add_ = j.at("add").get<double>();
  m.counts_ = j.at("counts").get<std::vector<std::uint64_t>>();
  if (m.counts_.empty()) throw DataError("answer-length model has no buckets");
  for (auto c : m.counts_) m.total_ += c;
  return m;
}

std::vector<std::string> question_words(const Sample& s) { return lowers(s.question); }

TaskModels train_task_models(const TaskDataset& ds, const LmConfig& cfg, double length_add) {
  std::vector<std::vector<std::string>> questions;
  std::vector<std::size_t> lengths;
  questions.reserve(ds.size());
  for (const auto& s : ds.samples) {
    questions.push_back(question_words(s));
    lengths.push_back(s.answer_length());
  }
  return TaskModels{QuestionLanguageModel::train(questions, cfg), AnswerLengthModel::train(lengths, length_add)};
}

}  // namespace mtmrc
