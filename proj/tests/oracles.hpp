#pragma once

// Reference implementations used only as test oracles. They are written
// directly from the definitions, deliberately slow and share no code with the
// library beyond the data types.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtmrc/corpus.hpp"

namespace mtmrc::oracle {

using Words = std::vector<std::string>;

inline bool is_subsequence(const Words& sub, const Words& seq) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < seq.size() && j < sub.size(); ++i) {
    if (seq[i] == sub[j]) ++j;
  }
  return j == sub.size();
}

/// LCS by enumerating every subsequence of the shorter input (lengths <= ~16).
inline std::size_t lcs_exhaustive(const Words& a, const Words& b) {
  const Words& s = a.size() <= b.size() ? a : b;
  const Words& t = a.size() <= b.size() ? b : a;
  std::size_t best = 0;
  for (unsigned mask = 0; mask < (1u << s.size()); ++mask) {
    const auto bits = static_cast<std::size_t>(__builtin_popcount(mask));
    if (bits <= best) continue;
    Words sub;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (mask & (1u << i)) sub.push_back(s[i]);
    }
    if (is_subsequence(sub, t)) best = bits;
  }
  return best;
}

/// Textbook quadratic-table LCS.
inline std::size_t lcs_table(const Words& a, const Words& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  return t[a.size()][b.size()];
}

inline double rouge_f(std::size_t lcs, std::size_t cand, std::size_t ref) {
  if (lcs == 0 || cand == 0 || ref == 0) return 0.0;
  const double p = static_cast<double>(lcs) / static_cast<double>(cand);
  const double r = static_cast<double>(lcs) / static_cast<double>(ref);
  return 2.0 * p * r / (p + r);
}

inline double rouge_l(const Words& cand, const Words& ref) {
  return rouge_f(lcs_exhaustive(cand, ref), cand.size(), ref.size());
}

inline Words normalize(const Words& in) {
  Words out;
  for (const auto& w : in) {
    std::string low;
    bool all_punct = !w.empty();
    for (unsigned char c : w) {
      low.push_back(static_cast<char>(std::tolower(c)));
      if (!std::ispunct(c)) all_punct = false;
    }
    if (all_punct || low == "a" || low == "an" || low == "the") continue;
    out.push_back(low);
  }
  return out;
}

inline double token_f1(const Words& pred, const Words& gold) {
  const Words p = normalize(pred), g = normalize(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::map<std::string, int> pc, gc;
  for (const auto& w : p) ++pc[w];
  for (const auto& w : g) ++gc[w];
  int common = 0;
  for (const auto& [w, c] : pc) {
    if (auto it = gc.find(w); it != gc.end()) common += std::min(c, it->second);
  }
  if (common == 0) return 0.0;
  const double prec = static_cast<double>(common) / static_cast<double>(p.size());
  const double rec = static_cast<double>(common) / static_cast<double>(g.size());
  return 2.0 * prec * rec / (prec + rec);
}

struct BestSpan {
  std::size_t begin = 0, end = 0;
  double score = 0.0;
};

/// Every (begin, end) pair scored independently; strict improvement keeps the
/// earliest begin, and within one begin the shortest span.
inline std::optional<BestSpan> best_span(const Words& passage, const Words& answer) {
  std::optional<BestSpan> best;
  for (std::size_t b = 0; b < passage.size(); ++b) {
    for (std::size_t e = b; e < passage.size(); ++e) {
      const Words cand(passage.begin() + static_cast<std::ptrdiff_t>(b),
                       passage.begin() + static_cast<std::ptrdiff_t>(e + 1));
      const double f = rouge_f(lcs_table(cand, answer), cand.size(), answer.size());
      if (!best || f > best->score) best = BestSpan{b, e, f};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Sample-weight pipeline from raw counts.

/// Interpolated add-k n-gram model kept as raw string-keyed counts.
struct NgramCounts {
  int order = 3;
  double k = 0.1;
  double lambda = 0.7;
  std::size_t vocab_cap = 10000;
  std::map<std::string, std::size_t> kept;     // in-vocabulary words
  std::map<Words, double> ngram;               // full n-gram -> count (all orders)
  std::map<Words, double> history;             // (n-1)-word history -> count of n-grams following it
  double vocab_entries() const { return static_cast<double>(kept.size() + 1); }

  std::string map(const std::string& w) const { return kept.count(w) ? w : "\x01unk"; }
};

inline NgramCounts count_ngrams(const std::vector<Words>& questions, int order, double k, double lambda,
                                std::size_t vocab_cap) {
  NgramCounts m;
  m.order = order;
  m.k = k;
  m.lambda = lambda;
  m.vocab_cap = vocab_cap;
  std::map<std::string, std::size_t> freq;
  for (const auto& q : questions) {
    for (const auto& w : q) ++freq[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; i < ranked.size() && i < vocab_cap; ++i) m.kept.emplace(ranked[i].first, i);
  for (const auto& q : questions) {
    Words padded(static_cast<std::size_t>(order - 1), "\x01bos");
    for (const auto& w : q) padded.push_back(m.map(w));
    for (std::size_t i = static_cast<std::size_t>(order - 1); i < padded.size(); ++i) {
      for (int n = 1; n <= order; ++n) {
        const auto from = static_cast<std::ptrdiff_t>(i) - (n - 1);
        Words gram(padded.begin() + from, padded.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        m.ngram[gram] += 1.0;
        gram.pop_back();
        m.history[gram] += 1.0;
      }
    }
  }
  return m;
}

inline double ngram_prob(const NgramCounts& m, int n, const std::string& w, const Words& padded_history) {
  const Words hist(padded_history.end() - (n - 1), padded_history.end());
  Words gram = hist;
  gram.push_back(w);
  const double c_hist = m.history.count(hist) ? m.history.at(hist) : 0.0;
  const double c_gram = m.ngram.count(gram) ? m.ngram.at(gram) : 0.0;
  const double denom = c_hist + m.k * m.vocab_entries();
  if (n == 1) return denom > 0.0 ? (c_gram + m.k) / denom : 1.0 / m.vocab_entries();
  const double lower = ngram_prob(m, n - 1, w, padded_history);
  if (denom <= 0.0) return lower;
  return m.lambda * (c_gram + m.k) / denom + (1.0 - m.lambda) * lower;
}

inline double question_entropy(const NgramCounts& m, const Words& q) {
  Words padded(static_cast<std::size_t>(m.order - 1), "\x01bos");
  double total = 0.0;
  for (const auto& raw : q) {
    const std::string w = m.map(raw);
    total -= std::log(ngram_prob(m, m.order, w, padded));
    padded.push_back(w);
  }
  return total / static_cast<double>(q.size());
}

/// -log of the add-one smoothed length frequency over buckets 1..max+5;
/// longer answers share the last bucket.
inline double length_entropy(const std::vector<std::size_t>& lengths, std::size_t len) {
  std::size_t longest = 0;
  for (auto l : lengths) longest = std::max(longest, l);
  const std::size_t buckets = longest + 5;
  const std::size_t bucket = std::min(len, buckets);
  double count = 0.0;
  for (auto l : lengths) count += l == bucket ? 1.0 : 0.0;
  return -std::log((count + 1.0) / (static_cast<double>(lengths.size()) + static_cast<double>(buckets)));
}

inline std::vector<double> minmax(const std::vector<double>& xs) {
  double lo = xs.empty() ? 0.0 : xs[0], hi = lo;
  for (double x : xs) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  std::vector<double> out;
  for (double x : xs) out.push_back(hi > lo ? (x - lo) / (hi - lo) : 0.0);
  return out;
}

inline Words lowered(const TokenSeq& t) {
  Words out;
  for (const auto& tok : t) {
    std::string s = tok.surface;
    for (auto& c : s) {
      if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    out.push_back(s);
  }
  return out;
}

inline std::size_t answer_len(const Sample& s) {
  return s.is_span() ? s.span().end - s.span().begin + 1 : 1;
}

struct WeightRow {
  int task;
  std::size_t index;
  double h1q, hkq, h1a, hka, ced, ced_prime;
};

/// Scores every auxiliary sample; rows ordered by auxiliary dataset then index.
inline std::vector<WeightRow> sample_weights(const TaskDataset& target, const std::vector<TaskDataset>& aux,
                                             int order = 3, double k = 0.1, double lambda = 0.7,
                                             std::size_t vocab_cap = 10000) {
  auto fit = [&](const TaskDataset& ds) {
    std::vector<Words> qs;
    std::vector<std::size_t> lens;
    for (const auto& s : ds.samples) {
      qs.push_back(lowered(s.question));
      lens.push_back(answer_len(s));
    }
    return std::make_pair(count_ngrams(qs, order, k, lambda, vocab_cap), lens);
  };
  const auto [t_lm, t_len] = fit(target);
  std::vector<WeightRow> rows;
  std::vector<double> h1q_all, h1a_all;
  std::vector<std::vector<double>> hkq_n, hka_n;
  for (const auto& ds : aux) {
    const auto [k_lm, k_len] = fit(ds);
    std::vector<double> hkq, hka;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      const Sample& s = ds.samples[i];
      const Words q = lowered(s.question);
      WeightRow r{ds.task_id, i, question_entropy(t_lm, q), question_entropy(k_lm, q),
                  length_entropy(t_len, answer_len(s)), length_entropy(k_len, answer_len(s)), 0.0, 0.0};
      h1q_all.push_back(r.h1q);
      h1a_all.push_back(r.h1a);
      hkq.push_back(r.hkq);
      hka.push_back(r.hka);
      rows.push_back(r);
    }
    hkq_n.push_back(minmax(hkq));
    hka_n.push_back(minmax(hka));
  }
  const auto h1q_n = minmax(h1q_all), h1a_n = minmax(h1a_all);
  std::vector<double> ceds;
  std::size_t flat = 0;
  for (std::size_t t = 0; t < aux.size(); ++t) {
    for (std::size_t i = 0; i < aux[t].samples.size(); ++i, ++flat) {
      rows[flat].ced = (h1q_n[flat] - hkq_n[t][i]) + (h1a_n[flat] - hka_n[t][i]);
      ceds.push_back(rows[flat].ced);
    }
  }
  const auto ced_n = minmax(ceds);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].ced_prime = 1.0 - ced_n[i];
  return rows;
}

}  // namespace mtmrc::oracle
