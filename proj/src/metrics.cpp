#include "mtmrc/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace mtmrc {

namespace {

bool is_punct_token(const std::string& t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::ispunct(c) != 0; });
}

}  // namespace

Words normalize_answer(std::span<const std::string> tokens) {
  Words out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (t.empty() || is_punct_token(t)) continue;
    std::string low(t);
    std::transform(low.begin(), low.end(), low.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (low == "a" || low == "an" || low == "the") continue;
    out.push_back(std::move(low));
  }
  return out;
}

int exact_match(std::span<const std::string> pred, std::span<const std::string> gold) {
  return normalize_answer(pred) == normalize_answer(gold) ? 1 : 0;
}

double token_f1(std::span<const std::string> pred, std::span<const std::string> gold) {
  const Words p = normalize_answer(pred);
  const Words g = normalize_answer(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::map<std::string, long> counts;
  for (const auto& w : g) ++counts[w];
  long overlap = 0;
  for (const auto& w : p) {
    auto it = counts.find(w);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(p.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_from_lcs(std::size_t lcs, std::size_t cand_len, std::size_t ref_len) {
  if (lcs == 0) return 0.0;
  const double p = static_cast<double>(lcs) / static_cast<double>(cand_len);
  const double r = static_cast<double>(lcs) / static_cast<double>(ref_len);
  return 2.0 * p * r / (p + r);
}

double rouge_l(std::span<const std::string> cand, std::span<const std::string> ref) {
  return rouge_from_lcs(lcs_length(cand, ref), cand.size(), ref.size());
}

void MetricAccumulator::add_span(std::span<const std::string> pred, std::span<const std::string> gold) {
  const int em = exact_match(pred, gold);
  em_ += em;
  acc_ += em;
  f1_ += token_f1(pred, gold);
  rouge_ += rouge_l(normalize_answer(pred), normalize_answer(gold));
  ++n_;
}

void MetricAccumulator::add_choice(bool correct) {
  const double v = correct ? 1.0 : 0.0;
  em_ += v;
  f1_ += v;
  rouge_ += v;
  acc_ += v;
  ++n_;
}

MetricReport MetricAccumulator::report() const {
  MetricReport r;
  r.n = n_;
  if (n_ == 0) return r;
  const double n = static_cast<double>(n_);
  r.em = em_ / n;
  r.f1 = f1_ / n;
  r.rouge_l = rouge_ / n;
  r.accuracy = acc_ / n;
  return r;
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json{{"em", r.em}, {"f1", r.f1}, {"rouge_l", r.rouge_l}, {"accuracy", r.accuracy}, {"n", r.n}};
}

void from_json(const nlohmann::json& j, MetricReport& r) {
  j.at("em").get_to(r.em);
  j.at("f1").get_to(r.f1);
  j.at("rouge_l").get_to(r.rouge_l);
  j.at("accuracy").get_to(r.accuracy);
  j.at("n").get_to(r.n);
}

}  // namespace mtmrc
