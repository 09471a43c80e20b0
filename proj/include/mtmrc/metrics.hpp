#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace mtmrc {

using Words = std::vector<std::string>;

/// SQuAD-style normalization: case-fold, drop punctuation-only tokens and
/// the articles a/an/the.
Words normalize_answer(std::span<const std::string> tokens);

int exact_match(std::span<const std::string> pred, std::span<const std::string> gold);
double token_f1(std::span<const std::string> pred, std::span<const std::string> gold);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// F-measure from an LCS length and the two sequence lengths; 0 when lcs is 0.
double rouge_from_lcs(std::size_t lcs, std::size_t cand_len, std::size_t ref_len);

/// LCS-based F-measure with beta = 1. Tokens are compared verbatim.
double rouge_l(std::span<const std::string> cand, std::span<const std::string> ref);

struct MetricReport {
  double em = 0.0;
  double f1 = 0.0;
  double rouge_l = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
};

/// Running sums behind a MetricReport.
class MetricAccumulator {
 public:
  void add_span(std::span<const std::string> pred, std::span<const std::string> gold);
  /// Cloze outcome: counts toward every field.
  void add_choice(bool correct);
  MetricReport report() const;

 private:
  double em_ = 0.0, f1_ = 0.0, rouge_ = 0.0, acc_ = 0.0;
  std::size_t n_ = 0;
};

void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

}  // namespace mtmrc
