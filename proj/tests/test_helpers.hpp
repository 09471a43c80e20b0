#pragma once

#include <string>
#include <vector>

#include "mtmrc/corpus.hpp"

namespace mtmrc::testing {

inline TokenSeq toks(const std::string& text) { return tokenize(text); }

inline Sample span_sample(const std::string& question, const std::string& passage, std::size_t b, std::size_t e,
                          std::string id = "s") {
  Sample s;
  s.id = std::move(id);
  s.question = tokenize(question);
  s.passage = tokenize(passage);
  s.answer = Span{b, e};
  return s;
}

}  // namespace mtmrc::testing
