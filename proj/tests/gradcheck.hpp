#pragma once

// Central finite-difference oracle for the network gradients. Lives in test
// code only; it touches the model solely through the scalar loss.

#include <algorithm>
#include <cmath>
#include <string>

#include "mtmrc/model.hpp"
#include "mtmrc/synthetic.hpp"

namespace mtmrc::testing {

struct GradCheckResult {
  double worst_rel = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// |a - f| / max(|a|, |f|, floor). The floor keeps round-off in the
/// difference quotient (about 1e-11 here) from dominating near-zero entries.
inline double relative_error(double a, double f, double floor = 1e-6) {
  return std::abs(a - f) / std::max({std::abs(a), std::abs(f), floor});
}

inline GradCheckResult check_gradients(ModelParameters& params, const EncodedSample& x, const Sample& s,
                                       double h = 1e-5) {
  const ForwardOptions opt{};
  ModelParameters grads = params.zeros_like();
  accumulate_gradient(params, grads, x, s, 1.0, opt);
  GradCheckResult r;
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    auto& data = params.tensor(i).data;
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double saved = data[k];
      data[k] = saved + h;
      const double up = sample_loss_value(params, x, s, opt);
      data[k] = saved - h;
      const double down = sample_loss_value(params, x, s, opt);
      data[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grads.tensor(i).data[k];
      const double rel = relative_error(analytic, numeric);
      ++r.checked;
      if (rel > r.worst_rel) {
        r.worst_rel = rel;
        r.worst_param = params.name(i);
        r.worst_index = k;
        r.analytic = analytic;
        r.numeric = numeric;
      }
    }
  }
  return r;
}

/// The small configuration used for gradient checks: e = d = 4, T = 2.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.embed_dim = 4;
  c.reduce_dim = 4;
  c.hidden_dim = 4;
  c.layers = 1;
  c.steps = 2;
  return c;
}

/// A span sample with passage length 6 and question length 3, plus a vocab
/// covering its words.
inline Sample tiny_span_sample() {
  Sample s;
  s.id = "tiny";
  s.question = tokenize("where is Bob");
  s.passage = tokenize("Bob went to the old mill");
  s.answer = Span{3, 5};
  return s;
}

inline Sample tiny_cloze_sample() {
  Sample s;
  s.id = "tiny-cloze";
  s.question = tokenize("who went mill");
  s.passage = tokenize("Bob went to Ann at mill");
  s.answer = Cloze{{{0}, {3}}, 0};
  return s;
}

inline ModelVocab tiny_vocab() {
  return ModelVocab({"<unk>", "where", "is", "bob", "went", "to", "the", "old", "mill", "who", "ann"});
}

}  // namespace mtmrc::testing
