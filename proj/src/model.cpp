#include "mtmrc/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mtmrc {

using nlohmann::json;

void to_json(json& j, const ModelConfig& c) {
  j = json{{"embed_dim", c.embed_dim}, {"reduce_dim", c.reduce_dim}, {"hidden_dim", c.hidden_dim},
           {"layers", c.layers},       {"steps", c.steps},           {"max_span_len", c.max_span_len}};
}

void from_json(const json& j, ModelConfig& c) {
  j.at("embed_dim").get_to(c.embed_dim);
  j.at("reduce_dim").get_to(c.reduce_dim);
  j.at("hidden_dim").get_to(c.hidden_dim);
  j.at("layers").get_to(c.layers);
  j.at("steps").get_to(c.steps);
  j.at("max_span_len").get_to(c.max_span_len);
}

// ---------------------------------------------------------------------------
// Vocabulary

ModelVocab::ModelVocab(std::vector<std::string> words) : words_(std::move(words)) {
  if (words_.empty()) words_.push_back("<unk>");
  for (std::size_t i = 1; i < words_.size(); ++i) ids_.emplace(words_[i], i);
}

ModelVocab ModelVocab::build(const std::vector<const TaskDataset*>& datasets, std::size_t max_words) {
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto* ds : datasets) {
    for (const auto& s : ds->samples) {
      for (const auto* seq : {&s.question, &s.passage}) {
        for (const auto& t : *seq) ++freq[t.lower];
      }
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > max_words) ranked.resize(max_words);
  std::vector<std::string> words{"<unk>"};
  for (auto& [w, c] : ranked) words.push_back(w);
  return ModelVocab(std::move(words));
}

std::size_t ModelVocab::id(const std::string& lower) const {
  auto it = ids_.find(lower);
  return it == ids_.end() ? kOov : it->second;
}

// ---------------------------------------------------------------------------
// Parameters

void ModelParameters::add(std::string name, std::size_t rows, std::size_t cols) {
  index_.emplace(name, tensors_.size());
  names_.push_back(std::move(name));
  tensors_.emplace_back(rows, cols);
}

ModelParameters::ModelParameters(const ModelConfig& cfg, std::size_t vocab_size) : cfg_(cfg), vocab_size_(vocab_size) {
  if (cfg.embed_dim == 0 || cfg.reduce_dim == 0 || cfg.hidden_dim == 0 || cfg.layers == 0 || cfg.steps == 0) {
    throw ConfigError("model dimensions, layers and steps must all be >= 1");
  }
  if (vocab_size == 0) throw ConfigError("vocabulary must contain at least the OOV entry");
  const std::size_t e = cfg.embed_dim, h = cfg.reduce_dim, d = cfg.hidden_dim;
  const std::size_t c = cfg.context_dim(), mem = cfg.memory_dim();
  auto gru = [&](const std::string& prefix, std::size_t in, std::size_t hidden) {
    add(prefix + ".wx", in, 3 * hidden);
    add(prefix + ".bx", 1, 3 * hidden);
    add(prefix + ".wh", hidden, 3 * hidden);
    add(prefix + ".bh", 1, 3 * hidden);
  };
  auto highway = [&](const std::string& prefix, std::size_t k) {
    add(prefix + ".gate_w", k, k);
    add(prefix + ".gate_b", 1, k);
    add(prefix + ".proj_w", k, k);
    add(prefix + ".proj_b", 1, k);
  };
  add("embedding", vocab_size, e);
  add("align.w1", e, e);
  add("reduce.w", 2 * e + 3, h);
  add("reduce.b", 1, h);
  highway("hw_lex", h);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::size_t in = l == 0 ? h : 2 * d;
    const std::string prefix = "enc" + std::to_string(l);
    gru(prefix + ".fwd", in, d);
    gru(prefix + ".bwd", in, d);
    highway("hw_enc" + std::to_string(l), 2 * d);
  }
  add("cross.wp", c, d);
  add("cross.wq", c, d);
  add("self.w1", 2 * c, d);
  add("self.w2", 2 * c, d);
  gru("mem.fwd", 4 * c, d);
  gru("mem.bwd", 4 * c, d);
  highway("hw_mem", mem);
  add("ans.w4", 1, c);
  highway("hw_s0", c);
  gru("ans.gru", mem, c);
  add("ans.w5", c, mem);
  add("ans.w6", c, mem);
  add("ans.w7", c, mem);
  if (c != mem) add("cloze.w", c, mem);
}

std::size_t ModelParameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

std::size_t ModelParameters::index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ShapeError("unknown parameter '" + name + "'");
  return it->second;
}

Matrix& ModelParameters::at(const std::string& name) { return tensors_[index(name)]; }
const Matrix& ModelParameters::at(const std::string& name) const { return tensors_[index(name)]; }

namespace {
constexpr double kEmbeddingRange = 0.1;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}
}  // namespace

void ModelParameters::init_random(Rng& rng) {
  // The embedding draws from its own stream so every other tensor is
  // independent of the vocabulary size.
  Rng emb_rng(rng());
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    Matrix& t = tensors_[i];
    const std::string& n = names_[i];
    if (t.rows == 1 && n != "ans.w4") continue;  // biases stay zero
    const bool emb = n == "embedding";
    const double limit = emb ? kEmbeddingRange : std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (auto& x : t.data) x = u(emb ? emb_rng : rng);
  }
}

void ModelParameters::seed_embeddings(const ModelVocab& vocab, std::uint64_t seed) {
  Matrix& e = at("embedding");
  if (vocab.size() != e.rows) throw ShapeError("vocabulary size does not match the embedding table");
  std::uniform_real_distribution<double> u(-kEmbeddingRange, kEmbeddingRange);
  for (std::size_t r = 0; r < e.rows; ++r) {
    Rng rng(derive_seed(seed, {fnv1a(vocab.words()[r])}));
    for (std::size_t c = 0; c < e.cols; ++c) e(r, c) = u(rng);
  }
}

ModelParameters ModelParameters::zeros_like() const {
  ModelParameters z = *this;
  z.zero();
  return z;
}

void ModelParameters::zero() {
  for (auto& t : tensors_) t.zero();
}

bool ModelParameters::same_layout(const ModelParameters& o) const {
  if (names_ != o.names_) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (!tensors_[i].same_shape(o.tensors_[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Inputs

EncodedSample encode_sample(const Sample& s, const ModelVocab& vocab) {
  if (s.passage.empty() || s.question.empty()) throw ShapeError("sample '" + s.id + "': empty passage or question");
  EncodedSample x;
  for (const auto& t : s.passage) x.passage_ids.push_back(vocab.id(t.lower));
  for (const auto& t : s.question) x.question_ids.push_back(vocab.id(t.lower));
  auto match = [](const TokenSeq& seq, const TokenSeq& other) {
    std::set<std::string> surface, lower, lemma;
    for (const auto& t : other) {
      surface.insert(t.surface);
      lower.insert(t.lower);
      lemma.insert(t.lemma);
    }
    Matrix m(seq.size(), 3);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      m(i, 0) = surface.count(seq[i].surface) ? 1.0 : 0.0;
      m(i, 1) = lower.count(seq[i].lower) ? 1.0 : 0.0;
      m(i, 2) = lemma.count(seq[i].lemma) ? 1.0 : 0.0;
    }
    return m;
  };
  x.passage_match = match(s.passage, s.question);
  x.question_match = match(s.question, s.passage);
  return x;
}

// ---------------------------------------------------------------------------
// Network

MrcNetwork::MrcNetwork(Graph& g, const ModelParameters& params, ModelParameters* grads)
    : g_(g), params_(params), grads_(grads) {
  if (grads_ && !grads_->same_layout(params_)) throw ShapeError("gradient buffer layout differs from parameters");
}

Var MrcNetwork::p(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const std::size_t i = params_.index(name);
  Var v = g_.param(params_.tensor(i), grads_ ? &grads_->tensor(i) : nullptr);
  bound_.emplace(name, v);
  return v;
}

Var MrcNetwork::dropout(Var x, double rate, const ForwardOptions& opt) {
  if (!opt.training || rate <= 0.0) return x;
  if (!opt.rng) throw ShapeError("dropout requires a random generator");
  const Matrix& v = g_.value(x);
  Matrix keep(v.rows, v.cols);
  std::bernoulli_distribution coin(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (auto& k : keep.data) k = coin(*opt.rng) ? scale : 0.0;
  return g_.mask(x, keep);
}

// y = x + g * (relu(x Wp + bp) - x), g = sigmoid(x Wg + bg)
Var MrcNetwork::highway(const std::string& prefix, Var x) {
  Var gate = g_.sigmoid(g_.add_row(g_.matmul(x, p(prefix + ".gate_w")), p(prefix + ".gate_b")));
  Var proj = g_.relu(g_.add_row(g_.matmul(x, p(prefix + ".proj_w")), p(prefix + ".proj_b")));
  return g_.add(x, g_.mul(gate, g_.add(proj, g_.scale(x, -1.0))));
}

Var MrcNetwork::gru_sequence(const std::string& prefix, Var x, bool reverse) {
  Var xp = g_.add_row(g_.matmul(x, p(prefix + ".wx")), p(prefix + ".bx"));
  Var wh = p(prefix + ".wh"), bh = p(prefix + ".bh");
  const std::size_t n = g_.value(x).rows;
  const std::size_t d = g_.value(wh).rows;
  Var h = g_.constant(Matrix(1, d));
  std::vector<Var> outs(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = reverse ? n - 1 - k : k;
    h = g_.gru_step(g_.slice_rows(xp, t, t + 1), h, wh, bh);
    outs[t] = h;
  }
  return g_.concat_rows(outs);
}

Var MrcNetwork::bigru(const std::string& prefix, Var x) {
  return g_.concat_cols({gru_sequence(prefix + ".fwd", x, false), gru_sequence(prefix + ".bwd", x, true)});
}

// Scaled dot product of projected rows: (x W1)(y W2)^T / sqrt(d).
Var MrcNetwork::f_attention(const std::string& prefix, Var x, Var y) {
  const bool cross = prefix == "cross";
  Var wx = p(cross ? "cross.wp" : "self.w1");
  Var wy = p(cross ? "cross.wq" : "self.w2");
  const double scale = 1.0 / std::sqrt(static_cast<double>(params_.config().hidden_dim));
  return g_.scale(g_.matmul_t(g_.matmul(x, wx), g_.matmul(y, wy)), scale);
}

std::pair<Var, Var> MrcNetwork::lexicon_encode(const EncodedSample& x, ForwardTrace& tr) {
  const std::size_t emb = params_.index("embedding");
  Matrix* sink = grads_ ? &grads_->tensor(emb) : nullptr;
  Var ep = g_.gather_rows(params_.tensor(emb), sink, x.passage_ids);
  Var eq = g_.gather_rows(params_.tensor(emb), sink, x.question_ids);
  Var w1 = p("align.w1");
  Var gp = g_.relu(g_.matmul(ep, w1));
  Var gq = g_.relu(g_.matmul(eq, w1));
  tr.passage_align = g_.softmax_rows(g_.matmul_t(gp, gq));
  tr.question_align = g_.softmax_rows(g_.matmul_t(gq, gp));
  Var align_p = g_.matmul(tr.passage_align, gq);
  Var align_q = g_.matmul(tr.question_align, gp);
  auto reduce = [&](Var e, const Matrix& match, Var align) {
    Var feats = g_.concat_cols({e, g_.constant(match), align});
    Var r = g_.relu(g_.add_row(g_.matmul(feats, p("reduce.w")), p("reduce.b")));
    return highway("hw_lex", r);
  };
  tr.passage_lexicon = reduce(ep, x.passage_match, align_p);
  tr.question_lexicon = reduce(eq, x.question_match, align_q);
  return {tr.passage_lexicon, tr.question_lexicon};
}

std::pair<Var, Var> MrcNetwork::contextual_encode(Var passage, Var question, const ForwardOptions& opt) {
  std::vector<Var> hp_layers, hq_layers;
  Var in_p = passage, in_q = question;
  for (std::size_t l = 0; l < params_.config().layers; ++l) {
    const std::string enc = "enc" + std::to_string(l);
    const std::string hw = "hw_enc" + std::to_string(l);
    in_p = highway(hw, bigru(enc, dropout(in_p, opt.dropout, opt)));
    in_q = highway(hw, bigru(enc, dropout(in_q, opt.dropout, opt)));
    hp_layers.push_back(in_p);
    hq_layers.push_back(in_q);
  }
  if (hp_layers.size() == 1) return {hp_layers[0], hq_layers[0]};
  return {g_.concat_cols(hp_layers), g_.concat_cols(hq_layers)};
}

Var MrcNetwork::attention_fuse(Var hq, Var hp, const ForwardOptions& opt, ForwardTrace& tr) {
  Var cross = g_.softmax_rows(f_attention("cross", hp, hq));
  tr.cross_attention = dropout(cross, opt.dropout, opt);
  Var u = g_.concat_cols({hp, g_.matmul(tr.cross_attention, hq)});
  tr.self_attention = g_.softmax_rows(f_attention("self", u, u), /*drop_diagonal=*/true);
  Var u_hat = g_.matmul(tr.self_attention, u);
  Var fused = dropout(g_.concat_cols({u, u_hat}), opt.dropout, opt);
  tr.memory = highway("hw_mem", bigru("mem", fused));
  return tr.memory;
}

Var MrcNetwork::initial_state(Var hq, ForwardTrace& tr) {
  Var weights = g_.softmax_rows(g_.matmul_t(p("ans.w4"), hq));
  tr.s0 = highway("hw_s0", g_.matmul(weights, hq));
  return tr.s0;
}

void MrcNetwork::answer_span(Var hq, Var memory, const ForwardOptions& opt, ForwardTrace& tr) {
  const std::size_t steps = params_.config().steps;
  Var w5 = p("ans.w5"), w6 = p("ans.w6"), w7 = p("ans.w7");
  Var wx = p("ans.gru.wx"), bx = p("ans.gru.bx"), wh = p("ans.gru.wh"), bh = p("ans.gru.bh");

  tr.step_kept.assign(steps, true);
  if (opt.training && opt.step_dropout > 0.0) {
    if (!opt.rng) throw ShapeError("step dropout requires a random generator");
    std::bernoulli_distribution coin(1.0 - opt.step_dropout);
    for (std::size_t t = 0; t < steps; ++t) tr.step_kept[t] = coin(*opt.rng);
    if (std::none_of(tr.step_kept.begin(), tr.step_kept.end(), [](bool k) { return k; })) tr.step_kept[0] = true;
  }

  Var s = initial_state(hq, tr);
  for (std::size_t t = 0; t < steps; ++t) {
    if (t > 0) {
      Var beta = g_.softmax_rows(g_.matmul_t(g_.matmul(s, w5), memory));
      tr.step_attention.push_back(beta);
      Var x = g_.matmul(beta, memory);
      s = g_.gru_step(g_.add_row(g_.matmul(x, wx), bx), s, wh, bh);
    }
    tr.step_begin.push_back(g_.softmax_rows(g_.matmul_t(g_.matmul(s, w6), memory)));
    tr.step_end.push_back(g_.softmax_rows(g_.matmul_t(g_.matmul(s, w7), memory)));
  }
  std::vector<Var> begins, ends;
  for (std::size_t t = 0; t < steps; ++t) {
    if (!tr.step_kept[t]) continue;
    begins.push_back(tr.step_begin[t]);
    ends.push_back(tr.step_end[t]);
  }
  tr.begin = g_.mean(begins);
  tr.end = g_.mean(ends);
}

void MrcNetwork::answer_cloze(Var hq, Var memory, const Cloze& cloze, ForwardTrace& tr) {
  Var s0 = initial_state(hq, tr);
  if (params_.has("cloze.w")) s0 = g_.matmul(s0, p("cloze.w"));
  tr.cloze_attention = g_.softmax_rows(g_.matmul_t(s0, memory));
  tr.cloze_probs = g_.candidate_probs(*tr.cloze_attention, cloze.candidates);
}

ForwardTrace MrcNetwork::forward(const EncodedSample& x, const Sample& s, const ForwardOptions& opt) {
  ForwardTrace tr;
  auto [lex_p, lex_q] = lexicon_encode(x, tr);
  auto [hp, hq] = contextual_encode(lex_p, lex_q, opt);
  tr.hp = hp;
  tr.hq = hq;
  Var memory = attention_fuse(hq, hp, opt, tr);
  if (s.is_span()) {
    answer_span(hq, memory, opt, tr);
  } else {
    answer_cloze(hq, memory, s.cloze(), tr);
  }
  return tr;
}

Var MrcNetwork::sample_loss(const ForwardTrace& tr, const Sample& s) {
  if (s.is_span()) {
    const Span& a = s.span();
    const std::size_t n = g_.value(*tr.begin).cols;
    if (a.end >= n) throw DataError("sample '" + s.id + "': gold span outside the passage");
    Var lb = g_.log_floor(g_.pick(*tr.begin, 0, a.begin));
    Var le = g_.log_floor(g_.pick(*tr.end, 0, a.end));
    return g_.scale(g_.add(lb, le), -1.0);
  }
  const Cloze& c = s.cloze();
  if (c.gold >= g_.value(*tr.cloze_probs).cols) throw DataError("sample '" + s.id + "': gold candidate out of range");
  return g_.scale(g_.log_floor(g_.pick(*tr.cloze_probs, 0, c.gold)), -1.0);
}

SpanPrediction decode_span(const Matrix& p_begin, const Matrix& p_end, std::size_t max_len) {
  const std::size_t n = p_begin.cols;
  SpanPrediction out;
  for (std::size_t i = 1; i < n; ++i) {
    if (p_begin(0, i) > p_begin(0, out.begin)) out.begin = i;
  }
  out.end = out.begin;
  const std::size_t stop = std::min(n, out.begin + std::max<std::size_t>(max_len, 1));
  for (std::size_t j = out.begin + 1; j < stop; ++j) {
    if (p_end(0, j) > p_end(0, out.end)) out.end = j;
  }
  return out;
}

Prediction predict(const ModelParameters& params, const EncodedSample& x, const Sample& s) {
  Graph g;
  MrcNetwork net(g, params, nullptr);
  const ForwardTrace tr = net.forward(x, s, ForwardOptions{});
  Prediction out;
  if (s.is_span()) {
    out.span = decode_span(g.value(*tr.begin), g.value(*tr.end), params.config().max_span_len);
  } else {
    const Matrix& probs = g.value(*tr.cloze_probs);
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.cols; ++c) {
      if (probs(0, c) > probs(0, best)) best = c;
    }
    out.candidate = best;
  }
  return out;
}

SampleGradient accumulate_gradient(const ModelParameters& params, ModelParameters& grads, const EncodedSample& x,
                                   const Sample& s, double weight, const ForwardOptions& opt) {
  Graph g;
  MrcNetwork net(g, params, &grads);
  const ForwardTrace tr = net.forward(x, s, opt);
  const Var loss = net.sample_loss(tr, s);
  SampleGradient out;
  out.loss = g.value(loss)(0, 0);
  if (!std::isfinite(out.loss)) throw NumericError("non-finite loss on sample '" + s.id + "'");
  if (weight == 0.0) return out;
  g.backward(loss, weight);
  for (std::size_t i = 0; i < grads.tensor_count(); ++i) {
    for (double v : grads.tensor(i).data) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in parameter '" + grads.name(i) + "'");
    }
  }
  return out;
}

double sample_loss_value(const ModelParameters& params, const EncodedSample& x, const Sample& s,
                         const ForwardOptions& opt) {
  Graph g;
  MrcNetwork net(g, params, nullptr);
  const ForwardTrace tr = net.forward(x, s, opt);
  return g.value(net.sample_loss(tr, s))(0, 0);
}

}  // namespace mtmrc
