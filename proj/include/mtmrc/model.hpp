#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "mtmrc/autodiff.hpp"
#include "mtmrc/corpus.hpp"
#include "mtmrc/tensor.hpp"

namespace mtmrc {

struct ModelConfig {
  std::size_t embed_dim = 16;   // e
  std::size_t reduce_dim = 16;  // width after the lexicon ReLU projection
  std::size_t hidden_dim = 16;  // d, per direction
  std::size_t layers = 1;       // contextual encoder depth
  std::size_t steps = 5;        // T
  std::size_t max_span_len = 30;

  /// Width of H^q / H^p: both directions of every encoder layer.
  std::size_t context_dim() const { return 2 * hidden_dim * layers; }
  std::size_t memory_dim() const { return 2 * hidden_dim; }
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Case-folded word ids for the embedding table; id 0 is OOV.
class ModelVocab {
 public:
  static constexpr std::size_t kOov = 0;
  static ModelVocab build(const std::vector<const TaskDataset*>& datasets, std::size_t max_words);
  explicit ModelVocab(std::vector<std::string> words = {"<unk>"});

  std::size_t size() const { return words_.size(); }
  std::size_t id(const std::string& lower) const;
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// All trainable tensors, addressed by name. Gradients and optimizer state
/// reuse the same layout via zeros_like().
class ModelParameters {
 public:
  ModelParameters() = default;
  ModelParameters(const ModelConfig& cfg, std::size_t vocab_size);

  const ModelConfig& config() const { return cfg_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t tensor_count() const { return tensors_.size(); }
  /// Total scalar parameters.
  std::size_t scalar_count() const;
  const std::string& name(std::size_t i) const { return names_[i]; }
  Matrix& tensor(std::size_t i) { return tensors_[i]; }
  const Matrix& tensor(std::size_t i) const { return tensors_[i]; }
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  std::size_t index(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  /// Glorot-uniform weights, uniform(+-0.1) embeddings, zero biases.
  void init_random(Rng& rng);
  /// Redraws each embedding row from a seed derived from its word, so a word
  /// starts from the same vector whatever else is in the vocabulary.
  void seed_embeddings(const ModelVocab& vocab, std::uint64_t seed);
  ModelParameters zeros_like() const;
  void zero();
  bool same_layout(const ModelParameters& o) const;

 private:
  void add(std::string name, std::size_t rows, std::size_t cols);

  ModelConfig cfg_;
  std::size_t vocab_size_ = 0;
  std::vector<std::string> names_;
  std::vector<Matrix> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Token ids and exact-match features of one sample, computed once per run.
struct EncodedSample {
  std::vector<std::size_t> passage_ids;
  std::vector<std::size_t> question_ids;
  Matrix passage_match;   // n x 3: surface, lower, lemma found in the question
  Matrix question_match;  // m x 3: the same against the passage
};

EncodedSample encode_sample(const Sample& s, const ModelVocab& vocab);

struct ForwardOptions {
  bool training = false;
  double dropout = 0.0;
  double step_dropout = 0.0;
  Rng* rng = nullptr;  // required when training with nonzero dropout
};

/// Handles into the tape for every activation worth inspecting.
struct ForwardTrace {
  Var passage_align;    // n x m attention of passage words over question words
  Var question_align;   // m x n
  Var passage_lexicon;  // n x reduce_dim, after highway
  Var question_lexicon;
  Var hq, hp;           // m x c, n x c
  Var cross_attention;  // n x m, rows over question positions (after dropout)
  Var self_attention;   // n x n with zero diagonal
  Var memory;           // n x 2d
  Var s0;               // 1 x c
  std::vector<Var> step_attention;  // beta for t = 1..T-1
  std::vector<Var> step_begin, step_end;
  std::vector<bool> step_kept;
  std::optional<Var> begin, end;        // span head
  std::optional<Var> cloze_attention;   // 1 x n
  std::optional<Var> cloze_probs;       // 1 x C
};

/// Binds parameters into a tape and runs the network.
class MrcNetwork {
 public:
  /// grads may be null for inference.
  MrcNetwork(Graph& g, const ModelParameters& params, ModelParameters* grads);

  ForwardTrace forward(const EncodedSample& x, const Sample& s, const ForwardOptions& opt);

  /// Lexicon layer alone: word embedding, exact match, alignment, ReLU
  /// reduction, highway. Returns (passage, question) features.
  std::pair<Var, Var> lexicon_encode(const EncodedSample& x, ForwardTrace& tr);
  std::pair<Var, Var> contextual_encode(Var passage, Var question, const ForwardOptions& opt);
  Var attention_fuse(Var hq, Var hp, const ForwardOptions& opt, ForwardTrace& tr);
  void answer_span(Var hq, Var memory, const ForwardOptions& opt, ForwardTrace& tr);
  void answer_cloze(Var hq, Var memory, const Cloze& cloze, ForwardTrace& tr);

  /// Unweighted negative log-likelihood of the gold answer.
  Var sample_loss(const ForwardTrace& tr, const Sample& s);

  Graph& graph() { return g_; }

 private:
  Var p(const std::string& name);
  Var highway(const std::string& prefix, Var x);
  Var gru_sequence(const std::string& prefix, Var x, bool reverse);
  Var bigru(const std::string& prefix, Var x);
  Var f_attention(const std::string& prefix, Var x, Var y);
  Var initial_state(Var hq, ForwardTrace& tr);
  Var dropout(Var x, double rate, const ForwardOptions& opt);

  Graph& g_;
  const ModelParameters& params_;
  ModelParameters* grads_;
  std::unordered_map<std::string, Var> bound_;
};

struct SpanPrediction {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// argmax begin, then argmax end within [begin, begin + max_len).
SpanPrediction decode_span(const Matrix& p_begin, const Matrix& p_end, std::size_t max_len);

/// Inference-only forward pass; returns the predicted span or cloze candidate.
struct Prediction {
  std::optional<SpanPrediction> span;
  std::optional<std::size_t> candidate;
};
Prediction predict(const ModelParameters& params, const EncodedSample& x, const Sample& s);

struct SampleGradient {
  double loss = 0.0;  // unweighted
};

/// Forward + backward for one sample; accumulates weight * d(loss) into grads.
/// A zero weight leaves grads untouched. Throws NumericError naming the first
/// parameter whose accumulated gradient becomes non-finite.
SampleGradient accumulate_gradient(const ModelParameters& params, ModelParameters& grads, const EncodedSample& x,
                                   const Sample& s, double weight, const ForwardOptions& opt);

/// Loss without gradients, for finite-difference checks.
double sample_loss_value(const ModelParameters& params, const EncodedSample& x, const Sample& s,
                         const ForwardOptions& opt);

// Checkpoint: magic, version, JSON header (config, vocab, extra metadata),
// then per tensor: name, rows, cols, little-endian doubles.
struct Checkpoint {
  ModelParameters params;
  ModelVocab vocab;
  nlohmann::json meta;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mtmrc
