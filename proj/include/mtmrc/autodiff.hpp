#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mtmrc/tensor.hpp"

namespace mtmrc {

struct Var {
  std::uint32_t id = 0;
};

/// Single-use reverse-mode tape. Build the forward computation through the op
/// methods, then call backward() once on a 1x1 output.
///
/// Parameters enter as external leaves: their values are read in place and
/// their gradients are accumulated straight into the caller's sink matrices.
class Graph {
 public:
  Graph() { nodes_.reserve(512); }

  Var constant(Matrix value);
  Var param(const Matrix& value, Matrix* grad_sink);
  /// Rows `ids` of an embedding table; the backward pass scatters into the sink.
  Var gather_rows(const Matrix& table, Matrix* grad_sink, const std::vector<std::size_t>& ids);

  const Matrix& value(Var v) const;

  Var matmul(Var a, Var b);    // a * b
  Var matmul_t(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  /// Adds a 1 x cols row to every row of a.
  Var add_row(Var a, Var bias);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  /// Row-wise softmax. With drop_diagonal, entry (i,i) is excluded from row i;
  /// a row with nothing left becomes all zeros.
  Var softmax_rows(Var a, bool drop_diagonal = false);
  Var mask(Var a, const Matrix& multiplier);
  Var concat_cols(const std::vector<Var>& parts);
  Var concat_rows(const std::vector<Var>& parts);
  Var slice_rows(Var a, std::size_t begin, std::size_t end);
  Var reverse_rows(Var a);
  /// Mean of equally shaped inputs.
  Var mean(const std::vector<Var>& parts);
  /// Element (r, c) as 1x1.
  Var pick(Var a, std::size_t r, std::size_t c);
  /// log(max(x, floor)) elementwise; zero gradient where the floor is active.
  Var log_floor(Var a, double floor = 1e-12);
  Var sum(Var a);
  /// GRU cell with gates ordered [update | reset | candidate]:
  ///   hp = h Wh + bh, z = s(xp_z + hp_z), r = s(xp_r + hp_r),
  ///   n = tanh(xp_n + r * hp_n), h' = (1 - z) * n + z * h.
  /// xp is the 1 x 3d input projection; h is 1 x d.
  Var gru_step(Var xp, Var h, Var wh, Var bh);
  /// 1 x C candidate probabilities: attention mass summed over each candidate's
  /// positions, renormalized across candidates.
  Var candidate_probs(Var attention, const std::vector<std::vector<std::size_t>>& candidates);

  /// Propagates d(out)/d(.) * seed back to every parameter sink.
  void backward(Var out, double seed = 1.0);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix own;
    const Matrix* ext = nullptr;
    Matrix grad;
    Matrix* sink = nullptr;
    bool needs_grad = false;
    std::function<void()> back;
  };

  Var push(Matrix value, bool needs_grad);
  Node& node(Var v) { return nodes_[v.id]; }
  const Node& node(Var v) const { return nodes_[v.id]; }
  bool needs(Var v) const { return node(v).needs_grad; }
  /// Gradient accumulator for v, allocated on first use.
  Matrix& grad(Var v);

  std::vector<Node> nodes_;
};

}  // namespace mtmrc
