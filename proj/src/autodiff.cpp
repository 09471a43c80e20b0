#include "mtmrc/autodiff.hpp"

#include <cmath>
#include <limits>

namespace mtmrc {

namespace {

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// c += a * b  (a: n x k, b: k x m)
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* ci = c.data.data() + i * c.cols;
    for (std::size_t p = 0; p < a.cols; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const double* bp = b.data.data() + p * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += av * bp[j];
    }
  }
}

// c += a * b^T  (a: n x k, b: m x k)
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.data.data() + i * a.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* bj = b.data.data() + j * b.cols;
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols; ++p) s += ai[p] * bj[p];
      c(i, j) += s;
    }
  }
}

// c += a^T * b  (a: k x n, b: k x m)
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  for (std::size_t p = 0; p < a.rows; ++p) {
    const double* bp = b.data.data() + p * b.cols;
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double av = a(p, i);
      if (av == 0.0) continue;
      double* ci = c.data.data() + i * c.cols;
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += av * bp[j];
    }
  }
}

void axpy(Matrix& y, const Matrix& x, double a = 1.0) {
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += a * x.data[i];
}

std::string shape(const Matrix& m) { return std::to_string(m.rows) + "x" + std::to_string(m.cols); }

}  // namespace

Var Graph::push(Matrix value, bool needs_grad) {
  Node n;
  n.own = std::move(value);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Matrix& Graph::value(Var v) const {
  const Node& n = node(v);
  return n.ext ? *n.ext : n.own;
}

Matrix& Graph::grad(Var v) {
  Node& n = node(v);
  if (n.sink) return *n.sink;
  if (n.grad.data.empty()) {
    const Matrix& val = n.ext ? *n.ext : n.own;
    n.grad = Matrix(val.rows, val.cols);
  }
  return n.grad;
}

Var Graph::constant(Matrix value) { return push(std::move(value), false); }

Var Graph::param(const Matrix& value, Matrix* grad_sink) {
  require_shape(grad_sink == nullptr || grad_sink->same_shape(value), "param: gradient sink shape mismatch");
  Node n;
  n.ext = &value;
  n.sink = grad_sink;
  n.needs_grad = grad_sink != nullptr;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::gather_rows(const Matrix& table, Matrix* grad_sink, const std::vector<std::size_t>& ids) {
  Matrix out(ids.size(), table.cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require_shape(ids[i] < table.rows, "gather_rows: id out of range");
    std::copy_n(table.row(ids[i]).begin(), table.cols, out.row(i).begin());
  }
  Var y = push(std::move(out), grad_sink != nullptr);
  if (grad_sink) {
    node(y).back = [this, y, grad_sink, ids] {
      const Matrix& gy = node(y).grad;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        auto dst = grad_sink->row(ids[i]);
        auto src = gy.row(i);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      }
    };
  }
  return y;
}

Var Graph::matmul(Var a, Var b) {
  const Matrix &A = value(a), &B = value(b);
  require_shape(A.cols == B.rows, "matmul: " + shape(A) + " * " + shape(B));
  Matrix out(A.rows, B.cols);
  gemm_nn(A, B, out);
  Var y = push(std::move(out), needs(a) || needs(b));
  node(y).back = [this, a, b, y] {
    const Matrix& gy = node(y).grad;
    if (needs(a)) gemm_nt(gy, value(b), grad(a));
    if (needs(b)) gemm_tn(value(a), gy, grad(b));
  };
  return y;
}

Var Graph::matmul_t(Var a, Var b) {
  const Matrix &A = value(a), &B = value(b);
  require_shape(A.cols == B.cols, "matmul_t: " + shape(A) + " * " + shape(B) + "^T");
  Matrix out(A.rows, B.rows);
  gemm_nt(A, B, out);
  Var y = push(std::move(out), needs(a) || needs(b));
  node(y).back = [this, a, b, y] {
    const Matrix& gy = node(y).grad;
    if (needs(a)) gemm_nn(gy, value(b), grad(a));
    if (needs(b)) gemm_tn(gy, value(a), grad(b));
  };
  return y;
}

Var Graph::add(Var a, Var b) {
  const Matrix &A = value(a), &B = value(b);
  require_shape(A.same_shape(B), "add: " + shape(A) + " + " + shape(B));
  Matrix out = A;
  axpy(out, B);
  Var y = push(std::move(out), needs(a) || needs(b));
  node(y).back = [this, a, b, y] {
    const Matrix& gy = node(y).grad;
    if (needs(a)) axpy(grad(a), gy);
    if (needs(b)) axpy(grad(b), gy);
  };
  return y;
}

Var Graph::add_row(Var a, Var bias) {
  const Matrix &A = value(a), &B = value(bias);
  require_shape(B.rows == 1 && B.cols == A.cols, "add_row: " + shape(A) + " + " + shape(B));
  Matrix out = A;
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += B(0, j);
  }
  Var y = push(std::move(out), needs(a) || needs(bias));
  node(y).back = [this, a, bias, y] {
    const Matrix& gy = node(y).grad;
    if (needs(a)) axpy(grad(a), gy);
    if (needs(bias)) {
      Matrix& gb = grad(bias);
      for (std::size_t i = 0; i < gy.rows; ++i) {
        for (std::size_t j = 0; j < gy.cols; ++j) gb(0, j) += gy(i, j);
      }
    }
  };
  return y;
}

Var Graph::mul(Var a, Var b) {
  const Matrix &A = value(a), &B = value(b);
  require_shape(A.same_shape(B), "mul: " + shape(A) + " .* " + shape(B));
  Matrix out = A;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];
  Var y = push(std::move(out), needs(a) || needs(b));
  node(y).back = [this, a, b, y] {
    const Matrix& gy = node(y).grad;
    if (needs(a)) {
      Matrix& ga = grad(a);
      const Matrix& vb = value(b);
      for (std::size_t i = 0; i < gy.data.size(); ++i) ga.data[i] += gy.data[i] * vb.data[i];
    }
    if (needs(b)) {
      Matrix& gb = grad(b);
      const Matrix& va = value(a);
      for (std::size_t i = 0; i < gy.data.size(); ++i) gb.data[i] += gy.data[i] * va.data[i];
    }
  };
  return y;
}

Var Graph::scale(Var a, double s) {
  Matrix out = value(a);
  for (auto& x : out.data) x *= s;
  Var y = push(std::move(out), needs(a));
  node(y).back = [this, a, y, s] {
    if (needs(a)) axpy(grad(a), node(y).grad, s);
  };
  return y;
}

Var Graph::sigmoid(Var a) {
  Matrix out = value(a);
  for (auto& x : out.data) x = sigm(x);
  Var y = push(std::move(out), needs(a));
  node(y).back = [this, a, y] {
    if (!needs(a)) return;
    const Matrix &gy = node(y).grad, &vy = value(y);
    Matrix& ga = grad(a);
    for (std::size_t i = 0; i < gy.data.size(); ++i) ga.data[i] += gy.data[i] * vy.data[i] * (1.0 - vy.data[i]);
  };
  return y;
}

Var Graph::tanh(Var a) {
  Matrix out = value(a);
  for (auto& x : out.data) x = std::tanh(x);
  Var y = push(std::move(out), needs(a));
  node(y).back = [this, a, y] {
    if (!needs(a)) return;
    const Matrix &gy = node(y).grad, &vy = value(y);
    Matrix& ga = grad(a);
    for (std::size_t i = 0; i < gy.data.size(); ++i) ga.data[i] += gy.data[i] * (1.0 - vy.data[i] * vy.data[i]);
  };
  return y;
}

Var Graph::relu(Var a) {
  Matrix out = value(a);
  for (auto& x : out.data) x = x > 0.0 ? x : 0.0;
  Var y = push(std::move(out), needs(a));
  node(y).back = [this, a, y] {
    if (!needs(a)) return;
    const Matrix &gy = node(y).grad, &va = value(a);
    Matrix& ga = grad(a);
    for (std::size_t i = 0; i < gy.data.size(); ++i) {
      if (va.data[i] > 0.0) ga.data[i] += gy.data[i];
    }
  };
  return y;
}

Var Graph::softmax_rows(Var a, bool drop_diagonal) {
  const Matrix& A = value(a);
  require_shape(!drop_diagonal || A.rows == A.cols, "softmax_rows: diagonal drop needs a square matrix");
  Matrix out(A.rows, A.cols);
  for (std::size_t i = 0; i < A.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < A.cols; ++j) {
      if (drop_diagonal && i == j) continue;
      mx = std::max(mx, A(i, j));
    }
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double z = 0.0;
    for (std::size_t j = 0; j < A.cols; ++j) {
      if (drop_diagonal && i == j) continue;
      out(i, j) = std::exp(A(i, j) - mx);
      z += out(i, j);
    }
    for (std::size_t j = 0; j < A.cols; ++j) out(i, j) /= z;
  }
  Var y = push(std::move(out), needs(a));
  node(y).back = [this, a, y] {
    if (!needs(a)) return;
    const Matrix &gy = node(y).grad, &vy = value(y);
    Matrix& ga = grad(a);
    for (std::size_t i = 0; i < vy.rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < vy.cols; ++j) dot += gy(i, j) * vy(i, j);
      for (std::size_t j = 0; j < vy.cols; ++j) ga(i, j) += vy(i, j) * (gy(i, j) - dot);
    }
  };
  return y;
}

Var Graph::mask(Var a, const Matrix& multiplier) {
  require_shape(value(a).same_shape(multiplier), "mask: shape mismatch");
  return mul(a, constant(multiplier));
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  require_shape(!parts.empty(), "concat_cols: no inputs");
  const std::size_t rows = value(parts[0]).rows;
  std::size_t cols = 0;
  bool any = false;
  for (auto p : parts) {
    require_shape(value(p).rows == rows, "concat_cols: row mismatch");
    cols += value(p).cols;
    any = any || needs(p);
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (auto p : parts) {
    const Matrix& P = value(p);
    for (std::size_t i = 0; i < rows; ++i) std::copy_n(P.row(i).begin(), P.cols, out.row(i).begin() + static_cast<std::ptrdiff_t>(off));
    off += P.cols;
  }
  Var y = push(std::move(out), any);
  node(y).back = [this, parts, y] {
    const Matrix& gy = node(y).grad;
    std::size_t off = 0;
    for (auto p : parts) {
      const std::size_t c = value(p).cols;
      if (needs(p)) {
        Matrix& gp = grad(p);
        for (std::size_t i = 0; i < gy.rows; ++i) {
          for (std::size_t j = 0; j < c; ++j) gp(i, j) += gy(i, off + j);
        }
      }
      off += c;
    }
  };
  return y;
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
  require_shape(!parts.empty(), "concat_rows: no inputs");
  const std::size_t cols = value(parts[0]).cols;
  std::size_t rows = 0;
  bool any = false;
  for (auto p : parts) {
    require_shape(value(p).cols == cols, "concat_rows: column mismatch");
    rows += value(p).rows;
    any = any || needs(p);
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (auto p : parts) {
    const Matrix& P = value(p);
    std::copy(P.data.begin(), P.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off * cols));
    off += P.rows;
  }
  Var y = push(std::move(out), any);
  node(y).back = [this, parts, y, cols] {
    const Matrix& gy = node(y).grad;
    std::size_t off = 0;
    for (auto p : parts) {
      const std::size_t r = value(p).rows;
      if (needs(p)) {
        Matrix& gp = grad(p);
        for (std::size_t k = 0; k < r * cols; ++k) gp.data[k] += gy.data[off * cols + k];
      }
      off += r;
    }
  };
  return y;
}

Var Graph::slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Matrix& A = value(a);
  require_shape(begin <= end && end <= A.rows, "slice_rows: range out of bounds");
  Matrix out(end - begin, A.cols);
  std::copy(A.data.begin() + static_cast<std::ptrdiff_t>(begin * A.cols),
            A.data.begin() + static_cast<std::ptrdiff_t>(end * A.cols), out.data.begin());
  Var y = push(std::move(out), needs(a));
  node(y).back = [this, a, y, begin] {
    if (!needs(a)) return;
    const Matrix& gy = node(y).grad;
    Matrix& ga = grad(a);
    for (std::size_t k = 0; k < gy.data.size(); ++k) ga.data[begin * ga.cols + k] += gy.data[k];
  };
  return y;
}

Var Graph::reverse_rows(Var a) {
  const Matrix& A = value(a);
  Matrix out(A.rows, A.cols);
  for (std::size_t i = 0; i < A.rows; ++i) std::copy_n(A.row(A.rows - 1 - i).begin(), A.cols, out.row(i).begin());
  Var y = push(std::move(out), needs(a));
  node(y).back = [this, a, y] {
    if (!needs(a)) return;
    const Matrix& gy = node(y).grad;
    Matrix& ga = grad(a);
    for (std::size_t i = 0; i < gy.rows; ++i) {
      for (std::size_t j = 0; j < gy.cols; ++j) ga(gy.rows - 1 - i, j) += gy(i, j);
    }
  };
  return y;
}

Var Graph::mean(const std::vector<Var>& parts) {
  require_shape(!parts.empty(), "mean: no inputs");
  const Matrix& first = value(parts[0]);
  Matrix out(first.rows, first.cols);
  bool any = false;
  for (auto p : parts) {
    require_shape(value(p).same_shape(first), "mean: shape mismatch");
    axpy(out, value(p));
    any = any || needs(p);
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (auto& x : out.data) x *= inv;
  Var y = push(std::move(out), any);
  node(y).back = [this, parts, y, inv] {
    for (auto p : parts) {
      if (needs(p)) axpy(grad(p), node(y).grad, inv);
    }
  };
  return y;
}

Var Graph::pick(Var a, std::size_t r, std::size_t c) {
  const Matrix& A = value(a);
  require_shape(r < A.rows && c < A.cols, "pick: index out of range");
  Var y = push(Matrix(1, 1, A(r, c)), needs(a));
  node(y).back = [this, a, y, r, c] {
    if (needs(a)) grad(a)(r, c) += node(y).grad(0, 0);
  };
  return y;
}

Var Graph::log_floor(Var a, double floor) {
  Matrix out = value(a);
  for (auto& x : out.data) x = std::log(std::max(x, floor));
  Var y = push(std::move(out), needs(a));
  node(y).back = [this, a, y, floor] {
    if (!needs(a)) return;
    const Matrix &gy = node(y).grad, &va = value(a);
    Matrix& ga = grad(a);
    for (std::size_t i = 0; i < gy.data.size(); ++i) {
      if (va.data[i] > floor) ga.data[i] += gy.data[i] / va.data[i];
    }
  };
  return y;
}

Var Graph::sum(Var a) {
  double s = 0.0;
  for (double x : value(a).data) s += x;
  Var y = push(Matrix(1, 1, s), needs(a));
  node(y).back = [this, a, y] {
    if (!needs(a)) return;
    const double g = node(y).grad(0, 0);
    for (auto& x : grad(a).data) x += g;
  };
  return y;
}

Var Graph::gru_step(Var xp, Var h, Var wh, Var bh) {
  const Matrix &X = value(xp), &H = value(h), &W = value(wh), &B = value(bh);
  const std::size_t d = H.cols;
  require_shape(H.rows == 1 && X.rows == 1 && X.cols == 3 * d, "gru_step: input " + shape(X) + ", state " + shape(H));
  require_shape(W.rows == d && W.cols == 3 * d && B.rows == 1 && B.cols == 3 * d, "gru_step: weights " + shape(W));
  Matrix hp = B;
  gemm_nn(H, W, hp);
  Matrix z(1, d), r(1, d), n(1, d), out(1, d);
  for (std::size_t j = 0; j < d; ++j) {
    z(0, j) = sigm(X(0, j) + hp(0, j));
    r(0, j) = sigm(X(0, d + j) + hp(0, d + j));
    n(0, j) = std::tanh(X(0, 2 * d + j) + r(0, j) * hp(0, 2 * d + j));
    out(0, j) = (1.0 - z(0, j)) * n(0, j) + z(0, j) * H(0, j);
  }
  Var y = push(std::move(out), needs(xp) || needs(h) || needs(wh) || needs(bh));
  node(y).back = [this, xp, h, wh, bh, y, d, hp = std::move(hp), z = std::move(z), r = std::move(r),
                  n = std::move(n)] {
    const Matrix& gy = node(y).grad;
    const Matrix& H = value(h);
    Matrix dx(1, 3 * d), dhp(1, 3 * d);
    for (std::size_t j = 0; j < d; ++j) {
      const double g = gy(0, j);
      const double dz = g * (H(0, j) - n(0, j));
      const double dn = g * (1.0 - z(0, j));
      const double dan = dn * (1.0 - n(0, j) * n(0, j));
      const double dr = dan * hp(0, 2 * d + j);
      const double daz = dz * z(0, j) * (1.0 - z(0, j));
      const double dar = dr * r(0, j) * (1.0 - r(0, j));
      dx(0, j) = daz;
      dx(0, d + j) = dar;
      dx(0, 2 * d + j) = dan;
      dhp(0, j) = daz;
      dhp(0, d + j) = dar;
      dhp(0, 2 * d + j) = dan * r(0, j);
    }
    if (needs(xp)) axpy(grad(xp), dx);
    if (needs(bh)) axpy(grad(bh), dhp);
    if (needs(wh)) gemm_tn(H, dhp, grad(wh));
    if (needs(h)) {
      Matrix& gh = grad(h);
      for (std::size_t j = 0; j < d; ++j) gh(0, j) += gy(0, j) * z(0, j);
      gemm_nt(dhp, value(wh), gh);
    }
  };
  return y;
}

Var Graph::candidate_probs(Var attention, const std::vector<std::vector<std::size_t>>& candidates) {
  const Matrix& S = value(attention);
  require_shape(S.rows == 1 && !candidates.empty(), "candidate_probs: need a 1 x n attention row");
  Matrix mass(1, candidates.size());
  double total = 0.0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    for (auto pos : candidates[c]) {
      require_shape(pos < S.cols, "candidate_probs: occurrence outside passage");
      mass(0, c) += S(0, pos);
    }
    total += mass(0, c);
  }
  Matrix out = mass;
  for (auto& x : out.data) x /= total;
  Var y = push(std::move(out), needs(attention));
  node(y).back = [this, attention, y, candidates, total] {
    if (!needs(attention)) return;
    const Matrix &gy = node(y).grad, &py = value(y);
    double dot = 0.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) dot += gy(0, c) * py(0, c);
    Matrix& ga = grad(attention);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const double dm = (gy(0, c) - dot) / total;
      for (auto pos : candidates[c]) ga(0, pos) += dm;
    }
  };
  return y;
}

void Graph::backward(Var out, double seed) {
  require_shape(value(out).rows == 1 && value(out).cols == 1, "backward: output must be 1x1");
  if (!needs(out)) return;
  grad(out)(0, 0) += seed;
  for (std::int64_t i = out.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || !n.back || n.grad.data.empty()) continue;
    n.back();
  }
}

}  // namespace mtmrc
