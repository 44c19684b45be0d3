#pragma once

// Row softmax, affine maps and multi-head scaled dot-product attention, each
// with a hand-written backward pass for input gradients.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vqakit/matrix.hpp"

namespace vqakit {

inline Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto in = m.row(i);
    if (in.empty()) continue;
    double mx = in[0];
    for (double x : in) mx = std::max(mx, x);
    double s = 0.0;
    auto o = out.row(i);
    for (std::size_t j = 0; j < in.size(); ++j) s += (o[j] = std::exp(in[j] - mx));
    for (double& x : o) x /= s;
  }
  return out;
}

// Given y = softmax_rows(x) and dL/dy, returns dL/dx.
inline Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy) {
  y.require_same(dy, "softmax_rows_backward");
  Matrix dx(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) dot += y(i, j) * dy(i, j);
    for (std::size_t j = 0; j < y.cols(); ++j) dx(i, j) = y(i, j) * (dy(i, j) - dot);
  }
  return dx;
}

// y = x W^T + b, W is out x in, b is 1 x out.
struct LinearWeights {
  Matrix weight;
  Matrix bias;
};

inline Matrix linear(const Matrix& x, const LinearWeights& w) {
  return add_row(matmul_bt(x, w.weight), w.bias);
}

inline Matrix linear_backward(const LinearWeights& w, const Matrix& dy) { return matmul(dy, w.weight); }

struct AttentionConfig {
  std::size_t heads = 8;
  std::size_t model_dim = 512;
  std::size_t glimpses = 2;

  std::size_t head_dim() const { return model_dim / heads; }

  void validate() const {
    if (heads == 0 || model_dim == 0 || model_dim % heads != 0)
      throw ShapeError("model_dim " + std::to_string(model_dim) + " not divisible by heads " +
                       std::to_string(heads));
    if (glimpses == 0) throw ShapeError("glimpses must be >= 1");
  }
};

// Boolean l_q x l_k matrix; true = query may attend to key.
class AttentionMask {
 public:
  AttentionMask(std::size_t rows, std::size_t cols, bool allowed = true)
      : rows_(rows), cols_(cols), allowed_(rows * cols, allowed ? 1 : 0) {}

  static AttentionMask causal(std::size_t n) {
    AttentionMask m(n, n, false);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) m.set(i, j, true);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool allowed(std::size_t i, std::size_t j) const { return allowed_[i * cols_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { allowed_[i * cols_ + j] = v ? 1 : 0; }

 private:
  std::size_t rows_, cols_;
  std::vector<unsigned char> allowed_;
};

struct MhaWeights {
  LinearWeights q, k, v, o;
};

template <class Rng>
MhaWeights make_mha_weights(std::size_t dim, Rng& rng) {
  auto lin = [&] { return LinearWeights{Matrix::uniform(dim, dim, rng), Matrix::uniform(1, dim, rng)}; };
  MhaWeights w;
  w.q = lin();
  w.k = lin();
  w.v = lin();
  w.o = lin();
  return w;
}

// Identity projections, zero biases.
inline MhaWeights identity_mha_weights(std::size_t dim) {
  auto lin = [&] { return LinearWeights{Matrix::identity(dim), Matrix(1, dim)}; };
  return {lin(), lin(), lin(), lin()};
}

struct MhaCache {
  Matrix qp, kp, vp;          // projected query / key / value
  std::vector<Matrix> probs;  // per head, l_q x l_k attention weights
};

struct MhaResult {
  Matrix output;
  MhaCache cache;
};

struct MhaGrads {
  Matrix query, key, value;
};

namespace detail {

inline void check_mha_weights(const MhaWeights& w, std::size_t dim) {
  for (const auto* lw : {&w.q, &w.k, &w.v, &w.o}) {
    require_shape(lw->weight, dim, dim, "attention projection");
    require_shape(lw->bias, 1, dim, "attention bias");
  }
}

}  // namespace detail

inline MhaResult multi_head_attention(const Matrix& query, const Matrix& key, const Matrix& value,
                                      const AttentionConfig& cfg, const MhaWeights& w,
                                      const AttentionMask* mask = nullptr) {
  cfg.validate();
  const std::size_t dim = cfg.model_dim;
  if (query.cols() != dim || key.cols() != dim || value.cols() != dim)
    throw ShapeError("attention inputs must have model_dim " + std::to_string(dim) + " columns (query " +
                     query.shape() + ", key " + key.shape() + ", value " + value.shape() + ")");
  if (key.rows() != value.rows())
    throw ShapeError("key/value row mismatch: " + key.shape() + " vs " + value.shape());
  if (mask && (mask->rows() != query.rows() || mask->cols() != key.rows()))
    throw ShapeError("mask shape does not match attention scores");
  detail::check_mha_weights(w, dim);

  const std::size_t lq = query.rows(), lk = key.rows(), dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  MhaResult res;
  auto& c = res.cache;
  c.qp = linear(query, w.q);
  c.kp = linear(key, w.k);
  c.vp = linear(value, w.v);
  Matrix heads_out(lq, dim);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    const Matrix qh = slice_cols(c.qp, h * dh, (h + 1) * dh);
    const Matrix kh = slice_cols(c.kp, h * dh, (h + 1) * dh);
    const Matrix vh = slice_cols(c.vp, h * dh, (h + 1) * dh);
    Matrix scores = matmul_bt(qh, kh) * scale;
    Matrix probs(lq, lk);
    for (std::size_t i = 0; i < lq; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      bool any = false;
      for (std::size_t j = 0; j < lk; ++j)
        if (!mask || mask->allowed(i, j)) {
          mx = std::max(mx, scores(i, j));
          any = true;
        }
      if (!any) throw std::invalid_argument("attention row " + std::to_string(i) + " is fully masked");
      double s = 0.0;
      for (std::size_t j = 0; j < lk; ++j)
        if (!mask || mask->allowed(i, j)) s += (probs(i, j) = std::exp(scores(i, j) - mx));
      for (std::size_t j = 0; j < lk; ++j) probs(i, j) /= s;
    }
    set_cols(heads_out, h * dh, matmul(probs, vh));
    c.probs.push_back(std::move(probs));
  }
  res.output = linear(heads_out, w.o);
  return res;
}

// Input gradients of multi_head_attention for upstream gradient d_out.
inline MhaGrads mha_backward(const MhaCache& c, const AttentionConfig& cfg, const MhaWeights& w,
                             const Matrix& d_out) {
  const std::size_t dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Matrix d_heads = linear_backward(w.o, d_out);
  Matrix dqp(c.qp.rows(), c.qp.cols()), dkp(c.kp.rows(), c.kp.cols()), dvp(c.vp.rows(), c.vp.cols());
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    const Matrix& probs = c.probs[h];
    const Matrix qh = slice_cols(c.qp, h * dh, (h + 1) * dh);
    const Matrix kh = slice_cols(c.kp, h * dh, (h + 1) * dh);
    const Matrix vh = slice_cols(c.vp, h * dh, (h + 1) * dh);
    const Matrix doh = slice_cols(d_heads, h * dh, (h + 1) * dh);
    const Matrix dprobs = matmul_bt(doh, vh);
    set_cols(dvp, h * dh, matmul_at(probs, doh));
    const Matrix dscores = softmax_rows_backward(probs, dprobs) * scale;
    set_cols(dqp, h * dh, matmul(dscores, kh));
    set_cols(dkp, h * dh, matmul_at(dscores, qh));
  }
  return {linear_backward(w.q, dqp), linear_backward(w.k, dkp), linear_backward(w.v, dvp)};
}

}  // namespace vqakit
