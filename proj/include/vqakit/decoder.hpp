#pragma once

// Autoregressive answer generator: a stack of masked self-attention +
// cross-attention layers over the fused features, greedy argmax over the
// vocabulary and (optionally) pointer copy scores.

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vqakit/attention.hpp"
#include "vqakit/fusion.hpp"
#include "vqakit/matrix.hpp"

namespace vqakit {

struct DecoderLayerWeights {
  MhaWeights self_attn, cross_attn;
};

struct DecoderWeights {
  Matrix embedding;  // v x dim
  std::vector<DecoderLayerWeights> layers;
  LinearWeights vocab;  // v x dim, 1 x v
  std::optional<PointerWeights> pointer;

  std::size_t vocab_size() const { return embedding.rows(); }
};

template <class Rng>
DecoderWeights make_decoder_weights(std::size_t vocab, std::size_t dim, std::size_t layers, bool with_pointer,
                                    Rng& rng) {
  DecoderWeights w;
  w.embedding = Matrix::uniform(vocab, dim, rng);
  for (std::size_t i = 0; i < layers; ++i) {
    DecoderLayerWeights l;
    l.self_attn = make_mha_weights(dim, rng);
    l.cross_attn = make_mha_weights(dim, rng);
    w.layers.push_back(std::move(l));
  }
  w.vocab = {Matrix::uniform(vocab, dim, rng), Matrix::uniform(1, vocab, rng)};
  if (with_pointer) w.pointer = make_pointer_weights(dim, rng);
  return w;
}

struct DecodeOptions {
  std::size_t max_len = 1;
  std::size_t bos = 0;
  std::size_t eos = 1;
};

struct DecodeState {
  std::vector<std::size_t> emitted;  // o_0 .. o_{t-1}
  std::size_t step = 0;
};

inline Matrix sinusoidal_positions(std::size_t length, std::size_t dim) {
  Matrix pe(length, dim);
  for (std::size_t pos = 0; pos < length; ++pos)
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      pe(pos, i) = i % 2 == 0 ? std::sin(static_cast<double>(pos) * rate) : std::cos(static_cast<double>(pos) * rate);
    }
  return pe;
}

// Scores for the next token given the prefix [bos, o_0 .. o_{t-1}]:
// 1 x v vocab scores and 1 x n copy scores.
inline std::pair<Matrix, Matrix> decoder_step_scores(const DecodeState& state, const Matrix& fused,
                                                     const Matrix& scene, const DecoderWeights& w,
                                                     const AttentionConfig& cfg, std::size_t bos) {
  const std::size_t dim = cfg.model_dim, v = w.vocab_size();
  const std::size_t len = state.emitted.size() + 1;
  Matrix x(len, dim);
  for (std::size_t t = 0; t < len; ++t) {
    const std::size_t tok = t == 0 ? bos : state.emitted[t - 1];
    const auto src = tok < v ? w.embedding.row(tok) : scene.row(tok - v);
    std::copy(src.begin(), src.end(), x.row(t).begin());
  }
  x += sinusoidal_positions(len, dim);
  const AttentionMask causal = AttentionMask::causal(len);
  for (const auto& layer : w.layers) {
    x += multi_head_attention(x, x, x, cfg, layer.self_attn, &causal).output;
    x += multi_head_attention(x, fused, fused, cfg, layer.cross_attn).output;
  }
  const Matrix h = slice_rows(x, len - 1, len);
  Matrix vocab_scores = linear(h, w.vocab);
  Matrix copy_scores = w.pointer ? pointer_scores(h, scene, *w.pointer) : Matrix(1, 0);
  return {std::move(vocab_scores), std::move(copy_scores)};
}

// Greedy decoding until eos (not emitted) or max_len tokens.
inline std::vector<std::size_t> greedy_decode(const Matrix& fused, const DecoderWeights& w,
                                              const AttentionConfig& cfg, const DecodeOptions& opt,
                                              const Matrix& scene = Matrix()) {
  cfg.validate();
  const std::size_t dim = cfg.model_dim, v = w.vocab_size();
  if (opt.max_len == 0) throw std::invalid_argument("max_len must be >= 1");
  require_shape(w.embedding, v, dim, "decoder embedding");
  require_shape(w.vocab.weight, v, dim, "vocab projection");
  require_shape(w.vocab.bias, 1, v, "vocab bias");
  if (opt.bos >= v || opt.eos >= v) throw std::invalid_argument("bos/eos outside the vocabulary");
  if (fused.cols() != dim) throw ShapeError("fused features must have model_dim columns, got " + fused.shape());
  const Matrix scene_feats = scene.cols() == 0 ? Matrix(0, dim) : scene;
  if (scene_feats.cols() != dim) throw ShapeError("scene-text features must have model_dim columns");
  const Matrix copy_pool = w.pointer ? scene_feats : Matrix(0, dim);

  DecodeState state;
  while (state.step < opt.max_len) {
    const auto [vocab_scores, copy_scores] = decoder_step_scores(state, fused, copy_pool, w, cfg, opt.bos);
    const std::size_t next = output_select(vocab_scores, copy_scores).front();
    if (next == opt.eos) break;
    state.emitted.push_back(next);
    ++state.step;
  }
  return state.emitted;
}

// Inverse-square-root schedule with linear warmup.
inline double lr_schedule(std::size_t step, std::size_t model_dim, std::size_t warmup_steps) {
  if (step == 0) throw std::invalid_argument("lr_schedule: step must be >= 1");
  if (model_dim == 0 || warmup_steps == 0) throw std::invalid_argument("lr_schedule: arguments must be positive");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup_steps);
  return std::pow(static_cast<double>(model_dim), -0.5) * std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

}  // namespace vqakit
