#pragma once

// Forward and input-gradient kernels for the three fusion schemes:
//   stacked attention (grid features x pooled question vector),
//   question-guided attention (self-attention on both modalities, image
//   queries question, rows concatenated),
//   context/spatial attention over a self-attended question with an
//   element-wise sum of the two attended streams,
// plus the dynamic pointer scores and the vocab-or-copy output selection.

#include <cstddef>
#include <string>
#include <vector>

#include "vqakit/attention.hpp"
#include "vqakit/matrix.hpp"

namespace vqakit {

// ---------------------------------------------------------------------------
// Stacked attention

enum class GlimpseMode { sum, concat };

struct StackedAttentionWeights {
  Matrix image_proj;     // D x d_I
  Matrix question_proj;  // D x d_Q
  Matrix glimpse_mix;    // D x D
};

template <class Rng>
StackedAttentionWeights make_stacked_attention_weights(std::size_t glimpses, std::size_t image_dim,
                                                       std::size_t question_dim, Rng& rng) {
  return {Matrix::uniform(glimpses, image_dim, rng), Matrix::uniform(glimpses, question_dim, rng),
          Matrix::uniform(glimpses, glimpses, rng)};
}

struct StackedAttentionResult {
  Matrix fused;      // 1 x d_I (sum) or 1 x D*d_I (concat)
  Matrix attention;  // s x D, each column a softmax over the s locations
};

struct StackedAttentionGrads {
  Matrix image, question;
};

namespace detail {

inline void check_stacked(const Matrix& image, const Matrix& question, const StackedAttentionWeights& w) {
  const std::size_t d = w.glimpse_mix.rows();
  if (image.rows() == 0) throw ShapeError("stacked attention needs at least one spatial location");
  if (question.rows() != 1) throw ShapeError("question vector must be 1 x d_Q, got " + question.shape());
  require_shape(w.glimpse_mix, d, d, "glimpse_mix");
  require_shape(w.image_proj, d, image.cols(), "image_proj");
  require_shape(w.question_proj, d, question.cols(), "question_proj");
}

}  // namespace detail

inline StackedAttentionResult stacked_attention_fuse(const Matrix& image, const Matrix& question,
                                                     const StackedAttentionWeights& w,
                                                     GlimpseMode mode = GlimpseMode::sum) {
  detail::check_stacked(image, question, w);
  const std::size_t s = image.rows(), di = image.cols(), glimpses = w.glimpse_mix.rows();
  // question projection is broadcast over every location
  const Matrix hidden = add_row(matmul_bt(image, w.image_proj), matmul_bt(question, w.question_proj));
  const Matrix logits = matmul_bt(hidden, w.glimpse_mix);  // s x D
  StackedAttentionResult res;
  res.attention = transpose(softmax_rows(transpose(logits)));
  if (mode == GlimpseMode::sum) {
    res.fused = Matrix(1, di);
    for (std::size_t r = 0; r < s; ++r) {
      double weight = 0.0;
      for (std::size_t g = 0; g < glimpses; ++g) weight += res.attention(r, g);
      for (std::size_t c = 0; c < di; ++c) res.fused(0, c) += weight * image(r, c);
    }
  } else {
    res.fused = Matrix(1, glimpses * di);
    for (std::size_t g = 0; g < glimpses; ++g)
      for (std::size_t r = 0; r < s; ++r)
        for (std::size_t c = 0; c < di; ++c) res.fused(0, g * di + c) += res.attention(r, g) * image(r, c);
  }
  return res;
}

inline StackedAttentionGrads stacked_attention_backward(const Matrix& image, const Matrix& question,
                                                        const StackedAttentionWeights& w,
                                                        const StackedAttentionResult& fwd,
                                                        const Matrix& d_fused,
                                                        GlimpseMode mode = GlimpseMode::sum) {
  (void)question;
  const std::size_t s = image.rows(), di = image.cols(), glimpses = w.glimpse_mix.rows();
  const Matrix& a = fwd.attention;
  Matrix d_image(s, di), d_attn(s, glimpses);
  for (std::size_t r = 0; r < s; ++r)
    for (std::size_t g = 0; g < glimpses; ++g) {
      const std::size_t off = mode == GlimpseMode::sum ? 0 : g * di;
      double dot = 0.0;
      for (std::size_t c = 0; c < di; ++c) {
        dot += image(r, c) * d_fused(0, off + c);
        d_image(r, c) += a(r, g) * d_fused(0, off + c);
      }
      d_attn(r, g) = dot;
    }
  const Matrix d_logits = transpose(softmax_rows_backward(transpose(a), transpose(d_attn)));
  const Matrix d_hidden = matmul(d_logits, w.glimpse_mix);
  d_image += matmul(d_hidden, w.image_proj);
  const Matrix d_question = matmul(column_sums(d_hidden), w.question_proj);
  return {std::move(d_image), d_question};
}

// ---------------------------------------------------------------------------
// Question-guided attention

struct GuidedLayerWeights {
  MhaWeights image_self, question_self, guided;
};

struct GuidedAttentionWeights {
  std::vector<GuidedLayerWeights> layers;
};

template <class Rng>
GuidedAttentionWeights make_guided_attention_weights(std::size_t dim, std::size_t layers, Rng& rng) {
  GuidedAttentionWeights w;
  for (std::size_t i = 0; i < layers; ++i) {
    GuidedLayerWeights l;
    l.image_self = make_mha_weights(dim, rng);
    l.question_self = make_mha_weights(dim, rng);
    l.guided = make_mha_weights(dim, rng);
    w.layers.push_back(std::move(l));
  }
  return w;
}

struct GuidedAttentionResult {
  Matrix fused;  // (s + l) x dim, image rows first
  std::size_t image_rows = 0;
  struct LayerCache {
    MhaCache image_self, question_self, guided;
  };
  std::vector<LayerCache> caches;
};

struct FusionGrads {
  Matrix image, question, scene;
};

inline GuidedAttentionResult guided_attention_fuse(const Matrix& image, const Matrix& question,
                                                   const AttentionConfig& cfg,
                                                   const GuidedAttentionWeights& w) {
  cfg.validate();
  if (image.cols() != cfg.model_dim || question.cols() != cfg.model_dim)
    throw ShapeError("guided attention inputs must be projected to model_dim " +
                     std::to_string(cfg.model_dim) + " (image " + image.shape() + ", question " +
                     question.shape() + ")");
  if (question.rows() == 0) throw ShapeError("guided attention needs at least one question token");
  if (w.layers.empty()) throw ShapeError("guided attention needs at least one layer");
  GuidedAttentionResult res;
  Matrix img = image, q = question;
  for (const auto& layer : w.layers) {
    auto si = multi_head_attention(img, img, img, cfg, layer.image_self);
    auto sq = multi_head_attention(q, q, q, cfg, layer.question_self);
    auto ga = multi_head_attention(si.output, sq.output, sq.output, cfg, layer.guided);
    img = std::move(ga.output);
    q = std::move(sq.output);
    res.caches.push_back({std::move(si.cache), std::move(sq.cache), std::move(ga.cache)});
  }
  res.image_rows = img.rows();
  res.fused = concat_rows(img, q);
  return res;
}

inline FusionGrads guided_attention_backward(const GuidedAttentionResult& fwd, const AttentionConfig& cfg,
                                             const GuidedAttentionWeights& w, const Matrix& d_fused) {
  Matrix d_img = slice_rows(d_fused, 0, fwd.image_rows);
  Matrix d_q = slice_rows(d_fused, fwd.image_rows, d_fused.rows());
  for (std::size_t li = w.layers.size(); li-- > 0;) {
    const auto& layer = w.layers[li];
    const auto& c = fwd.caches[li];
    const auto ga = mha_backward(c.guided, cfg, layer.guided, d_img);
    Matrix d_sq = d_q + ga.key + ga.value;
    const auto sq = mha_backward(c.question_self, cfg, layer.question_self, d_sq);
    const auto si = mha_backward(c.image_self, cfg, layer.image_self, ga.query);
    d_img = si.query + si.key + si.value;
    d_q = sq.query + sq.key + sq.value;
  }
  return {std::move(d_img), std::move(d_q), Matrix()};
}

// ---------------------------------------------------------------------------
// Context / spatial attention with element-wise sum

struct ContextSpatialWeights {
  MhaWeights question_self, context, spatial, pool;
  Matrix pool_query;  // q x dim, used only when scene-text and region counts differ
};

// Rows of the fused output: s when counts agree or there is no scene text,
// otherwise min(n, s).
inline std::size_t fused_rows(std::size_t regions, std::size_t scene_texts) {
  if (scene_texts == regions || scene_texts == 0) return regions;
  return std::min(regions, scene_texts);
}

template <class Rng>
ContextSpatialWeights make_context_spatial_weights(std::size_t dim, std::size_t regions,
                                                   std::size_t scene_texts, Rng& rng) {
  ContextSpatialWeights w;
  w.question_self = make_mha_weights(dim, rng);
  w.context = make_mha_weights(dim, rng);
  w.spatial = make_mha_weights(dim, rng);
  w.pool = make_mha_weights(dim, rng);
  w.pool_query = Matrix::uniform(fused_rows(regions, scene_texts), dim, rng);
  return w;
}

struct ContextSpatialResult {
  Matrix fused;
  Matrix scene_attended;  // x_S' (n x dim)
  Matrix image_attended;  // x_I' (s x dim)
  bool pooled = false;
  MhaCache question_self, context, spatial, pool_scene, pool_image;
};

inline ContextSpatialResult mlpag_fuse(const Matrix& image, const Matrix& scene, const Matrix& question,
                                       const AttentionConfig& cfg, const ContextSpatialWeights& w) {
  cfg.validate();
  const std::size_t dim = cfg.model_dim;
  for (const auto* m : {&image, &scene, &question})
    if (m->cols() != dim)
      throw ShapeError("fusion inputs must have model_dim " + std::to_string(dim) + " columns, got " +
                       m->shape());
  if (question.rows() == 0) throw ShapeError("fusion needs at least one question token");
  ContextSpatialResult res;
  auto sq = multi_head_attention(question, question, question, cfg, w.question_self);
  const Matrix& aq = sq.output;
  auto ctx = multi_head_attention(scene, aq, aq, cfg, w.context);
  auto spa = multi_head_attention(image, aq, aq, cfg, w.spatial);
  res.question_self = std::move(sq.cache);
  res.context = std::move(ctx.cache);
  res.spatial = std::move(spa.cache);
  res.scene_attended = std::move(ctx.output);
  res.image_attended = std::move(spa.output);

  const std::size_t n = scene.rows(), s = image.rows();
  if (n == s) {
    res.fused = res.scene_attended + res.image_attended;
    return res;
  }
  require_shape(w.pool_query, fused_rows(s, n), dim, "pool_query");
  res.pooled = true;
  auto pi = multi_head_attention(w.pool_query, res.image_attended, res.image_attended, cfg, w.pool);
  res.fused = std::move(pi.output);
  res.pool_image = std::move(pi.cache);
  if (n > 0) {
    auto ps = multi_head_attention(w.pool_query, res.scene_attended, res.scene_attended, cfg, w.pool);
    res.fused += ps.output;
    res.pool_scene = std::move(ps.cache);
  }
  return res;
}

inline FusionGrads mlpag_backward(const ContextSpatialResult& fwd, const AttentionConfig& cfg,
                                  const ContextSpatialWeights& w, const Matrix& d_fused) {
  Matrix d_scene_att, d_image_att;
  if (!fwd.pooled) {
    d_scene_att = d_fused;
    d_image_att = d_fused;
  } else {
    const auto pi = mha_backward(fwd.pool_image, cfg, w.pool, d_fused);
    d_image_att = pi.key + pi.value;
    if (fwd.scene_attended.rows() > 0) {
      const auto ps = mha_backward(fwd.pool_scene, cfg, w.pool, d_fused);
      d_scene_att = ps.key + ps.value;
    } else {
      d_scene_att = Matrix(0, cfg.model_dim);
    }
  }
  const auto ctx = mha_backward(fwd.context, cfg, w.context, d_scene_att);
  const auto spa = mha_backward(fwd.spatial, cfg, w.spatial, d_image_att);
  const Matrix d_aq = ctx.key + ctx.value + spa.key + spa.value;
  const auto sq = mha_backward(fwd.question_self, cfg, w.question_self, d_aq);
  return {spa.query, sq.query + sq.key + sq.value, ctx.query};
}

// ---------------------------------------------------------------------------
// Dynamic pointer scores and output selection

struct PointerWeights {
  LinearWeights hidden;  // W_h, b_h
  LinearWeights scene;   // W_S, b_S
};

template <class Rng>
PointerWeights make_pointer_weights(std::size_t dim, Rng& rng) {
  return {{Matrix::uniform(dim, dim, rng), Matrix::uniform(1, dim, rng)},
          {Matrix::uniform(dim, dim, rng), Matrix::uniform(1, dim, rng)}};
}

// l x n copy scores between decoder states and scene-text features.
inline Matrix pointer_scores(const Matrix& hidden, const Matrix& scene, const PointerWeights& w) {
  if (hidden.cols() != scene.cols() && scene.rows() > 0)
    throw ShapeError("pointer inputs differ in width: " + hidden.shape() + " vs " + scene.shape());
  const std::size_t dim = hidden.cols();
  require_shape(w.hidden.weight, dim, dim, "W_h");
  require_shape(w.hidden.bias, 1, dim, "b_h");
  require_shape(w.scene.weight, dim, dim, "W_S");
  require_shape(w.scene.bias, 1, dim, "b_S");
  if (scene.rows() == 0) return Matrix(hidden.rows(), 0);
  return matmul_bt(linear(hidden, w.hidden), linear(scene, w.scene));
}

struct PointerGrads {
  Matrix hidden, scene;
};

inline PointerGrads pointer_scores_backward(const Matrix& hidden, const Matrix& scene,
                                            const PointerWeights& w, const Matrix& d_scores) {
  if (scene.rows() == 0) return {Matrix(hidden.rows(), hidden.cols()), Matrix(0, hidden.cols())};
  const Matrix hp = linear(hidden, w.hidden), sp = linear(scene, w.scene);
  return {linear_backward(w.hidden, matmul(d_scores, sp)),
          linear_backward(w.scene, matmul_at(d_scores, hp))};
}

// Row-wise argmax over [vocab scores, copy scores]. Indices >= v copy
// scene-text token (index - v). Ties go to the lower index.
inline std::vector<std::size_t> output_select(const Matrix& vocab_scores, const Matrix& copy_scores) {
  if (vocab_scores.rows() != copy_scores.rows())
    throw ShapeError("output_select row mismatch: " + vocab_scores.shape() + " vs " + copy_scores.shape());
  const std::size_t v = vocab_scores.cols();
  if (v + copy_scores.cols() == 0) throw ShapeError("output_select over an empty score row");
  std::vector<std::size_t> out(vocab_scores.rows());
  for (std::size_t i = 0; i < vocab_scores.rows(); ++i) {
    std::size_t best = 0;
    double best_score = v ? vocab_scores(i, 0) : copy_scores(i, 0);
    for (std::size_t j = 1; j < v + copy_scores.cols(); ++j) {
      const double x = j < v ? vocab_scores(i, j) : copy_scores(i, j - v);
      if (x > best_score) {
        best_score = x;
        best = j;
      }
    }
    out[i] = best;
  }
  return out;
}

}  // namespace vqakit
