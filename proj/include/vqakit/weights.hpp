#pragma once

// Named access to kernel weight sets so they can be loaded from, or saved
// to, a bundle of named matrices.

#include <functional>
#include <set>
#include <string>

#include "vqakit/attention.hpp"
#include "vqakit/decoder.hpp"
#include "vqakit/error.hpp"
#include "vqakit/fusion.hpp"
#include "vqakit/io.hpp"
#include "vqakit/matrix.hpp"

namespace vqakit {

using WeightVisitor = std::function<void(const std::string& name, Matrix& m)>;

inline void visit_weights(const std::string& prefix, LinearWeights& w, const WeightVisitor& f) {
  f(prefix + ".weight", w.weight);
  f(prefix + ".bias", w.bias);
}

inline void visit_weights(const std::string& prefix, MhaWeights& w, const WeightVisitor& f) {
  visit_weights(prefix + ".q", w.q, f);
  visit_weights(prefix + ".k", w.k, f);
  visit_weights(prefix + ".v", w.v, f);
  visit_weights(prefix + ".o", w.o, f);
}

inline void visit_weights(const std::string& prefix, StackedAttentionWeights& w, const WeightVisitor& f) {
  f(prefix + ".image_proj", w.image_proj);
  f(prefix + ".question_proj", w.question_proj);
  f(prefix + ".glimpse_mix", w.glimpse_mix);
}

inline void visit_weights(const std::string& prefix, GuidedAttentionWeights& w, const WeightVisitor& f) {
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    const std::string p = prefix + "." + std::to_string(i);
    visit_weights(p + ".image_self", w.layers[i].image_self, f);
    visit_weights(p + ".question_self", w.layers[i].question_self, f);
    visit_weights(p + ".guided", w.layers[i].guided, f);
  }
}

inline void visit_weights(const std::string& prefix, ContextSpatialWeights& w, const WeightVisitor& f) {
  visit_weights(prefix + ".question_self", w.question_self, f);
  visit_weights(prefix + ".context", w.context, f);
  visit_weights(prefix + ".spatial", w.spatial, f);
  visit_weights(prefix + ".pool", w.pool, f);
  f(prefix + ".pool_query", w.pool_query);
}

inline void visit_weights(const std::string& prefix, PointerWeights& w, const WeightVisitor& f) {
  visit_weights(prefix + ".hidden", w.hidden, f);
  visit_weights(prefix + ".scene", w.scene, f);
}

inline void visit_weights(const std::string& prefix, DecoderWeights& w, const WeightVisitor& f) {
  f(prefix + ".embedding", w.embedding);
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    const std::string p = prefix + "." + std::to_string(i);
    visit_weights(p + ".self_attn", w.layers[i].self_attn, f);
    visit_weights(p + ".cross_attn", w.layers[i].cross_attn, f);
  }
  visit_weights(prefix + ".vocab", w.vocab, f);
  if (w.pointer) visit_weights(prefix + ".pointer", *w.pointer, f);
}

// Replaces every weight named in the bundle; the existing matrix fixes the
// expected shape. Returns the names that were taken from the bundle.
template <class W>
std::set<std::string> apply_bundle(const WeightBundle& bundle, const std::string& prefix, W& weights) {
  std::set<std::string> used;
  visit_weights(prefix, weights, [&](const std::string& name, Matrix& m) {
    auto it = bundle.find(name);
    if (it == bundle.end()) return;
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols())
      throw ShapeError("weight '" + name + "' has shape " + it->second.shape() + ", expected " + m.shape());
    m = it->second;
    used.insert(name);
  });
  return used;
}

template <class W>
void export_bundle(WeightBundle& bundle, const std::string& prefix, W& weights) {
  visit_weights(prefix, weights, [&](const std::string& name, Matrix& m) { bundle[name] = m; });
}

}  // namespace vqakit
