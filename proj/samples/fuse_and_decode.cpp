// Random features through the context/spatial fusion, then greedy decoding
// with a pointer over the scene-text rows.

#include <cstdio>
#include <random>

#include "vqakit/decoder.hpp"
#include "vqakit/fusion.hpp"

int main() {
  using namespace vqakit;
  std::mt19937_64 rng(7);
  const AttentionConfig cfg{4, 16, 2};
  const std::size_t regions = 6, scene = 3, question = 5, vocab = 20;

  const Matrix image = Matrix::uniform(regions, cfg.model_dim, rng, -1, 1);
  const Matrix tokens = Matrix::uniform(scene, cfg.model_dim, rng, -1, 1);
  const Matrix q = Matrix::uniform(question, cfg.model_dim, rng, -1, 1);

  const auto fw = make_context_spatial_weights(cfg.model_dim, regions, scene, rng);
  const auto fused = mlpag_fuse(image, tokens, q, cfg, fw);
  std::printf("fused %s (pooled: %s)\n", fused.fused.shape().c_str(), fused.pooled ? "yes" : "no");

  const auto dw = make_decoder_weights(vocab, cfg.model_dim, 2, true, rng);
  const auto out = greedy_decode(fused.fused, dw, cfg, {.max_len = 8, .bos = 0, .eos = 1}, tokens);
  for (std::size_t id : out) {
    if (id < vocab) std::printf("vocab:%zu ", id);
    else std::printf("copy:%zu ", id - vocab);
  }
  std::printf("\n");

  for (std::size_t step : {1u, 2000u, 4000u, 8000u})
    std::printf("lr(%zu) = %.3e\n", step, lr_schedule(step, 512, 4000));
}
