#pragma once

// Shape, invariant and finite-difference gradient checks for every fusion
// and decoding kernel, over a run of seeds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqakit/attention.hpp"
#include "vqakit/decoder.hpp"
#include "vqakit/fusion.hpp"
#include "vqakit/gradcheck.hpp"
#include "vqakit/io.hpp"
#include "vqakit/matrix.hpp"
#include "vqakit/weights.hpp"

namespace vqakit {

struct SelfCheckOptions {
  std::uint64_t seed = 0;
  std::size_t seeds = 10;
  double grad_tolerance = 1e-4;
  double row_sum_tolerance = 1e-9;
  WeightBundle bundle;  // overrides seeded weights by name
};

struct KernelCheck {
  std::string name;
  std::map<std::string, bool> flags;       // AND over seeds
  std::map<std::string, double> maxima;    // max over seeds
  std::map<std::string, double> limits;    // pass iff maxima[k] < limits[k]

  void flag(const std::string& key, bool ok) {
    auto [it, fresh] = flags.emplace(key, ok);
    if (!fresh) it->second = it->second && ok;
  }
  void bound(const std::string& key, double value, double limit) {
    auto [it, fresh] = maxima.emplace(key, value);
    if (!fresh) it->second = std::max(it->second, value);
    limits[key] = limit;
  }
  bool passed() const {
    for (const auto& [k, ok] : flags)
      if (!ok) return false;
    for (const auto& [k, v] : maxima)
      if (!(v < limits.at(k))) return false;
    return true;
  }
};

struct SelfCheckResult {
  std::vector<KernelCheck> kernels;
  std::size_t bundle_weights_used = 0;

  bool passed() const {
    return std::all_of(kernels.begin(), kernels.end(), [](const KernelCheck& k) { return k.passed(); });
  }
};

namespace detail {

inline double row_sum_deviation(const Matrix& probs) {
  double worst = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto r = probs.row(i);
    worst = std::max(worst, std::abs(std::accumulate(r.begin(), r.end(), 0.0) - 1.0));
  }
  return worst;
}

struct SelfCheckDims {
  static constexpr std::size_t dim = 8, heads = 2, regions = 5, question = 4, scene = 3;
  static constexpr std::size_t image_dim = 6, question_dim = 5, glimpses = 2, layers = 2, vocab = 7;
};

}  // namespace detail

inline SelfCheckResult run_selfcheck(const SelfCheckOptions& opt) {
  using D = detail::SelfCheckDims;
  const AttentionConfig cfg{D::heads, D::dim, D::glimpses};
  std::map<std::string, KernelCheck> checks;
  std::vector<std::string> order = {"multi_head_attention", "stacked_attention_sum", "stacked_attention_concat",
                                    "guided_attention",     "mlpag_pooled",          "mlpag_aligned",
                                    "pointer_scores",       "output_select",         "greedy_decode",
                                    "lr_schedule"};
  for (const auto& n : order) checks[n].name = n;
  std::set<std::string> used;
  auto take = [&](const std::string& prefix, auto& w) {
    const auto u = apply_bundle(opt.bundle, prefix, w);
    used.insert(u.begin(), u.end());
  };

  for (std::size_t k = 0; k < opt.seeds; ++k) {
    std::mt19937_64 rng(opt.seed + k);
    auto input = [&](std::size_t r, std::size_t c) { return Matrix::uniform(r, c, rng, -1.0, 1.0); };

    // multi-head attention, with a random mask that leaves each row one key
    {
      auto& kc = checks["multi_head_attention"];
      auto w = make_mha_weights(D::dim, rng);
      take("mha", w);
      AttentionMask mask(D::question, D::regions, false);
      std::bernoulli_distribution coin(0.5);
      for (std::size_t i = 0; i < D::question; ++i) {
        mask.set(i, i % D::regions, true);
        for (std::size_t j = 0; j < D::regions; ++j)
          if (coin(rng)) mask.set(i, j, true);
      }
      const Matrix q = input(D::question, D::dim), kk = input(D::regions, D::dim), v = input(D::regions, D::dim);
      const auto plain = multi_head_attention(q, kk, v, cfg, w);
      const auto masked = multi_head_attention(q, kk, v, cfg, w, &mask);
      kc.flag("shape", plain.output.rows() == D::question && plain.output.cols() == D::dim);
      double dev = 0.0;
      bool zeros = true;
      for (std::size_t h = 0; h < D::heads; ++h) {
        dev = std::max({dev, detail::row_sum_deviation(plain.cache.probs[h]),
                        detail::row_sum_deviation(masked.cache.probs[h])});
        for (std::size_t i = 0; i < D::question; ++i)
          for (std::size_t j = 0; j < D::regions; ++j)
            if (!mask.allowed(i, j) && masked.cache.probs[h](i, j) != 0.0) zeros = false;
      }
      kc.bound("row_sum_deviation", dev, opt.row_sum_tolerance);
      kc.flag("masked_exact_zero", zeros);
      const Matrix cot = input(D::question, D::dim);
      const auto g = grad_check(
          [&](const std::vector<Matrix>& in) { return multi_head_attention(in[0], in[1], in[2], cfg, w, &mask).output; },
          [&](const std::vector<Matrix>& in, const Matrix& c) {
            const auto f = multi_head_attention(in[0], in[1], in[2], cfg, w, &mask);
            const auto gr = mha_backward(f.cache, cfg, w, c);
            return std::vector<Matrix>{gr.query, gr.key, gr.value};
          },
          {q, kk, v}, cot);
      kc.bound("grad_max_rel_error", g.max_rel_error, opt.grad_tolerance);
    }

    // stacked attention, both glimpse modes
    {
      auto w = make_stacked_attention_weights(D::glimpses, D::image_dim, D::question_dim, rng);
      take("stacked", w);
      const Matrix img = input(D::regions, D::image_dim), q = input(1, D::question_dim);
      for (auto mode : {GlimpseMode::sum, GlimpseMode::concat}) {
        auto& kc = checks[mode == GlimpseMode::sum ? "stacked_attention_sum" : "stacked_attention_concat"];
        const auto f = stacked_attention_fuse(img, q, w, mode);
        const std::size_t width = mode == GlimpseMode::sum ? D::image_dim : D::glimpses * D::image_dim;
        kc.flag("shape", f.fused.rows() == 1 && f.fused.cols() == width);
        kc.bound("row_sum_deviation", detail::row_sum_deviation(transpose(f.attention)), opt.row_sum_tolerance);
        const Matrix cot = input(1, width);
        const auto g = grad_check(
            [&](const std::vector<Matrix>& in) { return stacked_attention_fuse(in[0], in[1], w, mode).fused; },
            [&](const std::vector<Matrix>& in, const Matrix& c) {
              const auto fw = stacked_attention_fuse(in[0], in[1], w, mode);
              const auto gr = stacked_attention_backward(in[0], in[1], w, fw, c, mode);
              return std::vector<Matrix>{gr.image, gr.question};
            },
            {img, q}, cot);
        kc.bound("grad_max_rel_error", g.max_rel_error, opt.grad_tolerance);
      }
    }

    // question-guided attention
    {
      auto& kc = checks["guided_attention"];
      auto w = make_guided_attention_weights(D::dim, D::layers, rng);
      take("guided", w);
      const Matrix img = input(D::regions, D::dim), q = input(D::question, D::dim);
      const auto f = guided_attention_fuse(img, q, cfg, w);
      kc.flag("shape", f.fused.rows() == D::regions + D::question && f.fused.cols() == D::dim);
      double dev = 0.0;
      for (const auto& c : f.caches)
        for (const auto* mc : {&c.image_self, &c.question_self, &c.guided})
          for (const auto& p : mc->probs) dev = std::max(dev, detail::row_sum_deviation(p));
      kc.bound("row_sum_deviation", dev, opt.row_sum_tolerance);
      const Matrix cot = input(f.fused.rows(), D::dim);
      const auto g = grad_check(
          [&](const std::vector<Matrix>& in) { return guided_attention_fuse(in[0], in[1], cfg, w).fused; },
          [&](const std::vector<Matrix>& in, const Matrix& c) {
            const auto gr = guided_attention_backward(guided_attention_fuse(in[0], in[1], cfg, w), cfg, w, c);
            return std::vector<Matrix>{gr.image, gr.question};
          },
          {img, q}, cot);
      kc.bound("grad_max_rel_error", g.max_rel_error, opt.grad_tolerance);
    }

    // context / spatial fusion with and without pooling
    for (const std::size_t n : {D::scene, D::regions}) {
      const bool aligned = n == D::regions;
      auto& kc = checks[aligned ? "mlpag_aligned" : "mlpag_pooled"];
      auto w = make_context_spatial_weights(D::dim, D::regions, n, rng);
      take(aligned ? "mlpag_aligned" : "mlpag", w);
      const Matrix img = input(D::regions, D::dim), sc = input(n, D::dim), q = input(D::question, D::dim);
      const auto f = mlpag_fuse(img, sc, q, cfg, w);
      kc.flag("shape", f.fused.rows() == fused_rows(D::regions, n) && f.fused.cols() == D::dim);
      kc.flag("pooled_iff_counts_differ", f.pooled != aligned);
      const Matrix cot = input(f.fused.rows(), D::dim);
      const auto g = grad_check(
          [&](const std::vector<Matrix>& in) { return mlpag_fuse(in[0], in[1], in[2], cfg, w).fused; },
          [&](const std::vector<Matrix>& in, const Matrix& c) {
            const auto gr = mlpag_backward(mlpag_fuse(in[0], in[1], in[2], cfg, w), cfg, w, c);
            return std::vector<Matrix>{gr.image, gr.scene, gr.question};
          },
          {img, sc, q}, cot);
      kc.bound("grad_max_rel_error", g.max_rel_error, opt.grad_tolerance);
    }

    // pointer scores
    {
      auto& kc = checks["pointer_scores"];
      auto w = make_pointer_weights(D::dim, rng);
      take("pointer", w);
      const Matrix h = input(2, D::dim), sc = input(D::scene, D::dim);
      const Matrix s = pointer_scores(h, sc, w);
      kc.flag("shape", s.rows() == 2 && s.cols() == D::scene);
      std::vector<std::size_t> perm(D::scene);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      Matrix permuted(D::scene, D::dim);
      for (std::size_t i = 0; i < D::scene; ++i)
        std::copy(sc.row(perm[i]).begin(), sc.row(perm[i]).end(), permuted.row(i).begin());
      const Matrix sp = pointer_scores(h, permuted, w);
      bool equivariant = true;
      for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t i = 0; i < D::scene; ++i) equivariant = equivariant && sp(r, i) == s(r, perm[i]);
      kc.flag("permutation_equivariance", equivariant);
      const Matrix cot = input(2, D::scene);
      const auto g = grad_check(
          [&](const std::vector<Matrix>& in) { return pointer_scores(in[0], in[1], w); },
          [&](const std::vector<Matrix>& in, const Matrix& c) {
            const auto gr = pointer_scores_backward(in[0], in[1], w, c);
            return std::vector<Matrix>{gr.hidden, gr.scene};
          },
          {h, sc}, cot);
      kc.bound("grad_max_rel_error", g.max_rel_error, opt.grad_tolerance);
    }

    // output selection
    {
      auto& kc = checks["output_select"];
      const Matrix vs = input(3, D::vocab), cs = input(3, D::scene);
      const auto base = output_select(vs, cs);
      std::uniform_real_distribution<double> shift(-100.0, 100.0);
      Matrix vs2 = vs, cs2 = cs;
      for (std::size_t r = 0; r < 3; ++r) {
        const double c = shift(rng);
        for (double& x : vs2.row(r)) x += c;
        for (double& x : cs2.row(r)) x += c;
      }
      // near-ties may flip under rounding
      bool invariant = true, in_range = true;
      const auto shifted = output_select(vs2, cs2);
      for (std::size_t r = 0; r < 3; ++r) {
        in_range = in_range && base[r] < D::vocab + D::scene;
        std::vector<double> row(vs.row(r).begin(), vs.row(r).end());
        row.insert(row.end(), cs.row(r).begin(), cs.row(r).end());
        std::sort(row.begin(), row.end(), std::greater<>());
        if (row[0] - row[1] > 1e-9) invariant = invariant && shifted[r] == base[r];
      }
      kc.flag("shift_invariance", invariant);
      kc.flag("index_range", in_range);
    }

    // greedy decoding
    {
      auto& kc = checks["greedy_decode"];
      auto w = make_decoder_weights(D::vocab, D::dim, D::layers, true, rng);
      take("decoder", w);
      const Matrix fused = input(D::regions, D::dim), sc = input(D::scene, D::dim);
      const DecodeOptions dopt{6, 0, 1};
      const auto a = greedy_decode(fused, w, cfg, dopt, sc);
      const auto b = greedy_decode(fused, w, cfg, dopt, sc);
      kc.flag("deterministic", a == b);
      kc.flag("length_bound", a.size() <= dopt.max_len);
      kc.flag("index_range", std::all_of(a.begin(), a.end(), [](std::size_t t) { return t < D::vocab + D::scene; }));
      kc.flag("no_eos_emitted", std::find(a.begin(), a.end(), dopt.eos) == a.end());
    }

    // learning-rate schedule: both branches agree at the warmup step
    {
      auto& kc = checks["lr_schedule"];
      std::uniform_int_distribution<std::size_t> wd(1, 10000);
      const std::size_t warmup = wd(rng), dim = 512;
      const double s = static_cast<double>(warmup);
      const double a = std::pow(static_cast<double>(dim), -0.5) * std::pow(s, -0.5);
      const double b = std::pow(static_cast<double>(dim), -0.5) * s * std::pow(s, -1.5);
      const double lr = lr_schedule(warmup, dim, warmup);
      kc.bound("branch_gap", std::max(std::abs(a - lr), std::abs(b - lr)), 1e-15);
      kc.flag("positive", lr > 0.0);
    }
  }

  std::vector<std::string> unknown;
  for (const auto& [name, m] : opt.bundle)
    if (!used.count(name)) unknown.push_back(name);
  if (!unknown.empty()) {
    std::string msg = "weight bundle holds unknown weights:";
    for (const auto& n : unknown) msg += " " + n;
    throw InputError(msg);
  }

  SelfCheckResult res;
  res.bundle_weights_used = used.size();
  for (const auto& n : order) res.kernels.push_back(checks[n]);
  return res;
}

// Seeded weights for every self-check kernel under their bundle names.
inline WeightBundle selfcheck_bundle(std::uint64_t seed) {
  using D = detail::SelfCheckDims;
  std::mt19937_64 rng(seed);
  WeightBundle b;
  auto mha = make_mha_weights(D::dim, rng);
  export_bundle(b, "mha", mha);
  auto st = make_stacked_attention_weights(D::glimpses, D::image_dim, D::question_dim, rng);
  export_bundle(b, "stacked", st);
  auto ga = make_guided_attention_weights(D::dim, D::layers, rng);
  export_bundle(b, "guided", ga);
  auto cs = make_context_spatial_weights(D::dim, D::regions, D::scene, rng);
  export_bundle(b, "mlpag", cs);
  auto ca = make_context_spatial_weights(D::dim, D::regions, D::regions, rng);
  export_bundle(b, "mlpag_aligned", ca);
  auto pw = make_pointer_weights(D::dim, rng);
  export_bundle(b, "pointer", pw);
  auto dw = make_decoder_weights(D::vocab, D::dim, D::layers, true, rng);
  export_bundle(b, "decoder", dw);
  return b;
}

}  // namespace vqakit
