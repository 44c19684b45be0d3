#pragma once

#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "vqakit/metrics.hpp"
#include "vqakit/text.hpp"

namespace testutil {

inline vqakit::TokenSeq seq(const std::string& s) { return vqakit::tokenize(s); }

inline vqakit::CorpusItem item(const std::string& hypo, std::vector<std::string> refs) {
  vqakit::CorpusItem it;
  it.hypothesis = seq(hypo);
  for (const auto& r : refs) it.references.push_back(seq(r));
  return it;
}

inline std::vector<oracle::Item> to_oracle(const vqakit::Corpus& c) {
  std::vector<oracle::Item> out;
  for (const auto& it : c) {
    oracle::Item o{it.hypothesis.tokens, {}};
    for (const auto& r : it.references) o.refs.push_back(r.tokens);
    out.push_back(o);
  }
  return out;
}

inline vqakit::TokenSeq random_seq(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len,
                                   std::size_t alphabet, const std::string& prefix = "w") {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len), sym(0, alphabet - 1);
  vqakit::TokenSeq s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) s.tokens.push_back(prefix + std::to_string(sym(rng)));
  return s;
}

inline vqakit::Corpus random_corpus(std::mt19937_64& rng, std::size_t items, std::size_t alphabet = 5,
                                    std::size_t max_refs = 2) {
  std::uniform_int_distribution<std::size_t> nref(1, max_refs);
  vqakit::Corpus c;
  for (std::size_t i = 0; i < items; ++i) {
    vqakit::CorpusItem it;
    it.item_id = std::to_string(i);
    it.hypothesis = random_seq(rng, 0, 7, alphabet);
    const std::size_t r = nref(rng);
    for (std::size_t k = 0; k < r; ++k) it.references.push_back(random_seq(rng, 1, 7, alphabet));
    c.push_back(it);
  }
  return c;
}

}  // namespace testutil
