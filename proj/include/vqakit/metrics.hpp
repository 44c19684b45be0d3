#pragma once

// Corpus-level BLEU@1..N, ROUGE-L, METEOR (exact-match module) and CIDEr.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vqakit/error.hpp"
#include "vqakit/text.hpp"

namespace vqakit {

struct CorpusItem {
  std::string item_id;
  TokenSeq hypothesis;
  std::vector<TokenSeq> references;
};

using Corpus = std::vector<CorpusItem>;

enum class ChunkMode {
  standard,       // contiguous aligned runs
  per_match,  // chunk count = number of matched unigrams
};

struct MetricOptions {
  int max_n = 4;
  double beta = 1.2;
  bool cider_scale10 = false;
  std::vector<double> cider_weights;  // empty: uniform 1/max_n
  ChunkMode chunk_mode = ChunkMode::standard;
  std::size_t meteor_search_cap = 16;
};

struct MetricReport {
  std::vector<double> bleu;  // bleu[k-1] = BLEU@k
  double meteor = 0.0;
  double rouge_l = 0.0;
  double cider = 0.0;
  std::size_t item_count = 0;
};

namespace detail {

inline void require_corpus(const Corpus& corpus) {
  if (corpus.empty()) throw InputError("empty corpus");
  for (const auto& item : corpus)
    if (item.references.empty())
      throw InputError("item '" + item.item_id + "' has no references");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// BLEU

struct BleuStats {
  std::vector<long long> matched;  // clipped n-gram matches, index n-1
  std::vector<long long> total;    // hypothesis n-gram totals
  long long hyp_len = 0;
  long long ref_len = 0;
};

// Closest reference length; ties go to the shorter reference.
inline std::size_t effective_ref_length(std::size_t hyp_len, const std::vector<TokenSeq>& refs) {
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [&](std::size_t x) { return x > hyp_len ? x - hyp_len : hyp_len - x; };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  return best;
}

inline BleuStats bleu_stats(const Corpus& corpus, int max_n) {
  BleuStats st;
  st.matched.assign(static_cast<std::size_t>(max_n), 0);
  st.total.assign(static_cast<std::size_t>(max_n), 0);
  for (const auto& item : corpus) {
    st.hyp_len += static_cast<long long>(item.hypothesis.size());
    st.ref_len +=
        static_cast<long long>(effective_ref_length(item.hypothesis.size(), item.references));
    for (int n = 1; n <= max_n; ++n) {
      const auto hyp = ngrams(item.hypothesis, static_cast<std::size_t>(n));
      std::vector<NGramCounts> refs;
      refs.reserve(item.references.size());
      for (const auto& r : item.references) refs.push_back(ngrams(r, static_cast<std::size_t>(n)));
      st.matched[static_cast<std::size_t>(n - 1)] += clipped_counts(hyp, refs).total();
      st.total[static_cast<std::size_t>(n - 1)] += hyp.total();
    }
  }
  return st;
}

inline std::vector<double> bleu_from_stats(const BleuStats& st) {
  const std::size_t max_n = st.total.size();
  std::vector<double> scores(max_n, 0.0);
  if (st.hyp_len == 0) return scores;
  const double c = static_cast<double>(st.hyp_len);
  const double r = static_cast<double>(st.ref_len);
  const double log_bp = std::min(1.0 - r / c, 0.0);
  double log_sum = 0.0;
  for (std::size_t k = 1; k <= max_n; ++k) {
    const auto m = st.matched[k - 1];
    const auto t = st.total[k - 1];
    if (m == 0 || t == 0) {
      // every higher order includes this zero precision
      break;
    }
    log_sum += std::log(static_cast<double>(m) / static_cast<double>(t));
    scores[k - 1] = std::exp(log_bp + log_sum / static_cast<double>(k));
  }
  return scores;
}

inline std::vector<double> bleu(const Corpus& corpus, int max_n = 4) {
  detail::require_corpus(corpus);
  if (max_n < 1) throw std::invalid_argument("max_n must be >= 1");
  return bleu_from_stats(bleu_stats(corpus, max_n));
}

// ---------------------------------------------------------------------------
// ROUGE-L

inline std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline double rouge_l_pair(const TokenSeq& hypo, const TokenSeq& ref, double beta) {
  const auto lcs = lcs_length(hypo, ref);
  if (lcs == 0) return 0.0;
  const double recall = static_cast<double>(lcs) / static_cast<double>(ref.size());
  const double precision = static_cast<double>(lcs) / static_cast<double>(hypo.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * recall * precision / (recall + b2 * precision);
}

inline std::vector<double> rouge_l_items(const Corpus& corpus, double beta = 1.2) {
  detail::require_corpus(corpus);
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  std::vector<double> out;
  out.reserve(corpus.size());
  for (const auto& item : corpus) {
    double best = 0.0;
    for (const auto& r : item.references) best = std::max(best, rouge_l_pair(item.hypothesis, r, beta));
    out.push_back(best);
  }
  return out;
}

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double rouge_l(const Corpus& corpus, double beta = 1.2) {
  return mean(rouge_l_items(corpus, beta));
}

// ---------------------------------------------------------------------------
// METEOR

// (hypothesis index, reference index), sorted by hypothesis index.
using Alignment = std::vector<std::pair<std::size_t, std::size_t>>;

inline std::size_t count_crossings(const Alignment& a) {
  std::size_t crossings = 0;
  for (std::size_t x = 0; x < a.size(); ++x)
    for (std::size_t y = x + 1; y < a.size(); ++y)
      if ((a[x].first < a[y].first) != (a[x].second < a[y].second)) ++crossings;
  return crossings;
}

inline std::size_t count_chunks(const Alignment& a) {
  if (a.empty()) return 0;
  std::size_t chunks = 1;
  for (std::size_t k = 1; k < a.size(); ++k)
    if (a[k].first != a[k - 1].first + 1 || a[k].second != a[k - 1].second + 1) ++chunks;
  return chunks;
}

namespace detail {

inline Alignment greedy_align(const TokenSeq& hypo, const TokenSeq& ref) {
  Alignment out;
  std::vector<bool> used(ref.size(), false);
  for (std::size_t i = 0; i < hypo.size(); ++i)
    for (std::size_t j = 0; j < ref.size(); ++j)
      if (!used[j] && hypo[i] == ref[j]) {
        used[j] = true;
        out.emplace_back(i, j);
        break;
      }
  return out;
}

// Exhaustive search over one-to-one exact matchings. Hypothesis positions
// are visited left to right; the state is the set of reference positions
// already used, which also determines the crossings a new pair creates.
class AlignmentSearch {
 public:
  AlignmentSearch(const TokenSeq& hypo, const std::vector<std::size_t>& ref_positions,
                  const std::vector<std::vector<int>>& candidates)
      : hypo_size_(hypo.size()), ref_positions_(ref_positions), candidates_(candidates) {}

  Alignment run() {
    solve(0, 0);
    Alignment out;
    std::uint32_t mask = 0;
    for (std::size_t i = 0; i < hypo_size_; ++i) {
      const int choice = memo_.at(key(i, mask)).choice;
      if (choice >= 0) {
        out.emplace_back(i, ref_positions_[static_cast<std::size_t>(choice)]);
        mask |= 1u << choice;
      }
    }
    return out;
  }

 private:
  struct Best {
    int matched = 0;
    int crossings = 0;
    int choice = -1;  // compressed ref index, -1 = leave unmatched
  };

  static std::uint64_t key(std::size_t i, std::uint32_t mask) {
    return (static_cast<std::uint64_t>(mask) << 16) | static_cast<std::uint64_t>(i);
  }

  static bool better(int m1, int c1, int m2, int c2) {
    return m1 > m2 || (m1 == m2 && c1 < c2);
  }

  Best solve(std::size_t i, std::uint32_t mask) {
    if (i == hypo_size_) return {};
    const auto k = key(i, mask);
    if (auto it = memo_.find(k); it != memo_.end()) return it->second;
    Best best;
    bool have = false;
    for (int c : candidates_[i]) {
      if (mask & (1u << c)) continue;
      const int added = std::popcount(mask >> (c + 1));
      const Best rest = solve(i + 1, mask | (1u << c));
      const int m = rest.matched + 1;
      const int x = rest.crossings + added;
      if (!have || better(m, x, best.matched, best.crossings)) {
        best = {m, x, c};
        have = true;
      }
    }
    const Best skip = solve(i + 1, mask);
    if (!have || better(skip.matched, skip.crossings, best.matched, best.crossings))
      best = {skip.matched, skip.crossings, -1};
    memo_[k] = best;
    return best;
  }

  std::size_t hypo_size_;
  const std::vector<std::size_t>& ref_positions_;
  const std::vector<std::vector<int>>& candidates_;
  std::unordered_map<std::uint64_t, Best> memo_;
};

}  // namespace detail

// Maximum-cardinality exact-match alignment with the fewest crossing pairs.
// Ties prefer matching earlier hypothesis tokens to earlier reference
// tokens. If more than `search_cap` reference positions are matchable the
// search falls back to leftmost greedy matching.
inline Alignment meteor_align(const TokenSeq& hypo, const TokenSeq& ref,
                              std::size_t search_cap = 16) {
  std::set<std::string> hypo_vocab(hypo.begin(), hypo.end());
  std::vector<std::size_t> ref_positions;
  for (std::size_t j = 0; j < ref.size(); ++j)
    if (hypo_vocab.count(ref[j])) ref_positions.push_back(j);
  if (ref_positions.empty()) return {};
  if (ref_positions.size() > std::min<std::size_t>(search_cap, 31) || hypo.size() > 0xFFFF)
    return detail::greedy_align(hypo, ref);

  std::vector<std::vector<int>> candidates(hypo.size());
  for (std::size_t i = 0; i < hypo.size(); ++i)
    for (std::size_t c = 0; c < ref_positions.size(); ++c)
      if (ref[ref_positions[c]] == hypo[i]) candidates[i].push_back(static_cast<int>(c));
  return detail::AlignmentSearch(hypo, ref_positions, candidates).run();
}

inline double meteor_pair(const TokenSeq& hypo, const TokenSeq& ref,
                          ChunkMode mode = ChunkMode::standard, std::size_t search_cap = 16) {
  const Alignment a = meteor_align(hypo, ref, search_cap);
  if (a.empty()) return 0.0;
  const double m = static_cast<double>(a.size());
  const double precision = m / static_cast<double>(hypo.size());
  const double recall = m / static_cast<double>(ref.size());
  const double fmean = 10.0 * precision * recall / (recall + 9.0 * precision);
  const double chunks =
      mode == ChunkMode::standard ? static_cast<double>(count_chunks(a)) : m;
  const double penalty = 0.5 * (chunks * chunks * chunks) / (m * m * m);
  return fmean * (1.0 - penalty);
}

inline std::vector<double> meteor_items(const Corpus& corpus, ChunkMode mode = ChunkMode::standard,
                                        std::size_t search_cap = 16) {
  detail::require_corpus(corpus);
  std::vector<double> out;
  out.reserve(corpus.size());
  for (const auto& item : corpus) {
    double best = 0.0;
    for (const auto& r : item.references)
      best = std::max(best, meteor_pair(item.hypothesis, r, mode, search_cap));
    out.push_back(best);
  }
  return out;
}

inline double meteor(const Corpus& corpus, ChunkMode mode = ChunkMode::standard,
                     std::size_t search_cap = 16) {
  return mean(meteor_items(corpus, mode, search_cap));
}

// ---------------------------------------------------------------------------
// CIDEr

using TfIdfVector = std::map<NGram, double>;

// Document frequencies per n-gram order: the number of items whose
// reference set contains the n-gram. Built once before any scoring.
class DocumentFrequency {
 public:
  DocumentFrequency(const Corpus& corpus, int max_n)
      : items_(corpus.size()), df_(static_cast<std::size_t>(max_n)) {
    for (const auto& item : corpus) {
      for (int n = 1; n <= max_n; ++n) {
        std::set<NGram> seen;
        for (const auto& r : item.references)
          for (const auto& [g, c] : ngrams(r, static_cast<std::size_t>(n))) seen.insert(g);
        auto& table = df_[static_cast<std::size_t>(n - 1)];
        for (const auto& g : seen) ++table[g];
      }
    }
  }

  std::size_t item_count() const { return items_; }

  int df(const NGram& g) const {
    const auto& table = df_.at(g.arity() - 1);
    auto it = table.find(g);
    return it == table.end() ? 0 : it->second;
  }

  double idf(const NGram& g) const {
    return std::log(static_cast<double>(items_) / std::max(1.0, static_cast<double>(df(g))));
  }

  TfIdfVector vector(const TokenSeq& s, int n) const {
    TfIdfVector v;
    const auto counts = ngrams(s, static_cast<std::size_t>(n));
    const double total = static_cast<double>(counts.total());
    for (const auto& [g, c] : counts) v[g] = (static_cast<double>(c) / total) * idf(g);
    return v;
  }

 private:
  std::size_t items_;
  std::vector<std::map<NGram, int>> df_;
};

inline double cosine(const TfIdfVector& a, const TfIdfVector& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [g, x] : a) {
    na += x * x;
    if (auto it = b.find(g); it != b.end()) dot += x * it->second;
  }
  for (const auto& [g, y] : b) nb += y * y;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline std::vector<double> cider_items(const Corpus& corpus, const MetricOptions& opt = {}) {
  detail::require_corpus(corpus);
  if (opt.max_n < 1) throw std::invalid_argument("max_n must be >= 1");
  std::vector<double> weights = opt.cider_weights;
  if (weights.empty()) weights.assign(static_cast<std::size_t>(opt.max_n), 1.0 / opt.max_n);
  if (weights.size() != static_cast<std::size_t>(opt.max_n))
    throw std::invalid_argument("cider weights must have max_n entries");
  const DocumentFrequency df(corpus, opt.max_n);
  std::vector<double> out;
  out.reserve(corpus.size());
  for (const auto& item : corpus) {
    double score = 0.0;
    for (int n = 1; n <= opt.max_n; ++n) {
      const auto hv = df.vector(item.hypothesis, n);
      double per_n = 0.0;
      for (const auto& r : item.references) per_n += cosine(hv, df.vector(r, n));
      score += weights[static_cast<std::size_t>(n - 1)] * per_n /
               static_cast<double>(item.references.size());
    }
    out.push_back(opt.cider_scale10 ? 10.0 * score : score);
  }
  return out;
}

inline double cider(const Corpus& corpus, const MetricOptions& opt = {}) {
  return mean(cider_items(corpus, opt));
}

inline double cider(const Corpus& corpus, int max_n) {
  MetricOptions opt;
  opt.max_n = max_n;
  return cider(corpus, opt);
}

// ---------------------------------------------------------------------------

inline MetricReport evaluate(const Corpus& corpus, const MetricOptions& opt = {}) {
  MetricReport rep;
  rep.bleu = bleu(corpus, opt.max_n);
  rep.meteor = meteor(corpus, opt.chunk_mode, opt.meteor_search_cap);
  rep.rouge_l = rouge_l(corpus, opt.beta);
  rep.cider = cider(corpus, opt);
  rep.item_count = corpus.size();
  return rep;
}

}  // namespace vqakit
