#pragma once

// Complexity profiling (word / dependency counts, tree height) and
// word / phrase / sentence level classification over dependency parses
// produced by an external parser.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vqakit/error.hpp"

namespace vqakit {

struct DepToken {
  std::string form;
  std::string upos;
  int head = 0;  // 1-based index of the head token, 0 = root
  std::string deprel;
};

struct DependencyParse {
  std::vector<DepToken> tokens;

  std::size_t size() const { return tokens.size(); }
};

// Throws InputError unless the parse is a single-rooted tree.
inline void validate_parse(const DependencyParse& parse) {
  const int n = static_cast<int>(parse.size());
  if (n == 0) throw InputError("empty parse");
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const int h = parse.tokens[static_cast<std::size_t>(i)].head;
    if (h < 0 || h > n) throw InputError("head index " + std::to_string(h) + " out of range at token " + std::to_string(i + 1));
    if (h == i + 1) throw InputError("token " + std::to_string(i + 1) + " is its own head");
    if (h == 0) ++roots;
  }
  if (roots != 1) throw InputError("parse has " + std::to_string(roots) + " roots, expected 1");
  // Every token must reach the root within n steps.
  for (int i = 0; i < n; ++i) {
    int cur = i + 1;
    int steps = 0;
    while (cur != 0) {
      cur = parse.tokens[static_cast<std::size_t>(cur - 1)].head;
      if (++steps > n) throw InputError("cycle in dependency heads through token " + std::to_string(i + 1));
    }
  }
}

inline std::size_t root_index(const DependencyParse& parse) {
  for (std::size_t i = 0; i < parse.size(); ++i)
    if (parse.tokens[i].head == 0) return i;
  throw InputError("parse has no root");
}

struct ComplexityOptions {
  bool exclude_punct = false;
  std::set<std::string> punct_tags = {"PUNCT", "CH"};
};

struct SentenceComplexity {
  std::size_t word_count = 0;
  std::size_t dependency_count = 0;
  std::size_t tree_height = 0;  // nodes on the longest root-to-leaf path

  friend bool operator==(const SentenceComplexity&, const SentenceComplexity&) = default;
};

inline SentenceComplexity complexity(const DependencyParse& parse, const ComplexityOptions& opt = {}) {
  validate_parse(parse);
  const std::size_t n = parse.size();
  auto counted = [&](std::size_t i) {
    return !opt.exclude_punct || !opt.punct_tags.count(parse.tokens[i].upos);
  };
  SentenceComplexity out;
  // depth[i] = counted nodes from the root down to i (inclusive)
  std::vector<std::size_t> depth(n, 0);
  std::vector<bool> done(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (counted(i)) {
      ++out.word_count;
      if (parse.tokens[i].head != 0) ++out.dependency_count;
    }
    std::vector<std::size_t> path;
    std::size_t cur = i;
    while (!done[cur]) {
      path.push_back(cur);
      const int h = parse.tokens[cur].head;
      if (h == 0) break;
      cur = static_cast<std::size_t>(h - 1);
    }
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      const int h = parse.tokens[*it].head;
      const std::size_t above = h == 0 ? 0 : depth[static_cast<std::size_t>(h - 1)];
      depth[*it] = above + (counted(*it) ? 1 : 0);
      done[*it] = true;
    }
    out.tree_height = std::max(out.tree_height, depth[i]);
  }
  return out;
}

struct Aggregate {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

struct ComplexityProfile {
  std::size_t sentences = 0;
  Aggregate words;
  Aggregate dependencies;
  Aggregate height;
};

inline ComplexityProfile lcs_profile(const std::vector<DependencyParse>& parses,
                                     const ComplexityOptions& opt = {}) {
  if (parses.empty()) throw InputError("no parses to profile");
  ComplexityProfile p;
  p.sentences = parses.size();
  bool first = true;
  auto fold = [&](Aggregate& a, std::size_t v) {
    const double x = static_cast<double>(v);
    if (first) {
      a.min = a.max = x;
    } else {
      a.min = std::min(a.min, x);
      a.max = std::max(a.max, x);
    }
    a.mean += x;
  };
  for (const auto& parse : parses) {
    const auto c = complexity(parse, opt);
    fold(p.words, c.word_count);
    fold(p.dependencies, c.dependency_count);
    fold(p.height, c.tree_height);
    first = false;
  }
  const double n = static_cast<double>(parses.size());
  p.words.mean /= n;
  p.dependencies.mean /= n;
  p.height.mean /= n;
  return p;
}

// One decimal, as used in report tables.
inline double round1(double x) { return std::round(x * 10.0) / 10.0; }

enum class LinguisticLevel { word, phrase, sentence };

inline std::string_view to_string(LinguisticLevel l) {
  switch (l) {
    case LinguisticLevel::word: return "word";
    case LinguisticLevel::phrase: return "phrase";
    case LinguisticLevel::sentence: return "sentence";
  }
  return "?";
}

struct LevelRules {
  std::set<std::string> subject_labels = {"sub", "nsub", "nsubj", "csubj"};
  std::set<std::string> verb_tags = {"V", "VERB", "VB"};
};

namespace detail {

// "nsubj:pass" matches "nsubj".
inline bool label_in(const std::string& label, const std::set<std::string>& set) {
  if (set.count(label)) return true;
  const auto colon = label.find(':');
  return colon != std::string::npos && set.count(label.substr(0, colon));
}

}  // namespace detail

inline LinguisticLevel lls_classify(const DependencyParse& parse, const LevelRules& rules = {}) {
  validate_parse(parse);
  if (parse.size() == 1) return LinguisticLevel::word;
  const std::size_t root = root_index(parse);
  if (rules.verb_tags.count(parse.tokens[root].upos)) {
    const int root_id = static_cast<int>(root) + 1;
    for (const auto& t : parse.tokens)
      if (t.head == root_id && detail::label_in(t.deprel, rules.subject_labels))
        return LinguisticLevel::sentence;
  }
  return LinguisticLevel::phrase;
}

struct LevelHistogram {
  std::size_t word = 0;
  std::size_t phrase = 0;
  std::size_t sentence = 0;

  std::size_t total() const { return word + phrase + sentence; }
  friend bool operator==(const LevelHistogram&, const LevelHistogram&) = default;
};

inline LevelHistogram level_histogram(const std::vector<DependencyParse>& parses,
                                      const LevelRules& rules = {}) {
  LevelHistogram h;
  for (const auto& p : parses) {
    switch (lls_classify(p, rules)) {
      case LinguisticLevel::word: ++h.word; break;
      case LinguisticLevel::phrase: ++h.phrase; break;
      case LinguisticLevel::sentence: ++h.sentence; break;
    }
  }
  return h;
}

}  // namespace vqakit
