#pragma once

// Text normalization, tokenization and n-gram counting shared by the
// metrics, analysis and validation layers.
//
// Character classification and case mapping go through ICU so that
// Vietnamese letters (Đ, Ư, Ơ and the precomposed tone marks) behave the
// same way ASCII letters do.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "vqakit/error.hpp"

namespace vqakit {

enum class Language { vi, en };

struct TokenSeq {
  std::vector<std::string> tokens;
  Language language = Language::vi;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  const std::string& operator[](std::size_t i) const { return tokens[i]; }
  auto begin() const { return tokens.begin(); }
  auto end() const { return tokens.end(); }

  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

struct NGram {
  std::vector<std::string> tokens;

  std::size_t arity() const { return tokens.size(); }

  friend auto operator<=>(const NGram&, const NGram&) = default;
  friend bool operator==(const NGram&, const NGram&) = default;
};

// Multiset of n-grams of a single arity. Ordered so that iteration (and any
// report built from it) is deterministic.
class NGramCounts {
 public:
  using Map = std::map<NGram, int>;

  explicit NGramCounts(std::size_t arity = 1) : arity_(arity) {}

  std::size_t arity() const { return arity_; }

  int count(const NGram& g) const {
    auto it = counts_.find(g);
    return it == counts_.end() ? 0 : it->second;
  }

  void add(const NGram& g, int c = 1) {
    check_arity(g);
    counts_[g] += c;
  }

  void set(const NGram& g, int c) {
    check_arity(g);
    counts_[g] = c;
  }

  long long total() const {
    long long t = 0;
    for (const auto& [g, c] : counts_) t += c;
    return t;
  }

  std::size_t distinct() const { return counts_.size(); }
  bool empty() const { return counts_.empty(); }
  Map::const_iterator begin() const { return counts_.begin(); }
  Map::const_iterator end() const { return counts_.end(); }

  friend bool operator==(const NGramCounts&, const NGramCounts&) = default;

 private:
  void check_arity(const NGram& g) const {
    if (g.arity() != arity_)
      throw std::invalid_argument("n-gram arity " + std::to_string(g.arity()) +
                                  " does not match counts arity " +
                                  std::to_string(arity_));
  }

  std::size_t arity_;
  Map counts_;
};

namespace detail {

inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  const auto* p = reinterpret_cast<const uint8_t*>(s.data());
  int32_t i = 0;
  const auto n = static_cast<int32_t>(s.size());
  while (i < n) {
    UChar32 c;
    U8_NEXT(p, i, n, c);
    out.push_back(c < 0 ? 0xFFFD : static_cast<char32_t>(c));
  }
  return out;
}

inline std::string encode_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : s) {
    uint8_t buf[U8_MAX_LENGTH];
    int32_t len = 0;
    U8_APPEND_UNSAFE(buf, len, static_cast<UChar32>(c));
    out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(len));
  }
  return out;
}

inline std::string to_nfc(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) return std::string(s);
  icu::UnicodeString in = icu::UnicodeString::fromUTF8(
      icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  icu::UnicodeString out = nfc->normalize(in, status);
  if (U_FAILURE(status)) return std::string(s);
  std::string result;
  out.toUTF8String(result);
  return result;
}

inline bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

inline bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }

inline bool is_word_char(char32_t c) {
  const auto cp = static_cast<UChar32>(c);
  return u_isalnum(cp) || u_hasBinaryProperty(cp, UCHAR_ALPHABETIC) ||
         (U_GET_GC_MASK(cp) & U_GC_M_MASK) != 0;
}

// '_' is connector punctuation but also the joiner used by Vietnamese word
// segmenters ("học_sinh"), so it stays inside tokens.
inline bool is_spaced_punct(const std::u32string& s, std::size_t i) {
  const char32_t c = s[i];
  if (c == U'_' || !u_ispunct(static_cast<UChar32>(c))) return false;
  if ((c == U'.' || c == U',') && i > 0 && i + 1 < s.size() && is_digit(s[i - 1]) &&
      is_digit(s[i + 1]))
    return false;
  return true;
}

inline const std::vector<std::u32string>& price_units() {
  // Longest first so "đồng" is preferred over "đ".
  static const std::vector<std::u32string> units = {U"đồng", U"vnđ", U"vnd", U"đ", U"d"};
  return units;
}

inline std::u32string group_thousands(const std::u32string& digits) {
  std::u32string out;
  const std::size_t n = digits.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && (n - i) % 3 == 0) out.push_back(U',');
    out.push_back(digits[i]);
  }
  return out;
}

// Expects lowercased input.
inline std::u32string rewrite_prices(const std::u32string& s) {
  std::u32string out;
  out.reserve(s.size() + 8);
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_digit(s[i])) {
      out.push_back(s[i++]);
      continue;
    }
    // digit run, optionally with '.'/',' between digits
    std::size_t j = i;
    std::u32string digits;
    while (j < s.size()) {
      if (is_digit(s[j])) {
        digits.push_back(s[j++]);
      } else if ((s[j] == U'.' || s[j] == U',') && j + 1 < s.size() && is_digit(s[j + 1])) {
        ++j;
      } else {
        break;
      }
    }
    std::size_t k = j;
    while (k < s.size() && (s[k] == U' ' || s[k] == U'\t')) ++k;
    std::size_t unit_len = 0;
    for (const auto& unit : price_units()) {
      if (s.compare(k, unit.size(), unit) == 0 &&
          (k + unit.size() == s.size() || !is_word_char(s[k + unit.size()]))) {
        unit_len = unit.size();
        break;
      }
    }
    if (unit_len == 0) {
      out.append(s, i, j - i);
    } else {
      out += group_thousands(digits);
      out += U" đồng";
      j = k + unit_len;
    }
    i = j;
  }
  return out;
}

inline std::u32string lowercase(std::u32string s) {
  for (auto& c : s) c = static_cast<char32_t>(u_tolower(static_cast<UChar32>(c)));
  return s;
}

inline std::u32string collapse_spaces(const std::u32string& s) {
  std::u32string out;
  bool pending = false;
  for (char32_t c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(U' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

// Rewrites price expressions ("25000đ", "25.000 VND") into "25,000 đồng".
// Input is lowercased first; nothing else about the text changes.
inline std::string normalize_prices(std::string_view raw) {
  return detail::encode_utf8(
      detail::rewrite_prices(detail::lowercase(detail::decode_utf8(detail::to_nfc(raw)))));
}

// Lowercases, rewrites prices, puts spaces around punctuation and collapses
// whitespace. Idempotent.
inline std::string normalize(std::string_view raw, Language = Language::vi) {
  using namespace detail;
  std::u32string s = lowercase(decode_utf8(to_nfc(raw)));
  for (auto& c : s)
    if (is_space(c)) c = U' ';
  s = rewrite_prices(s);
  std::u32string spaced;
  spaced.reserve(s.size() * 2);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (is_spaced_punct(s, i)) {
      spaced.push_back(U' ');
      spaced.push_back(s[i]);
      spaced.push_back(U' ');
    } else {
      spaced.push_back(s[i]);
    }
  }
  return encode_utf8(collapse_spaces(spaced));
}

// Whitespace split. Vietnamese input is expected to be word-segmented
// upstream (syllables of one word joined by '_').
inline TokenSeq tokenize(std::string_view normalized, Language lang = Language::vi,
                         bool require_non_empty = false) {
  TokenSeq seq;
  seq.language = lang;
  std::size_t i = 0;
  while (i < normalized.size()) {
    while (i < normalized.size() &&
           (normalized[i] == ' ' || normalized[i] == '\t' || normalized[i] == '\n' ||
            normalized[i] == '\r'))
      ++i;
    std::size_t j = i;
    while (j < normalized.size() && normalized[j] != ' ' && normalized[j] != '\t' &&
           normalized[j] != '\n' && normalized[j] != '\r')
      ++j;
    if (j > i) seq.tokens.emplace_back(normalized.substr(i, j - i));
    i = j;
  }
  if (require_non_empty && seq.empty()) throw InputError("empty token sequence");
  return seq;
}

inline TokenSeq tokenize(std::vector<std::string> tokens, Language lang = Language::vi) {
  return TokenSeq{std::move(tokens), lang};
}

inline NGramCounts ngrams(const TokenSeq& seq, std::size_t n) {
  if (n == 0) throw std::invalid_argument("n-gram order must be >= 1");
  NGramCounts counts(n);
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i)
    counts.add(NGram{{seq.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                      seq.tokens.begin() + static_cast<std::ptrdiff_t>(i + n)}});
  return counts;
}

// Each hypothesis n-gram count clipped to the largest count of that n-gram
// in any single reference. Keys mirror the hypothesis; clipped-away n-grams
// stay with count 0.
inline NGramCounts clipped_counts(const NGramCounts& hypo, const std::vector<NGramCounts>& refs) {
  for (const auto& r : refs)
    if (r.arity() != hypo.arity())
      throw std::invalid_argument("clipped_counts: mixed n-gram arity");
  NGramCounts out(hypo.arity());
  for (const auto& [g, c] : hypo) {
    int best = 0;
    for (const auto& r : refs) best = std::max(best, r.count(g));
    out.set(g, std::min(c, best));
  }
  return out;
}

}  // namespace vqakit
