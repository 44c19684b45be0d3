#pragma once

// Dataset and prediction analysis: split statistics, length groups,
// rule-based question types, term accuracy and question-token repetition.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vqakit/error.hpp"
#include "vqakit/metrics.hpp"
#include "vqakit/text.hpp"

namespace vqakit {

enum class QaType { text, non_text };
enum class Split { train, dev, test };

inline constexpr std::array<Split, 3> kSplits = {Split::train, Split::dev, Split::test};

inline std::string_view to_string(QaType t) { return t == QaType::text ? "text" : "non_text"; }

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

struct QARecord {
  std::string qa_id;
  std::string image_id;
  TokenSeq question;
  TokenSeq answer;
  QaType qa_type = QaType::non_text;
  Split split = Split::train;
  std::string raw_question, raw_answer;  // as written in the source file, if known
};

struct Prediction {
  std::string qa_id;
  TokenSeq answer;
};

// ---------------------------------------------------------------------------
// Split statistics

struct SplitStats {
  std::size_t images = 0;
  std::size_t text_qas = 0;
  std::size_t non_text_qas = 0;

  friend bool operator==(const SplitStats&, const SplitStats&) = default;
};

struct DatasetStats {
  std::map<Split, SplitStats> splits;  // every split present, possibly all zero
  SplitStats total;
};

inline DatasetStats dataset_stats(const std::vector<QARecord>& records) {
  DatasetStats st;
  std::map<Split, std::set<std::string>> images;
  for (Split s : kSplits) st.splits[s] = {};
  for (const auto& r : records) {
    auto& row = st.splits[r.split];
    (r.qa_type == QaType::text ? row.text_qas : row.non_text_qas)++;
    images[r.split].insert(r.image_id);
  }
  for (Split s : kSplits) {
    auto& row = st.splits[s];
    row.images = images[s].size();
    st.total.images += row.images;
    st.total.text_qas += row.text_qas;
    st.total.non_text_qas += row.non_text_qas;
  }
  return st;
}

// ---------------------------------------------------------------------------
// Length groups

enum class LengthGroup { S, M, L, XL };

inline constexpr std::array<LengthGroup, 4> kLengthGroups = {LengthGroup::S, LengthGroup::M,
                                                             LengthGroup::L, LengthGroup::XL};

inline std::string_view to_string(LengthGroup g) {
  switch (g) {
    case LengthGroup::S: return "S";
    case LengthGroup::M: return "M";
    case LengthGroup::L: return "L";
    case LengthGroup::XL: return "XL";
  }
  return "?";
}

inline LengthGroup length_group(std::size_t n) {
  if (n <= 5) return LengthGroup::S;
  if (n <= 10) return LengthGroup::M;
  if (n <= 15) return LengthGroup::L;
  return LengthGroup::XL;
}

inline LengthGroup length_group(const TokenSeq& seq) { return length_group(seq.size()); }

// Per-length token counts, for plotting length distributions.
inline std::map<std::size_t, std::size_t> length_histogram(const std::vector<TokenSeq>& seqs) {
  std::map<std::size_t, std::size_t> h;
  for (const auto& s : seqs) ++h[s.size()];
  return h;
}

// ---------------------------------------------------------------------------
// Joining predictions to gold records

struct JoinedItem {
  const QARecord* record = nullptr;
  TokenSeq prediction;
};

inline std::vector<JoinedItem> join_predictions(const std::vector<QARecord>& records,
                                                const std::vector<Prediction>& predictions) {
  std::map<std::string, const QARecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.qa_id, &r);
  std::vector<JoinedItem> out;
  std::vector<std::string> missing, duplicate;
  std::set<std::string> seen;
  for (const auto& p : predictions) {
    if (!seen.insert(p.qa_id).second) {
      duplicate.push_back(p.qa_id);
      continue;
    }
    auto it = by_id.find(p.qa_id);
    if (it == by_id.end()) {
      missing.push_back(p.qa_id);
      continue;
    }
    out.push_back({it->second, p.answer});
  }
  if (!missing.empty() || !duplicate.empty()) {
    std::string msg;
    if (!missing.empty()) {
      msg += "predictions reference unknown qa_id:";
      for (const auto& id : missing) msg += " " + id;
    }
    if (!duplicate.empty()) {
      if (!msg.empty()) msg += "; ";
      msg += "duplicate prediction qa_id:";
      for (const auto& id : duplicate) msg += " " + id;
    }
    throw InputError(msg);
  }
  return out;
}

inline Corpus make_corpus(const std::vector<JoinedItem>& items) {
  Corpus corpus;
  corpus.reserve(items.size());
  for (const auto& it : items)
    corpus.push_back({it.record->qa_id, it.prediction, {it.record->answer}});
  return corpus;
}

enum class Axis { question, answer };

// Metrics per length group of the question or gold answer. Empty groups are
// absent from the result.
inline std::map<LengthGroup, MetricReport> group_breakdown(const std::vector<JoinedItem>& items,
                                                           Axis axis,
                                                           const MetricOptions& opt = {}) {
  std::map<LengthGroup, std::vector<JoinedItem>> parts;
  for (const auto& it : items) {
    const auto& seq = axis == Axis::question ? it.record->question : it.record->answer;
    parts[length_group(seq)].push_back(it);
  }
  std::map<LengthGroup, MetricReport> out;
  for (const auto& [g, part] : parts) out[g] = evaluate(make_corpus(part), opt);
  return out;
}

// ---------------------------------------------------------------------------
// Question types

struct TypeRule {
  std::string name;
  std::vector<std::string> patterns;  // ECMAScript regexes over the spaced question text
  // canonical term -> surface forms (syllables separated by spaces)
  std::vector<std::pair<std::string, std::vector<std::string>>> lexicon;
};

inline const std::vector<std::string>& guideline_colors() {
  static const std::vector<std::string> colors = {"black", "white",    "red",    "orange",
                                                  "yellow", "green",   "blue",   "sky blue",
                                                  "purple", "pink",    "brown",  "gray"};
  return colors;
}

namespace detail {

// Segmented tokens joined back into space-separated syllables.
inline std::string syllable_text(const TokenSeq& seq) {
  std::string out;
  for (const auto& t : seq) {
    if (!out.empty()) out.push_back(' ');
    for (char c : t) out.push_back(c == '_' ? ' ' : c);
  }
  return out;
}

inline std::vector<std::string> split_syllables(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '_') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace detail

class QuestionTypeRules {
 public:
  explicit QuestionTypeRules(std::vector<TypeRule> rules) : rules_(std::move(rules)) {
    for (const auto& r : rules_) {
      if (r.patterns.empty()) throw InputError("question type '" + r.name + "' has no patterns");
      std::vector<std::regex> compiled;
      for (const auto& p : r.patterns) {
        try {
          compiled.emplace_back(p, std::regex::ECMAScript | std::regex::optimize);
        } catch (const std::regex_error& e) {
          throw InputError("bad pattern for question type '" + r.name + "': " + p);
        }
      }
      regexes_.push_back(std::move(compiled));

      std::vector<Surface> surfaces;
      for (const auto& [canonical, forms] : r.lexicon)
        for (const auto& f : forms) surfaces.push_back({detail::split_syllables(f), canonical});
      // longest first so "xanh da trời" wins over "xanh" at the same position
      std::stable_sort(surfaces.begin(), surfaces.end(), [](const Surface& a, const Surface& b) {
        return a.syllables.size() > b.syllables.size();
      });
      surfaces_.push_back(std::move(surfaces));

      if (r.name == "color") {
        std::set<std::string> got, want(guideline_colors().begin(), guideline_colors().end());
        for (const auto& [canonical, forms] : r.lexicon) got.insert(canonical);
        if (got != want) throw InputError("color lexicon must list exactly the 12 guideline colors");
      }
    }
  }

  const std::vector<TypeRule>& rules() const { return rules_; }

  const TypeRule* find(std::string_view name) const {
    for (const auto& r : rules_)
      if (r.name == name) return &r;
    return nullptr;
  }

  std::set<std::string> classify(const TokenSeq& question) const {
    const std::string text = detail::syllable_text(question);
    std::set<std::string> out;
    for (std::size_t i = 0; i < rules_.size(); ++i)
      for (const auto& re : regexes_[i])
        if (std::regex_search(text, re)) {
          out.insert(rules_[i].name);
          break;
        }
    return out;
  }

  // First lexicon term (canonical form) occurring in the text.
  std::optional<std::string> extract_term(const TokenSeq& text, std::string_view type) const {
    std::size_t idx = rules_.size();
    for (std::size_t i = 0; i < rules_.size(); ++i)
      if (rules_[i].name == type) idx = i;
    if (idx == rules_.size()) return std::nullopt;
    const auto syl = detail::split_syllables(detail::syllable_text(text));
    for (std::size_t p = 0; p < syl.size(); ++p)
      for (const auto& s : surfaces_[idx]) {
        if (s.syllables.empty() || p + s.syllables.size() > syl.size()) continue;
        if (std::equal(s.syllables.begin(), s.syllables.end(), syl.begin() + static_cast<std::ptrdiff_t>(p)))
          return s.canonical;
      }
    return std::nullopt;
  }

 private:
  struct Surface {
    std::vector<std::string> syllables;
    std::string canonical;
  };

  std::vector<TypeRule> rules_;
  std::vector<std::vector<std::regex>> regexes_;
  std::vector<std::vector<Surface>> surfaces_;
};

inline std::set<std::string> classify_question(const TokenSeq& question, const QuestionTypeRules& rules) {
  return rules.classify(question);
}

struct TermAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
};

// Share of questions of `type` whose prediction carries the same lexicon
// term as the gold answer. Only term-valued types are supported.
inline TermAccuracy term_accuracy(const std::vector<JoinedItem>& items, std::string_view type,
                                  const QuestionTypeRules& rules) {
  if (type != "color" && type != "quantity")
    throw std::invalid_argument("term accuracy supports only color and quantity, got '" +
                                std::string(type) + "'");
  if (!rules.find(type)) throw std::invalid_argument("rules define no '" + std::string(type) + "' type");
  TermAccuracy out;
  for (const auto& it : items) {
    if (!rules.classify(it.record->question).count(std::string(type))) continue;
    ++out.total;
    const auto gold = rules.extract_term(it.record->answer, type);
    const auto pred = rules.extract_term(it.prediction, type);
    if (gold && pred && *gold == *pred) ++out.correct;
  }
  out.accuracy = out.total == 0 ? 0.0 : static_cast<double>(out.correct) / static_cast<double>(out.total);
  return out;
}

// ---------------------------------------------------------------------------
// Repetition of question tokens in predictions

inline double repeat_rate_item(const TokenSeq& prediction, const TokenSeq& question) {
  if (prediction.empty()) return 0.0;
  std::map<std::string, int> q;
  for (const auto& t : question) ++q[t];
  std::size_t shared = 0;
  for (const auto& t : prediction) {
    auto it = q.find(t);
    if (it != q.end() && it->second > 0) {
      --it->second;
      ++shared;
    }
  }
  return static_cast<double>(shared) / static_cast<double>(prediction.size());
}

struct RepeatRate {
  std::map<LengthGroup, double> by_group;  // mean item rate per gold-answer group
  std::map<LengthGroup, std::size_t> items;
  double overall = 0.0;
};

inline RepeatRate repeat_rate(const std::vector<JoinedItem>& items) {
  RepeatRate out;
  double total = 0.0;
  for (const auto& it : items) {
    const double r = repeat_rate_item(it.prediction, it.record->question);
    const auto g = length_group(it.record->answer);
    out.by_group[g] += r;
    ++out.items[g];
    total += r;
  }
  for (auto& [g, sum] : out.by_group) sum /= static_cast<double>(out.items[g]);
  out.overall = items.empty() ? 0.0 : total / static_cast<double>(items.size());
  return out;
}

// ---------------------------------------------------------------------------
// Guideline validation

struct ValidationReport {
  std::vector<std::string> images_below_min_qas;
  std::vector<std::string> single_word_answers;      // qa ids
  std::vector<std::string> digit_quantities;         // qa ids
  std::vector<std::string> colors_outside_lexicon;   // qa ids
  std::vector<std::string> unnormalized_prices;      // qa ids

  std::size_t violation_count() const {
    return images_below_min_qas.size() + single_word_answers.size() + digit_quantities.size() +
           colors_outside_lexicon.size() + unnormalized_prices.size();
  }
};

namespace detail {

inline bool is_number_token(const std::string& t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) {
    return (c >= '0' && c <= '9') || c == '.' || c == ',';
  }) && std::any_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline bool has_digit_quantity(const TokenSeq& seq) {
  const auto& toks = seq.tokens;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (!is_number_token(toks[i])) continue;
    // prices are written with digits by design
    if (i + 1 < toks.size() && toks[i + 1] == "đồng") continue;
    return true;
  }
  return false;
}

}  // namespace detail

inline ValidationReport validate_guidelines(const std::vector<QARecord>& records,
                                            const QuestionTypeRules& rules,
                                            std::size_t min_qas_per_image = 3) {
  ValidationReport rep;
  std::map<std::string, std::size_t> per_image;
  for (const auto& r : records) {
    ++per_image[r.image_id];
    if (r.answer.size() == 1) rep.single_word_answers.push_back(r.qa_id);
    const auto types = rules.classify(r.question);
    if (types.count("quantity") &&
        (detail::has_digit_quantity(r.answer) || detail::has_digit_quantity(r.question)))
      rep.digit_quantities.push_back(r.qa_id);
    if (types.count("color") && rules.find("color") && !rules.extract_term(r.answer, "color"))
      rep.colors_outside_lexicon.push_back(r.qa_id);
    bool price_issue = false;
    for (const auto& [seq, raw] : {std::pair{&r.question, &r.raw_question}, std::pair{&r.answer, &r.raw_answer}}) {
      std::string text = *raw;
      if (text.empty())
        for (const auto& t : seq->tokens) text += (text.empty() ? "" : " ") + t;
      const auto lowered = detail::encode_utf8(detail::lowercase(detail::decode_utf8(detail::to_nfc(text))));
      price_issue |= normalize_prices(text) != lowered;
    }
    if (price_issue) rep.unnormalized_prices.push_back(r.qa_id);
  }
  for (const auto& [img, n] : per_image)
    if (n < min_qas_per_image) rep.images_below_min_qas.push_back(img);
  return rep;
}

}  // namespace vqakit
