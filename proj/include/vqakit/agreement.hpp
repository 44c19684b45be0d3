#pragma once

// Fleiss' kappa and percent agreement over an items x categories matrix of
// annotator counts.

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vqakit/error.hpp"

namespace vqakit {

class RatingMatrix {
 public:
  // counts[i][j]: number of annotators assigning category j to item i.
  // Every row must sum to `annotators`.
  RatingMatrix(std::vector<std::vector<int>> counts, int annotators,
               std::vector<std::string> item_ids = {}, std::vector<std::string> categories = {})
      : counts_(std::move(counts)),
        annotators_(annotators),
        item_ids_(std::move(item_ids)),
        categories_(std::move(categories)) {
    if (counts_.empty()) throw InputError("rating matrix has no items");
    if (annotators_ < 2) throw InputError("rating matrix needs at least 2 annotators");
    const std::size_t k = counts_.front().size();
    if (k < 2) throw InputError("rating matrix needs at least 2 categories");
    if (item_ids_.empty())
      for (std::size_t i = 0; i < counts_.size(); ++i) item_ids_.push_back(std::to_string(i));
    if (item_ids_.size() != counts_.size()) throw InputError("item id count mismatch");
    if (categories_.empty())
      for (std::size_t j = 0; j < k; ++j) categories_.push_back(std::to_string(j));
    if (categories_.size() != k) throw InputError("category name count mismatch");

    std::vector<std::string> bad;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      const auto& row = counts_[i];
      if (row.size() != k) throw InputError("ragged rating matrix at item " + item_ids_[i]);
      int sum = 0;
      bool negative = false;
      for (int c : row) {
        negative |= c < 0;
        sum += c;
      }
      if (negative || sum != annotators_) bad.push_back(item_ids_[i]);
    }
    if (!bad.empty()) {
      std::string msg = "rating rows do not sum to " + std::to_string(annotators_) + " for items:";
      for (const auto& id : bad) msg += " " + id;
      throw InputError(msg);
    }
  }

  std::size_t items() const { return counts_.size(); }
  std::size_t categories() const { return counts_.front().size(); }
  int annotators() const { return annotators_; }
  std::span<const int> row(std::size_t i) const { return counts_[i]; }
  const std::vector<std::vector<int>>& counts() const { return counts_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  const std::vector<std::string>& category_names() const { return categories_; }

 private:
  std::vector<std::vector<int>> counts_;
  int annotators_;
  std::vector<std::string> item_ids_;
  std::vector<std::string> categories_;
};

// Extent to which the n annotators agree on one item.
inline double item_agreement(std::span<const int> row, int n) {
  if (n < 2) throw std::invalid_argument("item_agreement needs n >= 2");
  long long sum = 0, pairs = 0;
  for (int c : row) {
    sum += c;
    pairs += static_cast<long long>(c) * (c - 1);
  }
  if (sum != n) throw InputError("row sums to " + std::to_string(sum) + ", expected " + std::to_string(n));
  return static_cast<double>(pairs) / (static_cast<double>(n) * (n - 1));
}

// Proportion of all assignments that went to each category.
inline std::vector<double> category_proportions(const RatingMatrix& m) {
  std::vector<double> p(m.categories(), 0.0);
  for (std::size_t i = 0; i < m.items(); ++i)
    for (std::size_t j = 0; j < m.categories(); ++j) p[j] += m.row(i)[j];
  const double total = static_cast<double>(m.items()) * m.annotators();
  for (auto& x : p) x /= total;
  return p;
}

struct KappaBreakdown {
  double mean_agreement = 0.0;  // P-bar
  double chance_agreement = 0.0;  // P-bar_e
  double kappa = 0.0;
};

inline KappaBreakdown fleiss_breakdown(const RatingMatrix& m) {
  KappaBreakdown out;
  for (std::size_t i = 0; i < m.items(); ++i) out.mean_agreement += item_agreement(m.row(i), m.annotators());
  out.mean_agreement /= static_cast<double>(m.items());
  for (double p : category_proportions(m)) out.chance_agreement += p * p;
  if (out.chance_agreement >= 1.0)
    throw InputError("kappa undefined: all ratings fall in a single category");
  out.kappa = (out.mean_agreement - out.chance_agreement) / (1.0 - out.chance_agreement);
  return out;
}

inline double fleiss_kappa(const RatingMatrix& m) { return fleiss_breakdown(m).kappa; }

// Fraction of items on which every annotator chose the same category.
inline double percent_agreement(const RatingMatrix& m) {
  std::size_t unanimous = 0;
  for (std::size_t i = 0; i < m.items(); ++i) {
    const auto row = m.row(i);
    if (std::find(row.begin(), row.end(), m.annotators()) != row.end()) ++unanimous;
  }
  return static_cast<double>(unanimous) / static_cast<double>(m.items());
}

struct Rating {
  std::string annotator_id;
  std::string item_id;
  std::string label;
};

// Aggregates per-annotator labels. Every annotator must label every item
// exactly once; incomplete items are reported by id.
inline RatingMatrix aggregate_ratings(const std::vector<Rating>& ratings) {
  if (ratings.empty()) throw InputError("no ratings");
  std::set<std::string> annotators, labels;
  std::map<std::string, std::map<std::string, std::string>> by_item;  // item -> annotator -> label
  std::vector<std::string> duplicated;
  for (const auto& r : ratings) {
    annotators.insert(r.annotator_id);
    labels.insert(r.label);
    auto [it, inserted] = by_item[r.item_id].emplace(r.annotator_id, r.label);
    if (!inserted) duplicated.push_back(r.item_id);
  }
  if (!duplicated.empty()) {
    std::string msg = "annotator rated an item more than once:";
    for (const auto& id : duplicated) msg += " " + id;
    throw InputError(msg);
  }
  std::vector<std::string> incomplete;
  for (const auto& [item, votes] : by_item)
    if (votes.size() != annotators.size()) incomplete.push_back(item);
  if (!incomplete.empty()) {
    std::string msg = "items missing ratings (expected " + std::to_string(annotators.size()) + "):";
    for (const auto& id : incomplete) msg += " " + id;
    throw InputError(msg);
  }
  std::vector<std::string> categories(labels.begin(), labels.end());
  // A single observed label still needs a second column for a valid matrix.
  if (categories.size() < 2) categories.push_back("<unused>");
  std::map<std::string, std::size_t> col;
  for (std::size_t j = 0; j < categories.size(); ++j) col[categories[j]] = j;

  std::vector<std::vector<int>> counts;
  std::vector<std::string> ids;
  for (const auto& [item, votes] : by_item) {
    std::vector<int> row(categories.size(), 0);
    for (const auto& [annotator, label] : votes) ++row[col[label]];
    counts.push_back(std::move(row));
    ids.push_back(item);
  }
  return RatingMatrix(std::move(counts), static_cast<int>(annotators.size()), std::move(ids),
                      std::move(categories));
}

}  // namespace vqakit
