// Scores a handful of generated answers against gold answers and prints
// every metric, then the color term accuracy.

#include <cstdio>

#include "vqakit/analysis.hpp"
#include "vqakit/io.hpp"
#include "vqakit/metrics.hpp"

int main() {
  using namespace vqakit;
  const std::vector<QARecord> gold = [] {
    std::vector<QARecord> rs;
    auto add = [&](const char* id, const char* q, const char* a) {
      QARecord r;
      r.qa_id = id;
      r.image_id = "img";
      r.question = tokenize(normalize(q));
      r.answer = tokenize(normalize(a));
      rs.push_back(r);
    };
    add("1", "Màu của chiếc xe là gì?", "chiếc xe màu đỏ");
    add("2", "Có bao nhiêu người?", "có hai người đang đứng");
    add("3", "Giá ly cà_phê là bao nhiêu?", "ly cà_phê giá 25000đ");
    return rs;
  }();
  const std::vector<Prediction> preds = {
      {"1", tokenize(normalize("chiếc xe màu đỏ"))},
      {"2", tokenize(normalize("có ba người"))},
      {"3", tokenize(normalize("ly cà_phê giá 25,000 đồng"))},
  };
  const auto joined = join_predictions(gold, preds);
  const auto m = evaluate(make_corpus(joined));
  for (std::size_t k = 0; k < m.bleu.size(); ++k) std::printf("BLEU@%zu  %.4f\n", k + 1, m.bleu[k]);
  std::printf("METEOR  %.4f\nROUGE-L %.4f\nCIDEr   %.4f\n", m.meteor, m.rouge_l, m.cider);

  const auto color = term_accuracy(joined, "color", default_rules());
  std::printf("color terms %zu/%zu\n", color.correct, color.total);
}
