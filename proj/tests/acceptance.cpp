// Acceptance gate: one PASS/FAIL/SKIP line per criterion. Data-gated parts
// read VQAKIT_RATINGS, VQAKIT_DATASET and VQAKIT_PARSES from the environment.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vqakit/cli.hpp"
#include "vqakit/vqakit.hpp"

using namespace vqakit;
using testutil::item;

namespace {

struct Outcome {
  enum Status { pass, fail, skip } status = pass;
  std::string detail;
};

class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": got " << got << ", want " << want;
    expect(std::abs(got - want) <= tol, os.str());
  }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    std::string s = std::to_string(failed_) + " failed";
    for (const auto& f : failures_) s += "; " + f;
    return s;
  }

 private:
  std::vector<std::string> failures_;
  std::size_t failed_ = 0;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x, int prec = 3) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << x;
  return os.str();
}

std::string sci(double x) {
  std::ostringstream os;
  os.precision(2);
  os << std::scientific << x;
  return os.str();
}

Outcome finish(const Checker& c, double elapsed, double limit, const std::string& extra = "") {
  Outcome o;
  const bool fast = elapsed < limit;
  o.status = c.ok() && fast ? Outcome::pass : Outcome::fail;
  o.detail = fmt(elapsed) + "s (limit " + fmt(limit, 0) + "s)";
  if (!fast) o.detail += "; too slow";
  if (!c.ok()) o.detail += "; " + c.summary();
  if (!extra.empty()) o.detail += "; " + extra;
  return o;
}

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

const std::string kFixtures = VQAKIT_FIXTURES;

// ---------------------------------------------------------------------------

Outcome metric_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  const double tol = 1e-9;
  c.near(bleu({item("a a", {"a"})}, 1)[0], 0.5, tol, "BLEU clipped unigram");
  c.near(bleu({item("a", {"a b"})}, 1)[0], std::exp(-1.0), tol, "BLEU brevity penalty");
  c.near(bleu({item("a b c d", {"a b c d"})})[3], 1.0, tol, "BLEU@4 identity");
  c.expect(bleu({item("a b", {"b a"})})[1] == 0.0, "BLEU@2 zero precision");
  const double f = 2.44 * (2.0 / 3.0) / (1.0 + 1.44 * (2.0 / 3.0));
  c.near(rouge_l({item("a b c", {"a c"})}, 1.2), f, tol, "ROUGE-L beta 1.2");
  c.near(meteor({item("a", {"a"})}), 0.5, tol, "METEOR single token");
  c.near(meteor({item("a b c d", {"a b c d"})}), 0.9921875, tol, "METEOR four tokens");
  c.near(meteor({item("b a", {"a b"})}), 0.5, tol, "METEOR two chunks");
  c.near(meteor({item("a b c", {"a b"})}), (20.0 / 21.0) * (1 - 0.5 / 8), tol, "METEOR precision loss");
  const Corpus two = {item("a b", {"a b"}), item("e f", {"c d"})};
  const auto per = cider_items(two, MetricOptions{.max_n = 2});
  c.near(per[0], 1.0, tol, "CIDEr item 1");
  c.near(per[1], 0.0, tol, "CIDEr item 2");
  c.near(cider(two, 2), 0.5, tol, "CIDEr corpus");
  return finish(c, seconds_since(t0), 1.0);
}

Outcome identity_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> items(2, 8);
  for (int t = 0; t < 200; ++t) {
    Corpus corpus;
    const int n = items(rng);
    for (int i = 0; i < n; ++i) {
      // distinct prefixes keep each item's vocabulary disjoint from the others
      const auto s = testutil::random_seq(rng, 4, 12, 6, "c" + std::to_string(i) + "_");
      corpus.push_back({std::to_string(i), s, {s}});
    }
    const auto rep = evaluate(corpus);
    for (int k = 0; k < 4; ++k) c.near(rep.bleu[static_cast<std::size_t>(k)], 1.0, 1e-12, "BLEU@" + std::to_string(k + 1));
    c.near(rep.rouge_l, 1.0, 1e-12, "ROUGE-L");
    c.near(rep.cider, 1.0, 1e-12, "CIDEr");
    for (const auto& it : corpus) {
      const double u = static_cast<double>(it.hypothesis.size());
      c.expect(meteor({it}) == 1.0 - 0.5 / (u * u * u), "METEOR 1 - 0.5/u^3");
    }
  }
  return finish(c, seconds_since(t0), 10.0, "200 corpora");
}

Outcome meteor_alignment() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  std::mt19937_64 rng(77);
  for (int t = 0; t < 1000; ++t) {
    const auto h = testutil::random_seq(rng, 0, 8, 4), r = testutil::random_seq(rng, 0, 8, 4);
    const auto a = meteor_align(h, r);
    std::set<std::size_t> hs, rs;
    bool valid = true;
    for (const auto& [i, j] : a) valid = valid && h[i] == r[j] && hs.insert(i).second && rs.insert(j).second;
    c.expect(valid, "alignment is one-to-one exact");
    const auto [m, x] = oracle::best_alignment(h.tokens, r.tokens);
    c.expect(a.size() == m, "maximum cardinality");
    c.expect(count_crossings(a) == x, "minimum crossings");
  }
  return finish(c, seconds_since(t0), 30.0, "1000 cases");
}

Outcome fleiss() {
  Checker c;
  c.near(fleiss_kappa(load_ratings(kFixtures + "/ratings_unanimous.csv")), 1.0, 1e-12, "unanimous");
  c.near(fleiss_kappa(load_ratings(kFixtures + "/ratings_2x2.csv")), -1.0 / 3.0, 1e-12, "2x2");
  c.near(fleiss_kappa(RatingMatrix({{2, 0}, {1, 1}}, 2)), -1.0 / 3.0, 1e-12, "2x2 in memory");
  Outcome o;
  o.status = c.ok() ? Outcome::pass : Outcome::fail;
  o.detail = c.ok() ? "fixtures match" : c.summary();
  if (const char* path = env("VQAKIT_RATINGS")) {
    Checker d;
    const auto m = load_ratings(path);
    const double k = fleiss_kappa(m), pa = 100.0 * percent_agreement(m);
    d.near(std::round(k * 1e4) / 1e4, 0.8975, 1e-4, "kappa");
    d.near(std::round(pa * 1e2) / 1e2, 87.37, 1e-4, "percent agreement");
    o.detail += "; released ratings: kappa " + fmt(k, 4) + ", percent " + fmt(pa, 2);
    if (!d.ok()) {
      o.status = Outcome::fail;
      o.detail += "; " + d.summary();
    }
  } else {
    o.detail += "; data part SKIP (VQAKIT_RATINGS not set)";
  }
  return o;
}

Outcome linguistics() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  std::mt19937_64 rng(99);
  for (int t = 0; t < 10000; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(t % 40);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    DependencyParse p;
    p.tokens.resize(n, {"w", "N", 0, "dep"});
    std::vector<std::size_t> depth(n, 1);
    for (std::size_t k = 1; k < n; ++k) {
      std::uniform_int_distribution<std::size_t> pick(0, k - 1);
      const std::size_t parent = order[pick(rng)];
      p.tokens[order[k]].head = static_cast<int>(parent) + 1;
      depth[order[k]] = depth[parent] + 1;
    }
    const auto cx = complexity(p);
    c.expect(cx.dependency_count + 1 == cx.word_count, "dependencies + 1 = words");
    c.expect(cx.tree_height == *std::max_element(depth.begin(), depth.end()), "height");
  }
  for (std::size_t n = 2; n < 60; ++n) {
    DependencyParse chain, star;
    star.tokens.push_back({"r", "N", 0, "root"});
    for (std::size_t i = 0; i < n; ++i) chain.tokens.push_back({"w", "N", static_cast<int>(i), "dep"});
    for (std::size_t i = 1; i < n; ++i) star.tokens.push_back({"w", "N", 1, "dep"});
    c.expect(complexity(chain).tree_height == n, "chain height");
    c.expect(complexity(star).tree_height == 2, "star height");
  }
  const std::string fixture = kFixtures + "/lls.conllu";
  const auto parses = parse_conllu(read_file(fixture));
  std::vector<std::string> labels;
  {
    std::istringstream in(read_file(fixture));
    std::string line;
    while (std::getline(in, line))
      if (line.rfind("# level = ", 0) == 0) labels.push_back(line.substr(10));
  }
  c.expect(parses.size() == labels.size() && !labels.empty(), "fixture labels present");
  for (std::size_t i = 0; i < parses.size() && i < labels.size(); ++i)
    c.expect(std::string(to_string(lls_classify(parses[i]))) == labels[i], "LLS label " + std::to_string(i));

  std::string extra = "10000 random trees, " + std::to_string(parses.size()) + " labelled parses";
  auto o = finish(c, seconds_since(t0), 60.0, extra);
  const char* parses_path = env("VQAKIT_PARSES");
  if (parses_path) {
    Checker d;
    const auto ext = load_parses(parses_path);
    const auto prof = lcs_profile(ext);
    d.near(round1(prof.words.mean), 6.9, 0.1 + 1e-9, "mean words");
    d.near(round1(prof.dependencies.mean), 4.8, 0.1 + 1e-9, "mean dependencies");
    d.near(round1(prof.height.mean), 4.0, 0.1 + 1e-9, "mean height");
    const auto h = level_histogram(ext);
    d.near(static_cast<double>(h.word), 1067, 0.01 * 1067, "word level");
    d.near(static_cast<double>(h.phrase), 21022, 0.01 * 21022, "phrase level");
    d.near(static_cast<double>(h.sentence), 12289, 0.01 * 12289, "sentence level");
    o.detail += "; external parses: words " + fmt(prof.words.mean, 2) + ", dependencies " +
                fmt(prof.dependencies.mean, 2) + ", height " + fmt(prof.height.mean, 2);
    if (!d.ok()) {
      o.status = Outcome::fail;
      o.detail += "; " + d.summary();
    }
  } else {
    o.detail += "; data part SKIP (VQAKIT_PARSES not set)";
  }
  return o;
}

Outcome dataset_statistics() {
  Checker c;
  const auto st = dataset_stats(load_dataset(kFixtures + "/dataset.json"));
  c.expect(st.splits.at(Split::train) == SplitStats{2, 2, 2}, "train");
  c.expect(st.splits.at(Split::dev) == SplitStats{1, 0, 1}, "dev");
  c.expect(st.splits.at(Split::test) == SplitStats{1, 1, 0}, "test");
  c.expect(st.total == SplitStats{4, 3, 3}, "total");
  Outcome o;
  o.status = c.ok() ? Outcome::pass : Outcome::fail;
  o.detail = c.ok() ? "fixture counts exact" : c.summary();
  if (const char* path = env("VQAKIT_DATASET")) {
    const auto full = dataset_stats(load_dataset(path)).total;
    o.detail += "; released dataset: " + std::to_string(full.images) + " images, " +
                std::to_string(full.text_qas) + " text, " + std::to_string(full.non_text_qas) + " non-text";
    if (!(full == SplitStats{11199, 16643, 21271})) o.status = Outcome::fail;
  } else {
    o.detail += "; data part SKIP (VQAKIT_DATASET not set)";
  }
  return o;
}

Outcome fusion_kernels() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  SelfCheckOptions opt;
  opt.seeds = 10;
  const auto res = run_selfcheck(opt);
  double worst_grad = 0.0;
  for (const auto& k : res.kernels) {
    c.expect(k.passed(), "kernel " + k.name);
    for (const auto& [key, v] : k.maxima)
      if (key.find("grad") != std::string::npos) worst_grad = std::max(worst_grad, v);
  }
  c.expect(res.kernels.size() == 10, "ten kernels checked");
  const double selfcheck_time = seconds_since(t0);

  std::mt19937_64 rng(123);
  for (int t = 0; t < 100; ++t) {
    const auto w = make_pointer_weights(6, rng);
    const Matrix h = Matrix::uniform(3, 6, rng, -1, 1), s = Matrix::uniform(5, 6, rng, -1, 1);
    std::vector<std::size_t> perm = {0, 1, 2, 3, 4};
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix sp(5, 6);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 6; ++j) sp(i, j) = s(perm[i], j);
    const Matrix a = pointer_scores(h, s, w), b = pointer_scores(h, sp, w);
    double dev = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 5; ++j) dev = std::max(dev, std::abs(b(i, j) - a(i, perm[j])));
    c.expect(dev < 1e-12, "pointer permutation equivariance");

    const Matrix vs = Matrix::uniform(2, 7, rng, -1, 1), cs = Matrix::uniform(2, 3, rng, -1, 1);
    const double shift = std::uniform_real_distribution<double>(-50, 50)(rng);
    Matrix vs2 = vs, cs2 = cs;
    for (auto& x : vs2.data()) x += shift;
    for (auto& x : cs2.data()) x += shift;
    c.expect(output_select(vs, cs) == output_select(vs2, cs2), "argmax shift invariance");
  }
  for (std::size_t warmup : {1u, 100u, 4000u, 10000u}) {
    const double at = lr_schedule(warmup, 512, warmup);
    const double w = static_cast<double>(warmup);
    c.near(at, std::pow(512.0, -0.5) * std::pow(w, -0.5), 1e-15, "lr decay branch at warmup");
    c.near(at, std::pow(512.0, -0.5) * w * std::pow(w, -1.5), 1e-15, "lr warmup branch at warmup");
  }
  const double elapsed = seconds_since(t0);
  return finish(c, elapsed, 60.0,
                "self-check " + fmt(selfcheck_time) + "s, max grad rel error " + sci(worst_grad));
}

Outcome determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  const std::vector<std::vector<std::string>> commands = {
      {"evaluate", "--dataset", kFixtures + "/dataset.json", "--predictions", kFixtures + "/predictions.json",
       "--types", "--groups"},
      {"analyze", "--dataset", kFixtures + "/dataset.json", "--parses", kFixtures + "/lls.conllu"},
      {"agreement", "--ratings", kFixtures + "/ratings_labels.csv"},
      {"kernels-selfcheck", "--seed", "5"},
      {"validate", "--dataset", kFixtures + "/noncompliant.json"},
  };
  for (const auto& base : commands)
    for (const char* format : {"json", "csv"}) {
      auto args = base;
      args.insert(args.begin(), "vqakit");
      args.insert(args.end(), {"--no-timestamp", "--format", format});
      std::string outputs[2];
      for (auto& text : outputs) {
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        std::ostringstream out, err;
        const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
        c.expect(code == 0, base[0] + " exit code " + std::to_string(code) + " " + err.str());
        text = out.str();
      }
      c.expect(!outputs[0].empty() && outputs[0] == outputs[1], base[0] + " " + format + " byte-identical");
    }
  return finish(c, seconds_since(t0), 60.0, "5 commands x 2 formats");
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, metric_oracles}, {2, identity_suite},     {3, meteor_alignment}, {4, fleiss},
      {5, linguistics},    {6, dataset_statistics}, {7, fusion_kernels},   {8, determinism},
  };
  bool all = true;
  for (const auto& [n, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {Outcome::fail, std::string("exception: ") + e.what()};
    }
    const char* label = o.status == Outcome::pass ? "PASS" : o.status == Outcome::fail ? "FAIL" : "SKIP";
    std::cout << "criterion " << n << ": " << label << " " << o.detail << std::endl;
    all = all && o.status != Outcome::fail;
  }
  return all ? 0 : 1;
}
