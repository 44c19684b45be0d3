#pragma once

// Command implementations and report emission for the vqakit tool.
// Each cmd_* returns an ordered JSON report; run() parses arguments, writes
// the report and maps failures to exit codes (2 = bad input, 1 = failed
// self-check).

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vqakit/agreement.hpp"
#include "vqakit/analysis.hpp"
#include "vqakit/error.hpp"
#include "vqakit/io.hpp"
#include "vqakit/linguistics.hpp"
#include "vqakit/metrics.hpp"
#include "vqakit/selfcheck.hpp"

namespace vqakit {

inline constexpr const char* kToolVersion = "0.1.0";

using Report = nlohmann::ordered_json;

struct RunConfig {
  std::string command;
  std::string dataset, predictions, parses, rules, ratings, weights;
  std::string out;
  std::string format = "json";
  double beta = 1.2;
  int max_n = 4;
  bool cider_scale10 = false;
  ChunkMode chunk_mode = ChunkMode::standard;
  bool groups = false;
  bool types = false;
  std::uint64_t seed = 0;
  bool timestamp = true;

  MetricOptions metric_options() const {
    MetricOptions o;
    o.max_n = max_n;
    o.beta = beta;
    o.cider_scale10 = cider_scale10;
    o.chunk_mode = chunk_mode;
    return o;
  }
};

namespace detail {

inline void require_path(const std::string& path, const char* flag) {
  if (path.empty()) throw InputError(std::string("missing required option ") + flag);
}

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline Report report_header(const RunConfig& c) {
  Report r;
  r["tool_version"] = kToolVersion;
  r["command"] = c.command;
  Report cfg;
  auto path = [&](const char* key, const std::string& v) {
    if (!v.empty()) cfg[key] = v;
  };
  path("dataset", c.dataset);
  path("predictions", c.predictions);
  path("parses", c.parses);
  path("rules", c.rules);
  path("ratings", c.ratings);
  path("weights", c.weights);
  if (c.command == "evaluate") {
    cfg["beta"] = c.beta;
    cfg["max_n"] = c.max_n;
    cfg["cider_scale10"] = c.cider_scale10;
    cfg["meteor_chunk_mode"] = c.chunk_mode == ChunkMode::standard ? "standard" : "per-match";
    cfg["groups"] = c.groups;
    cfg["types"] = c.types;
  }
  if (c.command == "kernels-selfcheck") cfg["seed"] = c.seed;
  r["config"] = cfg.empty() ? Report::object() : cfg;
  if (c.timestamp) r["generated_at"] = utc_now();
  return r;
}

inline Report metrics_json(const MetricReport& m) {
  Report j;
  j["items"] = m.item_count;
  for (std::size_t k = 0; k < m.bleu.size(); ++k) j["bleu_" + std::to_string(k + 1)] = m.bleu[k];
  j["meteor"] = m.meteor;
  j["rouge_l"] = m.rouge_l;
  j["cider"] = m.cider;
  return j;
}

inline QuestionTypeRules rules_for(const RunConfig& c) {
  return c.rules.empty() ? default_rules() : load_rules(c.rules);
}

inline Report aggregate_json(const Aggregate& a) { return {{"min", a.min}, {"mean", a.mean}, {"max", a.max}}; }

template <class Map>
Report histogram_json(const Map& h) {
  Report j = Report::object();
  for (const auto& [len, n] : h) j[std::to_string(len)] = n;
  return j;
}

}  // namespace detail

inline Report cmd_evaluate(const RunConfig& c) {
  detail::require_path(c.dataset, "--dataset");
  detail::require_path(c.predictions, "--predictions");
  const auto records = load_dataset(c.dataset);
  const auto preds = load_predictions(c.predictions);
  const auto joined = join_predictions(records, preds);
  if (joined.empty()) throw InputError("no predictions to evaluate");
  const MetricOptions opt = c.metric_options();

  Report r = detail::report_header(c);
  Report ev;
  ev["predicted"] = joined.size();
  ev["unpredicted"] = records.size() - joined.size();
  ev["metrics"] = detail::metrics_json(evaluate(make_corpus(joined), opt));
  r["evaluation"] = ev;

  if (c.types) {
    Report by_qa = Report::object();
    for (QaType t : {QaType::text, QaType::non_text}) {
      std::vector<JoinedItem> part;
      for (const auto& it : joined)
        if (it.record->qa_type == t) part.push_back(it);
      if (!part.empty()) by_qa[std::string(to_string(t))] = detail::metrics_json(evaluate(make_corpus(part), opt));
    }
    r["by_qa_type"] = by_qa;

    const auto rules = detail::rules_for(c);
    Report by_q = Report::object();
    for (const auto& rule : rules.rules()) {
      std::vector<JoinedItem> part;
      for (const auto& it : joined)
        if (rules.classify(it.record->question).count(rule.name)) part.push_back(it);
      if (!part.empty()) by_q[rule.name] = detail::metrics_json(evaluate(make_corpus(part), opt));
    }
    r["by_question_type"] = by_q;

    Report terms = Report::object();
    for (const char* t : {"color", "quantity"}) {
      if (!rules.find(t)) continue;
      const auto ta = term_accuracy(joined, t, rules);
      terms[t] = {{"correct", ta.correct}, {"total", ta.total}, {"accuracy", ta.accuracy}};
    }
    r["term_accuracy"] = terms;
  }

  if (c.groups) {
    Report groups;
    for (Axis axis : {Axis::question, Axis::answer}) {
      Report g = Report::object();
      for (const auto& [grp, m] : group_breakdown(joined, axis, opt))
        g[std::string(to_string(grp))] = detail::metrics_json(m);
      groups[axis == Axis::question ? "question" : "answer"] = g;
    }
    r["length_groups"] = groups;
    const auto rr = repeat_rate(joined);
    Report rep;
    rep["overall"] = rr.overall;
    Report by = Report::object();
    for (const auto& [grp, rate] : rr.by_group)
      by[std::string(to_string(grp))] = {{"items", rr.items.at(grp)}, {"rate", rate}};
    rep["by_answer_group"] = by;
    r["repeat_rate"] = rep;
  }
  return r;
}

inline Report cmd_analyze(const RunConfig& c) {
  detail::require_path(c.dataset, "--dataset");
  const auto records = load_dataset(c.dataset);
  const auto rules = detail::rules_for(c);
  std::vector<DependencyParse> parses;
  if (!c.parses.empty()) parses = load_parses(c.parses);

  Report r = detail::report_header(c);
  const auto stats = dataset_stats(records);
  auto split_json = [](const SplitStats& s) {
    return Report{{"images", s.images}, {"text_qas", s.text_qas}, {"non_text_qas", s.non_text_qas},
                  {"qas", s.text_qas + s.non_text_qas}};
  };
  Report splits;
  for (Split s : kSplits) splits[std::string(to_string(s))] = split_json(stats.splits.at(s));
  splits["total"] = split_json(stats.total);
  r["splits"] = splits;

  std::vector<TokenSeq> questions, answers;
  for (const auto& rec : records) {
    questions.push_back(rec.question);
    answers.push_back(rec.answer);
  }
  Report hist;
  hist["question"] = detail::histogram_json(length_histogram(questions));
  hist["answer"] = detail::histogram_json(length_histogram(answers));
  r["length_histograms"] = hist;

  Report groups;
  for (const auto* seqs : {&questions, &answers}) {
    Report g;
    for (LengthGroup lg : kLengthGroups) g[std::string(to_string(lg))] = 0;
    for (const auto& s : *seqs) {
      auto& slot = g[std::string(to_string(length_group(s)))];
      slot = slot.get<std::size_t>() + 1;
    }
    groups[seqs == &questions ? "question" : "answer"] = g;
  }
  r["length_groups"] = groups;

  Report qtypes;
  std::size_t untyped = 0;
  for (const auto& rule : rules.rules()) qtypes[rule.name] = 0;
  for (const auto& rec : records) {
    const auto types = rules.classify(rec.question);
    if (types.empty()) ++untyped;
    for (const auto& t : types) qtypes[t] = qtypes[t].get<std::size_t>() + 1;
  }
  qtypes["untyped"] = untyped;
  r["question_types"] = qtypes;

  if (!parses.empty()) {
    const auto prof = lcs_profile(parses);
    const auto levels = level_histogram(parses);
    Report ling;
    ling["sentences"] = prof.sentences;
    ling["complexity"] = {{"words", detail::aggregate_json(prof.words)},
                          {"dependencies", detail::aggregate_json(prof.dependencies)},
                          {"height", detail::aggregate_json(prof.height)}};
    ling["levels"] = {{"word", levels.word}, {"phrase", levels.phrase}, {"sentence", levels.sentence}};
    r["linguistics"] = ling;
  }
  return r;
}

inline Report cmd_agreement(const RunConfig& c) {
  detail::require_path(c.ratings, "--ratings");
  const auto m = load_ratings(c.ratings);
  const auto k = fleiss_breakdown(m);
  Report r = detail::report_header(c);
  Report a;
  a["items"] = m.items();
  a["annotators"] = m.annotators();
  a["categories"] = m.categories();
  a["mean_agreement"] = k.mean_agreement;
  a["chance_agreement"] = k.chance_agreement;
  a["kappa"] = k.kappa;
  a["percent_agreement"] = 100.0 * percent_agreement(m);
  r["agreement"] = a;
  return r;
}

inline Report cmd_validate(const RunConfig& c) {
  detail::require_path(c.dataset, "--dataset");
  const auto records = load_dataset(c.dataset);
  const auto rep = validate_guidelines(records, detail::rules_for(c));
  Report r = detail::report_header(c);
  Report v;
  v["records"] = records.size();
  v["violation_count"] = rep.violation_count();
  v["rules"] = {{"min_qas_per_image", rep.images_below_min_qas},
                {"single_word_answers", rep.single_word_answers},
                {"digit_quantities", rep.digit_quantities},
                {"colors_outside_lexicon", rep.colors_outside_lexicon},
                {"unnormalized_prices", rep.unnormalized_prices}};
  r["validation"] = v;
  return r;
}

inline Report cmd_kernels_selfcheck(const RunConfig& c) {
  SelfCheckOptions opt;
  opt.seed = c.seed;
  if (!c.weights.empty()) opt.bundle = load_weight_bundle(c.weights);
  const auto res = run_selfcheck(opt);
  Report r = detail::report_header(c);
  Report ks = Report::array();
  for (const auto& k : res.kernels) {
    Report j;
    j["name"] = k.name;
    j["passed"] = k.passed();
    j["seeds"] = opt.seeds;
    Report checks = Report::object();
    for (const auto& [name, ok] : k.flags) checks[name] = ok;
    for (const auto& [name, v] : k.maxima) checks[name] = {{"max", v}, {"limit", k.limits.at(name)}};
    j["checks"] = checks;
    ks.push_back(j);
  }
  r["kernels"] = ks;
  r["bundle_weights_used"] = res.bundle_weights_used;
  r["passed"] = res.passed();
  return r;
}

// ---------------------------------------------------------------------------
// Report emission

namespace detail {

inline void flatten(const Report& j, const std::string& path, std::vector<std::pair<std::string, const Report*>>& out) {
  if (j.is_object() && !j.empty()) {
    for (const auto& [k, v] : j.items()) flatten(v, path.empty() ? k : path + "." + k, out);
  } else if (j.is_array() && !j.empty()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      const bool named = j[i].is_object() && j[i].contains("name") && j[i]["name"].is_string();
      flatten(j[i], path + (named ? "." + j[i]["name"].get<std::string>() : "[" + std::to_string(i) + "]"), out);
    }
  } else {
    out.emplace_back(path, &j);
  }
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

inline std::string leaf_text(const Report& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_object() || v.is_array()) return "";
  return v.dump();
}

}  // namespace detail

// section,key,value rows; numbers carry the same text as in the JSON form.
inline std::string report_to_csv(const Report& r) {
  std::vector<std::pair<std::string, const Report*>> leaves;
  detail::flatten(r, "", leaves);
  std::string out = "section,key,value\n";
  for (const auto& [path, v] : leaves) {
    const auto dot = path.find_first_of(".[");
    const std::string section = dot == std::string::npos ? path : path.substr(0, dot);
    std::string key = dot == std::string::npos ? "" : path.substr(dot + (path[dot] == '.' ? 1 : 0));
    out += detail::csv_field(section) + "," + detail::csv_field(key) + "," + detail::csv_field(detail::leaf_text(*v)) + "\n";
  }
  return out;
}

inline std::string render_report(const Report& r, const std::string& format) {
  if (format == "csv") return report_to_csv(r);
  return r.dump(2) + "\n";
}

// Numeric and boolean leaves, 4 decimals for reals.
inline std::string summary_table(const Report& r) {
  std::vector<std::pair<std::string, const Report*>> leaves;
  detail::flatten(r, "", leaves);
  std::size_t width = 0;
  for (const auto& [p, v] : leaves)
    if (v->is_number() || v->is_boolean()) width = std::max(width, p.size());
  std::ostringstream os;
  for (const auto& [p, v] : leaves) {
    if (!(v->is_number() || v->is_boolean()) || p.rfind("config.", 0) == 0) continue;
    os << std::left << std::setw(static_cast<int>(width) + 2) << p;
    if (v->is_number_float())
      os << std::fixed << std::setprecision(4) << v->get<double>();
    else
      os << v->dump();
    os << "\n";
  }
  return os.str();
}

inline Report dispatch(const RunConfig& c) {
  if (c.command == "evaluate") return cmd_evaluate(c);
  if (c.command == "analyze") return cmd_analyze(c);
  if (c.command == "agreement") return cmd_agreement(c);
  if (c.command == "kernels-selfcheck") return cmd_kernels_selfcheck(c);
  if (c.command == "validate") return cmd_validate(c);
  throw InputError("unknown command '" + c.command + "'");
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Vietnamese VQA evaluation and analysis toolkit"};
  app.require_subcommand(1);
  RunConfig c;
  std::string chunk = "standard";
  bool no_timestamp = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", c.out, "Write the report to this file");
    sub->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_flag("--no-timestamp", no_timestamp, "Omit generated_at from the report");
  };
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score predictions against gold answers");
  evaluate_cmd->add_option("--dataset", c.dataset, "Dataset JSON")->required();
  evaluate_cmd->add_option("--predictions", c.predictions, "Predictions JSON")->required();
  evaluate_cmd->add_option("--rules", c.rules, "Question-type rules JSON");
  evaluate_cmd->add_option("--beta", c.beta, "ROUGE-L recall weight")->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--max-n", c.max_n, "Largest n-gram order")->check(CLI::Range(1, 8));
  evaluate_cmd->add_flag("--cider-scale10", c.cider_scale10, "Multiply CIDEr by 10");
  evaluate_cmd->add_option("--meteor-chunk-mode", chunk, "METEOR chunk counting")
      ->check(CLI::IsMember({"standard", "per-match", "paper-literal"}));
  evaluate_cmd->add_flag("--groups", c.groups, "Add length-group breakdowns and repeat rate");
  evaluate_cmd->add_flag("--types", c.types, "Add QA-type and question-type breakdowns");
  common(evaluate_cmd);

  auto* analyze_cmd = app.add_subcommand("analyze", "Dataset statistics and linguistic profile");
  analyze_cmd->add_option("--dataset", c.dataset, "Dataset JSON")->required();
  analyze_cmd->add_option("--parses", c.parses, "Dependency parses (CoNLL-U or JSON)");
  analyze_cmd->add_option("--rules", c.rules, "Question-type rules JSON");
  common(analyze_cmd);

  auto* agreement_cmd = app.add_subcommand("agreement", "Fleiss' kappa over annotator ratings");
  agreement_cmd->add_option("--ratings", c.ratings, "Ratings CSV")->required();
  common(agreement_cmd);

  auto* selfcheck_cmd = app.add_subcommand("kernels-selfcheck", "Shape, invariant and gradient checks");
  selfcheck_cmd->add_option("--weights", c.weights, "Weight bundle JSON");
  selfcheck_cmd->add_option("--seed", c.seed, "First seed");
  common(selfcheck_cmd);

  auto* validate_cmd = app.add_subcommand("validate", "Check annotations against the guidelines");
  validate_cmd->add_option("--dataset", c.dataset, "Dataset JSON")->required();
  validate_cmd->add_option("--rules", c.rules, "Question-type rules JSON");
  common(validate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  c.command = app.get_subcommands().front()->get_name();
  c.chunk_mode = chunk == "standard" ? ChunkMode::standard : ChunkMode::per_match;
  c.timestamp = !no_timestamp;

  Report r;
  try {
    r = dispatch(c);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed input: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  const std::string body = render_report(r, c.format);
  if (c.out.empty()) {
    out << body;
  } else {
    std::ofstream f(c.out, std::ios::binary);
    if (!f) {
      err << "error: cannot write " << c.out << "\n";
      return 2;
    }
    f << body;
    out << summary_table(r);
  }
  if (c.command == "kernels-selfcheck" && !r["passed"].get<bool>()) {
    err << "error: kernel self-check failed\n";
    return 1;
  }
  return 0;
}

}  // namespace vqakit
