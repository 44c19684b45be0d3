#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "vqakit/cli.hpp"

using namespace vqakit;

namespace {

struct CliResult {
  int code = 0;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "vqakit");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  CliResult r;
  r.code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string fx(const std::string& name) { return std::string(VQAKIT_FIXTURES) + "/" + name; }

nlohmann::json json_of(const CliResult& r) { return nlohmann::json::parse(r.out); }

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("vqakit_test_" + name)).string();
}

// CSV rows as section.key -> value text
std::map<std::string, std::string> csv_map(const std::string& csv) {
  std::map<std::string, std::string> m;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "section,key,value");
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.find(',', a + 1);
    m[line.substr(0, a) + "." + line.substr(a + 1, b - a - 1)] = line.substr(b + 1);
  }
  return m;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(cli({"--help"}).code, 0);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"evaluate", "--dataset", fx("dataset.json")}).code, 2);
  EXPECT_EQ(cli({"agreement", "--ratings", fx("ratings_2x2.csv"), "--format", "xml"}).code, 2);
  EXPECT_EQ(cli({"evaluate", "--dataset", fx("dataset.json"), "--predictions", fx("predictions.json"), "--max-n",
                 "0"})
                .code,
            2);
  EXPECT_EQ(cli({"agreement", "--ratings", fx("does_not_exist.csv")}).code, 2);
}

TEST(Cli, EvaluateFixture) {
  const auto r = cli({"evaluate", "--dataset", fx("dataset.json"), "--predictions", fx("predictions.json"),
                      "--types", "--groups", "--no-timestamp"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json_of(r);
  EXPECT_EQ(j["tool_version"], "0.1.0");
  EXPECT_EQ(j["command"], "evaluate");
  EXPECT_FALSE(j.contains("generated_at"));
  EXPECT_EQ(j["evaluation"]["predicted"], 5);
  EXPECT_EQ(j["evaluation"]["unpredicted"], 1);
  const auto& m = j["evaluation"]["metrics"];
  for (const char* k : {"bleu_1", "bleu_2", "bleu_3", "bleu_4", "meteor", "rouge_l", "cider"}) {
    ASSERT_TRUE(m.contains(k)) << k;
    EXPECT_GE(m[k].get<double>(), 0.0);
  }
  EXPECT_EQ(j["term_accuracy"]["color"]["correct"], 1);
  EXPECT_EQ(j["term_accuracy"]["color"]["total"], 2);
  EXPECT_EQ(j["term_accuracy"]["quantity"]["correct"], 0);
  EXPECT_EQ(j["by_qa_type"]["text"]["items"], 2);
  EXPECT_EQ(j["by_qa_type"]["non_text"]["items"], 3);
  EXPECT_EQ(j["length_groups"]["answer"]["XL"]["items"], 1);
  EXPECT_TRUE(j["repeat_rate"].contains("overall"));
}

TEST(Cli, EvaluateGoldIsPerfect) {
  const auto r = cli({"evaluate", "--dataset", fx("dataset.json"), "--predictions", fx("predictions_gold.json"),
                      "--no-timestamp"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = json_of(r)["evaluation"]["metrics"];
  for (const char* k : {"bleu_1", "bleu_4", "rouge_l"}) EXPECT_NEAR(m[k].get<double>(), 1.0, 1e-9) << k;
  // the fragmentation penalty keeps an exact match below 1: 1 - 0.5 / u^3 per item
  double expected = 0;
  for (double u : {4.0, 5.0, 6.0, 7.0, 6.0, 16.0}) expected += (1 - 0.5 / (u * u * u)) / 6;
  EXPECT_NEAR(m["meteor"].get<double>(), expected, 1e-12);
}

TEST(Cli, UnknownPredictionIdExitsTwo) {
  const auto r = cli({"evaluate", "--dataset", fx("dataset.json"), "--predictions", fx("predictions_unknown.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("q99"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST(Cli, AnalyzeFixture) {
  const auto r = cli({"analyze", "--dataset", fx("dataset.json"), "--no-timestamp"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json_of(r);
  EXPECT_EQ(j["splits"]["train"]["images"], 2);
  EXPECT_EQ(j["splits"]["train"]["text_qas"], 2);
  EXPECT_EQ(j["splits"]["dev"]["non_text_qas"], 1);
  EXPECT_EQ(j["splits"]["test"]["text_qas"], 1);
  EXPECT_EQ(j["splits"]["total"]["images"], 4);
  EXPECT_EQ(j["splits"]["total"]["qas"], 6);
  EXPECT_EQ(j["length_groups"]["answer"]["S"], 2);
  EXPECT_EQ(j["length_groups"]["answer"]["M"], 3);
  EXPECT_EQ(j["length_groups"]["answer"]["L"], 0);
  EXPECT_EQ(j["length_groups"]["answer"]["XL"], 1);
  EXPECT_EQ(j["length_histograms"]["question"]["7"], 4);
  EXPECT_EQ(j["length_histograms"]["question"]["8"], 1);
  EXPECT_EQ(j["question_types"]["color"], 2);
  EXPECT_EQ(j["question_types"]["quantity"], 2);
  EXPECT_EQ(j["question_types"]["location"], 1);
  EXPECT_EQ(j["question_types"]["untyped"], 1);
  EXPECT_FALSE(j.contains("linguistics"));
}

TEST(Cli, AnalyzeWithParses) {
  const auto r = cli({"analyze", "--dataset", fx("dataset.json"), "--parses", fx("lls.conllu"), "--no-timestamp"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto l = json_of(r)["linguistics"];
  EXPECT_EQ(l["sentences"], 6);
  EXPECT_EQ(l["levels"]["word"], 1);
  EXPECT_EQ(l["levels"]["phrase"], 3);
  EXPECT_EQ(l["levels"]["sentence"], 2);
  EXPECT_EQ(l["complexity"]["words"]["min"], 1.0);
}

TEST(Cli, BadParseNamesTheLine) {
  const auto r = cli({"analyze", "--dataset", fx("dataset.json"), "--parses", fx("lls_bad.conllu")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

TEST(Cli, AgreementFixtures) {
  auto kappa = [](const std::string& file) {
    const auto r = cli({"agreement", "--ratings", fx(file), "--no-timestamp"});
    EXPECT_EQ(r.code, 0) << r.err;
    return json_of(r)["agreement"];
  };
  const auto u = kappa("ratings_unanimous.csv");
  EXPECT_NEAR(u["kappa"].get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(u["percent_agreement"].get<double>(), 100.0, 1e-12);
  EXPECT_EQ(u["annotators"], 3);
  const auto t = kappa("ratings_2x2.csv");
  EXPECT_NEAR(t["kappa"].get<double>(), -1.0 / 3.0, 1e-12);
  EXPECT_NEAR(t["percent_agreement"].get<double>(), 50.0, 1e-12);
  const auto l = kappa("ratings_labels.csv");
  EXPECT_NEAR(l["kappa"].get<double>(), -1.0 / 3.0, 1e-12);
}

TEST(Cli, RowSumViolationExitsTwo) {
  const auto r = cli({"agreement", "--ratings", fx("ratings_rowsum.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("q2"), std::string::npos) << r.err;
  const auto inc = cli({"agreement", "--ratings", fx("ratings_incomplete.csv")});
  EXPECT_EQ(inc.code, 2);
  EXPECT_NE(inc.err.find("q2"), std::string::npos) << inc.err;
}

TEST(Cli, ValidateFixtures) {
  const auto ok = cli({"validate", "--dataset", fx("compliant.json"), "--no-timestamp"});
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(json_of(ok)["validation"]["violation_count"], 0);
  const auto bad = cli({"validate", "--dataset", fx("noncompliant.json"), "--no-timestamp"});
  ASSERT_EQ(bad.code, 0) << bad.err;
  const auto v = json_of(bad)["validation"];
  EXPECT_EQ(v["violation_count"], 5);
  EXPECT_EQ(v["rules"]["unnormalized_prices"], nlohmann::json::array({"n4"}));
}

TEST(Cli, SelfcheckPassesAndHonoursBundles) {
  const auto r = cli({"kernels-selfcheck", "--seed", "3", "--no-timestamp"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json_of(r);
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_EQ(j["kernels"].size(), 10u);

  const std::string path = temp_path("bundle.json");
  std::ofstream(path) << bundle_to_json(selfcheck_bundle(4)).dump();
  const auto with = cli({"kernels-selfcheck", "--weights", path, "--no-timestamp"});
  ASSERT_EQ(with.code, 0) << with.err;
  EXPECT_GT(json_of(with)["bundle_weights_used"].get<int>(), 0);
  std::filesystem::remove(path);
}

TEST(Cli, CorruptedWeightsNameTheWeight) {
  const auto shape = cli({"kernels-selfcheck", "--weights", fx("weights_bad_shape.json")});
  EXPECT_EQ(shape.code, 2);
  EXPECT_NE(shape.err.find("mha.q.weight"), std::string::npos) << shape.err;
  const auto trunc = cli({"kernels-selfcheck", "--weights", fx("weights_truncated.json")});
  EXPECT_EQ(trunc.code, 2);
  EXPECT_NE(trunc.err.find("line 1"), std::string::npos) << trunc.err;
}

TEST(Cli, DeterministicWithoutTimestamp) {
  const std::vector<std::vector<std::string>> commands = {
      {"evaluate", "--dataset", fx("dataset.json"), "--predictions", fx("predictions.json"), "--types", "--groups"},
      {"analyze", "--dataset", fx("dataset.json"), "--parses", fx("lls.conllu")},
      {"agreement", "--ratings", fx("ratings_labels.csv")},
      {"validate", "--dataset", fx("noncompliant.json")},
      {"kernels-selfcheck", "--seed", "9"},
  };
  for (auto args : commands) {
    args.push_back("--no-timestamp");
    for (const char* format : {"json", "csv"}) {
      auto a = args;
      a.insert(a.end(), {"--format", format});
      const auto first = cli(a), second = cli(a);
      ASSERT_EQ(first.code, 0) << first.err;
      EXPECT_EQ(first.out, second.out) << args[0] << " " << format;
    }
  }
  const auto stamped = cli({"agreement", "--ratings", fx("ratings_2x2.csv")});
  EXPECT_TRUE(json_of(stamped).contains("generated_at"));
}

TEST(Cli, CsvCarriesTheJsonNumbers) {
  const std::vector<std::string> base = {"evaluate", "--dataset", fx("dataset.json"), "--predictions",
                                         fx("predictions.json"), "--groups", "--no-timestamp"};
  const auto js = cli(base);
  auto csv_args = base;
  csv_args.insert(csv_args.end(), {"--format", "csv"});
  const auto csv = csv_map(cli(csv_args).out);
  const auto j = json_of(js);
  for (const auto& [k, v] : j["evaluation"]["metrics"].items())
    EXPECT_EQ(csv.at("evaluation.metrics." + k), v.dump()) << k;
  EXPECT_EQ(csv.at("repeat_rate.overall"), j["repeat_rate"]["overall"].dump());
  EXPECT_EQ(csv.at("tool_version."), "0.1.0");
}

TEST(Cli, OutFileAndSummaryTable) {
  const std::string path = temp_path("agreement.json");
  const auto r = cli({"agreement", "--ratings", fx("ratings_2x2.csv"), "--out", path, "--no-timestamp"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("agreement.kappa"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("-0.3333"), std::string::npos) << r.out;
  std::ifstream in(path);
  const auto j = nlohmann::json::parse(in);
  EXPECT_NEAR(j["agreement"]["kappa"].get<double>(), -1.0 / 3.0, 1e-12);
  std::filesystem::remove(path);
}
