#pragma once

// File formats: dataset / prediction JSON, question-type rule JSON,
// dependency parses (CoNLL-U or JSON), annotator ratings CSV and weight
// bundles.

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vqakit/agreement.hpp"
#include "vqakit/analysis.hpp"
#include "vqakit/error.hpp"
#include "vqakit/linguistics.hpp"
#include "vqakit/matrix.hpp"
#include "vqakit/text.hpp"

namespace vqakit {

using Json = nlohmann::json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(what + ": malformed JSON at line " + std::to_string(line_of_offset(text, e.byte)) +
                     ": " + e.what());
  }
}

inline std::string id_string(const Json& j, const std::string& what) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw InputError(what + " must be a string or integer");
}

// Strings are normalized and whitespace-split; token arrays are taken as
// pre-segmented, each token normalized in place.
inline std::string raw_text(const Json& j) {
  if (j.is_string()) return j.get<std::string>();
  std::string out;
  if (j.is_array())
    for (const auto& t : j)
      if (t.is_string()) out += (out.empty() ? "" : " ") + t.get<std::string>();
  return out;
}

inline TokenSeq text_field(const Json& j, const std::string& what) {
  if (j.is_string()) return tokenize(normalize(j.get<std::string>()));
  if (j.is_array()) {
    TokenSeq seq;
    for (const auto& t : j) {
      if (!t.is_string()) throw InputError(what + ": token arrays must hold strings");
      for (auto& tok : tokenize(normalize(t.get<std::string>())).tokens) seq.tokens.push_back(std::move(tok));
    }
    return seq;
  }
  throw InputError(what + " must be a string or an array of tokens");
}

inline QaType parse_qa_type(const Json& j, const std::string& where) {
  if (j.is_boolean()) return j.get<bool>() ? QaType::text : QaType::non_text;
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "text" || s == "text_qa" || s == "text-qa") return QaType::text;
    if (s == "non_text" || s == "non-text" || s == "nontext" || s == "non_text_qa" || s == "non-text-qa")
      return QaType::non_text;
  }
  throw InputError(where + ": qa_type must be \"text\" or \"non_text\"");
}

inline Split parse_split(const Json& j, const std::string& where) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "train") return Split::train;
    if (s == "dev" || s == "val" || s == "validation") return Split::dev;
    if (s == "test") return Split::test;
  }
  throw InputError(where + ": split must be train, dev or test");
}

inline const Json& field(const Json& obj, std::initializer_list<const char*> names, const std::string& where) {
  for (const char* n : names)
    if (auto it = obj.find(n); it != obj.end()) return *it;
  throw InputError(where + ": missing field '" + std::string(*names.begin()) + "'");
}

}  // namespace detail

// {"annotations": [{qa_id, image_id, question, answer, qa_type, split}], "images": [...]}
inline std::vector<QARecord> parse_dataset(const std::string& text) {
  const Json doc = detail::parse_json(text, "dataset");
  if (!doc.is_object() || !doc.contains("annotations") || !doc["annotations"].is_array())
    throw InputError("dataset: expected an object with an \"annotations\" array");
  std::vector<QARecord> out;
  std::size_t idx = 0;
  for (const auto& a : doc["annotations"]) {
    const std::string where = "dataset annotation " + std::to_string(idx++);
    if (!a.is_object()) throw InputError(where + ": expected an object");
    QARecord r;
    r.qa_id = detail::id_string(detail::field(a, {"qa_id", "id"}, where), where + " qa_id");
    r.image_id = detail::id_string(detail::field(a, {"image_id"}, where), where + " image_id");
    const Json& q = detail::field(a, {"question"}, where);
    const Json& ans = detail::field(a, {"answer"}, where);
    r.question = detail::text_field(q, where + " question");
    r.answer = detail::text_field(ans, where + " answer");
    r.raw_question = detail::raw_text(q);
    r.raw_answer = detail::raw_text(ans);
    r.qa_type = detail::parse_qa_type(detail::field(a, {"qa_type"}, where), where);
    r.split = detail::parse_split(detail::field(a, {"split"}, where), where);
    if (r.question.empty() || r.answer.empty())
      throw InputError(where + " (" + r.qa_id + "): question and answer must be non-empty");
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<QARecord> load_dataset(const std::string& path) { return parse_dataset(read_file(path)); }

// [{qa_id, answer}]
inline std::vector<Prediction> parse_predictions(const std::string& text) {
  const Json doc = detail::parse_json(text, "predictions");
  if (!doc.is_array()) throw InputError("predictions: expected a JSON array");
  std::vector<Prediction> out;
  std::size_t idx = 0;
  for (const auto& p : doc) {
    const std::string where = "prediction " + std::to_string(idx++);
    if (!p.is_object()) throw InputError(where + ": expected an object");
    Prediction pred;
    pred.qa_id = detail::id_string(detail::field(p, {"qa_id", "id"}, where), where + " qa_id");
    pred.answer = detail::text_field(detail::field(p, {"answer"}, where), where + " answer");
    out.push_back(std::move(pred));
  }
  return out;
}

inline std::vector<Prediction> load_predictions(const std::string& path) {
  return parse_predictions(read_file(path));
}

// ---------------------------------------------------------------------------
// Question-type rules

inline const char* default_rules_json() {
  return R"json({
  "types": [
    {
      "name": "color",
      "patterns": ["(^| )màu( |$)"],
      "lexicon": {
        "black": ["đen"],
        "white": ["trắng"],
        "red": ["đỏ"],
        "orange": ["cam"],
        "yellow": ["vàng"],
        "green": ["xanh lá", "xanh lá cây", "xanh lục"],
        "blue": ["xanh dương", "xanh biển", "xanh nước biển", "xanh lam", "xanh"],
        "sky blue": ["xanh da trời"],
        "purple": ["tím"],
        "pink": ["hồng"],
        "brown": ["nâu"],
        "gray": ["xám", "ghi"]
      }
    },
    {
      "name": "quantity",
      "patterns": ["(^| )bao nhiêu( |$)", "(^| )mấy( |$)"],
      "lexicon": {
        "1": ["một", "1"],
        "2": ["hai", "2"],
        "3": ["ba", "3"],
        "4": ["bốn", "4"],
        "5": ["năm", "5"],
        "6": ["sáu", "6"],
        "7": ["bảy", "7"],
        "8": ["tám", "8"],
        "9": ["chín", "9"],
        "10": ["mười", "10"]
      }
    },
    {
      "name": "location",
      "patterns": ["(^| )(ở|tại) đâu( |$)", "(^| )(nơi|chỗ|vị trí|phía|bên|hướng) nào( |$)", "(^| )đâu( |$)"],
      "lexicon": {}
    }
  ]
}
)json";
}

inline QuestionTypeRules parse_rules(const std::string& text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::ordered_json::parse_error& e) {
    throw InputError("rules: malformed JSON at line " + std::to_string(detail::line_of_offset(text, e.byte)) +
                     ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("types") || !doc["types"].is_array())
    throw InputError("rules: expected an object with a \"types\" array");
  std::vector<TypeRule> rules;
  for (const auto& t : doc["types"]) {
    TypeRule r;
    if (!t.contains("name") || !t["name"].is_string()) throw InputError("rules: every type needs a name");
    r.name = t["name"].get<std::string>();
    if (!t.contains("patterns") || !t["patterns"].is_array())
      throw InputError("rules: type '" + r.name + "' needs a patterns array");
    for (const auto& p : t["patterns"]) r.patterns.push_back(p.get<std::string>());
    if (t.contains("lexicon")) {
      for (const auto& [canonical, forms] : t["lexicon"].items()) {
        std::vector<std::string> fs;
        for (const auto& f : forms) fs.push_back(f.get<std::string>());
        r.lexicon.emplace_back(canonical, std::move(fs));
      }
    }
    rules.push_back(std::move(r));
  }
  return QuestionTypeRules(std::move(rules));
}

inline QuestionTypeRules default_rules() { return parse_rules(default_rules_json()); }

inline QuestionTypeRules load_rules(const std::string& path) { return parse_rules(read_file(path)); }

// ---------------------------------------------------------------------------
// Dependency parses

// CoNLL-U (10 columns) or the 5-column subset ID FORM UPOS HEAD DEPREL.
// Comment lines, multiword ranges and empty nodes are skipped.
inline std::vector<DependencyParse> parse_conllu(const std::string& text) {
  std::vector<DependencyParse> out;
  DependencyParse cur;
  std::size_t sentence_line = 0, line_no = 0;
  auto flush = [&] {
    if (cur.tokens.empty()) return;
    try {
      validate_parse(cur);
    } catch (const InputError& e) {
      throw InputError("parse file: sentence starting at line " + std::to_string(sentence_line) + ": " + e.what());
    }
    out.push_back(std::move(cur));
    cur = {};
  };
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    const std::string where = "parse file line " + std::to_string(line_no);
    std::size_t form = 1, upos = 2, head = 3, deprel = 4;
    if (cols.size() >= 10) {
      upos = 3;
      head = 6;
      deprel = 7;
    } else if (cols.size() != 5) {
      throw InputError(where + ": expected 10 (CoNLL-U) or 5 tab-separated columns, got " +
                       std::to_string(cols.size()));
    }
    if (cols[0].find_first_of("-.") != std::string::npos) continue;
    if (cur.tokens.empty()) sentence_line = line_no;
    DepToken tok;
    try {
      std::size_t pos = 0;
      const int id = std::stoi(cols[0], &pos);
      if (pos != cols[0].size() || id != static_cast<int>(cur.tokens.size()) + 1)
        throw InputError(where + ": token id " + cols[0] + " out of sequence");
      tok.head = std::stoi(cols[head], &pos);
      if (pos != cols[head].size()) throw std::invalid_argument("head");
    } catch (const InputError&) {
      throw;
    } catch (const std::exception&) {
      throw InputError(where + ": non-integer ID or HEAD");
    }
    tok.form = cols[form];
    tok.upos = cols[upos];
    tok.deprel = cols[deprel];
    cur.tokens.push_back(std::move(tok));
  }
  flush();
  return out;
}

// [[{form, upos, head, deprel}, ...], ...] or [{"tokens": [...]}, ...]
inline std::vector<DependencyParse> parse_parse_json(const std::string& text) {
  const Json doc = detail::parse_json(text, "parse file");
  if (!doc.is_array()) throw InputError("parse file: expected a JSON array of sentences");
  std::vector<DependencyParse> out;
  for (std::size_t s = 0; s < doc.size(); ++s) {
    const std::string where = "parse file sentence " + std::to_string(s);
    const Json& toks = doc[s].is_object() && doc[s].contains("tokens") ? doc[s]["tokens"] : doc[s];
    if (!toks.is_array()) throw InputError(where + ": expected a token array");
    DependencyParse p;
    for (const auto& t : toks) {
      if (!t.is_object() || !t.contains("head") || !t["head"].is_number_integer())
        throw InputError(where + ": every token needs an integer head");
      p.tokens.push_back({t.value("form", ""), t.value("upos", ""), t["head"].get<int>(), t.value("deprel", "")});
    }
    try {
      validate_parse(p);
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<DependencyParse> load_parses(const std::string& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') return parse_parse_json(text);
  return parse_conllu(text);
}

// ---------------------------------------------------------------------------
// Ratings

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

// Either per-annotator labels (header annotator_id,item_id,label) or an
// aggregated count matrix (header item_id,<category>,...). For count
// matrices the annotator count is the largest row sum; shorter rows are
// rejected as incomplete.
inline RatingMatrix parse_ratings(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw InputError("ratings file is empty");
  const auto& header = rows.front();
  if (header.size() == 3 && header[0] == "annotator_id" && header[1] == "item_id" && header[2] == "label") {
    std::vector<Rating> ratings;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() != 3)
        throw InputError("ratings line " + std::to_string(i + 1) + ": expected 3 fields");
      ratings.push_back({rows[i][0], rows[i][1], rows[i][2]});
    }
    return aggregate_ratings(ratings);
  }
  if (header.empty() || header[0] != "item_id" || header.size() < 3)
    throw InputError("ratings header must be 'annotator_id,item_id,label' or 'item_id,<category>,<category>...'");
  std::vector<std::string> categories(header.begin() + 1, header.end());
  std::vector<std::vector<int>> counts;
  std::vector<std::string> ids;
  int annotators = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != header.size())
      throw InputError("ratings line " + std::to_string(i + 1) + ": expected " + std::to_string(header.size()) + " fields");
    std::vector<int> row;
    int sum = 0;
    for (std::size_t j = 1; j < rows[i].size(); ++j) {
      try {
        row.push_back(std::stoi(rows[i][j]));
      } catch (const std::exception&) {
        throw InputError("ratings line " + std::to_string(i + 1) + ": non-integer count");
      }
      sum += row.back();
    }
    annotators = std::max(annotators, sum);
    ids.push_back(rows[i][0]);
    counts.push_back(std::move(row));
  }
  return RatingMatrix(std::move(counts), annotators, std::move(ids), std::move(categories));
}

inline RatingMatrix load_ratings(const std::string& path) { return parse_ratings(read_file(path)); }

// ---------------------------------------------------------------------------
// Weight bundles: {"name": {"rows": r, "cols": c, "data": [...]}, ...}

using WeightBundle = std::map<std::string, Matrix>;

inline Json bundle_to_json(const WeightBundle& b) {
  Json j = Json::object();
  for (const auto& [name, m] : b) j[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
  return j;
}

inline WeightBundle parse_weight_bundle(const std::string& text) {
  const Json doc = detail::parse_json(text, "weight bundle");
  if (!doc.is_object()) throw InputError("weight bundle: expected a JSON object of named matrices");
  WeightBundle b;
  for (const auto& [name, m] : doc.items()) {
    if (!m.is_object() || !m.contains("rows") || !m.contains("cols") || !m.contains("data"))
      throw InputError("weight '" + name + "': expected rows, cols and data");
    std::vector<double> data = m["data"].get<std::vector<double>>();
    const auto rows = m["rows"].get<std::size_t>(), cols = m["cols"].get<std::size_t>();
    if (data.size() != rows * cols)
      throw ShapeError("weight '" + name + "': data length " + std::to_string(data.size()) +
                       " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
    Matrix mat(rows, cols, std::move(data));
    if (!mat.all_finite()) throw InputError("weight '" + name + "' has non-finite values");
    b.emplace(name, std::move(mat));
  }
  return b;
}

inline WeightBundle load_weight_bundle(const std::string& path) { return parse_weight_bundle(read_file(path)); }

}  // namespace vqakit
