#include "medaudit/kgx.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "medaudit/error.hpp"
#include "medaudit/io.hpp"
#include "medaudit/strings.hpp"

namespace medaudit {

namespace {

constexpr std::string_view kUnicodeArrow = "\xe2\x86\x92";  // →

std::string triplet_key(const Triplet& t) {
  return t.head + "\x1f" + t.relation + "\x1f" + t.tail;
}

bool has_paren(std::string_view s) {
  return s.find('(') != std::string_view::npos || s.find(')') != std::string_view::npos;
}

bool has_arrow(std::string_view s) {
  return s.find("->") != std::string_view::npos ||
         s.find(kUnicodeArrow) != std::string_view::npos;
}

}  // namespace

KnowledgeGraph::KnowledgeGraph(const std::vector<Triplet>& triplets) {
  for (const auto& t : triplets) add(t);
}

bool KnowledgeGraph::add(const Triplet& t) {
  for (const auto& existing : triplets_) {
    if (existing == t) return false;
  }
  triplets_.push_back(t);
  return true;
}

std::set<std::string> KnowledgeGraph::entities() const {
  std::set<std::string> out;
  for (const auto& t : triplets_) {
    out.insert(t.head);
    out.insert(t.tail);
  }
  return out;
}

std::string to_string(Attribute a) {
  switch (a) {
    case Attribute::age: return "age";
    case Attribute::gender: return "gender";
    case Attribute::location: return "location";
    case Attribute::symptom: return "symptom";
    case Attribute::history: return "history";
    case Attribute::travel: return "travel";
  }
  return "symptom";
}

Attribute attribute_from_string(const std::string& s) {
  std::string v = lower_ascii(trim(s));
  if (v == "age") return Attribute::age;
  if (v == "gender") return Attribute::gender;
  if (v == "location") return Attribute::location;
  if (v == "symptom" || v == "symptoms") return Attribute::symptom;
  if (v == "history") return Attribute::history;
  if (v == "travel") return Attribute::travel;
  throw ConfigError("unknown rule attribute: " + s);
}

namespace {

// Accumulates one match event: a triplet plus a weight contribution for the
// entity's relevance score.
class ResultBuilder {
 public:
  void event(const std::string& relation, const std::string& entity, double weight) {
    if (seen_triplets_.insert("patient\x1f" + relation + "\x1f" + entity).second) {
      result_.triplets.push_back({"patient", relation, entity});
    }
    auto it = index_.find(entity);
    if (it == index_.end()) {
      index_[entity] = result_.candidates.size();
      result_.candidates.push_back({entity, weight, std::nullopt});
    } else {
      result_.candidates[it->second].score += weight;
    }
  }

  ExtractionResult take() { return std::move(result_); }

 private:
  ExtractionResult result_;
  std::unordered_set<std::string> seen_triplets_;
  std::map<std::string, size_t> index_;
};

void run_rule(const std::string& text, const ExtractionRule& rule, ResultBuilder& out) {
  std::regex re;
  try {
    re.assign(rule.pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw ConfigError("rule pattern does not compile: " + rule.pattern + " (" + e.what() + ")");
  }
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re);
       it != std::sregex_iterator(); ++it) {
    const std::smatch& m = *it;
    std::string entity = (m.size() > 1 && m[1].matched) ? m[1].str() : m.str();
    entity = trim(entity);
    if (entity.empty()) continue;
    out.event(rule.relation, entity, rule.weight);
  }
}

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> kStopwords{
      "that",    "this",    "with",    "from",     "have",   "having",  "what",
      "might",   "been",    "were",    "will",     "would",  "could",   "should",
      "there",   "their",   "they",    "them",     "then",   "than",    "when",
      "where",   "which",   "while",   "about",    "into",   "over",    "some",
      "such",    "very",    "also",    "just",     "only",   "both",    "each",
      "most",    "more",    "other",   "after",    "before", "because", "between",
      "during",  "through", "these",   "those",    "does",   "patient", "years",
      "lives",   "living",  "causes",  "cause",    "symptom", "symptoms",
      "history", "several", "question", "questions",
  };
  return kStopwords;
}

}  // namespace

ExtractionResult extract(const std::string& text, const std::vector<ExtractionRule>& rules) {
  if (rules.empty()) throw ConfigError("extract requires at least one rule");
  ResultBuilder out;
  if (trim(text).empty()) return out.take();
  for (const auto& rule : rules) {
    if (rule.weight < 0) throw ConfigError("rule weight must be nonnegative: " + rule.pattern);
    run_rule(text, rule, out);
  }
  return out.take();
}

ExtractionResult permissive_extract(const std::string& text) {
  ResultBuilder out;
  static const std::regex word("[A-Za-z][A-Za-z'-]*");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), word);
       it != std::sregex_iterator(); ++it) {
    std::string token = it->str();
    if (token.size() < 4) continue;
    if (stopwords().count(lower_ascii(token))) continue;
    out.event("mentions", token, kGenericWeight);
  }
  return out.take();
}

std::vector<RelevanceScore> filter_entities(const std::vector<RelevanceScore>& candidates,
                                            double theta) {
  if (theta < 0) throw ConfigError("theta must be nonnegative");
  std::vector<RelevanceScore> kept;
  for (const auto& c : candidates) {
    if (c.score > theta) {
      RelevanceScore k = c;
      k.threshold_ref = theta;
      kept.push_back(std::move(k));
    }
  }
  return kept;
}

ExtractionResult filter_graph(const ExtractionResult& raw, double theta) {
  ExtractionResult out;
  out.candidates = filter_entities(raw.candidates, theta);
  std::unordered_set<std::string> kept;
  for (const auto& c : out.candidates) kept.insert(c.entity);
  for (const auto& t : raw.triplets) {
    if (kept.count(t.tail)) out.triplets.push_back(t);
  }
  return out;
}

ExtractionComparison compare_extraction(const std::string& text,
                                        const std::vector<ExtractionRule>& rules, double theta) {
  ExtractionComparison cmp;
  cmp.without_rules = permissive_extract(text);

  // Merge: rule matches first, then the generic candidates. Entities matched
  // by both accumulate the generic weight on top of their rule score.
  ExtractionResult merged = extract(text, rules);
  std::unordered_set<std::string> seen_triplets;
  for (const auto& t : merged.triplets) seen_triplets.insert(triplet_key(t));
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < merged.candidates.size(); ++i) index[merged.candidates[i].entity] = i;
  for (const auto& t : cmp.without_rules.triplets) {
    if (seen_triplets.insert(triplet_key(t)).second) merged.triplets.push_back(t);
  }
  for (const auto& c : cmp.without_rules.candidates) {
    auto it = index.find(c.entity);
    if (it == index.end()) {
      index[c.entity] = merged.candidates.size();
      merged.candidates.push_back(c);
    } else {
      merged.candidates[it->second].score += c.score;
    }
  }
  cmp.with_rules = filter_graph(merged, theta);
  return cmp;
}

std::string encode_triplets(const std::vector<Triplet>& triplets) {
  std::string out;
  for (const auto& t : triplets) {
    out += "(" + t.head + " -> " + t.relation + " -> " + t.tail + ")\n";
  }
  return out;
}

std::string encode_triplets(const KnowledgeGraph& graph) {
  return encode_triplets(graph.triplets());
}

namespace {

// Splits on "->" or the unicode arrow. Returns the raw parts.
std::vector<std::string> split_arrows(std::string_view s) {
  std::vector<std::string> parts;
  size_t start = 0, i = 0;
  while (i < s.size()) {
    size_t arrow_len = 0;
    if (s.compare(i, 2, "->") == 0) {
      arrow_len = 2;
    } else if (s.compare(i, kUnicodeArrow.size(), kUnicodeArrow) == 0) {
      arrow_len = kUnicodeArrow.size();
    }
    if (arrow_len > 0) {
      parts.emplace_back(s.substr(start, i - start));
      i += arrow_len;
      start = i;
    } else {
      ++i;
    }
  }
  parts.emplace_back(s.substr(start));
  return parts;
}

std::string strip_outer_braces(std::string s) {
  if (s.size() >= 2 && s.front() == '{' && s.back() == '}') {
    return trim(s.substr(1, s.size() - 2));
  }
  return s;
}

std::optional<Triplet> triplet_from_parts(const std::vector<std::string>& parts) {
  if (parts.size() != 3) return std::nullopt;
  std::string head = strip_outer_braces(trim(parts[0]));
  std::string relation = trim(parts[1]);
  std::string tail = trim(parts[2]);
  if (!tail.empty() && tail.back() == '.') tail = trim(tail.substr(0, tail.size() - 1));
  tail = strip_outer_braces(tail);
  if (head.empty() || relation.empty() || tail.empty()) return std::nullopt;
  if (has_paren(head) || has_paren(relation) || has_paren(tail)) return std::nullopt;
  // tolerate prose-style relations by folding internal whitespace to snake_case
  std::string folded;
  bool in_ws = false;
  for (char c : relation) {
    if (c == ' ' || c == '\t') {
      in_ws = true;
      continue;
    }
    if (in_ws && !folded.empty()) folded.push_back('_');
    in_ws = false;
    folded.push_back(c);
  }
  return Triplet{head, folded, tail};
}

// "1." / "2)" style list numbering; also the bare "-" and "*" bullets.
std::string strip_list_marker(const std::string& line) {
  static const std::regex marker(R"(^\s*(?:\d{1,2}\s*[.)]|[-*])\s*)");
  return std::regex_replace(line, marker, "", std::regex_constants::format_first_only);
}

}  // namespace

ParseOutcome parse_triplets(const std::string& text) {
  ParseOutcome out;
  std::set<std::string> seen;
  auto push = [&](const Triplet& t) {
    if (seen.insert(t.head + '\x1f' + t.relation + '\x1f' + t.tail).second)
      out.triplets.push_back(t);
  };
  static const std::regex paren_group(R"(\(([^()]*)\))");
  for (const std::string& line : split_lines(text)) {
    if (trim(line).empty()) continue;
    int found = 0;
    for (auto it = std::sregex_iterator(line.begin(), line.end(), paren_group);
         it != std::sregex_iterator(); ++it) {
      std::string content = (*it)[1].str();
      if (!has_arrow(content)) continue;
      if (auto t = triplet_from_parts(split_arrows(content))) {
        push(*t);
        ++found;
      }
    }
    if (found == 0) {
      std::string bare = strip_list_marker(line);
      if (has_arrow(bare)) {
        if (auto t = triplet_from_parts(split_arrows(bare))) {
          push(*t);
          ++found;
        }
      }
    }
    if (found == 0) ++out.unparsed_lines;
  }
  return out;
}

std::vector<ExtractionRule> default_rule_pack() {
  const std::string proper = R"([A-Z][A-Za-z'\-]*(?:\s+[A-Z][A-Za-z'\-]*)*)"
                             R"((?:\s+(?:province|city|state|county|district|region))?)";
  std::vector<ExtractionRule> rules;
  rules.push_back({Attribute::age, R"((\d{1,3})\s*(?:years?|yrs?)[\s-]*old)", "has_age", 1.0});
  rules.push_back({Attribute::age, R"(\baged\s+(\d{1,3}))", "has_age", 1.0});
  rules.push_back({Attribute::gender, R"(\b(male|female|man|woman)\b)", "has_gender", 1.0});
  rules.push_back({Attribute::location,
                   R"(\b(?:lives?\s+in|living\s+in|resid(?:es|ing)\s+in|based\s+in)\s+()" +
                       proper + ")",
                   "lives_in", 1.0});
  rules.push_back({Attribute::travel,
                   R"(\b(?:travell?ed\s+to|visited|returned\s+from|went\s+to)\s+()" + proper +
                       ")",
                   "visited", 1.0});
  rules.push_back(
      {Attribute::symptom,
       R"(\b(?:symptoms?\s+of|experiencing|presents?\s+with|presenting\s+with|suffer(?:s|ing)?\s+from|complain(?:s|ing)?\s+of)\s+)"
       R"(([A-Za-z][A-Za-z\s,'\-]*?)(?=\s+(?:and\s+(?:resid|liv|visit|travel|has|had|is|was|who)|lives?\b|living\b|residing\b|who\b)|[.;\n]|$))",
       "has_symptoms", 1.0});
  rules.push_back({Attribute::history,
                   R"(\bhistory\s+of\s+([A-Za-z][A-Za-z\s,'\-]*?)(?=[.;\n]|$))", "has_history",
                   1.0});
  return rules;
}

std::vector<ExtractionRule> load_rule_pack(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("rule pack " + path + " is not valid JSON: " + e.what());
  }
  if (!doc.is_array()) throw ConfigError("rule pack " + path + " must be a JSON array");
  std::vector<ExtractionRule> rules;
  size_t row = 0;
  for (const auto& item : doc) {
    ++row;
    const std::string where = path + " row " + std::to_string(row);
    if (!item.is_object()) throw ConfigError(where + ": expected an object");
    ExtractionRule rule;
    try {
      rule.attribute = attribute_from_string(item.at("attribute").get<std::string>());
      rule.pattern = item.at("pattern").get<std::string>();
      rule.relation = item.at("relation").get<std::string>();
      rule.weight = item.value("weight", 1.0);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
    if (rule.weight < 0) throw ConfigError(where + ": weight must be nonnegative");
    if (trim(rule.relation).empty() || has_arrow(rule.relation) || has_paren(rule.relation) ||
        rule.relation.find(' ') != std::string::npos) {
      throw ConfigError(where + ": relation must be a nonempty snake_case token");
    }
    try {
      std::regex probe(rule.pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw ConfigError(where + ": pattern does not compile: " + e.what());
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

}  // namespace medaudit
