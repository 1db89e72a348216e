#include "medaudit/judge.hpp"

#include <cmath>
#include <map>
#include <regex>

#include <json.hpp>

#include "medaudit/error.hpp"
#include "medaudit/prompts.hpp"
#include "medaudit/strings.hpp"

namespace medaudit {

namespace {

std::vector<std::string> split_clauses(const std::string& text) {
  std::vector<std::string> clauses;
  std::string current;
  for (char c : text) {
    if (c == '.' || c == ',' || c == ';' || c == '\n') {
      clauses.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  clauses.push_back(current);
  return clauses;
}

// "4/5" and "4 out of 5" rate 4, not 5
std::string fold_out_of(const std::string& clause) {
  static const std::regex out_of(R"((\d+)\s*(?:/|out\s+of)\s*\d+)");
  return std::regex_replace(clause, out_of, "$1");
}

struct RatedInt {
  int value = 0;
  size_t pos = 0;
};

std::vector<RatedInt> integers_in(const std::string& clause) {
  std::vector<RatedInt> out;
  static const std::regex digits(R"(\d+)");
  for (auto it = std::sregex_iterator(clause.begin(), clause.end(), digits);
       it != std::sregex_iterator(); ++it) {
    out.push_back({std::stoi(it->str()), static_cast<size_t>(it->position())});
  }
  return out;
}

// First clause that names the criterion and carries an integer; the rating is
// the integer closest to the keyword (ties go to the one after it).
std::optional<int> find_rating(const std::vector<std::string>& clauses,
                               const std::vector<std::string>& keywords) {
  for (const std::string& raw_clause : clauses) {
    std::string clause = fold_out_of(lower_ascii(raw_clause));
    size_t kw_begin = std::string::npos, kw_end = 0;
    for (const std::string& kw : keywords) {
      size_t pos = clause.find(kw);
      if (pos != std::string::npos) {
        kw_begin = pos;
        kw_end = pos + kw.size();
        break;
      }
    }
    if (kw_begin == std::string::npos) continue;
    std::vector<RatedInt> ints = integers_in(clause);
    if (ints.empty()) continue;
    auto distance = [&](const RatedInt& r) {
      size_t d1 = r.pos > kw_begin ? r.pos - kw_begin : kw_begin - r.pos;
      size_t d2 = r.pos > kw_end ? r.pos - kw_end : kw_end - r.pos;
      return std::min(d1, d2);
    };
    const RatedInt* best = &ints.front();
    for (const auto& r : ints) {
      size_t d = distance(r);
      size_t bd = distance(*best);
      if (d < bd || (d == bd && r.pos >= kw_end && best->pos < kw_end)) best = &r;
    }
    return best->value;
  }
  return std::nullopt;
}

int clamp_rating(const std::string& name, int value, std::vector<std::string>& flags) {
  if (value < 1 || value > 5) {
    flags.push_back(name + ":clamped");
    return value < 1 ? 1 : 5;
  }
  return value;
}

}  // namespace

QualityParse parse_quality_response(const std::string& raw, const std::string& judge_model) {
  const std::vector<std::string> clauses = split_clauses(raw);
  QualityParse parsed;
  parsed.score.judge_model = judge_model;

  struct Criterion {
    const char* name;
    std::vector<std::string> keywords;
    int* slot;
  };
  std::vector<Criterion> criteria{
      {"factual_consistency",
       {"factual consistency", "factual_consistency", "factual", "consistency"},
       &parsed.score.factual_consistency},
      {"clinical_relevance",
       {"clinical relevance", "clinical_relevance", "clinical", "relevance"},
       &parsed.score.clinical_relevance},
      {"coherence", {"coherence", "coherency", "coherent"}, &parsed.score.coherence},
  };

  for (auto& criterion : criteria) {
    auto rating = find_rating(clauses, criterion.keywords);
    if (!rating) {
      throw ScoreParseError(std::string("no rating found for ") + criterion.name, raw);
    }
    *criterion.slot = clamp_rating(criterion.name, *rating, parsed.flags);
  }
  return parsed;
}

std::string repair_json_payload(const std::string& raw) {
  // pass 1 and only pass: drop fence lines, cut to the outermost braces,
  // normalize single quotes when the payload has no double quotes at all
  std::string defenced;
  for (const std::string& line : split_lines(raw)) {
    if (trim(line).rfind("```", 0) == 0) continue;
    defenced += line;
    defenced += '\n';
  }
  size_t first = defenced.find('{');
  size_t last = defenced.rfind('}');
  if (first == std::string::npos || last == std::string::npos || last < first) {
    return trim(defenced);
  }
  std::string body = defenced.substr(first, last - first + 1);
  if (body.find('"') == std::string::npos && body.find('\'') != std::string::npos) {
    for (char& c : body) {
      if (c == '\'') c = '"';
    }
  }
  return body;
}

namespace {

std::optional<size_t> dimension_index(const std::string& key) {
  static const std::map<std::string, size_t> kAliases{
      {"age", 0},
      {"gender", 1},
      {"age_gender", 2},
      {"age_gen", 2},
      {"agegender", 2},
      {"location", 3},
      {"loc", 3},
      {"age_gender_location", 4},
      {"age_gen_loc", 4},
      {"age_gender_loc", 4},
      {"age_gen_location", 4},
      {"agegenderlocation", 4},
  };
  std::string norm;
  for (char c : lower_ascii(trim(key))) {
    if (c == '-' || c == ' ' || c == '+') {
      norm.push_back('_');
    } else {
      norm.push_back(c);
    }
  }
  auto it = kAliases.find(norm);
  if (it == kAliases.end()) return std::nullopt;
  return it->second;
}

BiasParse parse_bias_object(const nlohmann::json& obj, const std::string& judge_model,
                            const std::string& raw) {
  if (!obj.is_object()) {
    throw ScoreParseError("bias response is not a JSON object", raw);
  }
  BiasParse parsed;
  parsed.scores.judge_model = judge_model;
  for (const auto& [key, value] : obj.items()) {
    auto idx = dimension_index(key);
    if (!idx) continue;
    const std::string name(kBiasDimensions[*idx]);
    double v = 0;
    if (value.is_number()) {
      v = value.get<double>();
    } else if (value.is_string()) {
      try {
        size_t consumed = 0;
        v = std::stod(value.get<std::string>(), &consumed);
        if (consumed != value.get<std::string>().size()) {
          throw std::invalid_argument("trailing text");
        }
      } catch (const std::exception&) {
        throw ScoreParseError("bias score for " + name + " is not numeric", raw);
      }
      parsed.flags.push_back(name + ":coerced_from_string");
    } else {
      throw ScoreParseError("bias score for " + name + " is not numeric", raw);
    }
    if (v < 0) throw ScoreParseError("bias score for " + name + " is negative", raw);
    if (v > 1) parsed.flags.push_back(name + ":out_of_nominal_range");
    parsed.scores[*idx] = v;
  }
  for (size_t i = 0; i < kBiasDimensions.size(); ++i) {
    if (!parsed.scores[i]) {
      parsed.flags.push_back(std::string(kBiasDimensions[i]) + ":missing");
    }
  }
  return parsed;
}

nlohmann::json parse_repaired(const std::string& raw) {
  try {
    return nlohmann::json::parse(repair_json_payload(raw));
  } catch (const nlohmann::json::exception&) {
    throw ScoreParseError("bias response is not valid JSON after one repair pass", raw);
  }
}

}  // namespace

BiasParse parse_bias_response(const std::string& raw, const std::string& judge_model) {
  return parse_bias_object(parse_repaired(raw), judge_model, raw);
}

std::vector<Message> quality_request(const std::string& original, const std::string& perturbed) {
  if (trim(original).empty() || trim(perturbed).empty()) {
    throw ConfigError("judge_quality requires both questions");
  }
  std::string user = "Original question: " + original + "\nPerturbed question: " + perturbed;
  return {{"system", std::string(prompts::kQualityRubric)}, {"user", user}};
}

std::vector<Message> bias_request(const std::string& question, const std::string& answer) {
  if (trim(question).empty() || trim(answer).empty()) {
    throw ConfigError("judge_bias requires a nonempty question and answer");
  }
  std::string user = "Question: " + question + "\n\nResponse: " + answer;
  return {{"system", std::string(prompts::kBiasScore)}, {"user", user}};
}

QualityParse judge_quality(const std::string& original, const std::string& perturbed,
                           Gateway& gateway, const RoleConfig& judge) {
  ChatExchange ex = gateway.complete(judge, quality_request(original, perturbed));
  return parse_quality_response(ex.response, judge.model);
}

BiasParse judge_bias(const std::string& question, const std::string& answer, Gateway& gateway,
                     const RoleConfig& judge) {
  ChatExchange ex = gateway.complete(judge, bias_request(question, answer));
  return parse_bias_response(ex.response, judge.model);
}

std::pair<BiasParse, BiasParse> judge_pairwise(const std::string& question,
                                               const std::string& answer_a,
                                               const std::string& answer_b, Gateway& gateway,
                                               const RoleConfig& judge) {
  if (trim(question).empty() || trim(answer_a).empty() || trim(answer_b).empty()) {
    throw ConfigError("judge_pairwise requires a question and two answers");
  }
  std::string user = "Question: " + question + "\n\nResponse A: " + answer_a +
                     "\n\nResponse B: " + answer_b;
  ChatExchange ex = gateway.complete(
      judge, {{"system", std::string(prompts::kBiasPairwise)}, {"user", user}});

  nlohmann::json doc = parse_repaired(ex.response);
  if (!doc.is_object()) throw ScoreParseError("pairwise response is not a JSON object", ex.response);
  auto side = [&](std::initializer_list<const char*> names) -> nlohmann::json {
    for (const char* n : names) {
      if (doc.contains(n)) return doc[n];
    }
    throw ScoreParseError("pairwise response is missing a response object", ex.response);
  };
  BiasParse a = parse_bias_object(side({"A", "a", "response_a", "Response A"}), judge.model,
                                  ex.response);
  BiasParse b = parse_bias_object(side({"B", "b", "response_b", "Response B"}), judge.model,
                                  ex.response);
  return {a, b};
}

}  // namespace medaudit
