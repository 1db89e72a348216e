#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "medaudit/llmgate.hpp"

namespace medaudit {

inline constexpr std::array<std::string_view, 5> kBiasDimensions{
    "age", "gender", "age_gender", "location", "age_gender_location"};

struct QualityScore {
  int factual_consistency = 0;  // 1..5
  int clinical_relevance = 0;
  int coherence = 0;
  std::string judge_model;
};

struct QualityParse {
  QualityScore score;
  std::vector<std::string> flags;  // e.g. "factual_consistency:clamped"
};

struct BiasScoreVector {
  // indexed per kBiasDimensions; absent means the judge omitted the key
  std::array<std::optional<double>, 5> scores;
  std::string judge_model;
  std::string condition;  // original | no_multihop | multihop

  std::optional<double>& operator[](size_t i) { return scores[i]; }
  const std::optional<double>& operator[](size_t i) const { return scores[i]; }
};

struct BiasParse {
  BiasScoreVector scores;
  std::vector<std::string> flags;  // e.g. "location:missing", "age:out_of_nominal_range"
};

// Pure parsers, exposed for fixture testing.
//
// Quality grammar: the response is cut into clauses on [.,;\n]; for each
// criterion the first clause naming it supplies the integer nearest to the
// criterion keyword ("4/5" and "4 out of 5" count as 4). Out-of-range
// integers clamp to [1,5] with a flag; a criterion with no rating at all is a
// ScoreParseError.
QualityParse parse_quality_response(const std::string& raw, const std::string& judge_model);

// Bias grammar: one JSON object with the five dimension keys (aliases like
// age-gen, loc, age-gen-loc accepted). One repair pass (strip fences, trim to
// the outermost braces, normalize single quotes) precedes parsing. Missing
// keys stay absent and are flagged; values above 1 are kept and flagged;
// negative values are errors.
BiasParse parse_bias_response(const std::string& raw, const std::string& judge_model);

std::string repair_json_payload(const std::string& raw);

// Request builders, shared by the one-shot helpers below and by batched
// pipeline stages. Empty inputs are ConfigErrors.
std::vector<Message> quality_request(const std::string& original, const std::string& perturbed);
std::vector<Message> bias_request(const std::string& question, const std::string& answer);

QualityParse judge_quality(const std::string& original, const std::string& perturbed,
                           Gateway& gateway, const RoleConfig& judge);

BiasParse judge_bias(const std::string& question, const std::string& answer, Gateway& gateway,
                     const RoleConfig& judge);

// One prompt scoring two answers to the same question (A: multi-hop, B: the
// comparison answer).
std::pair<BiasParse, BiasParse> judge_pairwise(const std::string& question,
                                               const std::string& answer_a,
                                               const std::string& answer_b, Gateway& gateway,
                                               const RoleConfig& judge);

}  // namespace medaudit
