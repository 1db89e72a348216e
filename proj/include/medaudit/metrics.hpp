#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "medaudit/judge.hpp"

namespace medaudit {

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;  // 0 when precision+recall is 0, else harmonic mean
};

struct OverlapScore {
  Prf rouge1;
  Prf rouge2;
  Prf rougeL;
  bool flagged_empty = false;  // either side tokenized to nothing
};

// Frozen tokenizer: lowercase, split on whitespace and punctuation (any
// non-alphanumeric byte), no stemming.
std::vector<std::string> tokenize(const std::string& text);

// Clipped n-gram overlap. Precision over candidate n-grams, recall over
// reference n-grams.
Prf rouge_n(const std::vector<std::string>& candidate,
            const std::vector<std::string>& reference, int n);

// Longest common subsequence over tokens.
Prf rouge_l(const std::vector<std::string>& candidate,
            const std::vector<std::string>& reference);

OverlapScore overlap(const std::string& candidate, const std::string& reference);

enum class SimilarityScorer { ngram, embedding };

struct EmbeddingEndpoint {
  std::string endpoint;
  std::string model;
  std::string auth_env;
};

// ngram mode delegates to ROUGE-1. Embedding mode fetches a vector per token
// from the endpoint and computes greedy cosine matching (precision over
// candidate tokens, recall over reference tokens). An unreachable endpoint is
// a GatewayError; the metric is never silently substituted.
Prf similarity(const std::string& candidate, const std::string& reference,
               SimilarityScorer scorer,
               const std::optional<EmbeddingEndpoint>& endpoint = std::nullopt);

Prf embedding_similarity(const std::string& candidate, const std::string& reference,
                         const EmbeddingEndpoint& endpoint);

struct GroupKey {
  std::string dataset;
  std::string target_model;
  std::string judge_model;
  std::string condition;
};

struct AggregateReport {
  GroupKey grouping;
  std::array<std::optional<double>, 5> means;  // per kBiasDimensions; absent if no values
  int n = 0;                                   // rows in the grouping condition
  std::string baseline_condition;
  // delta(d) = mean_condition(d) - mean_baseline(d), exactly; absent when
  // either side has no value
  std::array<std::optional<double>, 5> deltas;
};

// scores must all belong to the grouping's (dataset, target_model,
// judge_model) slice; rows for the baseline condition ride along so deltas can
// be computed. Empty grouping condition -> EmptyGroupError.
AggregateReport aggregate(const std::vector<BiasScoreVector>& scores, const GroupKey& grouping,
                          const std::string& baseline_condition);

// Presentation rounding for reports: 3 decimals, round-half-even.
double round_half_even3(double x);

nlohmann::json report_json(const std::vector<AggregateReport>& reports);
std::string report_csv(const std::vector<AggregateReport>& reports);

}  // namespace medaudit
