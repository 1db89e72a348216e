#include "medaudit/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "medaudit/error.hpp"

namespace medaudit {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

Prf make_prf(double precision, double recall) {
  Prf out;
  out.precision = precision;
  out.recall = recall;
  out.f1 = (precision + recall > 0) ? 2 * precision * recall / (precision + recall) : 0.0;
  return out;
}

std::unordered_map<std::string, int> ngram_counts(const std::vector<std::string>& tokens,
                                                  int n) {
  std::unordered_map<std::string, int> counts;
  if (n <= 0 || tokens.size() < static_cast<size_t>(n)) return counts;
  for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
    std::string gram = tokens[i];
    for (size_t k = 1; k < static_cast<size_t>(n); ++k) {
      gram += '\x1f';
      gram += tokens[i + k];
    }
    ++counts[gram];
  }
  return counts;
}

}  // namespace

Prf rouge_n(const std::vector<std::string>& candidate,
            const std::vector<std::string>& reference, int n) {
  auto cand = ngram_counts(candidate, n);
  auto ref = ngram_counts(reference, n);
  size_t cand_total = 0, ref_total = 0;
  for (const auto& [gram, c] : cand) cand_total += static_cast<size_t>(c);
  for (const auto& [gram, c] : ref) ref_total += static_cast<size_t>(c);
  if (cand_total == 0 || ref_total == 0) return {};

  size_t clipped = 0;
  for (const auto& [gram, c] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) clipped += static_cast<size_t>(std::min(c, it->second));
  }
  return make_prf(static_cast<double>(clipped) / static_cast<double>(cand_total),
                  static_cast<double>(clipped) / static_cast<double>(ref_total));
}

Prf rouge_l(const std::vector<std::string>& candidate,
            const std::vector<std::string>& reference) {
  const size_t nc = candidate.size(), nr = reference.size();
  if (nc == 0 || nr == 0) return {};
  // classic O(nc*nr) LCS table, rolling rows
  std::vector<size_t> prev(nr + 1, 0), curr(nr + 1, 0);
  for (size_t i = 1; i <= nc; ++i) {
    for (size_t j = 1; j <= nr; ++j) {
      if (candidate[i - 1] == reference[j - 1]) {
        curr[j] = prev[j - 1] + 1;
      } else {
        curr[j] = std::max(prev[j], curr[j - 1]);
      }
    }
    std::swap(prev, curr);
  }
  double lcs = static_cast<double>(prev[nr]);
  return make_prf(lcs / static_cast<double>(nc), lcs / static_cast<double>(nr));
}

OverlapScore overlap(const std::string& candidate, const std::string& reference) {
  OverlapScore out;
  std::vector<std::string> cand = tokenize(candidate);
  std::vector<std::string> ref = tokenize(reference);
  if (cand.empty() || ref.empty()) {
    out.flagged_empty = true;
    return out;
  }
  out.rouge1 = rouge_n(cand, ref, 1);
  out.rouge2 = rouge_n(cand, ref, 2);
  out.rougeL = rouge_l(cand, ref);
  return out;
}

Prf similarity(const std::string& candidate, const std::string& reference,
               SimilarityScorer scorer, const std::optional<EmbeddingEndpoint>& endpoint) {
  if (scorer == SimilarityScorer::ngram) {
    return overlap(candidate, reference).rouge1;
  }
  if (!endpoint) {
    throw ConfigError("embedding similarity requires a configured vector endpoint");
  }
  return embedding_similarity(candidate, reference, *endpoint);
}

AggregateReport aggregate(const std::vector<BiasScoreVector>& scores, const GroupKey& grouping,
                          const std::string& baseline_condition) {
  AggregateReport report;
  report.grouping = grouping;
  report.baseline_condition = baseline_condition;

  std::array<double, 5> sum{}, base_sum{};
  std::array<int, 5> count{}, base_count{};
  int n = 0;
  bool baseline_seen = false;
  for (const auto& row : scores) {
    const bool in_group = row.condition == grouping.condition;
    const bool in_baseline = row.condition == baseline_condition;
    if (in_group) ++n;
    if (in_baseline) baseline_seen = true;
    if (!in_group && !in_baseline) continue;
    for (size_t d = 0; d < kBiasDimensions.size(); ++d) {
      if (!row[d]) continue;
      if (in_group) {
        sum[d] += *row[d];
        ++count[d];
      }
      if (in_baseline) {
        base_sum[d] += *row[d];
        ++base_count[d];
      }
    }
  }
  if (n == 0) {
    throw EmptyGroupError("no scores for condition \"" + grouping.condition + "\"");
  }
  report.n = n;
  for (size_t d = 0; d < kBiasDimensions.size(); ++d) {
    if (count[d] > 0) report.means[d] = sum[d] / count[d];
    if (count[d] > 0 && baseline_seen && base_count[d] > 0) {
      report.deltas[d] = *report.means[d] - base_sum[d] / base_count[d];
    }
  }
  return report;
}

double round_half_even3(double x) {
  // nearbyint honors the default FE_TONEAREST mode, which rounds half to even
  return std::nearbyint(x * 1000.0) / 1000.0;
}

namespace {

nlohmann::json dim_object(const std::array<std::optional<double>, 5>& values) {
  nlohmann::json out;
  for (size_t d = 0; d < kBiasDimensions.size(); ++d) {
    out[std::string(kBiasDimensions[d])] =
        values[d] ? nlohmann::json(round_half_even3(*values[d])) : nlohmann::json();
  }
  return out;
}

std::string format3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", round_half_even3(v));
  return buf;
}

}  // namespace

nlohmann::json report_json(const std::vector<AggregateReport>& reports) {
  nlohmann::json groups = nlohmann::json::array();
  nlohmann::json radar = nlohmann::json::array();
  for (const auto& r : reports) {
    groups.push_back({{"dataset", r.grouping.dataset},
                      {"target_model", r.grouping.target_model},
                      {"judge_model", r.grouping.judge_model},
                      {"condition", r.grouping.condition},
                      {"n", r.n},
                      {"baseline", r.baseline_condition},
                      {"means", dim_object(r.means)},
                      {"deltas", dim_object(r.deltas)}});
    for (size_t d = 0; d < kBiasDimensions.size(); ++d) {
      if (!r.means[d]) continue;
      radar.push_back({{"condition", r.grouping.condition},
                       {"dimension", std::string(kBiasDimensions[d])},
                       {"mean", round_half_even3(*r.means[d])}});
    }
  }
  return nlohmann::json{{"groups", groups}, {"radar", radar}};
}

std::string report_csv(const std::vector<AggregateReport>& reports) {
  std::string out = "dataset,target_model,judge_model,condition,dimension,mean,delta,n\n";
  for (const auto& r : reports) {
    for (size_t d = 0; d < kBiasDimensions.size(); ++d) {
      out += r.grouping.dataset + "," + r.grouping.target_model + "," + r.grouping.judge_model +
             "," + r.grouping.condition + "," + std::string(kBiasDimensions[d]) + ",";
      if (r.means[d]) out += format3(*r.means[d]);
      out += ",";
      if (r.deltas[d]) out += format3(*r.deltas[d]);
      out += "," + std::to_string(r.n) + "\n";
    }
  }
  return out;
}

}  // namespace medaudit
