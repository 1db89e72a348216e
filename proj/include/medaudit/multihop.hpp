#pragma once

#include <optional>
#include <string>
#include <vector>

#include "medaudit/kgx.hpp"
#include "medaudit/llmgate.hpp"
#include "medaudit/perturb.hpp"

namespace medaudit {

struct StageSplit {
  std::string stage1;
  std::string stage2;
  std::string stage3;
  bool matched = false;  // false: no headings found, everything lands in stage3
};

// Splits on numbered headings 1./2./3., tolerating "Step 1:"/"Stage 1)" forms
// both at line starts and mid-line. Total: the three segments cover the input
// text that follows the first heading; unmatched input comes back as
// ("", "", whole text).
StageSplit stage_split(const std::string& raw);

struct ParseDiagnostics {
  int stage1_unparsed = 0;
  int stage2_unparsed = 0;
  int stage3_triplets = 0;  // counted but never merged into stage2
};

struct ReasoningTrace {
  std::string base_id;  // question identity
  int variant_index = 0;
  std::vector<Triplet> stage1;  // G1: edges stated by the question
  std::vector<Triplet> stage2;  // G2: expansion over background knowledge
  std::string answer;           // final concise paragraph
  std::string raw;              // untouched LLM response
  ParseDiagnostics diagnostics;
  bool well_formed = false;
  std::optional<double> groundedness;  // absent when stage1 is empty
};

// Pure structuring step, separated from transport for testability.
ReasoningTrace structure_response(const PerturbedQuestion& question, const std::string& raw);

// Sends the frozen three-stage system prompt plus the question, then
// structures the response. Gateway errors propagate.
ReasoningTrace run_multihop(const PerturbedQuestion& question, Gateway& gateway,
                            const RoleConfig& target);

// Baseline path: plain answer-the-question instruction, raw response text.
std::string run_single_shot(const PerturbedQuestion& question, Gateway& gateway,
                            const RoleConfig& target);

// Fraction of stage-1 tails that appear in the question text
// (case-insensitive substring match). Empty stage1 gives no value.
std::optional<double> groundedness(const std::vector<Triplet>& stage1,
                                   const std::string& question_text);

}  // namespace medaudit
