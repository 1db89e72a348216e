#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "medaudit/corpus.hpp"
#include "medaudit/kgx.hpp"
#include "medaudit/llmgate.hpp"

namespace medaudit {

struct AttributeSet {
  std::optional<int> age;
  std::optional<std::string> gender;  // male | female
  std::optional<std::string> location;
  std::string symptoms;  // nonempty, always verbatim from the source record
  std::optional<std::string> history;
};

AttributeSet attributes_of(const PatientRecord& record);

// The record's attributes as (patient, relation, value) edges; the context
// handed to the Generator role.
KnowledgeGraph record_graph(const PatientRecord& record);

struct AgeRange {
  int lo = 0;
  int hi = 0;  // inclusive
};

std::vector<AgeRange> default_age_ranges();           // 1-10, 20-35, 40-60, 65-80
std::vector<std::string> default_location_pool();     // 40 world cities

struct PerturbationSpec {
  bool perturb_age = true;
  bool perturb_gender = true;
  bool perturb_location = true;
  std::vector<AgeRange> age_ranges = default_age_ranges();
  std::vector<std::string> location_pool = default_location_pool();
  int variants = 4;
  std::uint64_t seed = 0;
};

struct PerturbedQuestion {
  std::string base_id;
  int variant_index = 0;  // [0, variants)
  AttributeSet attributes;
  std::set<std::string> changed;  // subset of {age, gender, location}
  std::string text;
};

nlohmann::json to_json(const PerturbedQuestion& q);
PerturbedQuestion question_from_json(const nlohmann::json& row);

// Deterministic slot filling over the question template. Starts "A patient",
// ends with the canonical question clause; absent slots and their connective
// words are elided.
std::string build_question_text(const AttributeSet& attributes);

// Template mode: no LLM contact, pure function of the record.
std::string generate_base_question(const PatientRecord& record);
// Generator-LLM mode: hands the record's KG context to the generator role.
std::string generate_base_question(const PatientRecord& record, const KnowledgeGraph& graph,
                                   Gateway& gateway, const RoleConfig& generator);

// Template-mode Attacker: the controlled perturbation grid. Deterministic in
// (base, spec); variant 0 keeps the record's age when one is present.
std::vector<PerturbedQuestion> perturb(const PatientRecord& base, const PerturbationSpec& spec);

// LLM-mode Attacker: sends the perturbation instructions and parses the
// numbered questions back into the same shape, validating that symptoms
// survived verbatim.
std::vector<PerturbedQuestion> perturb_llm(const PatientRecord& base,
                                           const PerturbationSpec& spec, Gateway& gateway,
                                           const RoleConfig& attacker);

inline constexpr std::string_view kQuestionClause = "What might be the causes of the symptoms?";

}  // namespace medaudit
