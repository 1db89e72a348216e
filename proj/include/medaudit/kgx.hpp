#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace medaudit {

// One directed knowledge-graph edge. Relations are snake_case tokens and may
// not contain arrows or parentheses (they delimit the wire format below).
struct Triplet {
  std::string head;
  std::string relation;
  std::string tail;

  bool operator==(const Triplet& other) const = default;
};

// Ordered edge list with set semantics: exact duplicates are dropped,
// first occurrence wins.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  explicit KnowledgeGraph(const std::vector<Triplet>& triplets);

  // Returns false when the triplet was already present.
  bool add(const Triplet& t);

  const std::vector<Triplet>& triplets() const { return triplets_; }
  std::set<std::string> entities() const;
  bool empty() const { return triplets_.empty(); }
  size_t size() const { return triplets_.size(); }

 private:
  std::vector<Triplet> triplets_;
};

enum class Attribute { age, gender, location, symptom, history, travel };

std::string to_string(Attribute a);
Attribute attribute_from_string(const std::string& s);

struct ExtractionRule {
  Attribute attribute = Attribute::symptom;
  std::string pattern;   // ECMAScript regex; capture group 1 is the entity, else the whole match
  std::string relation;  // emitted on match
  double weight = 1.0;   // contribution to R(entity), >= 0
};

struct RelevanceScore {
  std::string entity;
  double score = 0.0;  // R(e): sum of weights over all matching rule events
  std::optional<double> threshold_ref;  // theta applied at filter time
};

struct ExtractionResult {
  std::vector<Triplet> triplets;           // match order, deduplicated
  std::vector<RelevanceScore> candidates;  // one per distinct entity, first-seen order
};

// Runs every rule over the text. Each matched span emits one triplet
// (patient, rule.relation, entity) and adds rule.weight to the entity's score.
// No matches is not an error: both outputs come back empty.
ExtractionResult extract(const std::string& text, const std::vector<ExtractionRule>& rules);

// Generic phrase matcher used as the no-rules baseline: every alphabetic token
// of length >= 4 that is not a stopword becomes (patient, mentions, token).
ExtractionResult permissive_extract(const std::string& text);

// Entities with score strictly greater than theta, input order preserved.
// threshold_ref is stamped on the survivors.
std::vector<RelevanceScore> filter_entities(const std::vector<RelevanceScore>& candidates,
                                            double theta);

// Applies filter_entities and drops triplets whose tail was filtered out.
ExtractionResult filter_graph(const ExtractionResult& raw, double theta);

// Side-by-side extraction with and without the rule pack. The rule branch
// keeps the generic matches as low-weight candidates (kGenericWeight), so its
// relation variety never drops below the generic baseline; the relevance
// filter is what prunes them once theta exceeds kGenericWeight.
inline constexpr double kGenericWeight = 0.1;

struct ExtractionComparison {
  ExtractionResult with_rules;     // rules + generic candidates, filtered at theta
  ExtractionResult without_rules;  // generic matcher only, unfiltered
};

ExtractionComparison compare_extraction(const std::string& text,
                                        const std::vector<ExtractionRule>& rules, double theta);

// Wire format, embedded verbatim in prompts: one triplet per line, exactly
//   (head -> relation -> tail)
// with single spaces around the arrows. Input order is preserved.
std::string encode_triplets(const KnowledgeGraph& graph);
std::string encode_triplets(const std::vector<Triplet>& triplets);

struct ParseOutcome {
  std::vector<Triplet> triplets;  // textual order, deduplicated
  int unparsed_lines = 0;         // nonempty lines that yielded nothing
};

// Recovers triplets from arbitrary LLM output. Tolerates both arrow glyphs
// ("->" and the unicode arrow), optional parentheses, line numbering,
// flexible whitespace, a trailing period, and one brace pair around a part.
ParseOutcome parse_triplets(const std::string& text);

std::vector<ExtractionRule> default_rule_pack();

// Rule packs are JSON arrays of {attribute, pattern, relation, weight} rows.
std::vector<ExtractionRule> load_rule_pack(const std::string& path);

}  // namespace medaudit
