#include "medaudit/multihop.hpp"

#include <array>
#include <optional>
#include <regex>

#include "medaudit/prompts.hpp"
#include "medaudit/strings.hpp"

namespace medaudit {

namespace {

struct HeadingMatch {
  size_t token_begin = 0;   // first char of the heading token
  size_t content_begin = 0; // first char after the heading token
};

// Headings are matched two ways: a line-anchored bare number ("2.", "3)",
// optionally prefixed by Step/Stage or markdown bold) and a mid-line
// "Step 2:" form. No whitespace is required after the number's punctuation,
// so "2.Symptoms" splits as heading 2 + "Symptoms".
std::optional<HeadingMatch> find_heading(const std::string& raw, size_t from, int k) {
  static const auto regexes = [] {
    std::array<std::pair<std::regex, std::regex>, 4> out;
    for (int i = 0; i < 4; ++i) {
      const std::string d = std::to_string(i + 1);
      out[static_cast<size_t>(i)].first = std::regex(
          "(^|\\n)[ \\t]*(?:\\*{1,2}[ \\t]*)?(?:(?:[Ss]tep|[Ss]tage|STEP|STAGE)[ \\t]*)?" + d +
          "[ \\t]*[.):]");
      out[static_cast<size_t>(i)].second =
          std::regex("(?:[Ss]tep|[Ss]tage|STEP|STAGE)[ \\t]+" + d + "[ \\t]*[.):]");
    }
    return out;
  }();

  if (from >= raw.size() || k < 1 || k > 4) return std::nullopt;
  const auto& [line_re, inline_re] = regexes[static_cast<size_t>(k - 1)];

  auto flags = std::regex_constants::match_default;
  if (from > 0) flags |= std::regex_constants::match_not_bol;

  std::optional<HeadingMatch> best;
  std::smatch m;
  if (std::regex_search(raw.cbegin() + static_cast<std::ptrdiff_t>(from), raw.cend(), m, line_re,
                        flags)) {
    size_t pos = from + static_cast<size_t>(m.position(0));
    size_t token_begin = pos + static_cast<size_t>(m.length(1));  // skip the leading newline
    best = HeadingMatch{token_begin, from + static_cast<size_t>(m.position(0) + m.length(0))};
  }
  if (std::regex_search(raw.cbegin() + static_cast<std::ptrdiff_t>(from), raw.cend(), m,
                        inline_re, flags)) {
    size_t pos = from + static_cast<size_t>(m.position(0));
    if (!best || pos < best->token_begin) {
      best = HeadingMatch{pos, from + static_cast<size_t>(m.position(0) + m.length(0))};
    }
  }
  return best;
}

struct SplitOffsets {
  bool matched = false;
  size_t s1 = 0, s2 = 0, s3 = 0;      // content begins
  size_t e1 = 0, e2 = 0, e3 = 0;      // content ends
  std::optional<size_t> answer_begin; // after an explicit heading 4
};

SplitOffsets split_offsets(const std::string& raw) {
  SplitOffsets out;
  auto h1 = find_heading(raw, 0, 1);
  if (!h1) return out;
  out.matched = true;
  out.s1 = h1->content_begin;
  auto h2 = find_heading(raw, out.s1, 2);
  out.e1 = h2 ? h2->token_begin : raw.size();
  out.s2 = h2 ? h2->content_begin : raw.size();
  auto h3 = h2 ? find_heading(raw, out.s2, 3) : std::nullopt;
  out.e2 = h3 ? h3->token_begin : raw.size();
  out.s3 = h3 ? h3->content_begin : raw.size();
  auto h4 = h3 ? find_heading(raw, out.s3, 4) : std::nullopt;
  out.e3 = h4 ? h4->token_begin : raw.size();
  if (h4) out.answer_begin = h4->content_begin;
  return out;
}

std::vector<Triplet> dedup(const std::vector<Triplet>& triplets) {
  return KnowledgeGraph(triplets).triplets();
}

// Trailing run of non-triplet prose lines in a stage segment.
std::string trailing_prose(const std::string& segment) {
  std::vector<std::string> lines = split_lines(segment);
  std::vector<std::string> collected;
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    std::string line = trim(*it);
    if (line.empty()) {
      if (collected.empty()) continue;
      break;
    }
    if (!parse_triplets(line).triplets.empty()) break;
    collected.push_back(line);
  }
  std::string out;
  for (auto it = collected.rbegin(); it != collected.rend(); ++it) {
    if (!out.empty()) out += "\n";
    out += *it;
  }
  return out;
}

}  // namespace

StageSplit stage_split(const std::string& raw) {
  StageSplit split;
  SplitOffsets off = split_offsets(raw);
  if (!off.matched) {
    split.stage3 = trim(raw);
    return split;
  }
  split.matched = true;
  split.stage1 = trim(raw.substr(off.s1, off.e1 - off.s1));
  split.stage2 = trim(raw.substr(off.s2, off.e2 - off.s2));
  split.stage3 = trim(raw.substr(off.s3, off.e3 - off.s3));
  return split;
}

std::optional<double> groundedness(const std::vector<Triplet>& stage1,
                                   const std::string& question_text) {
  if (stage1.empty()) return std::nullopt;
  size_t grounded = 0;
  for (const auto& t : stage1) {
    if (contains_ci(question_text, t.tail)) ++grounded;
  }
  return static_cast<double>(grounded) / static_cast<double>(stage1.size());
}

ReasoningTrace structure_response(const PerturbedQuestion& question, const std::string& raw) {
  ReasoningTrace trace;
  trace.base_id = question.base_id;
  trace.variant_index = question.variant_index;
  trace.raw = raw;

  SplitOffsets off = split_offsets(raw);
  if (!off.matched) {
    trace.answer = trim(raw);
    trace.well_formed = false;
    return trace;
  }

  StageSplit split = stage_split(raw);
  ParseOutcome p1 = parse_triplets(split.stage1);
  ParseOutcome p2 = parse_triplets(split.stage2);
  ParseOutcome p3 = parse_triplets(split.stage3);
  trace.stage1 = dedup(p1.triplets);
  trace.stage2 = dedup(p2.triplets);
  trace.diagnostics.stage1_unparsed = p1.unparsed_lines;
  trace.diagnostics.stage2_unparsed = p2.unparsed_lines;
  trace.diagnostics.stage3_triplets = static_cast<int>(p3.triplets.size());

  if (off.answer_begin) {
    trace.answer = trim(raw.substr(*off.answer_begin));
  } else {
    // no explicit heading 4: the concise paragraph is the trailing prose of
    // the last stage that has any content
    for (const std::string* segment : {&split.stage3, &split.stage2, &split.stage1}) {
      if (trim(*segment).empty()) continue;
      trace.answer = trailing_prose(*segment);
      break;
    }
  }

  trace.groundedness = groundedness(trace.stage1, question.text);
  trace.well_formed = !trace.answer.empty() && (trace.stage1.empty() || !trace.stage2.empty());
  return trace;
}

ReasoningTrace run_multihop(const PerturbedQuestion& question, Gateway& gateway,
                            const RoleConfig& target) {
  ChatExchange ex = gateway.complete(
      target, {{"system", std::string(prompts::kTargetMultihop)}, {"user", question.text}});
  return structure_response(question, ex.response);
}

std::string run_single_shot(const PerturbedQuestion& question, Gateway& gateway,
                            const RoleConfig& target) {
  ChatExchange ex = gateway.complete(
      target, {{"system", std::string(prompts::kSingleShot)}, {"user", question.text}});
  return ex.response;
}

}  // namespace medaudit
