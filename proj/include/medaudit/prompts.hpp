#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace medaudit::prompts {

// System prompts for the four model roles. These are byte-frozen: recorded
// fixtures embed their cache keys, so any edit here must be deliberate and
// must update the fingerprint table checked by verify_integrity().
extern const std::string_view kGenerator;
extern const std::string_view kAttacker;
extern const std::string_view kTargetMultihop;
extern const std::string_view kSingleShot;
extern const std::string_view kQualityRubric;
extern const std::string_view kBiasScore;
extern const std::string_view kBiasPairwise;

struct Frozen {
  std::string_view name;
  std::string_view text;
  std::uint64_t fingerprint;
};

const std::vector<Frozen>& frozen_prompts();

std::uint64_t fingerprint(std::string_view text);

// Recomputes every prompt fingerprint and compares against the frozen table.
// Throws ConfigError naming the drifted prompt.
void verify_integrity();

}  // namespace medaudit::prompts
