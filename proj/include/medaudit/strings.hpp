#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace medaudit {

std::string trim(std::string_view s);
std::string lower_ascii(std::string_view s);

// Collapses runs of spaces/tabs to a single space. Newlines are preserved.
std::string collapse_spaces(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

bool contains_ci(std::string_view haystack, std::string_view needle);

// FNV-1a, 64 bit. Stable across platforms; used for cache keys and config hashes.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string to_hex64(std::uint64_t v);

// Canonical composition for the Latin-1 repertoire: composes base letters with
// the combining marks seen in practice (grave, acute, circumflex, tilde,
// diaeresis, ring, cedilla). Codepoints outside this repertoire pass through
// unchanged, as do invalid UTF-8 bytes. Idempotent.
std::string nfc(std::string_view s);

std::vector<std::uint32_t> utf8_decode(std::string_view s);
std::string utf8_encode(const std::vector<std::uint32_t>& cps);

}  // namespace medaudit
