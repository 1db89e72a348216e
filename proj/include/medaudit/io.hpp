#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace medaudit {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// One JSON object per line; blank lines are ignored.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);
void append_jsonl(const std::filesystem::path& path, const nlohmann::json& row);

}  // namespace medaudit
