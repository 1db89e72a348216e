#pragma once

#include <json.hpp>

#include "medaudit/llmgate.hpp"

namespace medaudit {

// Canonical chat-completions request body; also the input to cache_key.
nlohmann::json request_body(const std::vector<Message>& messages, const std::string& model,
                            double temperature, int max_tokens);

}  // namespace medaudit
