#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "medaudit/error.hpp"
#include "medaudit/llmgate.hpp"
#include "medaudit/strings.hpp"
#include "wire.hpp"

namespace medaudit {

namespace {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& endpoint) {
  size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos) {
    throw ConfigError("endpoint must include a scheme: " + endpoint);
  }
  size_t path_start = endpoint.find('/', scheme + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

bool retryable_status(int status) { return status == 429 || (status >= 500 && status < 600); }

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(RetryPolicy policy) : policy_(std::move(policy)) {
    if (policy_.attempts < 1) throw ConfigError("retry attempts must be at least 1");
    if (!policy_.sleeper) {
      policy_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
  }

  ChatExchange complete(const RoleConfig& role, const std::vector<Message>& messages) override {
    SplitUrl url = split_url(role.endpoint);
    std::string body = request_body(messages, role.model, role.temperature, role.max_tokens).dump();

    httplib::Headers headers{{"Accept", "application/json"}};
    if (!role.auth_env.empty()) {
      if (const char* token = std::getenv(role.auth_env.c_str()); token && *token) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
      }
    }

    std::string last_error;
    std::string last_payload;
    auto start = std::chrono::steady_clock::now();
    for (int attempt = 1; attempt <= policy_.attempts; ++attempt) {
      if (attempt > 1) {
        policy_.sleeper(policy_.initial_backoff * (1 << (attempt - 2)));
      }
      httplib::Client client(url.base);
      client.set_connection_timeout(30, 0);
      client.set_read_timeout(120, 0);
      auto res = client.Post(url.path, headers, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        last_error = "HTTP " + std::to_string(res->status);
        last_payload = res->body;
        if (retryable_status(res->status)) continue;
        break;
      }
      auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start);
      return parse_response(role, messages, res->body, elapsed);
    }
    throw GatewayError("chat completion failed after " + std::to_string(policy_.attempts) +
                           " attempts: " + last_error,
                       last_payload);
  }

  std::string mode() const override { return "live"; }

 private:
  static ChatExchange parse_response(const RoleConfig& role, const std::vector<Message>& messages,
                                     const std::string& body,
                                     std::chrono::milliseconds latency) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      throw GatewayError("provider returned non-JSON body", body);
    }
    if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
      throw GatewayError("provider response has no choices", body);
    }
    const auto& first = doc["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content")) {
      throw GatewayError("provider response has no message content", body);
    }
    ChatExchange ex;
    ex.request = messages;
    ex.response = first["message"]["content"].get<std::string>();
    ex.model = doc.value("model", role.model);
    ex.latency = latency;
    ex.cache_key = cache_key(messages, role.model, role.temperature, role.max_tokens);
    return ex;
  }

  RetryPolicy policy_;
};

}  // namespace

std::unique_ptr<Backend> make_http_backend(RetryPolicy policy) {
  return std::make_unique<HttpBackend>(std::move(policy));
}

}  // namespace medaudit
