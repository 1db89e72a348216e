#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace medaudit {

enum class Role { generator, attacker, target, judge };

std::string to_string(Role role);
Role role_from_string(const std::string& s);

struct RoleConfig {
  Role role = Role::target;
  std::string model = "gpt-4o";
  double temperature = 0.5;
  int max_tokens = 400;
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string auth_env = "OPENAI_API_KEY";  // environment variable holding the bearer token
};

struct Message {
  std::string speaker;  // system | user | assistant
  std::string text;
};

struct ChatExchange {
  std::vector<Message> request;
  std::string response;
  std::string model;
  std::chrono::milliseconds latency{0};
  std::string cache_key;
};

// Content hash over the canonical request JSON (model, temperature,
// max_tokens, messages). Identical requests always share a key.
std::string cache_key(const std::vector<Message>& messages, const std::string& model,
                      double temperature, int max_tokens);

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};  // doubles per attempt
  // injectable for tests; defaults to a real sleep
  std::function<void(std::chrono::milliseconds)> sleeper;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatExchange complete(const RoleConfig& role, const std::vector<Message>& messages) = 0;
  virtual std::string mode() const = 0;
};

// One scripted response. Matching order: key rules first, then filter rules
// (role/contains/builtin) in script order, then positional rules consumed
// front to back. Builtins synthesize deterministic responses from the request
// itself: multihop, answer, bias_json, quality, attacker, generator.
struct MockRule {
  std::optional<std::string> key;
  std::optional<Role> role;
  std::optional<std::string> contains;  // substring of any request message
  std::optional<std::string> builtin;
  std::string response;

  bool positional() const { return !key && !role && !contains && !builtin; }
};

struct MockScript {
  std::vector<MockRule> rules;
  static MockScript from_file(const std::string& path);  // one JSON object per line
};

std::unique_ptr<Backend> make_http_backend(RetryPolicy policy = {});
std::unique_ptr<Backend> make_mock_backend(MockScript script);
// fixture may be the exchanges file itself or a run directory containing one
std::unique_ptr<Backend> make_replay_backend(const std::string& fixture);

// Front door for all four roles. Shareable across threads; recording appends
// are serialized internally.
class Gateway {
 public:
  explicit Gateway(std::unique_ptr<Backend> backend);

  static Gateway live(RetryPolicy policy = {});
  static Gateway mock(MockScript script);
  static Gateway mock_from_file(const std::string& path);
  static Gateway replay(const std::string& fixture);

  // Composes over any backend; every completed exchange is appended to the
  // fixture file (one JSON object per line, keyed by cache_key).
  void enable_recording(const std::string& fixture_path);
  bool recording() const { return !record_path_.empty(); }
  std::string mode() const;

  ChatExchange complete(const RoleConfig& role, const std::vector<Message>& messages);

  struct BatchItem {
    std::optional<ChatExchange> exchange;
    std::string error;
    bool ok() const { return exchange.has_value(); }
  };

  // Responses come back in request order; at most max_inflight requests are
  // outstanding at once. Per-item failures do not abort the batch.
  std::vector<BatchItem> complete_batch(const RoleConfig& role,
                                        const std::vector<std::vector<Message>>& requests,
                                        int max_inflight);

 private:
  std::unique_ptr<Backend> backend_;
  std::mutex record_mutex_;
  std::string record_path_;
};

inline constexpr std::string_view kExchangesFileName = "exchanges.jsonl";

}  // namespace medaudit
