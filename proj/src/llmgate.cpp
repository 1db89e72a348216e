#include "medaudit/llmgate.hpp"

#include <atomic>
#include <filesystem>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "medaudit/error.hpp"
#include "medaudit/io.hpp"
#include "medaudit/strings.hpp"
#include "wire.hpp"

namespace medaudit {

std::string to_string(Role role) {
  switch (role) {
    case Role::generator: return "generator";
    case Role::attacker: return "attacker";
    case Role::target: return "target";
    case Role::judge: return "judge";
  }
  return "target";
}

Role role_from_string(const std::string& s) {
  std::string v = lower_ascii(trim(s));
  if (v == "generator") return Role::generator;
  if (v == "attacker") return Role::attacker;
  if (v == "target") return Role::target;
  if (v == "judge") return Role::judge;
  throw ConfigError("unknown role: " + s);
}

nlohmann::json request_body(const std::vector<Message>& messages, const std::string& model,
                            double temperature, int max_tokens) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) {
    msgs.push_back({{"role", m.speaker}, {"content", m.text}});
  }
  return nlohmann::json{{"model", model},
                        {"messages", msgs},
                        {"temperature", temperature},
                        {"max_tokens", max_tokens}};
}

std::string cache_key(const std::vector<Message>& messages, const std::string& model,
                      double temperature, int max_tokens) {
  // nlohmann keeps object keys sorted, so dump() is canonical
  return to_hex64(fnv1a64(request_body(messages, model, temperature, max_tokens).dump()));
}

namespace {

std::filesystem::path resolve_fixture(const std::string& fixture) {
  std::filesystem::path p(fixture);
  if (std::filesystem::is_directory(p)) return p / kExchangesFileName;
  return p;
}

class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(const std::string& fixture) {
    std::filesystem::path path = resolve_fixture(fixture);
    if (!std::filesystem::exists(path)) {
      throw IoError("replay fixture not found: " + path.string());
    }
    for (const auto& row : read_jsonl(path)) {
      Entry entry;
      entry.response = row.value("response", "");
      entry.model = row.value("model", "");
      entry.latency = std::chrono::milliseconds(row.value("latency_ms", 0));
      entries_.insert_or_assign(row.value("cache_key", ""), std::move(entry));
    }
  }

  ChatExchange complete(const RoleConfig& role, const std::vector<Message>& messages) override {
    std::string key = cache_key(messages, role.model, role.temperature, role.max_tokens);
    auto it = entries_.find(key);
    if (it == entries_.end()) throw CacheMissError(key);
    ChatExchange ex;
    ex.request = messages;
    ex.response = it->second.response;
    ex.model = it->second.model.empty() ? role.model : it->second.model;
    ex.latency = it->second.latency;
    ex.cache_key = key;
    return ex;
  }

  std::string mode() const override { return "replay"; }

 private:
  struct Entry {
    std::string response;
    std::string model;
    std::chrono::milliseconds latency{0};
  };
  std::unordered_map<std::string, Entry> entries_;  // read-only after load
};

}  // namespace

std::unique_ptr<Backend> make_replay_backend(const std::string& fixture) {
  return std::make_unique<ReplayBackend>(fixture);
}

Gateway::Gateway(std::unique_ptr<Backend> backend) : backend_(std::move(backend)) {
  if (!backend_) throw ConfigError("gateway requires a backend");
}

Gateway Gateway::live(RetryPolicy policy) { return Gateway(make_http_backend(std::move(policy))); }

Gateway Gateway::mock(MockScript script) { return Gateway(make_mock_backend(std::move(script))); }

Gateway Gateway::mock_from_file(const std::string& path) {
  return Gateway(make_mock_backend(MockScript::from_file(path)));
}

Gateway Gateway::replay(const std::string& fixture) {
  return Gateway(make_replay_backend(fixture));
}

void Gateway::enable_recording(const std::string& fixture_path) {
  record_path_ = resolve_fixture(fixture_path).string();
}

std::string Gateway::mode() const {
  std::string m = backend_->mode();
  if (recording()) m += "+record";
  return m;
}

ChatExchange Gateway::complete(const RoleConfig& role, const std::vector<Message>& messages) {
  ChatExchange ex = backend_->complete(role, messages);
  if (recording()) {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : ex.request) msgs.push_back({{"role", m.speaker}, {"content", m.text}});
    nlohmann::json row{{"cache_key", ex.cache_key},
                       {"model", ex.model},
                       {"temperature", role.temperature},
                       {"max_tokens", role.max_tokens},
                       {"request", msgs},
                       {"response", ex.response},
                       {"latency_ms", ex.latency.count()}};
    std::lock_guard<std::mutex> lock(record_mutex_);
    append_jsonl(record_path_, row);
  }
  return ex;
}

std::vector<Gateway::BatchItem> Gateway::complete_batch(
    const RoleConfig& role, const std::vector<std::vector<Message>>& requests, int max_inflight) {
  if (max_inflight < 1) throw ConfigError("max_inflight must be at least 1");
  std::vector<BatchItem> results(requests.size());
  if (requests.empty()) return results;

  std::atomic<size_t> next{0};
  auto worker = [&] {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        results[i].exchange = complete(role, requests[i]);
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    }
  };

  size_t n_workers = std::min<size_t>(static_cast<size_t>(max_inflight), requests.size());
  std::vector<std::thread> workers;
  workers.reserve(n_workers);
  for (size_t w = 0; w < n_workers; ++w) workers.emplace_back(worker);
  for (auto& t : workers) t.join();
  return results;
}

}  // namespace medaudit
