#include <cmath>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "medaudit/error.hpp"
#include "medaudit/metrics.hpp"

namespace medaudit {

namespace {

struct SplitUrl {
  std::string base;
  std::string path;
};

SplitUrl split_embedding_url(const std::string& endpoint) {
  size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos) {
    throw ConfigError("embedding endpoint must include a scheme: " + endpoint);
  }
  size_t path_start = endpoint.find('/', scheme + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

std::vector<std::vector<double>> fetch_vectors(const EmbeddingEndpoint& endpoint,
                                               const std::vector<std::string>& tokens) {
  SplitUrl url = split_embedding_url(endpoint.endpoint);
  httplib::Client client(url.base);
  client.set_connection_timeout(10, 0);
  client.set_read_timeout(60, 0);

  httplib::Headers headers{{"Accept", "application/json"}};
  if (!endpoint.auth_env.empty()) {
    if (const char* token = std::getenv(endpoint.auth_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  nlohmann::json body{{"model", endpoint.model}, {"input", tokens}};
  auto res = client.Post(url.path, headers, body.dump(), "application/json");
  if (!res) {
    throw GatewayError("embedding endpoint unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw GatewayError("embedding endpoint returned HTTP " + std::to_string(res->status),
                       res->body);
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    throw GatewayError("embedding endpoint returned non-JSON body", res->body);
  }
  if (!doc.contains("data") || !doc["data"].is_array() || doc["data"].size() != tokens.size()) {
    throw GatewayError("embedding endpoint returned a malformed data array", res->body);
  }
  std::vector<std::vector<double>> vectors;
  vectors.reserve(tokens.size());
  for (const auto& item : doc["data"]) {
    if (!item.contains("embedding") || !item["embedding"].is_array()) {
      throw GatewayError("embedding endpoint row is missing the embedding field", res->body);
    }
    vectors.push_back(item["embedding"].get<std::vector<double>>());
  }
  return vectors;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  size_t n = std::min(a.size(), b.size());
  for (size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double greedy_mean(const std::vector<std::vector<double>>& from,
                   const std::vector<std::vector<double>>& to) {
  double total = 0;
  for (const auto& f : from) {
    double best = 0;
    for (const auto& t : to) best = std::max(best, cosine(f, t));
    total += best;
  }
  return total / static_cast<double>(from.size());
}

}  // namespace

Prf embedding_similarity(const std::string& candidate, const std::string& reference,
                         const EmbeddingEndpoint& endpoint) {
  std::vector<std::string> cand = tokenize(candidate);
  std::vector<std::string> ref = tokenize(reference);
  if (cand.empty() || ref.empty()) return {};

  std::vector<std::vector<double>> cand_vecs = fetch_vectors(endpoint, cand);
  std::vector<std::vector<double>> ref_vecs = fetch_vectors(endpoint, ref);

  double precision = greedy_mean(cand_vecs, ref_vecs);
  double recall = greedy_mean(ref_vecs, cand_vecs);
  Prf out;
  out.precision = precision;
  out.recall = recall;
  out.f1 = (precision + recall > 0) ? 2 * precision * recall / (precision + recall) : 0.0;
  return out;
}

}  // namespace medaudit
