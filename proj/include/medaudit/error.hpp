#pragma once

#include <stdexcept>
#include <string>

namespace medaudit {

// Base of every typed error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A structured input references a column/key that the source does not provide,
// or violates a record invariant (duplicate id, bad field shape).
class SchemaError : public Error {
 public:
  using Error::Error;
};

class EmptyCorpusError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Transport or provider failure that survived the retry policy.
class GatewayError : public Error {
 public:
  explicit GatewayError(const std::string& what, std::string provider_payload = "")
      : Error(what), provider_payload_(std::move(provider_payload)) {}
  const std::string& provider_payload() const { return provider_payload_; }

 private:
  std::string provider_payload_;
};

// Replay or mock lookup found no exchange for the request's cache key.
class CacheMissError : public Error {
 public:
  explicit CacheMissError(const std::string& key)
      : Error("no recorded exchange for cache key " + key), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// An LLM response could not be structured as its role requires; carries the raw payload.
class ResponseParseError : public Error {
 public:
  ResponseParseError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

// A judge response could not be turned into a typed score; carries the raw payload.
class ScoreParseError : public Error {
 public:
  ScoreParseError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

class EmptyGroupError : public Error {
 public:
  using Error::Error;
};

}  // namespace medaudit
