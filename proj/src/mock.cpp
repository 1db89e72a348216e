#include <algorithm>
#include <cmath>
#include <map>
#include <regex>
#include <set>

#include <json.hpp>

#include "medaudit/error.hpp"
#include "medaudit/io.hpp"
#include "medaudit/kgx.hpp"
#include "medaudit/llmgate.hpp"
#include "medaudit/perturb.hpp"
#include "medaudit/strings.hpp"
#include "wire.hpp"

namespace medaudit {

namespace {

const std::set<std::string>& known_builtins() {
  static const std::set<std::string> kNames{"multihop", "answer",   "bias_json",
                                            "quality",  "attacker", "generator"};
  return kNames;
}

std::string last_user_text(const std::vector<Message>& messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->speaker == "user") return it->text;
  }
  return messages.empty() ? "" : messages.back().text;
}

std::uint64_t request_hash(const std::vector<Message>& messages) {
  std::uint64_t h = kFnvOffset;
  for (const auto& m : messages) {
    h = fnv1a64(m.speaker, h);
    h = fnv1a64(m.text, h);
  }
  return h;
}

std::string synth_condition(const std::string& question) {
  return "condition_" + to_hex64(fnv1a64(question)).substr(12);
}

// Three numbered stages plus a final paragraph; stage-1 tails are literal
// spans of the question, so groundedness comes out 1.0 by construction.
std::string synth_multihop(const std::vector<Message>& messages) {
  std::string question = last_user_text(messages);
  ExtractionResult ex = extract(question, default_rule_pack());
  std::string condition = synth_condition(question);

  std::vector<std::string> symptom_tails;
  for (const auto& t : ex.triplets) {
    if (t.relation == "has_symptoms") symptom_tails.push_back(t.tail);
  }

  std::string out = "1. Extract relationships from patient context:\n";
  if (ex.triplets.empty()) {
    std::string tail = question;
    for (char banned : {'(', ')'}) tail.erase(std::remove(tail.begin(), tail.end(), banned), tail.end());
    out += "(patient -> asks -> " + trim(tail) + ")\n";
  } else {
    out += encode_triplets(ex.triplets);
  }
  out += "2. Link symptoms to contextual or background risks:\n";
  if (symptom_tails.empty()) {
    out += "(Symptoms -> linked_to -> " + condition + ")\n";
  } else {
    for (const auto& s : symptom_tails) {
      out += "(" + s + " -> linked_to -> " + condition + ")\n";
    }
  }
  out += "3. Map risks to possible causes of the symptoms:\n";
  out += "(" + condition + " -> causes -> " +
         (symptom_tails.empty() ? "the symptoms" : symptom_tails.front()) + ")\n";
  out += "4. Based on the reasoning above, the most likely cause of the symptoms is " +
         condition + ". Further clinical evaluation is recommended.";
  return out;
}

std::string synth_answer(const std::vector<Message>& messages) {
  return "The most likely causes of the symptoms include " +
         synth_condition(last_user_text(messages)) +
         " and related factors. Clinical evaluation is recommended.";
}

std::string synth_bias_json(const std::vector<Message>& messages) {
  std::uint64_t h = request_hash(messages);
  auto score = [&](int i) {
    double v = static_cast<double>((h >> (8 * i)) & 0xff) / 255.0;
    return std::round(v * 100.0) / 100.0;
  };
  nlohmann::json out{{"age", score(0)},
                     {"gender", score(1)},
                     {"age_gender", score(2)},
                     {"location", score(3)},
                     {"age_gender_location", score(4)}};
  return out.dump();
}

std::string synth_quality(const std::vector<Message>& messages) {
  std::uint64_t h = request_hash(messages);
  auto score = [&](int i) { return 1 + static_cast<int>((h >> (8 * i)) % 5); };
  return "factual consistency: " + std::to_string(score(0)) +
         ", clinical relevance: " + std::to_string(score(1)) +
         ", coherence: " + std::to_string(score(2));
}

// Pulls "key: value" lines out of the attacker/generator user message.
std::map<std::string, std::string> parse_fields(const std::string& text) {
  std::map<std::string, std::string> fields;
  static const std::regex field_re(R"(^\s*([A-Za-z ]+):\s*(.*)$)");
  for (const std::string& line : split_lines(text)) {
    std::smatch m;
    if (!std::regex_match(line, m, field_re)) continue;
    std::string value = trim(m[2].str());
    if (value.empty() || value == "not provided") continue;
    fields[lower_ascii(trim(m[1].str()))] = value;
  }
  return fields;
}

std::string synth_attacker(const std::vector<Message>& messages) {
  auto fields = parse_fields(last_user_text(messages));
  std::string symptoms = fields.count("symptoms") ? fields["symptoms"] : "unspecified symptoms";
  std::optional<std::string> history;
  if (fields.count("history")) history = fields["history"];
  std::optional<int> original_age;
  if (fields.count("age")) {
    try {
      original_age = std::stoi(fields["age"]);
    } catch (const std::exception&) {
    }
  }

  // one draw per range, original age kept for the first question when present
  const int drawn[4] = {6, 28, 52, 71};
  const char* genders[4] = {"male", "female", "male", "female"};
  const char* locations[4] = {"Nairobi", "London", "Tokyo", "Chicago"};

  std::string out;
  for (int i = 0; i < 4; ++i) {
    AttributeSet attrs;
    attrs.age = (i == 0 && original_age) ? *original_age : drawn[i];
    attrs.gender = genders[i];
    attrs.location = locations[i];
    attrs.symptoms = symptoms;
    attrs.history = history;
    out += std::to_string(i + 1) + ". " + build_question_text(attrs) + "\n";
  }
  return out;
}

std::string synth_generator(const std::vector<Message>& messages) {
  ParseOutcome parsed = parse_triplets(last_user_text(messages));
  AttributeSet attrs;
  attrs.symptoms = "unspecified symptoms";
  for (const auto& t : parsed.triplets) {
    if (t.relation == "has_age") {
      try {
        attrs.age = std::stoi(t.tail);
      } catch (const std::exception&) {
      }
    } else if (t.relation == "has_gender") {
      attrs.gender = t.tail;
    } else if (t.relation == "has_symptoms") {
      attrs.symptoms = t.tail;
    } else if (t.relation == "lives_in") {
      attrs.location = t.tail;
    } else if (t.relation == "has_history") {
      attrs.history = t.tail;
    }
  }
  return build_question_text(attrs);
}

std::string synthesize(const std::string& builtin, const std::vector<Message>& messages) {
  if (builtin == "multihop") return synth_multihop(messages);
  if (builtin == "answer") return synth_answer(messages);
  if (builtin == "bias_json") return synth_bias_json(messages);
  if (builtin == "quality") return synth_quality(messages);
  if (builtin == "attacker") return synth_attacker(messages);
  if (builtin == "generator") return synth_generator(messages);
  throw ConfigError("unknown mock builtin: " + builtin);
}

class MockBackend : public Backend {
 public:
  explicit MockBackend(MockScript script) : script_(std::move(script)) {
    for (const auto& rule : script_.rules) {
      if (rule.builtin && !known_builtins().count(*rule.builtin)) {
        throw ConfigError("unknown mock builtin: " + *rule.builtin);
      }
    }
  }

  ChatExchange complete(const RoleConfig& role, const std::vector<Message>& messages) override {
    std::string key = cache_key(messages, role.model, role.temperature, role.max_tokens);
    if (const MockRule* rule = match(role, messages, key)) {
      ChatExchange ex;
      ex.request = messages;
      ex.response = rule->builtin ? synthesize(*rule->builtin, messages) : rule->response;
      ex.model = role.model;
      ex.cache_key = key;
      return ex;
    }
    throw CacheMissError(key);
  }

  std::string mode() const override { return "mock"; }

 private:
  const MockRule* match(const RoleConfig& role, const std::vector<Message>& messages,
                        const std::string& key) {
    for (const auto& rule : script_.rules) {
      if (rule.key && *rule.key == key) return &rule;
    }
    for (const auto& rule : script_.rules) {
      if (rule.key || rule.positional()) continue;
      if (rule.role && *rule.role != role.role) continue;
      if (rule.contains) {
        bool found = false;
        for (const auto& m : messages) {
          if (m.text.find(*rule.contains) != std::string::npos) {
            found = true;
            break;
          }
        }
        if (!found) continue;
      }
      return &rule;
    }
    std::lock_guard<std::mutex> lock(positional_mutex_);
    for (size_t i = positional_cursor_; i < script_.rules.size(); ++i) {
      if (script_.rules[i].positional()) {
        positional_cursor_ = i + 1;
        return &script_.rules[i];
      }
    }
    return nullptr;
  }

  MockScript script_;
  std::mutex positional_mutex_;
  size_t positional_cursor_ = 0;
};

}  // namespace

MockScript MockScript::from_file(const std::string& path) {
  MockScript script;
  for (const auto& row : read_jsonl(path)) {
    MockRule rule;
    if (row.contains("key")) rule.key = row["key"].get<std::string>();
    if (row.contains("role")) rule.role = role_from_string(row["role"].get<std::string>());
    if (row.contains("contains")) rule.contains = row["contains"].get<std::string>();
    if (row.contains("builtin")) rule.builtin = row["builtin"].get<std::string>();
    rule.response = row.value("response", "");
    script.rules.push_back(std::move(rule));
  }
  return script;
}

std::unique_ptr<Backend> make_mock_backend(MockScript script) {
  return std::make_unique<MockBackend>(std::move(script));
}

}  // namespace medaudit
