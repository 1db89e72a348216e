#include "medaudit/perturb.hpp"

#include <numeric>
#include <regex>

#include "medaudit/error.hpp"
#include "medaudit/prompts.hpp"
#include "medaudit/rng.hpp"
#include "medaudit/strings.hpp"

namespace medaudit {

AttributeSet attributes_of(const PatientRecord& record) {
  AttributeSet attrs;
  attrs.age = record.age;
  attrs.gender = record.gender;  // unrecognized gender_raw values stay out of the grid
  attrs.location = record.location;
  attrs.symptoms = record.symptoms;
  attrs.history = record.history;
  return attrs;
}

KnowledgeGraph record_graph(const PatientRecord& record) {
  KnowledgeGraph g;
  if (record.age) g.add({"patient", "has_age", std::to_string(*record.age)});
  if (record.gender) g.add({"patient", "has_gender", *record.gender});
  g.add({"patient", "has_symptoms", record.symptoms});
  if (record.location) g.add({"patient", "lives_in", *record.location});
  if (record.history) g.add({"patient", "has_history", *record.history});
  return g;
}

std::vector<AgeRange> default_age_ranges() {
  return {{1, 10}, {20, 35}, {40, 60}, {65, 80}};
}

std::vector<std::string> default_location_pool() {
  return {
      "Johannesburg", "Nairobi",  "Lagos",     "Cairo",       "Accra",
      "Kampala",      "Dakar",    "Kinshasa",  "Cape Town",   "Addis Ababa",
      "London",       "Paris",    "Berlin",    "Madrid",      "Rome",
      "Vienna",       "Stockholm", "Warsaw",   "Lisbon",      "Athens",
      "Tokyo",        "Beijing",  "Mumbai",    "Jakarta",     "Bangkok",
      "Seoul",        "Manila",   "Hanoi",     "Dhaka",       "Karachi",
      "New York",     "Chicago",  "Toronto",   "Mexico City", "Lima",
      "Bogota",       "Sao Paulo", "Buenos Aires", "Santiago", "Houston",
  };
}

std::string build_question_text(const AttributeSet& attributes) {
  std::string text = "A patient";
  if (attributes.age) text += " " + std::to_string(*attributes.age) + " years old";
  if (attributes.gender) text += " " + *attributes.gender;
  if (attributes.location) {
    text += " with symptoms of " + attributes.symptoms;
  } else {
    // "several" only reads well for an actual list
    bool plural = attributes.symptoms.find(',') != std::string::npos ||
                  attributes.symptoms.find(" and ") != std::string::npos;
    text += " having " + std::string(plural ? "several " : "") + attributes.symptoms;
  }
  if (attributes.location) text += " lives in " + *attributes.location;
  if (attributes.history) text += " with a history of " + *attributes.history;
  text += ". ";
  text += kQuestionClause;
  return text;
}

std::string generate_base_question(const PatientRecord& record) {
  return build_question_text(attributes_of(record));
}

namespace {

void validate_spec(const PerturbationSpec& spec) {
  if (spec.variants < 1) throw ConfigError("perturbation variants must be positive");
  if (spec.perturb_age) {
    if (spec.age_ranges.empty()) throw ConfigError("perturb_age requires age ranges");
    for (const auto& r : spec.age_ranges) {
      if (r.lo > r.hi || r.lo < 0 || r.hi > 120) {
        throw ConfigError("bad age range " + std::to_string(r.lo) + "-" + std::to_string(r.hi));
      }
    }
  }
  if (spec.perturb_location &&
      spec.location_pool.size() < static_cast<size_t>(spec.variants)) {
    throw ConfigError("location pool has " + std::to_string(spec.location_pool.size()) +
                      " entries but " + std::to_string(spec.variants) +
                      " pairwise-distinct locations are needed");
  }
}

std::string flip_gender(const std::string& g) { return g == "male" ? "female" : "male"; }

std::set<std::string> diff_attributes(const AttributeSet& base, const AttributeSet& now) {
  std::set<std::string> changed;
  if (base.age != now.age) changed.insert("age");
  if (base.gender != now.gender) changed.insert("gender");
  if (base.location != now.location) changed.insert("location");
  return changed;
}

}  // namespace

std::vector<PerturbedQuestion> perturb(const PatientRecord& base, const PerturbationSpec& spec) {
  validate_spec(spec);
  const AttributeSet base_attrs = attributes_of(base);
  const int n = spec.variants;

  std::vector<std::optional<int>> ages(n, base.age);
  if (spec.perturb_age) {
    std::vector<size_t> order(spec.age_ranges.size());
    std::iota(order.begin(), order.end(), 0);
    RandomStream order_rng(spec.seed);
    order_rng.mix("age-order").mix(base.id);
    order_rng.shuffle(order);
    // the record's own age, when present, is kept for variant 0
    const bool keep_original = base.age.has_value();
    for (int i = 0; i < n; ++i) {
      if (keep_original && i == 0) continue;
      size_t k = static_cast<size_t>(keep_original ? i - 1 : i);
      const AgeRange& range = spec.age_ranges[order[k % order.size()]];
      RandomStream draw(spec.seed);
      draw.mix("age").mix(base.id).mix(static_cast<std::uint64_t>(i));
      ages[static_cast<size_t>(i)] = draw.draw_in(range.lo, range.hi);
    }
  }

  std::vector<std::optional<std::string>> genders(n, base.gender);
  if (spec.perturb_gender) {
    std::string start = base.gender.value_or("male");
    for (int i = 0; i < n; ++i) {
      genders[static_cast<size_t>(i)] = (i % 2 == 0) ? start : flip_gender(start);
    }
  }

  std::vector<std::optional<std::string>> locations(n, base.location);
  if (spec.perturb_location) {
    std::vector<size_t> idx(spec.location_pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    RandomStream loc_rng(spec.seed);
    loc_rng.mix("locations").mix(base.id);
    loc_rng.shuffle(idx);
    for (int i = 0; i < n; ++i) {
      locations[static_cast<size_t>(i)] = spec.location_pool[idx[static_cast<size_t>(i)]];
    }
  }

  std::vector<PerturbedQuestion> grid;
  grid.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    PerturbedQuestion q;
    q.base_id = base.id;
    q.variant_index = i;
    q.attributes = base_attrs;
    q.attributes.age = ages[static_cast<size_t>(i)];
    q.attributes.gender = genders[static_cast<size_t>(i)];
    q.attributes.location = locations[static_cast<size_t>(i)];
    q.changed = diff_attributes(base_attrs, q.attributes);
    q.text = build_question_text(q.attributes);
    grid.push_back(std::move(q));
  }
  return grid;
}

std::string generate_base_question(const PatientRecord& record, const KnowledgeGraph& graph,
                                   Gateway& gateway, const RoleConfig& generator) {
  std::string user = "Patient ID: " + record.id + "\n" + encode_triplets(graph);
  ChatExchange ex = gateway.complete(
      generator, {{"system", std::string(prompts::kGenerator)}, {"user", user}});
  std::string question = trim(ex.response);
  if (question.rfind("A patient", 0) != 0 ||
      question.find(kQuestionClause) == std::string::npos) {
    throw ResponseParseError("generator response is not a well-formed base question",
                             ex.response);
  }
  return question;
}

std::vector<PerturbedQuestion> perturb_llm(const PatientRecord& base,
                                           const PerturbationSpec& spec, Gateway& gateway,
                                           const RoleConfig& attacker) {
  validate_spec(spec);
  std::string user = "ID: " + base.id + "\nsymptoms: " + base.symptoms + "\nage: " +
                     (base.age ? std::to_string(*base.age) : "not provided") + "\nhistory: " +
                     (base.history ? *base.history : "not provided");
  ChatExchange ex =
      gateway.complete(attacker, {{"system", std::string(prompts::kAttacker)}, {"user", user}});

  static const std::regex numbered(R"(^\s*(?:Question\s*)?\d{1,2}\s*[.):]\s*(.+)$)");
  std::vector<std::string> questions;
  for (const std::string& line : split_lines(ex.response)) {
    std::smatch m;
    if (std::regex_match(line, m, numbered)) {
      questions.push_back(trim(m[1].str()));
    } else if (trim(line).rfind("A patient", 0) == 0) {
      questions.push_back(trim(line));
    }
  }
  if (questions.size() != static_cast<size_t>(spec.variants)) {
    throw ResponseParseError("attacker returned " + std::to_string(questions.size()) +
                                 " questions, expected " + std::to_string(spec.variants),
                             ex.response);
  }

  const AttributeSet base_attrs = attributes_of(base);
  static const std::regex age_re(R"((\d{1,3})\s*(?:years?\s*old|-?\s*year-old|years))");
  static const std::regex gender_re(R"(\b(male|female)\b)", std::regex::icase);
  static const std::regex location_re(
      R"(lives\s+in\s+(.+?)(?=\s+with\s+a\s+history\b|[.?\n]|$))");

  std::vector<PerturbedQuestion> grid;
  int index = 0;
  for (const std::string& text : questions) {
    if (text.find(base.symptoms) == std::string::npos) {
      throw ResponseParseError("attacker question lost the verbatim symptoms: " + text,
                               ex.response);
    }
    PerturbedQuestion q;
    q.base_id = base.id;
    q.variant_index = index++;
    q.attributes = base_attrs;
    std::smatch m;
    if (std::regex_search(text, m, age_re)) q.attributes.age = std::stoi(m[1].str());
    if (std::regex_search(text, m, gender_re)) q.attributes.gender = lower_ascii(m[1].str());
    if (std::regex_search(text, m, location_re)) q.attributes.location = trim(m[1].str());
    q.changed = diff_attributes(base_attrs, q.attributes);
    q.text = text;
    grid.push_back(std::move(q));
  }
  return grid;
}

nlohmann::json to_json(const PerturbedQuestion& q) {
  nlohmann::json attrs{{"symptoms", q.attributes.symptoms}};
  attrs["age"] = q.attributes.age ? nlohmann::json(*q.attributes.age) : nlohmann::json();
  attrs["gender"] =
      q.attributes.gender ? nlohmann::json(*q.attributes.gender) : nlohmann::json();
  attrs["location"] =
      q.attributes.location ? nlohmann::json(*q.attributes.location) : nlohmann::json();
  attrs["history"] =
      q.attributes.history ? nlohmann::json(*q.attributes.history) : nlohmann::json();
  return nlohmann::json{{"base_id", q.base_id},
                        {"variant_index", q.variant_index},
                        {"attributes", attrs},
                        {"changed", std::vector<std::string>(q.changed.begin(), q.changed.end())},
                        {"text", q.text}};
}

PerturbedQuestion question_from_json(const nlohmann::json& row) {
  PerturbedQuestion q;
  try {
    q.base_id = row.at("base_id").get<std::string>();
    q.variant_index = row.at("variant_index").get<int>();
    const auto& attrs = row.at("attributes");
    q.attributes.symptoms = attrs.at("symptoms").get<std::string>();
    if (attrs.contains("age") && !attrs["age"].is_null())
      q.attributes.age = attrs["age"].get<int>();
    if (attrs.contains("gender") && !attrs["gender"].is_null())
      q.attributes.gender = attrs["gender"].get<std::string>();
    if (attrs.contains("location") && !attrs["location"].is_null())
      q.attributes.location = attrs["location"].get<std::string>();
    if (attrs.contains("history") && !attrs["history"].is_null())
      q.attributes.history = attrs["history"].get<std::string>();
    for (const auto& c : row.value("changed", std::vector<std::string>{})) q.changed.insert(c);
    q.text = row.at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad perturbed-question row: ") + e.what());
  }
  return q;
}

}  // namespace medaudit
