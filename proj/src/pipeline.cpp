#include "medaudit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "medaudit/error.hpp"
#include "medaudit/io.hpp"
#include "medaudit/judge.hpp"
#include "medaudit/metrics.hpp"
#include "medaudit/multihop.hpp"
#include "medaudit/prompts.hpp"
#include "medaudit/rng.hpp"
#include "medaudit/strings.hpp"

namespace medaudit {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Condition condition) {
  switch (condition) {
    case Condition::original: return "original";
    case Condition::no_multihop: return "no_multihop";
    case Condition::multihop: return "multihop";
  }
  throw ConfigError("unknown condition");
}

Condition condition_from_string(const std::string& s) {
  if (s == "original") return Condition::original;
  if (s == "no_multihop") return Condition::no_multihop;
  if (s == "multihop") return Condition::multihop;
  throw ConfigError("unknown condition '" + s + "' (expected original, no_multihop or multihop)");
}

const std::vector<std::string>& stage_order() {
  static const std::vector<std::string> order{"questions", "traces", "scores", "report"};
  return order;
}

namespace {

std::string get_string(const json& obj, const char* key, const std::string& fallback) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  if (!obj[key].is_string()) throw ConfigError(std::string("config field '") + key + "' must be a string");
  return obj[key].get<std::string>();
}

std::optional<std::string> get_opt_string(const json& obj, const char* key) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  if (!obj[key].is_string()) throw ConfigError(std::string("config field '") + key + "' must be a string");
  return obj[key].get<std::string>();
}

RoleConfig parse_role(Role role, const json& obj) {
  RoleConfig rc;
  rc.role = role;
  rc.model = get_string(obj, "model", rc.model);
  if (obj.contains("temperature")) rc.temperature = obj["temperature"].get<double>();
  if (obj.contains("max_tokens")) rc.max_tokens = obj["max_tokens"].get<int>();
  rc.endpoint = get_string(obj, "endpoint", rc.endpoint);
  rc.auth_env = get_string(obj, "auth_env", rc.auth_env);
  return rc;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(path + ": config root must be a JSON object");

  RunConfig config;
  if (!doc.contains("corpus") || !doc["corpus"].is_object()) {
    throw ConfigError(path + ": missing 'corpus' object");
  }
  const json& corpus = doc["corpus"];
  config.corpus_path = get_string(corpus, "path", "");
  config.corpus_name = get_string(corpus, "name", "");
  if (corpus.contains("mapping")) {
    const json& m = corpus["mapping"];
    config.mapping.id = get_string(m, "id", config.mapping.id);
    config.mapping.symptoms = get_string(m, "symptoms", config.mapping.symptoms);
    config.mapping.age = get_opt_string(m, "age");
    config.mapping.gender = get_opt_string(m, "gender");
    config.mapping.location = get_opt_string(m, "location");
    config.mapping.history = get_opt_string(m, "history");
    config.mapping.ground_truth = get_opt_string(m, "ground_truth");
  }

  if (doc.contains("kg")) {
    const json& kg = doc["kg"];
    config.rule_pack_path = get_string(kg, "rule_pack", "");
    if (kg.contains("theta")) config.theta = kg["theta"].get<double>();
  }

  if (doc.contains("perturb")) {
    const json& p = doc["perturb"];
    if (p.contains("age")) config.perturbation.perturb_age = p["age"].get<bool>();
    if (p.contains("gender")) config.perturbation.perturb_gender = p["gender"].get<bool>();
    if (p.contains("location")) config.perturbation.perturb_location = p["location"].get<bool>();
    if (p.contains("variants")) config.perturbation.variants = p["variants"].get<int>();
    if (p.contains("seed")) config.perturbation.seed = p["seed"].get<std::uint64_t>();
    if (p.contains("age_ranges")) {
      config.perturbation.age_ranges.clear();
      for (const json& r : p["age_ranges"]) {
        if (!r.is_array() || r.size() != 2) {
          throw ConfigError(path + ": perturb.age_ranges entries must be [lo, hi] pairs");
        }
        config.perturbation.age_ranges.push_back({r[0].get<int>(), r[1].get<int>()});
      }
    }
    if (p.contains("location_pool")) {
      config.perturbation.location_pool.clear();
      for (const json& loc : p["location_pool"]) {
        config.perturbation.location_pool.push_back(loc.get<std::string>());
      }
    }
  }

  config.question_mode = get_string(doc, "question_mode", config.question_mode);
  config.attacker_mode = get_string(doc, "attacker_mode", config.attacker_mode);

  if (doc.contains("roles")) {
    for (const auto& [name, body] : doc["roles"].items()) {
      Role role = role_from_string(name);
      config.roles[role] = parse_role(role, body);
    }
  }

  if (doc.contains("run")) {
    const json& run = doc["run"];
    config.run_name = get_string(run, "name", config.run_name);
    config.out_dir = get_string(run, "out_dir", config.out_dir);
    if (run.contains("conditions")) {
      config.conditions.clear();
      for (const json& c : run["conditions"]) {
        config.conditions.push_back(condition_from_string(c.get<std::string>()));
      }
    }
    if (run.contains("sample_size") && !run["sample_size"].is_null()) {
      config.sample_size = run["sample_size"].get<int>();
    }
    if (run.contains("sample_seed")) config.sample_seed = run["sample_seed"].get<std::uint64_t>();
    if (run.contains("max_inflight")) config.max_inflight = run["max_inflight"].get<int>();
    if (run.contains("score_quality")) config.score_quality = run["score_quality"].get<bool>();
  }
  if (config.conditions.empty()) {
    config.conditions = {Condition::original, Condition::no_multihop, Condition::multihop};
  }
  return config;
}

void validate(const RunConfig& config) {
  if (config.corpus_path.empty()) throw ConfigError("corpus.path is required");
  if (config.mapping.id.empty() || config.mapping.symptoms.empty()) {
    throw ConfigError("corpus.mapping must name id and symptoms columns");
  }
  if (config.conditions.empty()) throw ConfigError("run.conditions must not be empty");
  for (size_t i = 0; i < config.conditions.size(); ++i) {
    for (size_t j = i + 1; j < config.conditions.size(); ++j) {
      if (config.conditions[i] == config.conditions[j]) {
        throw ConfigError("run.conditions lists '" + to_string(config.conditions[i]) + "' twice");
      }
    }
  }
  if (config.question_mode != "template" && config.question_mode != "llm") {
    throw ConfigError("question_mode must be 'template' or 'llm'");
  }
  if (config.attacker_mode != "template" && config.attacker_mode != "llm") {
    throw ConfigError("attacker_mode must be 'template' or 'llm'");
  }
  if (!config.roles.count(Role::target)) throw ConfigError("roles.target is required");
  if (!config.roles.count(Role::judge)) throw ConfigError("roles.judge is required");
  if (config.question_mode == "llm" && !config.roles.count(Role::generator)) {
    throw ConfigError("question_mode 'llm' requires roles.generator");
  }
  if (config.attacker_mode == "llm" && !config.roles.count(Role::attacker)) {
    throw ConfigError("attacker_mode 'llm' requires roles.attacker");
  }
  if (config.sample_size && *config.sample_size < 1) {
    throw ConfigError("run.sample_size must be positive when set");
  }
  if (config.max_inflight < 1) throw ConfigError("run.max_inflight must be at least 1");
  if (config.run_name.empty()) throw ConfigError("run.name must not be empty");
  if (config.run_name.find('/') != std::string::npos ||
      config.run_name.find('\\') != std::string::npos) {
    throw ConfigError("run.name must not contain path separators");
  }
  if (config.out_dir.empty()) throw ConfigError("run.out_dir must not be empty");
}

std::string config_hash(const RunConfig& config) {
  json snapshot;
  snapshot["corpus"] = {{"path", config.corpus_path},
                        {"name", config.corpus_name},
                        {"id", config.mapping.id},
                        {"symptoms", config.mapping.symptoms}};
  auto opt = [](const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); };
  snapshot["corpus"]["age"] = opt(config.mapping.age);
  snapshot["corpus"]["gender"] = opt(config.mapping.gender);
  snapshot["corpus"]["location"] = opt(config.mapping.location);
  snapshot["corpus"]["history"] = opt(config.mapping.history);
  snapshot["corpus"]["ground_truth"] = opt(config.mapping.ground_truth);
  // the pack's bytes, not just its path: edits to the file must invalidate
  snapshot["rule_pack"] =
      config.rule_pack_path.empty() ? "builtin" : to_hex64(fnv1a64(read_file(config.rule_pack_path)));
  snapshot["theta"] = config.theta;
  json ranges = json::array();
  for (const AgeRange& r : config.perturbation.age_ranges) ranges.push_back({r.lo, r.hi});
  snapshot["perturb"] = {{"age", config.perturbation.perturb_age},
                         {"gender", config.perturbation.perturb_gender},
                         {"location", config.perturbation.perturb_location},
                         {"variants", config.perturbation.variants},
                         {"seed", config.perturbation.seed},
                         {"age_ranges", ranges},
                         {"location_pool", config.perturbation.location_pool}};
  snapshot["question_mode"] = config.question_mode;
  snapshot["attacker_mode"] = config.attacker_mode;
  json roles = json::object();
  for (const auto& [role, rc] : config.roles) {
    roles[to_string(role)] = {{"model", rc.model},
                              {"temperature", rc.temperature},
                              {"max_tokens", rc.max_tokens},
                              {"endpoint", rc.endpoint}};
  }
  snapshot["roles"] = roles;
  json conditions = json::array();
  for (Condition c : config.conditions) conditions.push_back(to_string(c));
  snapshot["conditions"] = conditions;
  snapshot["sample_size"] = config.sample_size ? json(*config.sample_size) : json(nullptr);
  snapshot["sample_seed"] = config.sample_seed;
  snapshot["score_quality"] = config.score_quality;
  json prompt_prints = json::object();
  for (const auto& frozen : prompts::frozen_prompts()) {
    prompt_prints[std::string(frozen.name)] = to_hex64(frozen.fingerprint);
  }
  snapshot["prompts"] = prompt_prints;
  return to_hex64(fnv1a64(snapshot.dump()));
}

json RunManifest::to_json() const {
  json stages_obj = json::object();
  for (const auto& [name, state] : stages) {
    stages_obj[name] = {
        {"complete", state.complete}, {"artifact", state.artifact}, {"millis", state.millis}};
  }
  return {{"config_hash", config_hash}, {"mode", mode}, {"stages", stages_obj}};
}

RunManifest RunManifest::from_json(const json& doc) {
  RunManifest m;
  m.config_hash = doc.at("config_hash").get<std::string>();
  m.mode = doc.value("mode", std::string{});
  if (doc.contains("stages")) {
    for (const auto& [name, body] : doc.at("stages").items()) {
      StageState state;
      state.complete = body.value("complete", false);
      state.artifact = body.value("artifact", std::string{});
      state.millis = body.value("millis", 0.0);
      m.stages[name] = state;
    }
  }
  return m;
}

namespace {

const char* artifact_for(const std::string& stage) {
  if (stage == "questions") return "questions.jsonl";
  if (stage == "traces") return "traces.jsonl";
  if (stage == "scores") return "scores.jsonl";
  if (stage == "report") return "report.json";
  throw ConfigError("unknown stage '" + stage + "'");
}

json triplets_json(const std::vector<Triplet>& triplets) {
  json arr = json::array();
  for (const Triplet& t : triplets) {
    arr.push_back({{"head", t.head}, {"relation", t.relation}, {"tail", t.tail}});
  }
  return arr;
}

struct QuestionRow {
  std::string kind;  // base | variant
  PerturbedQuestion question;
};

std::vector<QuestionRow> read_questions(const fs::path& path) {
  std::vector<QuestionRow> rows;
  for (const json& row : read_jsonl(path.string())) {
    QuestionRow qr;
    qr.kind = row.value("kind", "variant");
    qr.question = question_from_json(row);
    rows.push_back(std::move(qr));
  }
  return rows;
}

// Append-per-row artifact writer; flushes each line so an aborted stage still
// leaves the rows that finished.
class JsonlWriter {
 public:
  explicit JsonlWriter(const fs::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    path_ = path.string();
  }
  void row(const json& value) {
    out_ << value.dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("write failed on " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

}  // namespace

Runner::Runner(RunConfig config, Gateway& gateway)
    : config_(std::move(config)), gateway_(gateway) {
  validate(config_);
}

fs::path Runner::run_dir() const {
  return fs::path(config_.out_dir) / config_.run_name;
}

void Runner::load_or_init_manifest() {
  const fs::path path = run_dir() / "manifest.json";
  const std::string hash = config_hash(config_);
  if (fs::exists(path)) {
    json doc;
    try {
      doc = json::parse(read_file(path.string()));
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": manifest is not valid JSON: " + e.what());
    }
    manifest_ = RunManifest::from_json(doc);
    if (manifest_.config_hash != hash) {
      throw ConfigError("run directory " + run_dir().string() +
                        " was produced by a different configuration (manifest hash " +
                        manifest_.config_hash + ", this config " + hash +
                        "); pick a fresh run name or delete the directory");
    }
  } else {
    manifest_ = RunManifest{};
    manifest_.config_hash = hash;
  }
  manifest_.mode = gateway_.mode();
  for (const std::string& stage : stage_order()) {
    if (!manifest_.stages.count(stage)) {
      StageState state;
      state.artifact = artifact_for(stage);
      manifest_.stages[stage] = state;
    }
  }
}

void Runner::save_manifest() {
  write_file((run_dir() / "manifest.json").string(), manifest_.to_json().dump(2) + "\n");
}

bool Runner::stage_done(const std::string& stage) const {
  auto it = manifest_.stages.find(stage);
  if (it == manifest_.stages.end() || !it->second.complete) return false;
  if (!fs::exists(run_dir() / it->second.artifact)) return false;
  if (stage == "report" && !fs::exists(run_dir() / "report.csv")) return false;
  return true;
}

void Runner::run_stage(const std::string& stage) {
  if (stage == "questions") stage_questions();
  else if (stage == "traces") stage_traces();
  else if (stage == "scores") stage_scores();
  else if (stage == "report") stage_report();
  else throw ConfigError("unknown stage '" + stage + "'");
}

RunManifest Runner::run() { return run_through(stage_order().back()); }

RunManifest Runner::run_through(const std::string& last_stage) {
  size_t last = stage_order().size();
  for (size_t i = 0; i < stage_order().size(); ++i) {
    if (stage_order()[i] == last_stage) last = i;
  }
  if (last == stage_order().size()) throw ConfigError("unknown stage '" + last_stage + "'");

  fs::create_directories(run_dir());
  load_or_init_manifest();

  // first stage that has to run; everything after it is stale by definition
  size_t first = stage_order().size();
  for (size_t i = 0; i <= last; ++i) {
    if (!stage_done(stage_order()[i])) {
      first = i;
      break;
    }
  }
  for (size_t i = first; i < stage_order().size(); ++i) {
    manifest_.stages[stage_order()[i]].complete = false;
  }
  save_manifest();

  for (size_t i = first; i <= last; ++i) {
    const std::string& stage = stage_order()[i];
    auto t0 = std::chrono::steady_clock::now();
    run_stage(stage);
    auto t1 = std::chrono::steady_clock::now();
    StageState& state = manifest_.stages[stage];
    state.complete = true;
    state.artifact = artifact_for(stage);
    state.millis = std::chrono::duration<double, std::milli>(t1 - t0).count();
    save_manifest();
  }
  return manifest_;
}

void Runner::stage_questions() {
  Corpus corpus = load_corpus(config_.corpus_path, config_.mapping, config_.corpus_name);

  std::vector<size_t> picked(corpus.records.size());
  std::iota(picked.begin(), picked.end(), size_t{0});
  if (config_.sample_size && static_cast<size_t>(*config_.sample_size) < picked.size()) {
    RandomStream rng{config_.sample_seed};
    rng.mix("sample").mix(corpus.name);
    rng.shuffle(picked);
    picked.resize(static_cast<size_t>(*config_.sample_size));
    std::sort(picked.begin(), picked.end());  // corpus order within the sample
  }

  JsonlWriter out(run_dir() / "questions.jsonl");
  for (size_t idx : picked) {
    const PatientRecord& record = corpus.records[idx];

    PerturbedQuestion base;
    base.base_id = record.id;
    base.variant_index = 0;
    base.attributes = attributes_of(record);
    if (config_.question_mode == "llm") {
      base.text = generate_base_question(record, record_graph(record), gateway_,
                                         config_.roles.at(Role::generator));
    } else {
      base.text = generate_base_question(record);
    }
    json base_row = to_json(base);
    base_row["kind"] = "base";
    out.row(base_row);

    std::vector<PerturbedQuestion> grid;
    if (config_.attacker_mode == "llm") {
      grid = perturb_llm(record, config_.perturbation, gateway_, config_.roles.at(Role::attacker));
    } else {
      grid = perturb(record, config_.perturbation);
    }
    for (const PerturbedQuestion& q : grid) {
      json row = to_json(q);
      row["kind"] = "variant";
      out.row(row);
    }
  }
}

void Runner::stage_traces() {
  const std::vector<QuestionRow> questions = read_questions(run_dir() / "questions.jsonl");
  const RoleConfig& target = config_.roles.at(Role::target);
  JsonlWriter out(run_dir() / "traces.jsonl");

  for (Condition condition : config_.conditions) {
    const bool wants_base = condition == Condition::original;
    const bool multihop = condition == Condition::multihop;

    std::vector<const QuestionRow*> pool;
    for (const QuestionRow& qr : questions) {
      if ((qr.kind == "base") == wants_base) pool.push_back(&qr);
    }

    std::vector<std::vector<Message>> requests;
    requests.reserve(pool.size());
    for (const QuestionRow* qr : pool) {
      std::string_view system = multihop ? prompts::kTargetMultihop : prompts::kSingleShot;
      requests.push_back({{"system", std::string(system)}, {"user", qr->question.text}});
    }

    std::vector<Gateway::BatchItem> batch =
        gateway_.complete_batch(target, requests, config_.max_inflight);
    for (size_t i = 0; i < batch.size(); ++i) {
      const QuestionRow& qr = *pool[i];
      if (!batch[i].ok()) {
        throw GatewayError("traces stage: request for " + qr.question.base_id + " variant " +
                               std::to_string(qr.question.variant_index) + " under " +
                               to_string(condition) + " failed: " + batch[i].error,
                           batch[i].error);
      }
      const ChatExchange& ex = *batch[i].exchange;

      ReasoningTrace trace;
      if (multihop) {
        trace = structure_response(qr.question, ex.response);
      } else {
        trace.base_id = qr.question.base_id;
        trace.variant_index = qr.question.variant_index;
        trace.raw = ex.response;
        trace.answer = trim(ex.response);
        trace.well_formed = !trace.answer.empty();
      }

      json row;
      row["kind"] = qr.kind;
      row["base_id"] = trace.base_id;
      row["variant_index"] = trace.variant_index;
      row["condition"] = to_string(condition);
      row["question"] = qr.question.text;
      row["answer"] = trace.answer;
      row["raw"] = trace.raw;
      row["well_formed"] = trace.well_formed;
      row["groundedness"] = trace.groundedness ? json(*trace.groundedness) : json(nullptr);
      row["stage1"] = triplets_json(trace.stage1);
      row["stage2"] = triplets_json(trace.stage2);
      row["diagnostics"] = {{"stage1_unparsed", trace.diagnostics.stage1_unparsed},
                            {"stage2_unparsed", trace.diagnostics.stage2_unparsed},
                            {"stage3_triplets", trace.diagnostics.stage3_triplets}};
      row["target_model"] = ex.model;
      out.row(row);
    }
  }
}

void Runner::stage_scores() {
  const std::vector<json> traces = read_jsonl((run_dir() / "traces.jsonl").string());
  const RoleConfig& judge = config_.roles.at(Role::judge);
  JsonlWriter out(run_dir() / "scores.jsonl");

  std::vector<std::vector<Message>> requests;
  requests.reserve(traces.size());
  for (const json& trace : traces) {
    requests.push_back(
        bias_request(trace.at("question").get<std::string>(), trace.at("answer").get<std::string>()));
  }
  std::vector<Gateway::BatchItem> batch =
      gateway_.complete_batch(judge, requests, config_.max_inflight);

  for (size_t i = 0; i < batch.size(); ++i) {
    const json& trace = traces[i];
    json row;
    row["type"] = "bias";
    row["kind"] = trace.at("kind");
    row["base_id"] = trace.at("base_id");
    row["variant_index"] = trace.at("variant_index");
    row["condition"] = trace.at("condition");
    row["target_model"] = trace.at("target_model");
    row["judge_model"] = judge.model;
    if (!batch[i].ok()) {
      throw GatewayError("scores stage: bias request for " +
                             trace.at("base_id").get<std::string>() + " variant " +
                             std::to_string(trace.at("variant_index").get<int>()) +
                             " failed: " + batch[i].error,
                         batch[i].error);
    }
    // a judge that answered but cannot be parsed is data, not a transport
    // fault: keep the row with the error and the raw payload
    try {
      BiasParse parsed = parse_bias_response(batch[i].exchange->response, judge.model);
      json scores = json::object();
      for (size_t d = 0; d < kBiasDimensions.size(); ++d) {
        scores[std::string(kBiasDimensions[d])] =
            parsed.scores[d] ? json(*parsed.scores[d]) : json(nullptr);
      }
      row["scores"] = scores;
      row["flags"] = parsed.flags;
    } catch (const ScoreParseError& e) {
      row["error"] = e.what();
      row["raw"] = e.raw();
    }
    out.row(row);
  }

  if (config_.score_quality) {
    const std::vector<QuestionRow> questions = read_questions(run_dir() / "questions.jsonl");
    std::unordered_map<std::string, const PerturbedQuestion*> base_by_id;
    for (const QuestionRow& qr : questions) {
      if (qr.kind == "base") base_by_id[qr.question.base_id] = &qr.question;
    }

    std::vector<const QuestionRow*> variants;
    std::vector<std::vector<Message>> quality_requests;
    for (const QuestionRow& qr : questions) {
      if (qr.kind != "variant") continue;
      auto it = base_by_id.find(qr.question.base_id);
      if (it == base_by_id.end()) {
        throw SchemaError("questions artifact has variant rows for " + qr.question.base_id +
                          " but no base row");
      }
      variants.push_back(&qr);
      quality_requests.push_back(quality_request(it->second->text, qr.question.text));
    }
    std::vector<Gateway::BatchItem> quality_batch =
        gateway_.complete_batch(judge, quality_requests, config_.max_inflight);
    for (size_t i = 0; i < quality_batch.size(); ++i) {
      const PerturbedQuestion& q = variants[i]->question;
      json row;
      row["type"] = "quality";
      row["base_id"] = q.base_id;
      row["variant_index"] = q.variant_index;
      row["judge_model"] = judge.model;
      if (!quality_batch[i].ok()) {
        throw GatewayError("scores stage: quality request for " + q.base_id + " variant " +
                               std::to_string(q.variant_index) + " failed: " +
                               quality_batch[i].error,
                           quality_batch[i].error);
      }
      try {
        QualityParse parsed = parse_quality_response(quality_batch[i].exchange->response, judge.model);
        row["scores"] = {{"factual_consistency", parsed.score.factual_consistency},
                         {"clinical_relevance", parsed.score.clinical_relevance},
                         {"coherence", parsed.score.coherence}};
        row["flags"] = parsed.flags;
      } catch (const ScoreParseError& e) {
        row["error"] = e.what();
        row["raw"] = e.raw();
      }
      out.row(row);
    }
  }
}

void Runner::stage_report() {
  const std::vector<json> rows = read_jsonl((run_dir() / "scores.jsonl").string());

  std::vector<BiasScoreVector> vectors;
  std::string target_model;
  std::string judge_model;
  for (const json& row : rows) {
    if (row.value("type", "") != "bias" || row.contains("error")) continue;
    BiasScoreVector v;
    v.judge_model = row.at("judge_model").get<std::string>();
    v.condition = row.at("condition").get<std::string>();
    const json& scores = row.at("scores");
    for (size_t d = 0; d < kBiasDimensions.size(); ++d) {
      const std::string key(kBiasDimensions[d]);
      if (scores.contains(key) && !scores[key].is_null()) v.scores[d] = scores[key].get<double>();
    }
    vectors.push_back(std::move(v));
    target_model = row.at("target_model").get<std::string>();
    judge_model = row.at("judge_model").get<std::string>();
  }

  std::string dataset = config_.corpus_name;
  if (dataset.empty()) dataset = fs::path(config_.corpus_path).stem().string();

  bool has_original = false;
  for (Condition c : config_.conditions) has_original |= (c == Condition::original);
  const std::string baseline =
      has_original ? to_string(Condition::original) : to_string(config_.conditions.front());

  std::vector<AggregateReport> reports;
  for (Condition condition : config_.conditions) {
    GroupKey key{dataset, target_model, judge_model, to_string(condition)};
    reports.push_back(aggregate(vectors, key, baseline));
  }
  write_file((run_dir() / "report.json").string(), report_json(reports).dump(2) + "\n");
  write_file((run_dir() / "report.csv").string(), report_csv(reports));
}

std::vector<RunManifest> ablation_grid(const RunConfig& config,
                                       const std::vector<std::set<std::string>>& subsets,
                                       Gateway& gateway) {
  if (subsets.empty()) throw ConfigError("ablation grid needs at least one attribute subset");
  std::vector<RunManifest> manifests;
  for (size_t i = 0; i < subsets.size(); ++i) {
    std::string tag;
    for (const std::string& attr : subsets[i]) {
      if (attr != "age" && attr != "gender" && attr != "location") {
        throw ConfigError("ablation subset entry '" + attr +
                          "' is not one of age, gender, location");
      }
      if (!tag.empty()) tag += "-";
      tag += attr;
    }
    if (tag.empty()) tag = "none";

    RunConfig ablated = config;
    ablated.perturbation.perturb_age = subsets[i].count("age") > 0;
    ablated.perturbation.perturb_gender = subsets[i].count("gender") > 0;
    ablated.perturbation.perturb_location = subsets[i].count("location") > 0;
    ablated.run_name = config.run_name + "-abl" + std::to_string(i) + "-" + tag;

    Runner runner(ablated, gateway);
    manifests.push_back(runner.run());
  }
  return manifests;
}

}  // namespace medaudit
