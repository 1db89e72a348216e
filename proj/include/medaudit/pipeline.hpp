#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "medaudit/corpus.hpp"
#include "medaudit/llmgate.hpp"
#include "medaudit/perturb.hpp"

namespace medaudit {

enum class Condition { original, no_multihop, multihop };

std::string to_string(Condition condition);
Condition condition_from_string(const std::string& s);

struct RunConfig {
  std::string corpus_path;
  std::string corpus_name;  // defaults to the file stem
  ColumnMapping mapping;

  std::string rule_pack_path;  // empty: built-in default pack
  double theta = 0.0;

  PerturbationSpec perturbation;
  std::string question_mode = "template";  // template | llm (Generator role)
  std::string attacker_mode = "template";  // template | llm (Attacker role)

  std::map<Role, RoleConfig> roles;

  std::vector<Condition> conditions;
  std::optional<int> sample_size;
  std::uint64_t sample_seed = 0;
  std::string out_dir = "runs";
  std::string run_name = "run";
  int max_inflight = 4;
  bool score_quality = false;
};

RunConfig load_run_config(const std::string& path);
void validate(const RunConfig& config);

// Snapshot hash covering everything that shapes the artifacts: corpus ref,
// rule pack bytes, theta, perturbation spec, modes, role parameters,
// conditions, sampling, and the frozen prompt fingerprints.
std::string config_hash(const RunConfig& config);

struct StageState {
  bool complete = false;
  std::string artifact;
  double millis = 0;
};

struct RunManifest {
  std::string config_hash;
  std::string mode;  // gateway mode at last run
  std::map<std::string, StageState> stages;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& doc);
};

const std::vector<std::string>& stage_order();  // questions, traces, scores, report

// Owns one run directory: <out_dir>/<run_name>/{manifest.json, questions.jsonl,
// traces.jsonl, scores.jsonl, report.json, report.csv}. Stages run in
// dependency order and communicate only through their artifacts; rerunning a
// stage invalidates everything downstream. run() resumes from the manifest and
// refuses a directory whose manifest hash does not match the config.
class Runner {
 public:
  Runner(RunConfig config, Gateway& gateway);

  std::filesystem::path run_dir() const;
  RunManifest run();
  // Runs every stale stage up to and including last_stage; run() is
  // run_through("report").
  RunManifest run_through(const std::string& last_stage);

  void stage_questions();
  void stage_traces();
  void stage_scores();
  void stage_report();

 private:
  void load_or_init_manifest();
  void save_manifest();
  bool stage_done(const std::string& stage) const;
  void run_stage(const std::string& stage);

  RunConfig config_;
  Gateway& gateway_;
  RunManifest manifest_;
};

// One run per perturbation-flag subset (subset of {age, gender, location}),
// sharing the corpus sample and seeds. Run names get a position+subset suffix.
std::vector<RunManifest> ablation_grid(const RunConfig& config,
                                       const std::vector<std::set<std::string>>& subsets,
                                       Gateway& gateway);

}  // namespace medaudit
