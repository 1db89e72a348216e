#include <cstdint>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "medaudit/corpus.hpp"
#include "medaudit/error.hpp"
#include "medaudit/io.hpp"
#include "medaudit/judge.hpp"
#include "medaudit/kgx.hpp"
#include "medaudit/llmgate.hpp"
#include "medaudit/metrics.hpp"
#include "medaudit/multihop.hpp"
#include "medaudit/perturb.hpp"
#include "medaudit/pipeline.hpp"
#include "medaudit/prompts.hpp"
#include "medaudit/strings.hpp"

namespace {

using namespace medaudit;

struct GlobalFlags {
  std::string config_path;
  std::string replay_path;
  std::string mock_path;
  bool record = false;
  std::optional<std::uint64_t> seed;
};

RunConfig load_config(const GlobalFlags& flags) {
  if (flags.config_path.empty()) throw ConfigError("this subcommand needs --config <file>");
  RunConfig config = load_run_config(flags.config_path);
  if (flags.seed) {
    config.perturbation.seed = *flags.seed;
    config.sample_seed = *flags.seed;
  }
  return config;
}

std::unique_ptr<Backend> make_backend(const GlobalFlags& flags) {
  if (!flags.replay_path.empty() && !flags.mock_path.empty()) {
    throw ConfigError("--replay and --mock are mutually exclusive");
  }
  if (!flags.replay_path.empty()) return make_replay_backend(flags.replay_path);
  if (!flags.mock_path.empty()) return make_mock_backend(MockScript::from_file(flags.mock_path));
  return make_http_backend();
}

void print_manifest(const RunManifest& manifest, const std::filesystem::path& dir) {
  std::cout << "run " << dir.string() << " (" << manifest.mode << ")\n";
  for (const std::string& stage : stage_order()) {
    auto it = manifest.stages.find(stage);
    if (it == manifest.stages.end()) continue;
    std::cout << "  " << stage << ": " << (it->second.complete ? "done" : "pending");
    if (it->second.complete) {
      std::printf(" (%s, %.1f ms)", it->second.artifact.c_str(), it->second.millis);
    }
    std::cout << "\n";
  }
}

int run_stage_command(const GlobalFlags& flags, const std::string& last_stage) {
  RunConfig config = load_config(flags);
  Gateway gateway(make_backend(flags));
  Runner runner(config, gateway);
  if (flags.record) {
    std::filesystem::create_directories(runner.run_dir());
    gateway.enable_recording(runner.run_dir().string());
  }
  RunManifest manifest = runner.run_through(last_stage);
  print_manifest(manifest, runner.run_dir());
  return 0;
}

int cmd_corpus_inspect(const GlobalFlags& flags) {
  RunConfig config = load_config(flags);
  Corpus corpus = load_corpus(config.corpus_path, config.mapping, config.corpus_name);
  std::cout << "corpus " << corpus.name << "\n";
  std::cout << "  records: " << corpus.records.size() << "\n";
  std::cout << "  skipped (blank symptoms): " << corpus.skipped_rows << "\n";
  std::cout << "  ground truth: " << (corpus.has_ground_truth ? "yes" : "no") << "\n";
  size_t age = 0, gender = 0, location = 0, history = 0, truth = 0;
  for (const PatientRecord& r : corpus.records) {
    age += r.age.has_value();
    gender += r.gender.has_value() || r.gender_raw.has_value();
    location += r.location.has_value();
    history += r.history.has_value();
    truth += r.ground_truth.has_value();
  }
  const double n = corpus.records.empty() ? 1.0 : static_cast<double>(corpus.records.size());
  auto pct = [n](size_t k) { return 100.0 * static_cast<double>(k) / n; };
  std::printf("  coverage: age %.1f%%, gender %.1f%%, location %.1f%%, history %.1f%%, ground_truth %.1f%%\n",
              pct(age), pct(gender), pct(location), pct(history), pct(truth));
  return 0;
}

void print_extraction(const char* label, const ExtractionResult& result) {
  std::cout << label << " (" << result.triplets.size() << " triplets, "
            << result.candidates.size() << " entities)\n";
  std::cout << encode_triplets(result.triplets);
  for (const RelevanceScore& c : result.candidates) {
    std::printf("  R(%s) = %.3f\n", c.entity.c_str(), c.score);
  }
}

int cmd_extract(const GlobalFlags& flags, const std::string& text_arg, const std::string& file_arg,
                bool compare, std::optional<double> theta_arg) {
  std::string text = text_arg;
  if (text.empty() && !file_arg.empty()) text = read_file(file_arg);
  if (text.empty()) throw ConfigError("extract needs --text or --file");

  std::vector<ExtractionRule> rules = default_rule_pack();
  double theta = 0.0;
  if (!flags.config_path.empty()) {
    RunConfig config = load_run_config(flags.config_path);
    if (!config.rule_pack_path.empty()) rules = load_rule_pack(config.rule_pack_path);
    theta = config.theta;
  }
  if (theta_arg) theta = *theta_arg;

  if (compare) {
    ExtractionComparison cmp = compare_extraction(text, rules, theta);
    print_extraction("with rules", cmp.with_rules);
    print_extraction("without rules", cmp.without_rules);
    std::set<std::string> with_rel, without_rel;
    for (const Triplet& t : cmp.with_rules.triplets) with_rel.insert(t.relation);
    for (const Triplet& t : cmp.without_rules.triplets) without_rel.insert(t.relation);
    std::cout << "relation variety: " << with_rel.size() << " with rules vs "
              << without_rel.size() << " without\n";
  } else {
    print_extraction("extraction", filter_graph(extract(text, rules), theta));
  }
  return 0;
}

int cmd_ablate(const GlobalFlags& flags, const std::vector<std::string>& subset_args) {
  RunConfig config = load_config(flags);
  Gateway gateway(make_backend(flags));

  std::vector<std::set<std::string>> subsets;
  for (const std::string& arg : subset_args) {
    std::set<std::string> subset;
    if (arg != "none") {
      for (const std::string& part : split(arg, ',')) {
        std::string attr = trim(part);
        if (!attr.empty()) subset.insert(attr);
      }
    }
    subsets.push_back(std::move(subset));
  }
  if (subsets.empty()) {
    // full grid plus each attribute held out, the usual ablation sweep
    subsets = {{"age", "gender", "location"},
               {"gender", "location"},
               {"age", "location"},
               {"age", "gender"}};
  }

  std::vector<RunManifest> manifests = ablation_grid(config, subsets, gateway);
  for (size_t i = 0; i < manifests.size(); ++i) {
    std::cout << "ablation " << i << ": mode " << manifests[i].mode << ", stages "
              << manifests[i].stages.size() << " complete\n";
  }
  std::cout << manifests.size() << " ablation runs under " << config.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sociodemographic bias audit for medical question answering"};
  app.require_subcommand(1);

  GlobalFlags flags;
  std::uint64_t seed_value = 0;
  app.add_option("--config", flags.config_path, "run configuration JSON");
  app.add_flag("--record", flags.record, "append live exchanges to the run directory fixture");
  app.add_option("--replay", flags.replay_path, "serve responses from a recorded fixture");
  app.add_option("--mock", flags.mock_path, "serve responses from a mock script (JSONL rules)");
  auto* seed_opt = app.add_option("--seed", seed_value, "override perturbation and sampling seeds");

  auto* corpus_cmd = app.add_subcommand("corpus", "corpus utilities");
  corpus_cmd->fallthrough();
  auto* inspect_cmd = corpus_cmd->add_subcommand("inspect", "print record counts and field coverage");
  inspect_cmd->fallthrough();

  std::string extract_text, extract_file;
  bool extract_compare = false;
  double extract_theta = 0.0;
  auto* extract_cmd = app.add_subcommand("extract", "extract a knowledge graph from clinical text");
  extract_cmd->fallthrough();
  extract_cmd->add_option("--text", extract_text, "inline clinical text");
  extract_cmd->add_option("--file", extract_file, "file with clinical text");
  extract_cmd->add_flag("--compare", extract_compare, "show extraction with and without rules");
  auto* theta_opt = extract_cmd->add_option("--theta", extract_theta, "relevance threshold");

  auto* perturb_cmd = app.add_subcommand("perturb", "generate base and perturbed questions");
  perturb_cmd->fallthrough();
  auto* answer_cmd = app.add_subcommand("answer", "answer questions under each condition");
  answer_cmd->fallthrough();
  auto* judge_cmd = app.add_subcommand("judge", "score answers with the judge role");
  judge_cmd->fallthrough();
  auto* report_cmd = app.add_subcommand("report", "aggregate scores into report files");
  report_cmd->fallthrough();
  auto* run_cmd = app.add_subcommand("run", "run every stage of the pipeline");
  run_cmd->fallthrough();

  std::vector<std::string> subset_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "run the perturbation-attribute ablation grid");
  ablate_cmd->fallthrough();
  ablate_cmd->add_option("--subset", subset_args,
                         "attribute subset per run, e.g. age,gender or none (repeatable)");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) flags.seed = seed_value;

  try {
    medaudit::prompts::verify_integrity();
    if (inspect_cmd->parsed()) return cmd_corpus_inspect(flags);
    if (corpus_cmd->parsed()) {
      std::cerr << "usage: corpus inspect\n";
      return 2;
    }
    if (extract_cmd->parsed()) {
      std::optional<double> theta;
      if (theta_opt->count() > 0) theta = extract_theta;
      return cmd_extract(flags, extract_text, extract_file, extract_compare, theta);
    }
    if (perturb_cmd->parsed()) return run_stage_command(flags, "questions");
    if (answer_cmd->parsed()) return run_stage_command(flags, "traces");
    if (judge_cmd->parsed()) return run_stage_command(flags, "scores");
    if (report_cmd->parsed()) return run_stage_command(flags, "report");
    if (run_cmd->parsed()) return run_stage_command(flags, "report");
    if (ablate_cmd->parsed()) return cmd_ablate(flags, subset_args);
  } catch (const medaudit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
