#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stlf/baselines.hpp"
#include "stlf/bounds.hpp"
#include "stlf/divergence.hpp"
#include "stlf/hypothesis.hpp"
#include "stlf/scenario.hpp"
#include "stlf/solver.hpp"

namespace stlf {

enum class DivergenceMode { kEstimate, kUniform, kExtreme, kRandom, kFile };
enum class CombineMode { kParameter, kOutputAverage };

struct DivergenceBlock {
  DivergenceMode mode = DivergenceMode::kEstimate;
  std::string file;  // injection CSV for kFile
  DivergenceScale file_scale = DivergenceScale::kNormalized01;
  DivergenceConfig estimator;
};

struct BoundBlock {
  BoundConfig config;
  std::optional<Vec> emp_err_override;   // device empirical errors, bypassing training
  std::optional<Vec> size_override;      // bound sample sizes n_i, bypassing dataset sizes
};

struct ExperimentConfig {
  ScenarioConfig scenario;
  TrainConfig train;
  int hidden_dim = 0;  // classifier hidden width
  DivergenceBlock divergence;
  BoundBlock bound;
  SolverConfig solver;
  std::vector<BaselineSpec> baselines;
  std::string sweep_param;            // empty = no sweep
  std::vector<double> sweep_values;
  std::string output_dir = "out";
  int repeats = 5;
  std::uint64_t master_seed = 1;
  CombineMode combine_mode = CombineMode::kParameter;
  bool dump_models = false;
};

struct PlanMetrics {
  double total_energy_joules = 0.0;
  double normalized_energy = 0.0;
  int saved_transmissions = 0;
  int active_link_count = 0;
};

struct PlanEvaluation {
  Vec per_target_accuracy;
  double avg_target_accuracy = 0.0;
  int num_targets = 0;
  PlanMetrics metrics;
  // Devices whose hypotheses entered any target combination; the audit
  // asserts all of them are labeled rounded sources.
  std::vector<int> contributing_sources;
};

struct RunResult {
  std::uint64_t seed = 0;
  LinkPlan plan;
  PlanEvaluation stlf;
  DivergenceMatrix divergence;
  BoundTerms bounds;
  Vec emp_errs;
  std::map<std::string, std::pair<LinkPlan, PlanEvaluation>> baselines;
};

// Energy/link metrics of a plan against the reference plan (the phi_e = 0
// solve); reference is required because normalization is relative to it.
PlanMetrics metrics(const LinkPlan& plan, const CommProfile& comm, double eps_E,
                    const LinkPlan* reference);

// Full pipeline for one repeat seed.
RunResult run_once(const ExperimentConfig& config, std::uint64_t seed);

// All repeats; per-run outputs are written under config.output_dir/run_<k>
// when persist is true. Stage errors are tagged and partial results saved.
std::vector<RunResult> run(const ExperimentConfig& config, bool persist = true);

// Canonical divergence-regime experiment configs (uniform/extreme/random).
ExperimentConfig regime_config(DivergenceMode kind);

DivergenceMode parse_divergence_mode(const std::string& name);

// Resolves config.output_dir against the STLF_OUTPUT_ROOT env override.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                       const RunResult& result);

ExperimentConfig config_from_json_file(const std::filesystem::path& path);
ExperimentConfig config_from_json_text(const std::string& text);

}  // namespace stlf
