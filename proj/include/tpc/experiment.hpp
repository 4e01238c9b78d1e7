#pragma once

#include "tpc/strategies.hpp"

#include <string>
#include <vector>

namespace tpc {

struct ExperimentConfig {
  // dataset
  bool synthetic = true;
  ClassId classes = 10;
  Eigen::Index dim = 16;
  Eigen::Index per_class = 200;
  double separation = 6.0;
  std::string csv_path;
  double test_fraction = 0.2;  // used for CSV datasets only

  // scenario
  ScenarioKind kind = ScenarioKind::class_incremental;
  int A = 6, B = 5, C = 1;
  int chunks_per_class = 2, first_B = 5;

  std::vector<std::string> strategies{"tpc", "naive"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  EvalPolicy eval;
  std::string output_dir = "out";
  TpcConfig hyper;
};

/// Strict JSON loader: unknown keys rejected, cross-field arithmetic
/// validated, standard defaults injected for omitted hyperparameters.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);
std::string serialize_config(const ExperimentConfig& cfg);

Dataset build_dataset(const ExperimentConfig& cfg, std::uint64_t seed);
ExperienceStream build_stream(const ExperimentConfig& cfg, const Dataset& ds,
                              std::uint64_t seed);

/// Seeds used for reported averages: the first seed is reserved for tuning
/// when more than one is given.
std::vector<std::uint64_t> reporting_seeds(const ExperimentConfig& cfg);

struct RunSummaryRow {
  std::string strategy;
  std::uint64_t seed;
  double amca;
  double final_accuracy;
  double wall_clock_s;
};

int cmd_run(const ExperimentConfig& cfg);

struct AblationSpec {
  bool no_bias_correction = true;
  bool no_gradient_masking = true;
  bool no_phase3 = true;
  bool no_replay = true;
};

int cmd_ablate(const ExperimentConfig& cfg, const AblationSpec& spec);

void write_history_csv(const RunHistory& history, const std::string& path);
void write_summary_csv(const std::vector<RunSummaryRow>& rows,
                       const std::string& path);

/// Per-strategy curves averaged over seeds, dashed joint upper bound,
/// legend annotated with AMCA.
void emit_svg(const std::vector<std::vector<RunHistory>>& per_strategy,
              double upper_bound, const std::string& path);

}  // namespace tpc
