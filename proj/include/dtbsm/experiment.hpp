#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "dtbsm/envgen.hpp"
#include "dtbsm/json_io.hpp"
#include "dtbsm/mdp.hpp"

namespace dtbsm {

enum class SweepMode {
  /// Perturb rewards only; x-axis is max_{i,a} |R - R'|.
  Reward,
  /// Perturb transitions only; x-axis is max_{i,a} TV(P, P').
  Transition,
};

/// Noise sweep over twins of one real MDP.
///
/// Config keys (`key = value`): mode (reward_sweep | transition_sweep),
/// exactly one of base_mdp (MDP JSON path) or base_admission (AdmissionConfig
/// path), noise_grid (comma separated, ascending), trials_per_level,
/// gamma_override, output_path, seed, bsm_state_cap, delta. Relative paths are
/// resolved against the directory of the spec file.
struct ExperimentSpec {
  SweepMode mode = SweepMode::Reward;
  std::string base_mdp;
  std::string base_admission;
  std::vector<double> noise_grid;
  std::size_t trials_per_level = 1;
  std::optional<double> gamma_override;
  std::string output_path;
  std::uint64_t seed = 0;
  /// bound_bsm is computed only for |S| up to this size.
  std::size_t bsm_state_cap = 16;
  /// Target apriori error of the truncated DT-BSM.
  double delta = 1e-9;
  std::size_t rollouts = 64;
};

/// Throws Parse on unknown keys or malformed values, InvalidArgument on
/// semantic errors. `base_dir` prefixes relative paths.
ExperimentSpec read_experiment_spec(std::istream& in, const std::string& base_dir = "");
void check_experiment_spec(const ExperimentSpec& spec);

struct ExperimentRecord {
  double noise_level = 0.0;
  std::uint64_t seed = 0;
  double discrepancy_x = 0.0;
  double regret = 0.0;
  double bound_tv = 0.0;
  std::optional<double> bound_bsm;
  double avg_reward_gap = 0.0;
};

struct LevelSummary {
  double noise_level = 0.0;
  std::size_t trials = 0;
  /// Max regret over the level's trials.
  double worst_regret = 0.0;
  double mean_discrepancy_x = 0.0;
  double max_discrepancy_x = 0.0;
};

struct ExperimentSummary {
  std::vector<LevelSummary> levels;
  /// Least-squares slope of worst regret against mean discrepancy_x.
  std::optional<double> slope;
  /// Fraction of adjacent levels with worst regret weakly increasing.
  double monotone_fraction = 1.0;
  /// Pearson correlation of mean discrepancy_x and worst regret; absent when
  /// either series is constant.
  std::optional<double> pearson;
  /// Records with regret > bound_tv + 1e-6.
  std::size_t bound_violations = 0;
};

struct ExperimentResult {
  std::vector<ExperimentRecord> records;  // sorted by (level, trial)
  ExperimentSummary summary;
};

/// Real MDP named by the spec, with gamma_override applied.
TabularMdp load_experiment_base(const ExperimentSpec& spec);

ExperimentResult run_experiment(const ExperimentSpec& spec, const TabularMdp& real);

ExperimentSummary summarize(const std::vector<ExperimentRecord>& records);

/// Header `noise_level,seed,discrepancy_x,regret,bound_tv,bound_bsm,avg_reward_gap`;
/// an absent bound_bsm is an empty field.
std::string records_csv(const std::vector<ExperimentRecord>& records);

Json to_json(const ExperimentSummary& summary);

/// Mean per-step reward gap between `optimal` and `pi` on `mdp`, estimated by
/// common-random-number rollouts of horizon ceil(10 / (1 - gamma)) from
/// uniformly drawn start states.
double average_reward_gap(const TabularMdp& mdp, const Policy& optimal, const Policy& pi,
                          std::size_t rollouts, std::uint64_t seed);

}  // namespace dtbsm
