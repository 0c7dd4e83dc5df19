#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bbope/estimators.hpp"

namespace bbope::bench {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kVersion = "0.3.0";

enum class ExperimentKind { modelwin_horizon, control_rmse, sensitivity, bias_variance, theorem1_check };

ExperimentKind parse_experiment(std::string_view name);
std::string_view to_string(ExperimentKind kind) noexcept;

struct ModelWinSettings {
  double p = 0.4;
  double behavior_first = 0.7;
  double target_first = 0.9;
  std::size_t budget = 50000;
  std::vector<std::size_t> horizons{4, 8, 16, 32, 64, 128};
};

struct ControlSettings {
  double alpha_behavior = 0.7;
  double alpha_target = 0.9;
  std::size_t t_beh = 200;
  std::size_t t_tar = 1000000;
  std::vector<std::size_t> trajectory_counts{10, 25, 50};
  std::size_t tuning_trajectories = 50;
  std::size_t tuning_runs = 3;
};

struct SensitivitySettings {
  std::vector<double> alphas{0.7, 0.5, 0.3, 0.1};
  std::size_t trajectories = 50;
};

struct BiasVarianceSettings {
  std::size_t length = 4;
  std::vector<std::size_t> trajectory_counts{250, 1000, 4000};
  std::size_t runs = 200;
};

struct Theorem1Settings {
  std::size_t instances = 20;
  std::size_t states = 4;
  std::size_t actions = 2;
  double bandwidth = 1.0;
};

struct KernelSettings {
  /// Bandwidth percentiles tried during tuning; a single entry skips tuning.
  std::vector<int> percentiles{25, 50, 75};
  double action_scale = 1.0;
  /// Points subsampled for the pairwise-distance heuristic.
  std::size_t bandwidth_points = 500;
};

struct BlackboxSettings {
  OptimizerConfig optimizer;
  std::size_t restarts = 2;
  std::vector<std::size_t> hidden{30, 20, 10};
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::modelwin_horizon;
  std::string env = "cartpole";
  std::uint64_t base_seed = 1;
  std::size_t runs = 10;
  std::size_t workers = 1;
  std::filesystem::path output_dir = "results";
  bool svg = false;

  ModelWinSettings modelwin;
  ControlSettings control;
  SensitivitySettings sensitivity;
  BiasVarianceSettings bias_variance;
  Theorem1Settings theorem1;
  KernelSettings kernel;
  BlackboxSettings blackbox;
  OptimizerConfig tabular = default_tabular_optimizer();
  ModelBasedConfig model_based;

  ExperimentConfig();
  void validate() const;
  /// Trajectory counts and run counts used in the original study.
  void apply_paper_scale();
  /// Stable name for seeds and file names, e.g. "control_rmse/cartpole".
  std::string id() const;
};

/// Overrides defaults with every key present in `doc`. Unknown keys throw.
ExperimentConfig config_from_json(const nlohmann::json& doc, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
nlohmann::json config_to_json(const ExperimentConfig& config);

struct ResultRow {
  std::string experiment;
  std::string method;
  double setting = 0.0;
  double rmse = 0.0;
  double bias = 0.0;
  double std = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  std::size_t runs = 0;
  std::uint64_t seed = 0;
  /// Not written to CSV.
  double truth = 0.0;
};

/// Estimates of one Monte-Carlo run, keyed by method.
struct RunOutcome {
  std::vector<std::string> methods;
  std::vector<double> estimates;
};

/// Runs job(0..count-1) on `workers` threads. Results keep job order; the
/// exception of the lowest failing job is rethrown.
std::vector<RunOutcome> run_jobs(std::size_t count, std::size_t workers,
                                 const std::function<RunOutcome(std::size_t)>& job);

/// Behavior data of `count` trajectories of length `horizon`, the last one cut
/// so the total is min(budget, count * horizon). Trajectory k starts at global
/// step k * horizon.
TransitionDataset behavior_data(const TabularMdp& mdp, const Policy& behavior, std::size_t count,
                                std::size_t horizon, std::size_t budget, std::uint64_t seed);
TransitionDataset behavior_data(const ContinuousEnv& env, const Policy& behavior, std::size_t count,
                                std::size_t horizon, std::uint64_t seed);

/// Bandwidth percentile chosen per kernel method at the tuning trajectory count.
struct TuningChoice {
  int blackbox_percentile = 25;
  int model_based_percentile = 25;
};

std::vector<ResultRow> run_modelwin_horizon(const ExperimentConfig& config);
std::vector<ResultRow> run_control_rmse(const ExperimentConfig& config);
std::vector<ResultRow> run_sensitivity(const ExperimentConfig& config);
std::vector<ResultRow> run_bias_variance(const ExperimentConfig& config);
std::vector<ResultRow> run_theorem1(const ExperimentConfig& config);
std::vector<ResultRow> run_experiment(const ExperimentConfig& config);

/// Tuning stage of the control experiments.
TuningChoice tune_control(const ExperimentConfig& config, const ContinuousEnv& env, const Policy& plus,
                          double truth);

/// Sorts by (method, setting).
void sort_rows(std::vector<ResultRow>& rows);

inline constexpr std::string_view kCsvHeader = "experiment,method,setting,rmse,bias,std,median,q25,q75,runs,seed";

/// printf "%.12g"; negative zero prints as 0.
std::string format_number(double value);
std::string to_csv(const std::vector<ResultRow>& rows);
/// Log-RMSE against setting, one polyline per method.
std::string to_svg(const std::vector<ResultRow>& rows, std::string_view title);

struct OutputPaths {
  std::filesystem::path csv;
  std::filesystem::path svg;
  std::filesystem::path manifest;
};

/// Writes the CSV, the manifest and (when config.svg) the SVG.
OutputPaths emit_outputs(const std::vector<ResultRow>& rows, const ExperimentConfig& config,
                         const nlohmann::json& timing);

}  // namespace bbope::bench
