#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bbope/envs.hpp"
#include "bbope/kernels.hpp"
#include "bbope/mdp.hpp"
#include "bbope/weights.hpp"

namespace bbope {

struct EstimateReport {
  std::string method;
  double estimate = 0.0;
  std::size_t n = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
};

struct AggregateReport {
  std::string method;
  double truth = 0.0;
  std::vector<double> runs;
  double rmse = 0.0;
  double bias = 0.0;
  /// Population standard deviation.
  double std = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

enum class WeightModelKind { tabular, mlp };

struct BlackboxConfig {
  WeightModelKind model = WeightModelKind::tabular;
  OptimizerConfig optimizer{};
  /// MLP inputs; required when model == mlp.
  std::optional<FeatureMap> inputs;
  std::vector<std::size_t> hidden{30, 20, 10};
  /// MLP only: independent initializations; the lowest final loss is kept.
  std::size_t restarts = 1;
};

/// Tabular solver defaults: exponentiated gradient to a duality gap of 1e-10.
OptimizerConfig default_tabular_optimizer();

/// rho^ = sum_i w_i r_i with w minimizing the MMD between d_w and B^_pi d_w.
EstimateReport blackbox_estimate(const TransitionDataset& dataset, const Policy& target,
                                 const Kernel& kernel, const BlackboxConfig& config);

EstimateReport naive_average(const TransitionDataset& dataset);

struct ModelBasedConfig {
  double ridge = 1e-6;
  double tolerance = 1e-10;
  std::size_t max_iterations = 100000;
  /// Continuous data: seeded subsample of at most this many rows (0 keeps all).
  std::size_t max_rows = 2000;
  std::uint64_t seed = 0;
};

/// Stationary reward of the Nadaraya-Watson transition model on the sample points.
EstimateReport model_based_estimate(const TransitionDataset& dataset, const Policy& target,
                                    const Kernel& kernel, const ModelBasedConfig& config = {});

/// Tabular stationary density-ratio estimator.
///
/// Uses the transitions i whose successor step i + 1 lies in the same
/// trajectory (all transitions when the dataset has no boundaries). The state
/// ratio x solves, for every state s'',
///   x(s'') #{i : s'_i = s''} = sum_{i : s'_i = s''} beta_i x(s_i),
/// beta_i = pi(a_i|s_i) / pi_B(a_i|s_i), which is the balance equation of the
/// target chain when the data are stationary. The estimate is
/// sum x(s_i) beta_i r_i / sum x(s_i) beta_i over the same transitions.
EstimateReport tabular_stationary_ips(const TransitionDataset& dataset, const Policy& behavior,
                                      const Policy& target);

/// Mean reward of one on-policy trajectory.
double ground_truth_rollout(const TabularMdp& mdp, const Policy& policy, std::size_t length,
                            std::uint64_t seed);
/// Mean reward over `length` steps; episodes that end early are restarted.
double ground_truth_rollout(const ContinuousEnv& env, const Policy& policy, std::size_t length,
                            std::uint64_t seed);

AggregateReport aggregate(std::string method, std::span<const EstimateReport> runs, double truth);
AggregateReport aggregate(std::string method, std::span<const double> estimates, double truth);

}  // namespace bbope
