#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bbope/mdp.hpp"
#include "bbope/rng.hpp"

namespace bbope {

// ---------------------------------------------------------------------------
// ModelWin

/// Three states, two actions. From s0, action 0 reaches s1 (+1) with
/// probability p and s2 (-1) otherwise; action 1 reaches s2 (-1) with
/// probability p and s1 (+1) otherwise. s1 and s2 return to s0 with no reward.
/// Rewards are stored as the expectation R(s, a) over the outcome.
TabularMdp model_win(double p);

/// ModelWin policy choosing action 0 with probability `prob_first` in every state.
Policy model_win_policy(double prob_first);

// ---------------------------------------------------------------------------
// Classic control

enum class ControlTask { pendulum, mountain_car, cartpole, acrobot };

ControlTask parse_control_task(std::string_view name);
std::string_view to_string(ControlTask task) noexcept;

struct EnvStep {
  std::vector<double> next_state;
  double reward = 0.0;
  bool terminated = false;
};

/// Continuous-state environment over a finite action set.
struct ContinuousEnv {
  using StepFn = std::function<EnvStep(std::span<const double>, std::size_t, CounterRng&)>;
  using ResetFn = std::function<std::vector<double>(CounterRng&)>;

  std::string name;
  std::size_t state_dim = 0;
  std::vector<double> action_values;
  StepFn step;
  ResetFn reset;
  /// Bounds on the per-step reward.
  double min_reward = 0.0;
  double max_reward = 0.0;

  std::size_t num_actions() const noexcept { return action_values.size(); }
};

ContinuousEnv classic_control(ControlTask task);

/// Replaces every terminating step with a transition into a fresh reset
/// state. The terminating step keeps its reward.
ContinuousEnv infinite_horizon(ContinuousEnv env);

/// Deterministic heuristic controller for `task`.
Policy scripted_near_optimal(ControlTask task);

/// Physical constants of every classic-control task, as "task.key" -> value.
const std::map<std::string, double>& classic_control_constants();
/// key = value lines, sorted by key.
std::string format_constants();
/// Parses a key = value document; '#' starts a comment.
std::map<std::string, double> parse_constants(std::string_view text);

/// Rolls out `policy` for `length` steps. Step t draws from streams positioned
/// at first_step + t. When the environment reports termination the trajectory
/// ends early at the terminal state.
Trajectory sample_trajectory(const ContinuousEnv& env, const Policy& policy, std::size_t length,
                             std::uint64_t seed, std::uint64_t first_step = 0);

// ---------------------------------------------------------------------------
// Random MDPs

/// Random ergodic MDP. Each transition row is a normalized vector of
/// exponential draws floored at 1e-3 (so every entry is at least 1e-3 after
/// normalization); rewards are uniform on [-1, 1]; p0 is uniform.
TabularMdp random_tabular_mdp(std::size_t num_states, std::size_t num_actions, std::uint64_t seed);

/// Random tabular policy with every probability at least `floor`.
Policy random_tabular_policy(std::size_t num_states, std::size_t num_actions, std::uint64_t seed,
                             double floor = 0.05);

}  // namespace bbope
