#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace bbope {

/// A state is either a tabular id or a fixed-length real vector.
using State = std::variant<std::size_t, std::vector<double>>;

bool is_tabular(const State& state) noexcept;
std::size_t state_id(const State& state);
const std::vector<double>& state_vector(const State& state);
std::string describe(const State& state);

struct StateAction {
  State state;
  std::size_t action = 0;
};

/// Finite MDP. Transition probabilities are stored as P[(s * A + a) * S + s'].
class TabularMdp {
 public:
  TabularMdp(std::size_t num_states, std::size_t num_actions, std::vector<double> transition,
             std::vector<double> reward, std::vector<double> initial, double discount = 1.0);

  std::size_t num_states() const noexcept { return num_states_; }
  std::size_t num_actions() const noexcept { return num_actions_; }
  double discount() const noexcept { return discount_; }

  double transition(std::size_t s, std::size_t a, std::size_t next) const;
  std::span<const double> next_state_distribution(std::size_t s, std::size_t a) const;
  double reward(std::size_t s, std::size_t a) const;
  std::span<const double> initial_distribution() const noexcept { return initial_; }

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<double> transition_;
  std::vector<double> reward_;
  std::vector<double> initial_;
  double discount_;
};

/// Stochastic map from states to distributions over a finite action set.
///
/// Policies are immutable and cheap to copy; the rule is shared.
class Policy {
 public:
  using Rule = std::function<void(const State&, std::span<double>)>;

  Policy(std::size_t num_actions, Rule rule, std::string name = "policy");

  /// Tabular policy from a table pi[s][a].
  static Policy tabular(std::vector<std::vector<double>> table, std::string name = "tabular");
  /// Same distribution at every state.
  static Policy constant(std::vector<double> probabilities, std::string name = "constant");
  static Policy uniform(std::size_t num_actions);
  /// Deterministic policy choosing `choose(state)`.
  static Policy deterministic(std::size_t num_actions,
                              std::function<std::size_t(const State&)> choose,
                              std::string name = "deterministic");

  std::size_t num_actions() const noexcept { return num_actions_; }
  const std::string& name() const noexcept { return name_; }

  /// Writes pi(.|state) into out; validates nonnegativity and unit sum.
  void probabilities(const State& state, std::span<double> out) const;
  std::vector<double> probabilities(const State& state) const;
  double probability(const State& state, std::size_t action) const;

 private:
  std::size_t num_actions_;
  std::shared_ptr<const Rule> rule_;
  std::string name_;
};

/// alpha * plus + (1 - alpha) * minus, action by action.
Policy mix_policies(const Policy& plus, const Policy& minus, double alpha);

struct Transition {
  State state;
  std::size_t action = 0;
  double reward = 0.0;
  State next_state;
};

struct Step {
  State state;
  std::size_t action = 0;
  double reward = 0.0;
};

struct Trajectory {
  std::vector<Step> steps;
  State final_state;
};

/// The logged sample D = {(s_i, a_i, r_i, s'_i)}.
class TransitionDataset {
 public:
  TransitionDataset() = default;
  explicit TransitionDataset(std::vector<Transition> transitions,
                             std::vector<std::size_t> boundaries = {});

  std::size_t size() const noexcept { return transitions_.size(); }
  bool empty() const noexcept { return transitions_.empty(); }
  const Transition& operator[](std::size_t i) const { return transitions_[i]; }
  auto begin() const noexcept { return transitions_.begin(); }
  auto end() const noexcept { return transitions_.end(); }

  const std::vector<Transition>& transitions() const noexcept { return transitions_; }
  /// Indices where trajectories start; empty when the sample carries no trajectory structure.
  const std::vector<std::size_t>& boundaries() const noexcept { return boundaries_; }
  bool has_boundaries() const noexcept { return !boundaries_.empty(); }

  /// True when every state and next state is a tabular id.
  bool is_tabular() const noexcept;
  std::vector<double> rewards() const;
  /// Largest action index plus one.
  std::size_t action_count() const noexcept;
  /// Dimension of continuous states (0 for tabular data).
  std::size_t state_dim() const;

  /// Rows selected by `indices`, without trajectory boundaries.
  TransitionDataset subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<Transition> transitions_;
  std::vector<std::size_t> boundaries_;
};

/// Draws one trajectory. Step t consumes the random streams positioned at
/// first_step + t, so trajectories cut from one long stream line up exactly.
Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& policy, std::size_t length,
                             std::uint64_t seed, std::uint64_t first_step = 0);

TransitionDataset dataset_from_trajectories(std::span<const Trajectory> trajectories);

/// MDP whose average reward equals the gamma-discounted value of the input:
/// P'(s'|s,a) = gamma P(s'|s,a) + (1 - gamma) p0(s').
TabularMdp discount_to_average(const TabularMdp& mdp, double gamma);

/// Inverse-CDF action draw for pi(.|state).
std::size_t sample_action(const Policy& policy, const State& state, double u);

}  // namespace bbope
