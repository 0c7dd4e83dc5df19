#include "bbope/envs.hpp"

#include <cmath>

#include "bbope/errors.hpp"

namespace bbope {

TabularMdp model_win(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("model_win: p must lie in (0, 1)");
  constexpr std::size_t S = 3;
  constexpr std::size_t A = 2;
  std::vector<double> transition(S * A * S, 0.0);
  auto at = [&](std::size_t s, std::size_t a, std::size_t n) -> double& {
    return transition[(s * A + a) * S + n];
  };
  at(0, 0, 1) = p;
  at(0, 0, 2) = 1.0 - p;
  at(0, 1, 2) = p;
  at(0, 1, 1) = 1.0 - p;
  for (std::size_t a = 0; a < A; ++a) {
    at(1, a, 0) = 1.0;
    at(2, a, 0) = 1.0;
  }
  std::vector<double> reward(S * A, 0.0);
  reward[0 * A + 0] = p * 1.0 + (1.0 - p) * -1.0;
  reward[0 * A + 1] = p * -1.0 + (1.0 - p) * 1.0;
  return TabularMdp(S, A, std::move(transition), std::move(reward), {1.0, 0.0, 0.0});
}

Policy model_win_policy(double prob_first) {
  return Policy::constant({prob_first, 1.0 - prob_first}, "modelwin(" + std::to_string(prob_first) + ")");
}

Trajectory sample_trajectory(const ContinuousEnv& env, const Policy& policy, std::size_t length,
                             std::uint64_t seed, std::uint64_t first_step) {
  if (length == 0) throw InvalidArgument("sample_trajectory: length must be positive");
  if (policy.num_actions() != env.num_actions())
    throw InvalidArgument("sample_trajectory: policy and environment action sets differ");
  Trajectory trajectory;
  trajectory.steps.reserve(length);
  CounterRng reset_rng(seed, first_step, StreamTag::initial_state);
  std::vector<double> state = env.reset(reset_rng);
  std::vector<double> probs(env.num_actions());
  for (std::size_t t = 0; t < length; ++t) {
    const std::uint64_t position = first_step + t;
    State current{state};
    policy.probabilities(current, probs);
    const std::size_t a =
        sample_categorical(probs, CounterRng(seed, position, StreamTag::action).uniform());
    CounterRng env_rng(seed, position, StreamTag::environment);
    EnvStep out = env.step(state, a, env_rng);
    trajectory.steps.push_back({std::move(current), a, out.reward});
    state = std::move(out.next_state);
    if (out.terminated) break;
  }
  trajectory.final_state = State{std::move(state)};
  return trajectory;
}

TabularMdp random_tabular_mdp(std::size_t num_states, std::size_t num_actions, std::uint64_t seed) {
  if (num_states < 2 || num_actions < 1)
    throw InvalidArgument("random_tabular_mdp: need at least 2 states and 1 action");
  constexpr double kFloor = 1e-3;
  if (kFloor * static_cast<double>(num_states) >= 1.0)
    throw InvalidArgument("random_tabular_mdp: too many states for the entry floor");
  CounterRng rng(seed, 0, StreamTag::generic);
  const std::size_t S = num_states;
  const std::size_t A = num_actions;
  std::vector<double> transition(S * A * S);
  const double free_mass = 1.0 - kFloor * static_cast<double>(S);
  for (std::size_t row = 0; row < S * A; ++row) {
    std::vector<double> draws(S);
    double total = 0.0;
    for (auto& x : draws) {
      x = -std::log(1.0 - rng.uniform());
      total += x;
    }
    double row_total = 0.0;
    for (std::size_t n = 0; n < S; ++n) {
      transition[row * S + n] = kFloor + free_mass * draws[n] / total;
      row_total += transition[row * S + n];
    }
    for (std::size_t n = 0; n < S; ++n) transition[row * S + n] /= row_total;
  }
  std::vector<double> reward(S * A);
  for (auto& r : reward) r = rng.uniform(-1.0, 1.0);
  return TabularMdp(S, A, std::move(transition), std::move(reward),
                    std::vector<double>(S, 1.0 / static_cast<double>(S)));
}

Policy random_tabular_policy(std::size_t num_states, std::size_t num_actions, std::uint64_t seed,
                             double floor) {
  if (floor * static_cast<double>(num_actions) >= 1.0)
    throw InvalidArgument("random_tabular_policy: floor too large");
  CounterRng rng(seed, 1, StreamTag::generic);
  std::vector<std::vector<double>> table(num_states, std::vector<double>(num_actions));
  for (auto& row : table) {
    double total = 0.0;
    for (auto& p : row) {
      p = -std::log(1.0 - rng.uniform());
      total += p;
    }
    const double free_mass = 1.0 - floor * static_cast<double>(num_actions);
    double row_total = 0.0;
    for (auto& p : row) {
      p = floor + free_mass * p / total;
      row_total += p;
    }
    for (auto& p : row) p /= row_total;
  }
  return Policy::tabular(std::move(table), "random");
}

}  // namespace bbope
