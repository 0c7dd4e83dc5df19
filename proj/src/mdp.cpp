#include "bbope/mdp.hpp"

#include <cmath>
#include <sstream>

#include "bbope/errors.hpp"
#include "bbope/rng.hpp"

namespace bbope {

namespace {

constexpr double kSumTolerance = 1e-12;

void check_distribution(std::span<const double> p, const std::string& what) {
  double total = 0.0;
  for (const double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument(what + ": negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    std::ostringstream os;
    os << what << ": sums to " << total;
    throw InvalidArgument(os.str());
  }
}

}  // namespace

bool is_tabular(const State& state) noexcept { return std::holds_alternative<std::size_t>(state); }

std::size_t state_id(const State& state) {
  if (const auto* id = std::get_if<std::size_t>(&state)) return *id;
  throw InvalidArgument("expected a tabular state, got a continuous one");
}

const std::vector<double>& state_vector(const State& state) {
  if (const auto* v = std::get_if<std::vector<double>>(&state)) return *v;
  throw InvalidArgument("expected a continuous state, got a tabular one");
}

std::string describe(const State& state) {
  std::ostringstream os;
  if (is_tabular(state)) {
    os << "s" << std::get<std::size_t>(state);
  } else {
    os << "(";
    const auto& v = std::get<std::vector<double>>(state);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    os << ")";
  }
  return os.str();
}

// ---------------------------------------------------------------------------

TabularMdp::TabularMdp(std::size_t num_states, std::size_t num_actions,
                       std::vector<double> transition, std::vector<double> reward,
                       std::vector<double> initial, double discount)
    : num_states_(num_states),
      num_actions_(num_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      initial_(std::move(initial)),
      discount_(discount) {
  if (num_states_ == 0 || num_actions_ == 0)
    throw InvalidArgument("TabularMdp: need at least one state and one action");
  if (transition_.size() != num_states_ * num_actions_ * num_states_)
    throw InvalidArgument("TabularMdp: transition tensor has wrong size");
  if (reward_.size() != num_states_ * num_actions_)
    throw InvalidArgument("TabularMdp: reward table has wrong size");
  if (initial_.size() != num_states_)
    throw InvalidArgument("TabularMdp: initial distribution has wrong size");
  if (!(discount_ >= 0.0 && discount_ <= 1.0)) throw InvalidArgument("TabularMdp: discount outside [0,1]");
  for (std::size_t s = 0; s < num_states_; ++s)
    for (std::size_t a = 0; a < num_actions_; ++a)
      check_distribution(next_state_distribution(s, a),
                         "TabularMdp: row P[" + std::to_string(s) + "][" + std::to_string(a) + "]");
  check_distribution(initial_, "TabularMdp: initial distribution");
  for (const double r : reward_)
    if (!std::isfinite(r)) throw InvalidArgument("TabularMdp: non-finite reward");
}

double TabularMdp::transition(std::size_t s, std::size_t a, std::size_t next) const {
  return next_state_distribution(s, a)[next];
}

std::span<const double> TabularMdp::next_state_distribution(std::size_t s, std::size_t a) const {
  if (s >= num_states_ || a >= num_actions_) throw InvalidArgument("TabularMdp: index out of range");
  return std::span<const double>(transition_).subspan((s * num_actions_ + a) * num_states_,
                                                      num_states_);
}

double TabularMdp::reward(std::size_t s, std::size_t a) const {
  if (s >= num_states_ || a >= num_actions_) throw InvalidArgument("TabularMdp: index out of range");
  return reward_[s * num_actions_ + a];
}

// ---------------------------------------------------------------------------

Policy::Policy(std::size_t num_actions, Rule rule, std::string name)
    : num_actions_(num_actions),
      rule_(std::make_shared<const Rule>(std::move(rule))),
      name_(std::move(name)) {
  if (num_actions_ == 0) throw InvalidArgument("Policy: empty action set");
}

Policy Policy::tabular(std::vector<std::vector<double>> table, std::string name) {
  if (table.empty()) throw InvalidArgument("Policy::tabular: empty table");
  const std::size_t num_actions = table.front().size();
  for (std::size_t s = 0; s < table.size(); ++s) {
    if (table[s].size() != num_actions) throw InvalidArgument("Policy::tabular: ragged table");
    check_distribution(table[s], "Policy::tabular: row " + std::to_string(s));
  }
  auto shared = std::make_shared<const std::vector<std::vector<double>>>(std::move(table));
  return Policy(
      num_actions,
      [shared](const State& state, std::span<double> out) {
        const auto* id = std::get_if<std::size_t>(&state);
        if (id == nullptr || *id >= shared->size()) throw UndefinedPolicyState(describe(state));
        const auto& row = (*shared)[*id];
        std::copy(row.begin(), row.end(), out.begin());
      },
      std::move(name));
}

Policy Policy::constant(std::vector<double> probabilities, std::string name) {
  check_distribution(probabilities, "Policy::constant");
  const std::size_t num_actions = probabilities.size();
  return Policy(
      num_actions,
      [p = std::move(probabilities)](const State&, std::span<double> out) {
        std::copy(p.begin(), p.end(), out.begin());
      },
      std::move(name));
}

Policy Policy::uniform(std::size_t num_actions) {
  if (num_actions == 0) throw InvalidArgument("Policy::uniform: empty action set");
  return constant(std::vector<double>(num_actions, 1.0 / static_cast<double>(num_actions)),
                  "uniform");
}

Policy Policy::deterministic(std::size_t num_actions,
                             std::function<std::size_t(const State&)> choose, std::string name) {
  return Policy(
      num_actions,
      [num_actions, choose = std::move(choose)](const State& state, std::span<double> out) {
        const std::size_t a = choose(state);
        if (a >= num_actions) throw UndefinedPolicyState(describe(state));
        std::fill(out.begin(), out.end(), 0.0);
        out[a] = 1.0;
      },
      std::move(name));
}

void Policy::probabilities(const State& state, std::span<double> out) const {
  if (out.size() != num_actions_) throw InvalidArgument("Policy: output span has wrong size");
  (*rule_)(state, out);
  double total = 0.0;
  for (const double p : out) {
    if (!(p >= 0.0)) throw UndefinedPolicyState(describe(state));
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTolerance) throw UndefinedPolicyState(describe(state));
}

std::vector<double> Policy::probabilities(const State& state) const {
  std::vector<double> out(num_actions_);
  probabilities(state, out);
  return out;
}

double Policy::probability(const State& state, std::size_t action) const {
  if (action >= num_actions_) throw InvalidArgument("Policy: action out of range");
  return probabilities(state)[action];
}

Policy mix_policies(const Policy& plus, const Policy& minus, double alpha) {
  if (plus.num_actions() != minus.num_actions())
    throw InvalidArgument("mix_policies: action sets differ");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("mix_policies: alpha outside [0,1]");
  if (alpha == 1.0) return plus;
  if (alpha == 0.0) return minus;
  const std::size_t k = plus.num_actions();
  std::ostringstream name;
  name << alpha << "*" << plus.name() << "+" << (1.0 - alpha) << "*" << minus.name();
  return Policy(
      k,
      [plus, minus, alpha, k](const State& state, std::span<double> out) {
        std::vector<double> p(k), q(k);
        plus.probabilities(state, p);
        minus.probabilities(state, q);
        for (std::size_t a = 0; a < k; ++a) out[a] = alpha * p[a] + (1.0 - alpha) * q[a];
      },
      name.str());
}

std::size_t sample_action(const Policy& policy, const State& state, double u) {
  std::vector<double> p(policy.num_actions());
  policy.probabilities(state, p);
  return sample_categorical(p, u);
}

// ---------------------------------------------------------------------------

TransitionDataset::TransitionDataset(std::vector<Transition> transitions,
                                     std::vector<std::size_t> boundaries)
    : transitions_(std::move(transitions)), boundaries_(std::move(boundaries)) {
  for (std::size_t k = 0; k < boundaries_.size(); ++k) {
    if (boundaries_[k] >= transitions_.size())
      throw InvalidArgument("TransitionDataset: boundary beyond the end");
    if (k > 0 && boundaries_[k] <= boundaries_[k - 1])
      throw InvalidArgument("TransitionDataset: boundaries must be strictly increasing");
  }
  if (!boundaries_.empty() && boundaries_.front() != 0)
    throw InvalidArgument("TransitionDataset: first trajectory must start at 0");
}

bool TransitionDataset::is_tabular() const noexcept {
  for (const auto& t : transitions_)
    if (!bbope::is_tabular(t.state) || !bbope::is_tabular(t.next_state)) return false;
  return true;
}

std::vector<double> TransitionDataset::rewards() const {
  std::vector<double> r;
  r.reserve(transitions_.size());
  for (const auto& t : transitions_) r.push_back(t.reward);
  return r;
}

std::size_t TransitionDataset::action_count() const noexcept {
  std::size_t count = 0;
  for (const auto& t : transitions_) count = std::max(count, t.action + 1);
  return count;
}

std::size_t TransitionDataset::state_dim() const {
  if (transitions_.empty() || bbope::is_tabular(transitions_.front().state)) return 0;
  return state_vector(transitions_.front().state).size();
}

TransitionDataset TransitionDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Transition> rows;
  rows.reserve(indices.size());
  for (const std::size_t i : indices) rows.push_back(transitions_.at(i));
  return TransitionDataset(std::move(rows));
}

// ---------------------------------------------------------------------------

Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& policy, std::size_t length,
                             std::uint64_t seed, std::uint64_t first_step) {
  if (length == 0) throw InvalidArgument("sample_trajectory: length must be positive");
  if (policy.num_actions() != mdp.num_actions())
    throw InvalidArgument("sample_trajectory: policy and MDP action sets differ");
  Trajectory trajectory;
  trajectory.steps.reserve(length);
  std::size_t s = sample_categorical(
      mdp.initial_distribution(), CounterRng(seed, first_step, StreamTag::initial_state).uniform());
  std::vector<double> probs(mdp.num_actions());
  for (std::size_t t = 0; t < length; ++t) {
    const std::uint64_t position = first_step + t;
    const State state{s};
    policy.probabilities(state, probs);
    const std::size_t a =
        sample_categorical(probs, CounterRng(seed, position, StreamTag::action).uniform());
    trajectory.steps.push_back({state, a, mdp.reward(s, a)});
    s = sample_categorical(mdp.next_state_distribution(s, a),
                           CounterRng(seed, position, StreamTag::transition).uniform());
  }
  trajectory.final_state = State{s};
  return trajectory;
}

TransitionDataset dataset_from_trajectories(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw InvalidArgument("dataset_from_trajectories: no trajectories");
  std::vector<Transition> rows;
  std::vector<std::size_t> boundaries;
  for (const auto& trajectory : trajectories) {
    if (trajectory.steps.empty()) throw InvalidArgument("dataset_from_trajectories: empty trajectory");
    boundaries.push_back(rows.size());
    for (std::size_t t = 0; t < trajectory.steps.size(); ++t) {
      const Step& step = trajectory.steps[t];
      const State& next =
          t + 1 < trajectory.steps.size() ? trajectory.steps[t + 1].state : trajectory.final_state;
      rows.push_back({step.state, step.action, step.reward, next});
    }
  }
  return TransitionDataset(std::move(rows), std::move(boundaries));
}

TabularMdp discount_to_average(const TabularMdp& mdp, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("discount_to_average: gamma outside [0,1)");
  const std::size_t S = mdp.num_states();
  const std::size_t A = mdp.num_actions();
  const auto p0 = mdp.initial_distribution();
  std::vector<double> transition(S * A * S);
  std::vector<double> reward(S * A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      reward[s * A + a] = mdp.reward(s, a);
      const auto row = mdp.next_state_distribution(s, a);
      double total = 0.0;
      for (std::size_t n = 0; n < S; ++n) {
        const double v = gamma * row[n] + (1.0 - gamma) * p0[n];
        transition[(s * A + a) * S + n] = v;
        total += v;
      }
      // keep the row exactly stochastic up to one rounding of the division
      for (std::size_t n = 0; n < S; ++n) transition[(s * A + a) * S + n] /= total;
    }
  }
  return TabularMdp(S, A, std::move(transition), std::move(reward),
                    std::vector<double>(p0.begin(), p0.end()), 1.0);
}

}  // namespace bbope
