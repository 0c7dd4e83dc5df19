#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bbope/envs.hpp"
#include "bbope/errors.hpp"
#include "bbope/mdp.hpp"
#include "bbope/oracle.hpp"

using namespace bbope;

namespace {

TabularMdp single_state(double r) { return TabularMdp(1, 1, {1.0}, {r}, {1.0}); }

double max_row_error(const TabularMdp& m) {
  double worst = 0.0;
  for (std::size_t s = 0; s < m.num_states(); ++s)
    for (std::size_t a = 0; a < m.num_actions(); ++a) {
      double sum = 0.0;
      for (double p : m.next_state_distribution(s, a)) {
        if (p < 0.0) return 1.0;
        sum += p;
      }
      worst = std::max(worst, std::abs(sum - 1.0));
    }
  return worst;
}

}  // namespace

TEST_SUITE("mdp") {
  TEST_CASE("constructor validates rows and sizes") {
    CHECK_THROWS_AS(TabularMdp(1, 1, {0.5}, {0.0}, {1.0}), InvalidArgument);
    CHECK_THROWS_AS(TabularMdp(2, 1, {1.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(TabularMdp(1, 1, {1.0}, {0.0}, {0.7}), InvalidArgument);
    CHECK_THROWS_AS(TabularMdp(1, 1, {1.0}, {0.0}, {1.0}, 1.5), InvalidArgument);
  }

  TEST_CASE("state variant accessors") {
    State s = std::size_t{3};
    CHECK(is_tabular(s));
    CHECK(state_id(s) == 3);
    CHECK_THROWS_AS(state_vector(s), InvalidArgument);
    State v = std::vector<double>{1.0, 2.0};
    CHECK_FALSE(is_tabular(v));
    CHECK(state_vector(v).size() == 2);
    CHECK_THROWS_AS(state_id(v), InvalidArgument);
  }

  TEST_CASE("zero-reward single state gives zero rewards") {
    const auto tr = sample_trajectory(single_state(0.0), Policy::uniform(1), 25, 9);
    REQUIRE(tr.steps.size() == 25);
    for (const auto& st : tr.steps) CHECK(st.reward == 0.0);
  }

  TEST_CASE("sampling is reproducible") {
    const auto mdp = random_tabular_mdp(5, 3, 11);
    const auto pi = random_tabular_policy(5, 3, 12);
    const auto a = sample_trajectory(mdp, pi, 500, 77);
    const auto b = sample_trajectory(mdp, pi, 500, 77);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t t = 0; t < a.steps.size(); ++t) {
      CHECK(state_id(a.steps[t].state) == state_id(b.steps[t].state));
      CHECK(a.steps[t].action == b.steps[t].action);
      CHECK(a.steps[t].reward == b.steps[t].reward);
    }
  }

  TEST_CASE("trajectories cut from one stream line up") {
    const auto mdp = random_tabular_mdp(4, 2, 3);
    const auto pi = Policy::uniform(2);
    const auto whole = sample_trajectory(mdp, pi, 40, 5);
    const auto tail = sample_trajectory(mdp, pi, 20, 5, 20);
    for (std::size_t t = 0; t < 20; ++t)
      if (state_id(whole.steps[20 + t].state) == state_id(tail.steps[t].state))
        CHECK(whole.steps[20 + t].action == tail.steps[t].action);
  }

  TEST_CASE("ModelWin target rollout mean near -0.08") {
    const auto tr = sample_trajectory(model_win(0.4), model_win_policy(0.9), 50000, 2024);
    double sum = 0.0;
    for (const auto& st : tr.steps) sum += st.reward;
    CHECK(std::abs(sum / 50000.0 + 0.08) <= 0.02);
  }

  TEST_CASE("sampled transitions have positive probability") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto mdp = model_win(0.3);
      const auto tr = sample_trajectory(mdp, model_win_policy(0.6), 2000, seed);
      std::vector<Trajectory> one{tr};
      const auto data = dataset_from_trajectories(one);
      for (const auto& x : data)
        CHECK(mdp.transition(state_id(x.state), x.action, state_id(x.next_state)) > 0.0);
    }
  }

  TEST_CASE("visit frequencies match stationary marginals") {
    const auto mdp = random_tabular_mdp(3, 2, 8);
    const auto pi = random_tabular_policy(3, 2, 9);
    const auto tr = sample_trajectory(mdp, pi, 100000, 10);
    std::vector<double> freq(3, 0.0);
    for (const auto& st : tr.steps) freq[state_id(st.state)] += 1.0 / 100000.0;
    const auto marg = exact_stationary(mdp, pi).state_marginal();
    for (std::size_t s = 0; s < 3; ++s) CHECK(std::abs(freq[s] - marg[s]) <= 0.02);
  }

  TEST_CASE("dataset_from_trajectories boundaries and quadruples") {
    const auto mdp = random_tabular_mdp(4, 2, 1);
    const auto pi = Policy::uniform(2);
    std::vector<Trajectory> one{sample_trajectory(mdp, pi, 3, 1)};
    const auto d1 = dataset_from_trajectories(one);
    CHECK(d1.size() == 3);
    CHECK(d1.boundaries() == std::vector<std::size_t>{0});

    std::vector<Trajectory> two{sample_trajectory(mdp, pi, 4, 2), sample_trajectory(mdp, pi, 8, 3)};
    const auto d2 = dataset_from_trajectories(two);
    CHECK(d2.size() == 12);
    CHECK(d2.boundaries() == std::vector<std::size_t>{0, 4});
    std::size_t i = 0;
    for (const auto& tr : two)
      for (std::size_t t = 0; t < tr.steps.size(); ++t, ++i) {
        CHECK(state_id(d2[i].state) == state_id(tr.steps[t].state));
        CHECK(d2[i].action == tr.steps[t].action);
        CHECK(d2[i].reward == tr.steps[t].reward);
        const State& next = t + 1 < tr.steps.size() ? tr.steps[t + 1].state : tr.final_state;
        CHECK(state_id(d2[i].next_state) == state_id(next));
      }
  }

  TEST_CASE("dataset validates boundaries") {
    std::vector<Transition> rows(3, Transition{std::size_t{0}, 0, 0.0, std::size_t{0}});
    CHECK_THROWS_AS(TransitionDataset(rows, {0, 2, 1}), InvalidArgument);
    CHECK_THROWS_AS(TransitionDataset(rows, {0, 5}), InvalidArgument);
    const TransitionDataset ok(rows, {0, 2});
    const std::vector<std::size_t> pick{2, 0};
    const auto sub = ok.subset(pick);
    CHECK(sub.size() == 2);
    CHECK_FALSE(sub.has_boundaries());
  }

  TEST_CASE("discount_to_average limits") {
    const auto mdp = random_tabular_mdp(4, 3, 21);
    const auto near_one = discount_to_average(mdp, 1.0 - 1e-9);
    double dev = 0.0;
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t n = 0; n < 4; ++n)
          dev = std::max(dev, std::abs(near_one.transition(s, a, n) - mdp.transition(s, a, n)));
    CHECK(dev <= 2e-9);

    const auto reset = discount_to_average(mdp, 0.0);
    const auto p0 = mdp.initial_distribution();
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t n = 0; n < 4; ++n) CHECK(reset.transition(s, a, n) == doctest::Approx(p0[n]));
    const auto pi = random_tabular_policy(4, 3, 22);
    double expected = 0.0;
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t a = 0; a < 3; ++a) expected += p0[s] * pi.probability(State{s}, a) * mdp.reward(s, a);
    CHECK(std::abs(exact_average_reward(reset, pi) - expected) <= 1e-12);

    for (double g : {0.0, 0.3, 0.9, 0.999}) CHECK(max_row_error(discount_to_average(mdp, g)) <= 1e-12);
    CHECK_THROWS_AS(discount_to_average(mdp, 1.0), InvalidArgument);
    CHECK_THROWS_AS(discount_to_average(mdp, -0.1), InvalidArgument);
  }

  TEST_CASE("ModelWin discounted reduction at 0.9") {
    const auto mdp = model_win(0.4);
    const auto pi = model_win_policy(0.9);
    CHECK(std::abs(exact_average_reward(discount_to_average(mdp, 0.9), pi) - exact_discounted_value(mdp, pi, 0.9)) <=
          1e-9);
  }

  TEST_CASE("mix_policies") {
    const auto plus = Policy::constant({1.0, 0.0});
    const auto minus = Policy::uniform(2);
    const State s = std::size_t{0};
    CHECK(mix_policies(plus, minus, 1.0).probabilities(s) == plus.probabilities(s));
    CHECK(mix_policies(plus, minus, 0.0).probabilities(s) == minus.probabilities(s));
    const auto mixed = mix_policies(plus, minus, 0.7).probabilities(s);
    CHECK(mixed[0] == doctest::Approx(0.85).epsilon(1e-15));
    CHECK(mixed[1] == doctest::Approx(0.15).epsilon(1e-15));
    CHECK_THROWS_AS(mix_policies(plus, minus, 1.2), InvalidArgument);
    CHECK_THROWS_AS(mix_policies(plus, Policy::uniform(3), 0.5), InvalidArgument);
  }

  TEST_CASE("policy validation") {
    CHECK_THROWS_AS(Policy::constant({0.6, 0.6}), InvalidArgument);
    const auto t = Policy::tabular({{1.0, 0.0}, {0.5, 0.5}});
    CHECK(t.probability(State{std::size_t{1}}, 1) == 0.5);
    CHECK_THROWS_AS(t.probabilities(State{std::size_t{5}}), UndefinedPolicyState);
    const auto det = Policy::deterministic(3, [](const State&) { return std::size_t{2}; });
    CHECK(det.probabilities(State{std::size_t{0}}) == std::vector<double>{0.0, 0.0, 1.0});
  }
}
