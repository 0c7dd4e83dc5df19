#include <doctest.h>

#include <cmath>
#include <random>

#include "bbope/envs.hpp"
#include "bbope/errors.hpp"
#include "bbope/oracle.hpp"
#include "fixtures.hpp"

using namespace bbope;

namespace {

std::vector<double> random_distribution(std::size_t n, std::mt19937_64& gen) {
  const Eigen::VectorXd w = fixtures::random_simplex(n, gen);
  return {w.data(), w.data() + n};
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("stationary distributions") {
    const auto point = exact_stationary(TabularMdp(1, 1, {1.0}, {0.0}, {1.0}), Policy::uniform(1));
    CHECK(point.over_state_action == std::vector<double>{1.0});

    const auto d = exact_stationary(model_win(0.4), model_win_policy(0.9));
    const auto marg = d.state_marginal();
    CHECK(marg[0] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(marg[1] == doctest::Approx(0.21).epsilon(1e-10));
    CHECK(marg[2] == doctest::Approx(0.29).epsilon(1e-10));
    CHECK(d(0, 0) == doctest::Approx(0.45).epsilon(1e-10));
    CHECK(d(0, 1) == doctest::Approx(0.05).epsilon(1e-10));

    // Deterministic two-state flip.
    const TabularMdp flip(2, 1, {0, 1, 1, 0}, {0, 0}, {1, 0});
    const auto f = exact_stationary(flip, Policy::uniform(1));
    CHECK(f.over_state_action[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f.over_state_action[1] == doctest::Approx(0.5).epsilon(1e-12));
  }

  TEST_CASE("stationary fixed point residual") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto mdp = random_tabular_mdp(2 + seed % 5, 1 + seed % 3, seed);
      const auto pi = random_tabular_policy(mdp.num_states(), mdp.num_actions(), seed + 1);
      const auto d = exact_stationary(mdp, pi);
      double total = 0.0;
      for (double v : d.over_state_action) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
      CHECK(max_abs_diff(exact_backward_apply(mdp, pi, d.over_state_action), d.over_state_action) <= 1e-10);
    }
  }

  TEST_CASE("backward operator") {
    // Cycle 0 -> 1 -> 2 -> 0.
    const TabularMdp cycle(3, 1, {0, 1, 0, 0, 0, 1, 1, 0, 0}, {0, 0, 0}, {1, 0, 0});
    const auto moved = exact_backward_apply(cycle, Policy::uniform(1), std::vector<double>{0.6, 0.3, 0.1});
    CHECK(moved == std::vector<double>{0.1, 0.6, 0.3});

    std::mt19937_64 gen(2);
    const auto mdp = random_tabular_mdp(4, 3, 5);
    const auto pi = random_tabular_policy(4, 3, 6);
    const auto d1 = random_distribution(12, gen), d2 = random_distribution(12, gen);
    const double alpha = 0.35;
    std::vector<double> mix(12);
    for (std::size_t i = 0; i < 12; ++i) mix[i] = alpha * d1[i] + (1 - alpha) * d2[i];
    const auto b1 = exact_backward_apply(mdp, pi, d1), b2 = exact_backward_apply(mdp, pi, d2);
    const auto bm = exact_backward_apply(mdp, pi, mix);
    double total = 0.0;
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(std::abs(bm[i] - (alpha * b1[i] + (1 - alpha) * b2[i])) <= 1e-12);
      total += b1[i];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    const auto fixed = exact_stationary(mdp, pi).over_state_action;
    CHECK(max_abs_diff(exact_backward_apply(mdp, pi, fixed), fixed) <= 1e-12);
  }

  TEST_CASE("average rewards") {
    const auto mdp = model_win(0.4);
    CHECK(exact_average_reward(mdp, model_win_policy(0.9)) == doctest::Approx(-0.08).epsilon(1e-10));
    CHECK(exact_average_reward(mdp, model_win_policy(0.7)) == doctest::Approx(-0.04).epsilon(1e-10));
    const auto zero = random_tabular_mdp(3, 2, 1);
    const TabularMdp no_reward(3, 2, [&] {
      std::vector<double> p;
      for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t a = 0; a < 2; ++a)
          for (double v : zero.next_state_distribution(s, a)) p.push_back(v);
      return p;
    }(), std::vector<double>(6, 0.0), {1.0 / 3, 1.0 / 3, 1.0 / 3});
    CHECK(exact_average_reward(no_reward, Policy::uniform(2)) == 0.0);
  }

  TEST_CASE("discounted values") {
    const auto mdp = random_tabular_mdp(4, 2, 7);
    const auto pi = random_tabular_policy(4, 2, 8);
    double immediate = 0.0;
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t a = 0; a < 2; ++a)
        immediate += mdp.initial_distribution()[s] * pi.probability(State{s}, a) * mdp.reward(s, a);
    CHECK(exact_discounted_value(mdp, pi, 0.0) == doctest::Approx(immediate).epsilon(1e-12));

    std::vector<double> p;
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t a = 0; a < 2; ++a)
        for (double v : mdp.next_state_distribution(s, a)) p.push_back(v);
    const TabularMdp constant(4, 2, p, std::vector<double>(8, -0.7), {0.25, 0.25, 0.25, 0.25});
    for (double g : {0.0, 0.5, 0.9, 0.99}) CHECK(exact_discounted_value(constant, pi, g) == doctest::Approx(-0.7).epsilon(1e-12));

    for (double g : {0.5, 0.9, 0.99})
      CHECK(std::abs(exact_discounted_value(mdp, pi, g) - exact_average_reward(discount_to_average(mdp, g), pi)) <= 1e-9);
    CHECK_THROWS_AS(exact_discounted_value(mdp, pi, 1.0), InvalidArgument);
  }

  TEST_CASE("brute-force simplex minimum") {
    const auto id = brute_force_simplex_min(Eigen::MatrixXd::Identity(2, 2), 1e-3);
    CHECK(id.w[0] == doctest::Approx(0.5));
    CHECK(id.loss == doctest::Approx(0.5));
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(2, 2);
    k(0, 0) = 1.0;
    k(1, 1) = 3.0;
    const auto d = brute_force_simplex_min(k, 1e-3);
    CHECK(std::abs(d.w[0] - 0.75) <= 1e-3);
    CHECK(d.loss >= 0.75 - 1e-15);
    CHECK_THROWS_AS(brute_force_simplex_min(Eigen::MatrixXd::Identity(7, 7), 1e-2), InvalidArgument);
    CHECK_THROWS_AS(brute_force_simplex_min(k, 0.3), InvalidArgument);
  }

  TEST_CASE("operator discrepancy equals the transformed-kernel discrepancy") {
    std::mt19937_64 gen(9);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto mdp = random_tabular_mdp(4, 2, seed + 500);
      const auto pi = random_tabular_policy(4, 2, seed + 600);
      const auto k = fixtures::one_hot_rbf(4, 2, 1.0);
      const auto d = random_distribution(8, gen);
      const auto c = check_theorem1(mdp, pi, d, k);
      CHECK(std::abs(c.lhs - c.rhs) <= 1e-8 * std::max(1.0, c.lhs));
      CHECK(c.lhs > 0.0);
      const auto fixed = check_theorem1(mdp, pi, exact_stationary(mdp, pi).over_state_action, k);
      CHECK(std::abs(fixed.lhs) <= 1e-12);
      CHECK(std::abs(fixed.rhs) <= 1e-12);
    }
  }
}
