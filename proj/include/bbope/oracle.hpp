#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bbope/kernels.hpp"
#include "bbope/mdp.hpp"

namespace bbope {

/// Stationary state-action distribution, indexed s * num_actions + a.
struct StationaryDistribution {
  std::vector<double> over_state_action;
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::size_t iterations = 0;
  double residual = 0.0;

  double operator()(std::size_t s, std::size_t a) const { return over_state_action[s * num_actions + a]; }
  std::vector<double> state_marginal() const;
};

/// B_pi d(s, a) = pi(a|s) sum_(xi, alpha) P(s | xi, alpha) d(xi, alpha).
std::vector<double> exact_backward_apply(const TabularMdp& mdp, const Policy& policy,
                                         std::span<const double> d);

/// Fixed point of B_pi by lazy power iteration d <- (d + B_pi d) / 2, which
/// has the same fixed points and also converges on periodic chains.
StationaryDistribution exact_stationary(const TabularMdp& mdp, const Policy& policy,
                                        double tolerance = 1e-12, std::size_t max_iterations = 1000000);

double exact_average_reward(const TabularMdp& mdp, const Policy& policy);

/// (1 - gamma) p0^T (I - gamma P_pi)^-1 r_pi.
double exact_discounted_value(const TabularMdp& mdp, const Policy& policy, double gamma);

struct SimplexMinimum {
  Eigen::VectorXd w;
  double loss = 0.0;
};

/// Exhaustive search of w^T K w over the grid {w : w_i in resolution * N} of the simplex.
SimplexMinimum brute_force_simplex_min(const Eigen::MatrixXd& k, double resolution);

struct Theorem1Check {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// lhs = MMD_k(d, B_pi d), rhs = MMD_k~(d, d_pi), both squared.
Theorem1Check check_theorem1(const TabularMdp& mdp, const Policy& policy, std::span<const double> d,
                             const Kernel& kernel);

}  // namespace bbope
