#include "bbope/oracle.hpp"

#include <cmath>
#include <limits>

#include "bbope/errors.hpp"
#include "bbope/mmd.hpp"

namespace bbope {

namespace {

std::vector<std::vector<double>> policy_table(const TabularMdp& mdp, const Policy& policy) {
  if (policy.num_actions() != mdp.num_actions())
    throw InvalidArgument("policy and MDP action sets differ");
  std::vector<std::vector<double>> pi(mdp.num_states());
  for (std::size_t s = 0; s < mdp.num_states(); ++s) pi[s] = policy.probabilities(State{s});
  return pi;
}

std::vector<double> backward(const TabularMdp& mdp, const std::vector<std::vector<double>>& pi,
                             std::span<const double> d) {
  const std::size_t S = mdp.num_states();
  const std::size_t A = mdp.num_actions();
  std::vector<double> state_mass(S, 0.0);
  for (std::size_t x = 0; x < S * A; ++x) {
    if (d[x] == 0.0) continue;
    const auto next = mdp.next_state_distribution(x / A, x % A);
    for (std::size_t s = 0; s < S; ++s) state_mass[s] += next[s] * d[x];
  }
  std::vector<double> out(S * A);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) out[s * A + a] = pi[s][a] * state_mass[s];
  return out;
}

}  // namespace

std::vector<double> StationaryDistribution::state_marginal() const {
  std::vector<double> out(num_states, 0.0);
  for (std::size_t s = 0; s < num_states; ++s)
    for (std::size_t a = 0; a < num_actions; ++a) out[s] += over_state_action[s * num_actions + a];
  return out;
}

std::vector<double> exact_backward_apply(const TabularMdp& mdp, const Policy& policy,
                                         std::span<const double> d) {
  if (d.size() != mdp.num_states() * mdp.num_actions())
    throw InvalidArgument("exact_backward_apply: distribution has wrong length");
  return backward(mdp, policy_table(mdp, policy), d);
}

StationaryDistribution exact_stationary(const TabularMdp& mdp, const Policy& policy, double tolerance,
                                        std::size_t max_iterations) {
  const auto pi = policy_table(mdp, policy);
  const std::size_t S = mdp.num_states();
  const std::size_t A = mdp.num_actions();
  std::vector<double> d(S * A);
  const auto p0 = mdp.initial_distribution();
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) d[s * A + a] = p0[s] * pi[s][a];

  StationaryDistribution out;
  out.num_states = S;
  out.num_actions = A;
  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const std::vector<double> bd = backward(mdp, pi, d);
    residual = 0.0;
    for (std::size_t x = 0; x < d.size(); ++x) residual = std::max(residual, std::abs(bd[x] - d[x]));
    if (residual <= tolerance) {
      out.over_state_action = std::move(d);
      out.iterations = it;
      out.residual = residual;
      return out;
    }
    double total = 0.0;
    for (std::size_t x = 0; x < d.size(); ++x) {
      d[x] = 0.5 * (d[x] + bd[x]);
      total += d[x];
    }
    for (auto& v : d) v /= total;
  }
  throw ConvergenceError("exact_stationary: power iteration did not converge", max_iterations, residual);
}

double exact_average_reward(const TabularMdp& mdp, const Policy& policy) {
  const StationaryDistribution d = exact_stationary(mdp, policy);
  double total = 0.0;
  for (std::size_t s = 0; s < mdp.num_states(); ++s)
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) total += d(s, a) * mdp.reward(s, a);
  return total;
}

double exact_discounted_value(const TabularMdp& mdp, const Policy& policy, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("exact_discounted_value: gamma must lie in [0, 1)");
  const auto pi = policy_table(mdp, policy);
  const auto S = static_cast<Eigen::Index>(mdp.num_states());
  Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(S, S);
  Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(S);
  for (Eigen::Index s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      const double p = pi[static_cast<std::size_t>(s)][a];
      r_pi[s] += p * mdp.reward(static_cast<std::size_t>(s), a);
      const auto next = mdp.next_state_distribution(static_cast<std::size_t>(s), a);
      for (Eigen::Index n = 0; n < S; ++n) p_pi(s, n) += p * next[static_cast<std::size_t>(n)];
    }
  }
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(S, S) - gamma * p_pi;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) throw Error("exact_discounted_value: singular linear system");
  const Eigen::VectorXd v = lu.solve(r_pi);
  Eigen::VectorXd p0(S);
  for (Eigen::Index s = 0; s < S; ++s) p0[s] = mdp.initial_distribution()[static_cast<std::size_t>(s)];
  const double value = (1.0 - gamma) * p0.dot(v);
  if (!std::isfinite(value)) throw Error("exact_discounted_value: non-finite solution");
  return value;
}

SimplexMinimum brute_force_simplex_min(const Eigen::MatrixXd& k, double resolution) {
  const Eigen::Index dim = k.rows();
  if (k.cols() != dim || dim == 0) throw InvalidArgument("brute_force_simplex_min: K must be square");
  if (dim > 6) throw InvalidArgument("brute_force_simplex_min: dimension above 6");
  if (!(resolution > 0.0 && resolution <= 1e-2))
    throw InvalidArgument("brute_force_simplex_min: resolution must lie in (0, 1e-2]");
  const double steps_real = 1.0 / resolution;
  const auto steps = static_cast<long>(std::llround(steps_real));
  if (std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * steps_real)
    throw InvalidArgument("brute_force_simplex_min: 1 / resolution must be an integer");

  SimplexMinimum best;
  best.loss = std::numeric_limits<double>::infinity();
  if (dim == 1) {
    best.w = Eigen::VectorXd::Ones(1);
    best.loss = k(0, 0);
    return best;
  }
  const double h = 1.0 / static_cast<double>(steps);
  const Eigen::Index a = dim - 2;
  const Eigen::Index b = dim - 1;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);

  // Recurse over the first dim - 2 coordinates; the last two are swept in
  // closed form.
  auto sweep = [&](auto&& self, Eigen::Index coord, long remaining) -> void {
    if (coord == a) {
      const Eigen::VectorXd prefix = w.head(a);
      const double c0 = prefix.dot(k.topLeftCorner(a, a) * prefix);
      const double ca = a > 0 ? 2.0 * prefix.dot(k.col(a).head(a)) : 0.0;
      const double cb = a > 0 ? 2.0 * prefix.dot(k.col(b).head(a)) : 0.0;
      for (long i = 0; i <= remaining; ++i) {
        const double t = static_cast<double>(i) * h;
        const double r = static_cast<double>(remaining - i) * h;
        const double value =
            c0 + ca * t + cb * r + k(a, a) * t * t + 2.0 * k(a, b) * t * r + k(b, b) * r * r;
        if (value < best.loss) {
          best.loss = value;
          best.w = w;
          best.w[a] = t;
          best.w[b] = r;
        }
      }
      return;
    }
    for (long i = 0; i <= remaining; ++i) {
      w[coord] = static_cast<double>(i) * h;
      self(self, coord + 1, remaining - i);
    }
    w[coord] = 0.0;
  };
  sweep(sweep, 0, steps);
  best.loss = best.w.dot(k * best.w);
  return best;
}

Theorem1Check check_theorem1(const TabularMdp& mdp, const Policy& policy, std::span<const double> d,
                             const Kernel& kernel) {
  const std::size_t A = mdp.num_actions();
  if (d.size() != mdp.num_states() * A) throw InvalidArgument("check_theorem1: distribution has wrong length");
  const StationaryDistribution d_pi = exact_stationary(mdp, policy);
  const std::vector<double> bd = exact_backward_apply(mdp, policy, d);
  const DiscreteMeasure mu = tabular_measure(d, A);
  Theorem1Check out;
  out.lhs = mmd_squared(mu, tabular_measure(bd, A), kernel);
  const TransformedKernel k_tilde = transformed_kernel(kernel, mdp, policy);
  out.rhs = mmd_squared(mu, tabular_measure(d_pi.over_state_action, A), k_tilde.as_kernel());
  return out;
}

}  // namespace bbope
