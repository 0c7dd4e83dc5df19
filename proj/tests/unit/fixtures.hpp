#pragma once
// Shared fixtures for the unit tests.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "bbope/kernels.hpp"
#include "bbope/mdp.hpp"

namespace fixtures {

inline bbope::TransitionDataset random_tabular_data(std::size_t n, std::size_t S, std::size_t A, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<bbope::Transition> rows;
  for (std::size_t i = 0; i < n; ++i)
    rows.push_back({bbope::State{gen() % S}, static_cast<std::size_t>(gen() % A),
                    static_cast<double>(gen() % 5) - 2.0, bbope::State{gen() % S}});
  return bbope::TransitionDataset(std::move(rows));
}

inline bbope::TransitionDataset random_continuous_data(std::size_t n, std::size_t dim, std::size_t A,
                                                       std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  auto draw = [&] {
    std::vector<double> v(dim);
    for (auto& x : v) x = z(gen);
    return bbope::State{v};
  };
  std::vector<bbope::Transition> rows;
  for (std::size_t i = 0; i < n; ++i)
    rows.push_back({draw(), static_cast<std::size_t>(gen() % A), z(gen), draw()});
  return bbope::TransitionDataset(std::move(rows));
}

inline bbope::Kernel one_hot_rbf(std::size_t S, std::size_t A, double h) {
  return bbope::rbf_kernel(h, bbope::FeatureMap(bbope::StateEncoder::one_hot(S), A));
}

/// Uniform draw from the simplex.
inline Eigen::VectorXd random_simplex(std::size_t n, std::mt19937_64& gen) {
  std::exponential_distribution<double> e;
  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  for (auto& v : w) v = e(gen);
  return w / w.sum();
}

inline Eigen::VectorXd random_positive(std::size_t n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.2, 3.0);
  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  for (auto& v : w) v = u(gen);
  return w;
}

}  // namespace fixtures
