#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bbope/kernels.hpp"
#include "bbope/mdp.hpp"

namespace bbope {

/// Finitely supported signed measure over state-action pairs. Atoms may repeat.
struct DiscreteMeasure {
  std::vector<StateAction> support;
  std::vector<double> mass;

  void add(State state, std::size_t action, double m);
  double total_mass() const noexcept;
  std::size_t size() const noexcept { return support.size(); }
  /// Throws unless masses are nonnegative and sum to 1 within `tol`.
  void require_distribution(double tol = 1e-10) const;
};

/// Full distribution over a tabular (s, a) grid, indexed s * num_actions + a.
DiscreteMeasure tabular_measure(std::span<const double> d, std::size_t num_actions);

/// f - g.
DiscreteMeasure difference(const DiscreteMeasure& f, const DiscreteMeasure& g);

/// <f, g>_k = sum_x sum_y f(x) k(x, y) g(y).
double bilinear(const DiscreteMeasure& f, const DiscreteMeasure& g, const Kernel& kernel);

/// Roundoff in (-1e-10, 0) is clamped to 0; anything more negative throws.
double clamp_nonnegative(double value, const char* what);

/// bilinear(mu1 - mu2, mu1 - mu2).
double mmd_squared(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2, const Kernel& kernel);

/// d_w = sum_i w_i delta_(s_i, a_i).
DiscreteMeasure weighted_empirical(const TransitionDataset& dataset, std::span<const double> w);

/// B^_pi d_w(s, a) = pi(a|s) sum_i w_i 1{s'_i = s}.
DiscreteMeasure empirical_backward(const TransitionDataset& dataset, std::span<const double> w,
                                   const Policy& target);

/// w^T K w for simplex w.
double loss(const Eigen::VectorXd& w, const KernelMatrices& matrices);

/// L = log sum_ij w~_i w~_j K_ij - 2 log sum_l w~_l, with gradient taken
/// with respect to log w~_i.
struct LossGradientEstimate {
  double value = 0.0;
  Eigen::VectorXd gradient;
  std::string batch_spec;
};

LossGradientEstimate log_loss_full(const Eigen::VectorXd& w_tilde, const KernelMatrices& matrices);

/// Stochastic version of the log_loss_full gradient. Pairs (i, j) are drawn
/// with probability |w~_i w~_j K_ij| / A and contribute sign(K_ij) A / S (e_i + e_j),
/// where S = sum w~_i w~_j K_ij and A = sum |w~_i w~_j K_ij|; singletons are drawn
/// with probability w~_i / sum w~ and contribute -2 e_i. The batch average is
/// projected onto sum-zero vectors, which leaves its mean unchanged because the
/// exact gradient already sums to zero. batch_size >= n^2 returns the exact gradient.
LossGradientEstimate log_loss_minibatch_grad(const Eigen::VectorXd& w_tilde,
                                             const KernelMatrices& matrices, std::size_t batch_size,
                                             std::uint64_t seed);

/// Repeated mini-batch gradients against one set of matrices.
class PairSampler {
 public:
  explicit PairSampler(const KernelMatrices& matrices);

  /// Same estimator as log_loss_minibatch_grad.
  LossGradientEstimate gradient(const Eigen::VectorXd& w_tilde, std::size_t batch_size,
                                std::uint64_t seed) const;

 private:
  const KernelMatrices* matrices_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> k_;
};

/// Gradient of l = w~^T K w~ / (sum w~)^2 with respect to log w~. Used when l is
/// too small for the log transform.
LossGradientEstimate direct_loss_grad(const Eigen::VectorXd& w_tilde, const KernelMatrices& matrices);

}  // namespace bbope
