#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bbope/mdp.hpp"

namespace bbope {

/// Encodes a state as a real vector.
class StateEncoder {
 public:
  enum class Kind { raw, one_hot, standardized };

  /// Continuous states passed through unchanged.
  static StateEncoder raw();
  /// Tabular state s -> e_s in R^num_states.
  static StateEncoder one_hot(std::size_t num_states);
  /// (s - mean) / scale per coordinate.
  static StateEncoder standardized(std::vector<double> mean, std::vector<double> scale);
  /// Standardization fitted on every state and next state of a continuous dataset.
  /// Coordinates with zero spread keep scale 1.
  static StateEncoder fit(const TransitionDataset& dataset);

  Kind kind() const noexcept { return kind_; }
  /// Output dimension; 0 for raw (taken from the state).
  std::size_t dim() const noexcept { return dim_; }
  /// Appends the encoding to `out`.
  void encode(const State& state, std::vector<double>& out) const;
  std::string describe() const;

 private:
  Kind kind_ = Kind::raw;
  std::size_t dim_ = 0;
  std::vector<double> mean_;
  std::vector<double> scale_;
};

/// phi(s, a) = [encode(s), action_scale * e_a].
class FeatureMap {
 public:
  FeatureMap(StateEncoder encoder, std::size_t num_actions, double action_scale = 1.0);

  std::vector<double> operator()(const State& state, std::size_t action) const;
  std::size_t num_actions() const noexcept { return num_actions_; }
  double action_scale() const noexcept { return action_scale_; }
  const StateEncoder& encoder() const noexcept { return encoder_; }

  /// Feature rows of every (s_i, a_i) in the dataset.
  Eigen::MatrixXd dataset_features(const TransitionDataset& dataset) const;

 private:
  StateEncoder encoder_;
  std::size_t num_actions_;
  double action_scale_;
};

/// Positive definite kernel on state-action pairs.
///
/// Evaluation is split into an embedding step and a cheap comparison of two
/// embeddings, so Gram assembly embeds each pair once.
class Kernel {
 public:
  enum class Family { rbf, delta, table };

  std::vector<double> embed(const State& state, std::size_t action) const;
  double evaluate_embedded(std::span<const double> x, std::span<const double> y) const;
  double operator()(const StateAction& x, const StateAction& y) const;

  Family family() const noexcept { return family_; }
  bool is_delta() const noexcept { return family_ == Family::delta; }
  const std::string& descriptor() const noexcept { return descriptor_; }

 private:
  friend Kernel rbf_kernel(double, FeatureMap);
  friend Kernel delta_kernel();
  friend Kernel table_kernel(Eigen::MatrixXd, std::size_t, std::string);

  Kernel(Family family, std::string descriptor) : family_(family), descriptor_(std::move(descriptor)) {}

  Family family_;
  std::string descriptor_;
  double inv_two_h2_ = 0.0;
  std::optional<FeatureMap> features_;
  Eigen::MatrixXd table_;
  std::size_t table_actions_ = 0;
};

/// exp(-|phi(x) - phi(y)|^2 / (2 h^2)).
Kernel rbf_kernel(double bandwidth, FeatureMap features);
/// Convenience overload: raw continuous states.
Kernel rbf_kernel(double bandwidth, std::size_t num_actions, double action_scale = 1.0);

/// 1{(s, a) = (s', a')}. Tabular states only.
Kernel delta_kernel();

/// Arbitrary kernel on a finite space given by its Gram matrix over (s, a),
/// indexed s * num_actions + a.
Kernel table_kernel(Eigen::MatrixXd gram, std::size_t num_actions, std::string descriptor);

enum class Percentile { p25 = 25, p50 = 50, p75 = 75 };

Percentile parse_percentile(int value);

/// Lower nearest-rank percentile of the pairwise feature distances.
double median_bandwidth(std::span<const StateAction> points, Percentile percentile,
                        const FeatureMap& features);
/// Same, over the raw distances.
double nearest_rank(std::vector<double> values, double percent);

struct KernelMatrices {
  Eigen::MatrixXd k0;
  Eigen::MatrixXd k1;
  Eigen::MatrixXd k2;
  /// k0 - 2 k1 + k2.
  Eigen::MatrixXd k;
  /// (k + k^T) / 2.
  Eigen::MatrixXd k_sym;

  std::size_t size() const noexcept { return static_cast<std::size_t>(k.rows()); }
};

/// K0_ij = k(x_i, x_j)
/// K1_ij = sum_a' pi(a'|s'_j) k(x_i, (s'_j, a'))
/// K2_ij = sum_a,b pi(a|s'_i) pi(b|s'_j) k((s'_i, a), (s'_j, b))
KernelMatrices assemble_matrices(const TransitionDataset& dataset, const Policy& target,
                                 const Kernel& kernel);

/// Kernel under which the MMD to d_pi equals the MMD between d and B_pi d:
///   k~(x, y) = E[k(x, y) - k(x, y') - k(x', y) + k(x', y')]
/// with x' = (s', a'), s' ~ P(.|x), a' ~ pi(.|s'), drawn independently for x and y.
class TransformedKernel {
 public:
  TransformedKernel(Kernel base, const TabularMdp& mdp, const Policy& policy);

  double operator()(const StateAction& x, const StateAction& y) const;
  double operator()(std::size_t x, std::size_t y) const { return table_(x, y); }
  /// Gram matrix over every (s, a), indexed s * A + a.
  const Eigen::MatrixXd& gram() const noexcept { return table_; }
  const Kernel& base() const noexcept { return base_; }
  /// The same kernel as a table kernel.
  Kernel as_kernel() const;

 private:
  Kernel base_;
  std::size_t num_actions_;
  Eigen::MatrixXd table_;
};

TransformedKernel transformed_kernel(const Kernel& base, const TabularMdp& mdp,
                                     const Policy& policy);

}  // namespace bbope
