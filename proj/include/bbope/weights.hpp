#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bbope/kernels.hpp"
#include "bbope/mdp.hpp"
#include "bbope/mlp.hpp"

namespace bbope {

/// Nonnegative weights summing to one.
struct WeightVector {
  Eigen::VectorXd w;

  std::size_t size() const noexcept { return static_cast<std::size_t>(w.size()); }
  double operator[](std::size_t i) const { return w[static_cast<Eigen::Index>(i)]; }
  std::span<const double> span() const noexcept { return {w.data(), size()}; }
  /// sum_i w_i r_i.
  double dot(std::span<const double> values) const;
};

/// w_i = w~_i / sum w~. Throws on nonpositive or non-finite entries.
WeightVector normalize(const Eigen::VectorXd& w_tilde);
WeightVector uniform_weights(std::size_t n);
/// Throws unless w lies on the simplex within `tol`.
void require_simplex(const WeightVector& w, double tol = 1e-8);

/// Tabular dataset with identical (s, a, r, s') rows merged.
struct CompressedDataset {
  TransitionDataset atoms;
  std::vector<double> multiplicity;
  /// Atom index of every original row.
  std::vector<std::size_t> atom_of;
};

CompressedDataset compress_tabular(const TransitionDataset& dataset);

/// Per-sample weights from atom weights, splitting each atom's mass evenly.
WeightVector expand_atom_weights(const CompressedDataset& compressed, const WeightVector& atom_weights);

enum class OptimizerMethod { exp_gradient, sgd_adamlike };

OptimizerMethod parse_optimizer_method(std::string_view name);
std::string_view to_string(OptimizerMethod method) noexcept;

struct OptimizerConfig {
  OptimizerMethod method = OptimizerMethod::exp_gradient;
  double step_size = 1e-2;
  std::size_t iterations = 2000;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  double tolerance = 1e-10;
  /// Tabular solver: share one weight per distinct (s, a).
  bool tie_weights = true;
  /// Parametric training on continuous data uses a seeded subsample of at most
  /// this many rows (0 keeps every row).
  std::size_t max_rows = 2000;
  /// Parametric training: cosine decay of the step size to zero over `iterations`.
  bool cosine_decay = false;

  void validate() const;
};

/// Log-weights per distinct (s, a): w~_i = exp(log_table[index(s_i, a_i)]).
struct TabularWeightModel {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> index;
  Eigen::VectorXd log_table;

  std::size_t slot(std::size_t state, std::size_t action) const;
};

struct TabularSolution {
  WeightVector weights;
  TabularWeightModel model;
  double loss = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// Loss after every accepted step, starting with the initial point.
  std::vector<double> loss_trace;
};

/// Minimizes w^T K_sym w over the simplex. `multiplicity` (default all ones)
/// gives the number of original samples each row stands for; tied weights are
/// split in proportion to it.
TabularSolution solve_tabular(const KernelMatrices& matrices, const TransitionDataset& dataset,
                              const OptimizerConfig& config, std::span<const double> multiplicity = {});

struct ParametricResult {
  MlpWeightModel model;
  WeightVector weights;
  std::vector<double> loss_trace;
  /// l(w) on the training rows for the returned model.
  double final_loss = 0.0;
  std::size_t iterations = 0;
  std::size_t training_rows = 0;
};

/// Adam on L(omega) with mini-batch gradients backpropagated through the MLP.
/// The iterate with the lowest loss is returned, with weights for every row of
/// `dataset`.
ParametricResult train_parametric(const TransitionDataset& dataset, const Kernel& kernel,
                                  const Policy& target, const FeatureMap& inputs,
                                  MlpWeightModel model, const OptimizerConfig& config);

/// Seeded choice of `count` distinct indices from [0, n), sorted.
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t count, std::uint64_t seed);

}  // namespace bbope
