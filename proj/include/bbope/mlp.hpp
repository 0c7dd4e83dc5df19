#pragma once

#include <cstddef>
#include <functional>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bbope {

/// Feed-forward network with sigmoid hidden layers and a scalar linear output
/// o(x). The unnormalized weight of x is w~(x) = exp(o(x)).
class MlpWeightModel {
 public:
  MlpWeightModel() = default;
  /// Zero-initialized network with the given hidden widths.
  MlpWeightModel(std::size_t input_dim, std::vector<std::size_t> hidden = {30, 20, 10});

  /// Hidden layers U[-1/sqrt(fan_in), 1/sqrt(fan_in)], output layer zero.
  static MlpWeightModel initialized(std::size_t input_dim, std::uint64_t seed,
                                    std::vector<std::size_t> hidden = {30, 20, 10});

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t num_layers() const noexcept { return weights_.size(); }
  std::size_t num_parameters() const noexcept;

  /// Layer l maps widths[l] -> widths[l + 1]; weight(l) is (out x in).
  Eigen::MatrixXd& weight(std::size_t l) { return weights_.at(l); }
  const Eigen::MatrixXd& weight(std::size_t l) const { return weights_.at(l); }
  Eigen::VectorXd& bias(std::size_t l) { return biases_.at(l); }
  const Eigen::VectorXd& bias(std::size_t l) const { return biases_.at(l); }

  /// o(x) for each row of `inputs`.
  Eigen::VectorXd forward(const Eigen::MatrixXd& inputs) const;

  /// Parameters flattened layer by layer, weights (column-major) before biases.
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);

  /// Text checkpoint: a version line, then one "name rows cols" header per
  /// tensor followed by its values in row-major order.
  void save(std::ostream& out) const;
  static MlpWeightModel load(std::istream& in);

 private:
  std::size_t input_dim_ = 0;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

struct MlpPass {
  Eigen::VectorXd outputs;
  /// d(sum_i upstream_i o(x_i)) / d(parameters), in flatten() order.
  Eigen::VectorXd gradient;
};

MlpPass mlp_forward_backward(const MlpWeightModel& model, const Eigen::MatrixXd& inputs,
                             const Eigen::VectorXd& upstream);

/// One forward pass; `upstream` maps the outputs to the upstream gradient.
MlpPass mlp_forward_backward(const MlpWeightModel& model, const Eigen::MatrixXd& inputs,
                             const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& upstream);

}  // namespace bbope
