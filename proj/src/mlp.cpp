#include "bbope/mlp.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "bbope/errors.hpp"
#include "bbope/rng.hpp"

namespace bbope {

namespace {

constexpr const char* kCheckpointTag = "bbope-mlp-checkpoint v1";

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

}  // namespace

MlpWeightModel::MlpWeightModel(std::size_t input_dim, std::vector<std::size_t> hidden)
    : input_dim_(input_dim) {
  if (input_dim == 0) throw InvalidArgument("MlpWeightModel: input dimension must be positive");
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (widths[l + 1] == 0) throw InvalidArgument("MlpWeightModel: empty layer");
    weights_.push_back(Eigen::MatrixXd::Zero(widths[l + 1], widths[l]));
    biases_.push_back(Eigen::VectorXd::Zero(widths[l + 1]));
  }
}

MlpWeightModel MlpWeightModel::initialized(std::size_t input_dim, std::uint64_t seed,
                                           std::vector<std::size_t> hidden) {
  MlpWeightModel m(input_dim, std::move(hidden));
  CounterRng rng(seed, 0, StreamTag::initialization);
  for (std::size_t l = 0; l + 1 < m.weights_.size(); ++l) {
    const double beta = 1.0 / std::sqrt(static_cast<double>(m.weights_[l].cols()));
    for (Eigen::Index k = 0; k < m.weights_[l].size(); ++k) m.weights_[l].data()[k] = rng.uniform(-beta, beta);
    for (Eigen::Index k = 0; k < m.biases_[l].size(); ++k) m.biases_[l][k] = rng.uniform(-beta, beta);
  }
  return m;
}

std::size_t MlpWeightModel::num_parameters() const noexcept {
  std::size_t total = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    total += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  return total;
}

Eigen::VectorXd MlpWeightModel::forward(const Eigen::MatrixXd& inputs) const {
  return mlp_forward_backward(*this, inputs, Eigen::VectorXd()).outputs;
}

Eigen::VectorXd MlpWeightModel::flatten() const {
  Eigen::VectorXd flat(num_parameters());
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    flat.segment(at, weights_[l].size()) = weights_[l].reshaped();
    at += weights_[l].size();
    flat.segment(at, biases_[l].size()) = biases_[l];
    at += biases_[l].size();
  }
  return flat;
}

void MlpWeightModel::assign(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != num_parameters())
    throw InvalidArgument("MlpWeightModel::assign: parameter count mismatch");
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l].reshaped() = flat.segment(at, weights_[l].size());
    at += weights_[l].size();
    biases_[l] = flat.segment(at, biases_[l].size());
    at += biases_[l].size();
  }
}

void MlpWeightModel::save(std::ostream& out) const {
  out << kCheckpointTag << "\n";
  out << "input_dim " << input_dim_ << "\nlayers " << weights_.size() << "\n";
  out.precision(17);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out << "W" << l << " " << weights_[l].rows() << " " << weights_[l].cols() << "\n";
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) out << (c ? " " : "") << weights_[l](r, c);
      out << "\n";
    }
    out << "b" << l << " " << biases_[l].size() << " 1\n";
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) out << (r ? " " : "") << biases_[l][r];
    out << "\n";
  }
  if (!out) throw Error("MlpWeightModel::save: write failed");
}

MlpWeightModel MlpWeightModel::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointTag)
    throw InvalidArgument("MlpWeightModel::load: missing or unsupported version tag");
  std::string key;
  std::size_t input_dim = 0;
  std::size_t layers = 0;
  if (!(in >> key >> input_dim) || key != "input_dim" || !(in >> key >> layers) || key != "layers")
    throw InvalidArgument("MlpWeightModel::load: malformed header");
  MlpWeightModel m;
  m.input_dim_ = input_dim;
  auto expect = [&](const std::string& name, Eigen::Index& rows, Eigen::Index& cols) {
    std::string got;
    if (!(in >> got >> rows >> cols) || got != name || rows <= 0 || cols <= 0)
      throw InvalidArgument("MlpWeightModel::load: expected tensor " + name);
  };
  Eigen::Index prev = static_cast<Eigen::Index>(input_dim);
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::Index rows = 0, cols = 0;
    expect("W" + std::to_string(l), rows, cols);
    if (cols != prev) throw InvalidArgument("MlpWeightModel::load: layer shapes do not chain");
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        if (!(in >> w(r, c))) throw InvalidArgument("MlpWeightModel::load: truncated tensor");
    Eigen::Index brows = 0, bcols = 0;
    expect("b" + std::to_string(l), brows, bcols);
    if (brows != rows || bcols != 1) throw InvalidArgument("MlpWeightModel::load: bias shape mismatch");
    Eigen::VectorXd b(rows);
    for (Eigen::Index r = 0; r < rows; ++r)
      if (!(in >> b[r])) throw InvalidArgument("MlpWeightModel::load: truncated tensor");
    m.weights_.push_back(std::move(w));
    m.biases_.push_back(std::move(b));
    prev = rows;
  }
  if (prev != 1 || layers == 0) throw InvalidArgument("MlpWeightModel::load: output must be scalar");
  return m;
}

MlpPass mlp_forward_backward(const MlpWeightModel& model, const Eigen::MatrixXd& inputs,
                             const Eigen::VectorXd& upstream) {
  if (upstream.size() == 0) return mlp_forward_backward(model, inputs, [](const Eigen::VectorXd&) {
    return Eigen::VectorXd();
  });
  return mlp_forward_backward(model, inputs, [&](const Eigen::VectorXd&) { return upstream; });
}

MlpPass mlp_forward_backward(const MlpWeightModel& model, const Eigen::MatrixXd& inputs,
                             const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& upstream_of) {
  if (static_cast<std::size_t>(inputs.cols()) != model.input_dim())
    throw InvalidArgument("mlp_forward_backward: input dimension " + std::to_string(inputs.cols()) +
                          " does not match model dimension " + std::to_string(model.input_dim()));
  const std::size_t L = model.num_layers();
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(L + 1);
  acts.push_back(inputs.transpose());
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd z = model.weight(l) * acts.back();
    z.colwise() += model.bias(l);
    acts.push_back(l + 1 < L ? sigmoid(z) : std::move(z));
  }
  MlpPass pass;
  pass.outputs = acts.back().row(0).transpose();
  const Eigen::VectorXd upstream = upstream_of(pass.outputs);
  if (upstream.size() == 0) return pass;
  if (upstream.size() != inputs.rows())
    throw InvalidArgument("mlp_forward_backward: upstream gradient length mismatch");

  std::vector<Eigen::MatrixXd> grad_w(L);
  std::vector<Eigen::VectorXd> grad_b(L);
  Eigen::MatrixXd delta = upstream.transpose();
  for (std::size_t l = L; l-- > 0;) {
    grad_w[l] = delta * acts[l].transpose();
    grad_b[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = model.weight(l).transpose() * delta;
      delta = back.array() * acts[l].array() * (1.0 - acts[l].array());
    }
  }
  pass.gradient.resize(static_cast<Eigen::Index>(model.num_parameters()));
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < L; ++l) {
    pass.gradient.segment(at, grad_w[l].size()) = grad_w[l].reshaped();
    at += grad_w[l].size();
    pass.gradient.segment(at, grad_b[l].size()) = grad_b[l];
    at += grad_b[l].size();
  }
  return pass;
}

}  // namespace bbope
