#include "bbope/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <tuple>

#include "bbope/errors.hpp"
#include "bbope/mmd.hpp"
#include "bbope/rng.hpp"

namespace bbope {

double WeightVector::dot(std::span<const double> values) const {
  if (values.size() != size()) throw InvalidArgument("WeightVector::dot: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) total += w[static_cast<Eigen::Index>(i)] * values[i];
  return total;
}

WeightVector normalize(const Eigen::VectorXd& w_tilde) {
  if (w_tilde.size() == 0) throw InvalidArgument("normalize: empty weight vector");
  for (double x : w_tilde)
    if (!(x > 0.0) || !std::isfinite(x))
      throw InvalidArgument("normalize: weights must be positive and finite");
  return WeightVector{w_tilde / w_tilde.sum()};
}

WeightVector uniform_weights(std::size_t n) {
  if (n == 0) throw InvalidArgument("uniform_weights: n must be positive");
  return WeightVector{Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n))};
}

void require_simplex(const WeightVector& w, double tol) {
  double total = 0.0;
  for (double x : w.w) {
    if (!(x >= -tol) || !std::isfinite(x)) throw Error("weight vector leaves the simplex");
    total += x;
  }
  if (std::abs(total - 1.0) > tol) throw Error("weight vector does not sum to 1");
}

CompressedDataset compress_tabular(const TransitionDataset& dataset) {
  if (!dataset.is_tabular()) throw InvalidArgument("compress_tabular: continuous dataset");
  std::map<std::tuple<std::size_t, std::size_t, double, std::size_t>, std::size_t> seen;
  std::vector<Transition> atoms;
  CompressedDataset out;
  out.atom_of.reserve(dataset.size());
  for (const auto& t : dataset) {
    const auto key = std::make_tuple(state_id(t.state), t.action, t.reward, state_id(t.next_state));
    auto [it, inserted] = seen.try_emplace(key, atoms.size());
    if (inserted) {
      atoms.push_back(t);
      out.multiplicity.push_back(0.0);
    }
    out.multiplicity[it->second] += 1.0;
    out.atom_of.push_back(it->second);
  }
  out.atoms = TransitionDataset(std::move(atoms));
  return out;
}

WeightVector expand_atom_weights(const CompressedDataset& compressed, const WeightVector& atom_weights) {
  if (atom_weights.size() != compressed.multiplicity.size())
    throw InvalidArgument("expand_atom_weights: size mismatch");
  Eigen::VectorXd w(static_cast<Eigen::Index>(compressed.atom_of.size()));
  for (std::size_t i = 0; i < compressed.atom_of.size(); ++i) {
    const std::size_t a = compressed.atom_of[i];
    w[static_cast<Eigen::Index>(i)] = atom_weights[a] / compressed.multiplicity[a];
  }
  return WeightVector{std::move(w)};
}

OptimizerMethod parse_optimizer_method(std::string_view name) {
  if (name == "exp_gradient") return OptimizerMethod::exp_gradient;
  if (name == "sgd_adamlike") return OptimizerMethod::sgd_adamlike;
  throw InvalidArgument("unknown optimizer method '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerMethod method) noexcept {
  return method == OptimizerMethod::exp_gradient ? "exp_gradient" : "sgd_adamlike";
}

void OptimizerConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size))
    throw InvalidArgument("OptimizerConfig: step_size must be positive");
  if (iterations == 0) throw InvalidArgument("OptimizerConfig: iterations must be at least 1");
  if (batch_size == 0) throw InvalidArgument("OptimizerConfig: batch_size must be at least 1");
  if (!(tolerance >= 0.0)) throw InvalidArgument("OptimizerConfig: tolerance must be nonnegative");
}

std::size_t TabularWeightModel::slot(std::size_t state, std::size_t action) const {
  const auto it = index.find({state, action});
  if (it == index.end()) throw InvalidArgument("TabularWeightModel: unseen state-action");
  return it->second;
}

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (count > n) throw InvalidArgument("subsample_indices: count exceeds population");
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  CounterRng rng(seed, 0, StreamTag::subsample);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.below(n - k));
    std::swap(pool[k], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

namespace {

struct Adam {
  explicit Adam(Eigen::Index size, double lr)
      : lr(lr), m(Eigen::VectorXd::Zero(size)), v(Eigen::VectorXd::Zero(size)) {}

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& g) {
    ++t;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }

  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t t = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
};

double quad(const Eigen::MatrixXd& k, const Eigen::VectorXd& u) { return u.dot(k * u); }

}  // namespace

TabularSolution solve_tabular(const KernelMatrices& matrices, const TransitionDataset& dataset,
                              const OptimizerConfig& config, std::span<const double> multiplicity) {
  config.validate();
  const std::size_t n = dataset.size();
  if (n == 0) throw InvalidArgument("solve_tabular: empty dataset");
  if (!dataset.is_tabular()) throw InvalidArgument("solve_tabular: dataset is not tabular");
  if (matrices.size() != n) throw InvalidArgument("solve_tabular: matrices do not match the dataset");
  std::vector<double> mult(multiplicity.begin(), multiplicity.end());
  if (mult.empty()) mult.assign(n, 1.0);
  if (mult.size() != n) throw InvalidArgument("solve_tabular: multiplicity length mismatch");
  for (double m : mult)
    if (!(m > 0.0)) throw InvalidArgument("solve_tabular: multiplicities must be positive");

  TabularSolution out;
  std::vector<std::size_t> group(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = state_id(dataset[i].state);
    const std::size_t a = dataset[i].action;
    if (config.tie_weights) {
      auto [it, inserted] = out.model.index.try_emplace({s, a}, out.model.index.size());
      group[i] = it->second;
    } else {
      group[i] = i;
      out.model.index.try_emplace({s, a}, out.model.index.size());
    }
  }
  const std::size_t G = config.tie_weights ? out.model.index.size() : n;

  // w = M u with M_ig = m_i / m_g for i in group g.
  std::vector<double> group_mass(G, 0.0);
  for (std::size_t i = 0; i < n; ++i) group_mass[group[i]] += mult[i];
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(G));
  for (std::size_t i = 0; i < n; ++i)
    M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(group[i])) = mult[i] / group_mass[group[i]];
  const Eigen::MatrixXd kbar = M.transpose() * matrices.k_sym * M;

  double total_mass = 0.0;
  for (double m : group_mass) total_mass += m;
  Eigen::VectorXd u(static_cast<Eigen::Index>(G));
  for (std::size_t g = 0; g < G; ++g) u[static_cast<Eigen::Index>(g)] = group_mass[g] / total_mass;

  auto finish = [&](const Eigen::VectorXd& uu) {
    Eigen::VectorXd w = M * uu;
    w /= w.sum();
    out.weights = WeightVector{std::move(w)};
    if (config.tie_weights) {
      out.model.log_table = uu.array().max(1e-300).log();
    } else {
      out.model.log_table.resize(0);
    }
    out.loss = clamp_nonnegative(out.weights.w.dot(matrices.k * out.weights.w), "solve_tabular");
    return out;
  };

  if (G == 1) {
    out.converged = true;
    out.loss_trace.push_back(quad(kbar, u));
    return finish(u);
  }

  double current = quad(kbar, u);
  out.loss_trace.push_back(current);

  if (config.method == OptimizerMethod::exp_gradient) {
    double eta = config.step_size;
    for (std::size_t it = 0; it < config.iterations; ++it) {
      out.iterations = it + 1;
      const Eigen::VectorXd grad = 2.0 * kbar * u;
      const double gmin = grad.minCoeff();
      const double gap = grad.dot(u) - gmin;
      if (gap <= config.tolerance) {
        out.converged = true;
        break;
      }
      Eigen::VectorXd candidate = u.array() * (-eta * (grad.array() - gmin)).exp();
      candidate /= candidate.sum();
      const double next = quad(kbar, candidate);
      if (next <= current) {
        u = std::move(candidate);
        current = next;
        out.loss_trace.push_back(current);
        eta *= 1.5;
      } else {
        eta *= 0.5;
        if (eta < 1e-300) break;
      }
    }
  } else {
    // Adam on log u with the exact gradient of log l.
    Eigen::VectorXd theta = u.array().log();
    Adam adam(theta.size(), config.step_size);
    for (std::size_t it = 0; it < config.iterations; ++it) {
      out.iterations = it + 1;
      Eigen::VectorXd e = (theta.array() - theta.maxCoeff()).exp();
      const double s = quad(kbar, e);
      const double total = e.sum();
      if (!(s / (total * total) > 1e-12)) {
        out.converged = true;
        break;
      }
      const Eigen::VectorXd grad = 2.0 * e.cwiseProduct(kbar * e) / s - 2.0 * e / total;
      if (grad.cwiseAbs().maxCoeff() <= config.tolerance) {
        out.converged = true;
        break;
      }
      adam.step(theta, grad);
      Eigen::VectorXd uu = (theta.array() - theta.maxCoeff()).exp();
      uu /= uu.sum();
      out.loss_trace.push_back(quad(kbar, uu));
    }
    u = (theta.array() - theta.maxCoeff()).exp();
    u /= u.sum();
  }
  return finish(u);
}

ParametricResult train_parametric(const TransitionDataset& dataset, const Kernel& kernel,
                                  const Policy& target, const FeatureMap& inputs,
                                  MlpWeightModel model, const OptimizerConfig& config) {
  config.validate();
  if (dataset.empty()) throw InvalidArgument("train_parametric: empty dataset");

  TransitionDataset train;
  Eigen::VectorXd log_mult;
  if (dataset.is_tabular()) {
    CompressedDataset c = compress_tabular(dataset);
    log_mult = Eigen::Map<const Eigen::VectorXd>(c.multiplicity.data(),
                                                  static_cast<Eigen::Index>(c.multiplicity.size()))
                   .array()
                   .log();
    train = std::move(c.atoms);
  } else if (config.max_rows > 0 && dataset.size() > config.max_rows) {
    train = dataset.subset(subsample_indices(dataset.size(), config.max_rows, config.seed));
    log_mult = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(train.size()));
  } else {
    train = dataset;
    log_mult = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(train.size()));
  }

  const KernelMatrices matrices = assemble_matrices(train, target, kernel);
  const Eigen::MatrixXd x = inputs.dataset_features(train);
  if (static_cast<std::size_t>(x.cols()) != model.input_dim())
    throw InvalidArgument("train_parametric: feature dimension does not match the model");

  ParametricResult result;
  result.training_rows = train.size();
  Eigen::VectorXd theta = model.flatten();
  Adam adam(theta.size(), config.step_size);
  auto weights_of = [&](const Eigen::VectorXd& o) {
    Eigen::VectorXd logw = o + log_mult;
    return Eigen::VectorXd((logw.array() - logw.maxCoeff()).exp());
  };

  const PairSampler sampler(matrices);
  const bool single = train.size() == 1;
  Eigen::VectorXd best_theta = theta;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 0; epoch < config.iterations && !single; ++epoch) {
    double value = 0.0;
    const MlpPass pass = mlp_forward_backward(model, x, [&](const Eigen::VectorXd& o) {
      const Eigen::VectorXd w_tilde = weights_of(o);
      if (!w_tilde.allFinite()) throw TrainingDiverged(epoch);
      LossGradientEstimate est = sampler.gradient(w_tilde, config.batch_size, mix_seed(config.seed, epoch));
      if (est.value < std::log(1e-12)) {
        const double v = est.value;
        est = direct_loss_grad(w_tilde, matrices);
        est.value = v;
      }
      if (!std::isfinite(est.value) || !est.gradient.allFinite()) throw TrainingDiverged(epoch);
      value = est.value;
      return est.gradient;
    });
    result.loss_trace.push_back(value);
    if (value < best_value) {
      best_value = value;
      best_theta = theta;
    }
    if (config.cosine_decay)
      adam.lr = 0.5 * config.step_size *
                (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(config.iterations)));
    if (!pass.gradient.allFinite()) throw TrainingDiverged(epoch);
    adam.step(theta, pass.gradient);
    if (!theta.allFinite()) throw TrainingDiverged(epoch);
    model.assign(theta);
    result.iterations = epoch + 1;
  }

  if (!single) {
    const Eigen::VectorXd w_last = weights_of(model.forward(x));
    const double last_value = std::log(w_last.dot(matrices.k_sym * w_last)) - 2.0 * std::log(w_last.sum());
    if (!(last_value <= best_value)) model.assign(best_theta);
  }
  {
    const Eigen::VectorXd w_train = weights_of(model.forward(x));
    const Eigen::VectorXd w = w_train / w_train.sum();
    result.final_loss = clamp_nonnegative(w.dot(matrices.k * w), "train_parametric");
  }
  const Eigen::VectorXd o_all = model.forward(inputs.dataset_features(dataset));
  Eigen::VectorXd w_all = (o_all.array() - o_all.maxCoeff()).exp();
  result.weights = normalize(w_all);
  result.model = std::move(model);
  return result;
}

}  // namespace bbope
