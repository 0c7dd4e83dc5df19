#include "bbope/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bbope/errors.hpp"
#include "bbope/rng.hpp"

namespace bbope {

namespace {

void require_simplex(std::span<const double> w, std::size_t n, const char* what) {
  if (w.size() != n) throw InvalidArgument(std::string(what) + ": weight vector has wrong length");
  double total = 0.0;
  for (double x : w) {
    if (!(x >= -1e-8) || !std::isfinite(x))
      throw InvalidArgument(std::string(what) + ": weights must be nonnegative");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-8)
    throw InvalidArgument(std::string(what) + ": weights do not sum to 1");
}

void require_positive(const Eigen::VectorXd& w_tilde, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(w_tilde.size()) != n)
    throw InvalidArgument(std::string(what) + ": weight vector has wrong length");
  for (double x : w_tilde)
    if (!(x > 0.0) || !std::isfinite(x))
      throw InvalidArgument(std::string(what) + ": weights must be positive and finite");
}

std::size_t upper_index(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return it == cdf.end() ? cdf.size() - 1 : static_cast<std::size_t>(it - cdf.begin());
}

}  // namespace

void DiscreteMeasure::add(State state, std::size_t action, double m) {
  support.push_back({std::move(state), action});
  mass.push_back(m);
}

double DiscreteMeasure::total_mass() const noexcept {
  double total = 0.0;
  for (double m : mass) total += m;
  return total;
}

void DiscreteMeasure::require_distribution(double tol) const {
  if (support.size() != mass.size()) throw InvalidArgument("DiscreteMeasure: size mismatch");
  for (double m : mass)
    if (!(m >= 0.0)) throw InvalidArgument("DiscreteMeasure: negative mass");
  if (std::abs(total_mass() - 1.0) > tol)
    throw InvalidArgument("DiscreteMeasure: masses do not sum to 1");
}

DiscreteMeasure tabular_measure(std::span<const double> d, std::size_t num_actions) {
  if (num_actions == 0 || d.size() % num_actions != 0)
    throw InvalidArgument("tabular_measure: length is not a multiple of the action count");
  DiscreteMeasure out;
  for (std::size_t x = 0; x < d.size(); ++x) out.add(State{x / num_actions}, x % num_actions, d[x]);
  return out;
}

DiscreteMeasure difference(const DiscreteMeasure& f, const DiscreteMeasure& g) {
  DiscreteMeasure out = f;
  for (std::size_t k = 0; k < g.size(); ++k) out.add(g.support[k].state, g.support[k].action, -g.mass[k]);
  return out;
}

double bilinear(const DiscreteMeasure& f, const DiscreteMeasure& g, const Kernel& kernel) {
  if (f.support.size() != f.mass.size() || g.support.size() != g.mass.size())
    throw InvalidArgument("bilinear: support and mass sizes differ");
  std::vector<std::vector<double>> ef;
  std::vector<std::vector<double>> eg;
  ef.reserve(f.size());
  eg.reserve(g.size());
  for (const auto& x : f.support) ef.push_back(kernel.embed(x.state, x.action));
  for (const auto& y : g.support) eg.push_back(kernel.embed(y.state, y.action));
  double total = 0.0;
  for (std::size_t i = 0; i < ef.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < eg.size(); ++j) row += kernel.evaluate_embedded(ef[i], eg[j]) * g.mass[j];
    total += f.mass[i] * row;
  }
  return total;
}

double clamp_nonnegative(double value, const char* what) {
  if (value >= 0.0) return value;
  if (value > -1e-10) return 0.0;
  throw Error(std::string(what) + ": negative squared discrepancy " + std::to_string(value));
}

double mmd_squared(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2, const Kernel& kernel) {
  const DiscreteMeasure diff = difference(mu1, mu2);
  return clamp_nonnegative(bilinear(diff, diff, kernel), "mmd_squared");
}

DiscreteMeasure weighted_empirical(const TransitionDataset& dataset, std::span<const double> w) {
  require_simplex(w, dataset.size(), "weighted_empirical");
  DiscreteMeasure out;
  for (std::size_t i = 0; i < dataset.size(); ++i) out.add(dataset[i].state, dataset[i].action, w[i]);
  return out;
}

DiscreteMeasure empirical_backward(const TransitionDataset& dataset, std::span<const double> w,
                                   const Policy& target) {
  require_simplex(w, dataset.size(), "empirical_backward");
  DiscreteMeasure out;
  std::vector<double> probs(target.num_actions());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    target.probabilities(dataset[i].next_state, probs);
    for (std::size_t a = 0; a < probs.size(); ++a)
      if (probs[a] > 0.0) out.add(dataset[i].next_state, a, w[i] * probs[a]);
  }
  return out;
}

double loss(const Eigen::VectorXd& w, const KernelMatrices& matrices) {
  require_simplex(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())),
                  matrices.size(), "loss");
  return clamp_nonnegative(w.dot(matrices.k * w), "loss");
}

LossGradientEstimate log_loss_full(const Eigen::VectorXd& w_tilde, const KernelMatrices& matrices) {
  require_positive(w_tilde, matrices.size(), "log_loss_full");
  const Eigen::VectorXd kw = matrices.k_sym * w_tilde;
  const double s = w_tilde.dot(kw);
  if (!(s > 0.0)) throw Error("log_loss_full: quadratic form is not positive");
  const double total = w_tilde.sum();
  LossGradientEstimate out;
  out.value = std::log(s) - 2.0 * std::log(total);
  out.gradient = 2.0 * w_tilde.cwiseProduct(kw) / s - 2.0 * w_tilde / total;
  out.batch_spec = "full";
  return out;
}

LossGradientEstimate direct_loss_grad(const Eigen::VectorXd& w_tilde, const KernelMatrices& matrices) {
  require_positive(w_tilde, matrices.size(), "direct_loss_grad");
  const Eigen::VectorXd kw = matrices.k_sym * w_tilde;
  const double total = w_tilde.sum();
  const double l = w_tilde.dot(kw) / (total * total);
  LossGradientEstimate out;
  out.value = l;
  out.gradient = 2.0 * w_tilde.cwiseProduct(kw) / (total * total) - 2.0 * l * w_tilde / total;
  out.batch_spec = "direct";
  return out;
}

PairSampler::PairSampler(const KernelMatrices& matrices) : matrices_(&matrices), k_(matrices.k) {}

LossGradientEstimate PairSampler::gradient(const Eigen::VectorXd& w_tilde, std::size_t batch_size,
                                           std::uint64_t seed) const {
  if (batch_size == 0) throw InvalidArgument("log_loss_minibatch_grad: batch_size must be positive");
  const std::size_t n = matrices_->size();
  require_positive(w_tilde, n, "log_loss_minibatch_grad");
  if (n <= std::numeric_limits<std::uint32_t>::max() && batch_size >= n * n) {
    LossGradientEstimate full = log_loss_full(w_tilde, *matrices_);
    full.batch_spec = "exhaustive";
    return full;
  }

  // Row masses r_i = w~_i sum_j |K_ij| w~_j, and the signed total S.
  const double* w = w_tilde.data();
  std::vector<double> row_cdf(n);
  std::vector<double> single_cdf(n);
  double s = 0.0;
  double a_total = 0.0;
  double w_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = k_.data() + i * n;
    double abs_acc = 0.0;
    double signed_acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      abs_acc += std::abs(row[j]) * w[j];
      signed_acc += row[j] * w[j];
    }
    s += w[i] * signed_acc;
    a_total += w[i] * abs_acc;
    row_cdf[i] = a_total;
    w_total += w[i];
    single_cdf[i] = w_total;
  }
  if (!(s > 0.0)) throw Error("log_loss_minibatch_grad: quadratic form is not positive");

  CounterRng rng(seed, 0, StreamTag::minibatch);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  const double pair_scale = a_total / s / static_cast<double>(batch_size);
  std::vector<double> col_cdf(n);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const std::size_t i = upper_index(row_cdf, rng.uniform() * a_total);
    const double* row = k_.data() + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += std::abs(row[j]) * w[j];
      col_cdf[j] = acc;
    }
    const std::size_t j = upper_index(col_cdf, rng.uniform() * acc);
    const double term = row[j] >= 0.0 ? pair_scale : -pair_scale;
    c[static_cast<Eigen::Index>(i)] += term;
    c[static_cast<Eigen::Index>(j)] += term;
  }
  const double single_scale = 2.0 / static_cast<double>(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const std::size_t i = upper_index(single_cdf, rng.uniform() * w_total);
    c[static_cast<Eigen::Index>(i)] -= single_scale;
  }
  c.array() -= c.mean();

  LossGradientEstimate out;
  out.value = std::log(s) - 2.0 * std::log(w_total);
  out.gradient = std::move(c);
  out.batch_spec = "pairs=" + std::to_string(batch_size) + ",singletons=" + std::to_string(batch_size);
  return out;
}

LossGradientEstimate log_loss_minibatch_grad(const Eigen::VectorXd& w_tilde,
                                             const KernelMatrices& matrices, std::size_t batch_size,
                                             std::uint64_t seed) {
  return PairSampler(matrices).gradient(w_tilde, batch_size, seed);
}

}  // namespace bbope
