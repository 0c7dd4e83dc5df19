#include "bbope/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bbope/errors.hpp"

namespace bbope {

StateEncoder StateEncoder::raw() { return StateEncoder{}; }

StateEncoder StateEncoder::one_hot(std::size_t num_states) {
  if (num_states == 0) throw InvalidArgument("StateEncoder::one_hot: no states");
  StateEncoder e;
  e.kind_ = Kind::one_hot;
  e.dim_ = num_states;
  return e;
}

StateEncoder StateEncoder::standardized(std::vector<double> mean, std::vector<double> scale) {
  if (mean.size() != scale.size() || mean.empty())
    throw InvalidArgument("StateEncoder::standardized: mean and scale sizes differ");
  for (double s : scale)
    if (!(s > 0.0) || !std::isfinite(s))
      throw InvalidArgument("StateEncoder::standardized: scale must be positive");
  StateEncoder e;
  e.kind_ = Kind::standardized;
  e.dim_ = mean.size();
  e.mean_ = std::move(mean);
  e.scale_ = std::move(scale);
  return e;
}

StateEncoder StateEncoder::fit(const TransitionDataset& dataset) {
  if (dataset.empty()) throw InvalidArgument("StateEncoder::fit: empty dataset");
  if (dataset.is_tabular()) throw InvalidArgument("StateEncoder::fit: tabular dataset");
  const std::size_t d = dataset.state_dim();
  std::vector<double> mean(d, 0.0);
  std::vector<double> sq(d, 0.0);
  double count = 0.0;
  auto add = [&](const State& s) {
    const auto& v = state_vector(s);
    for (std::size_t k = 0; k < d; ++k) mean[k] += v[k];
    count += 1.0;
  };
  for (const auto& t : dataset) {
    add(t.state);
    add(t.next_state);
  }
  for (auto& m : mean) m /= count;
  auto add_sq = [&](const State& s) {
    const auto& v = state_vector(s);
    for (std::size_t k = 0; k < d; ++k) sq[k] += (v[k] - mean[k]) * (v[k] - mean[k]);
  };
  for (const auto& t : dataset) {
    add_sq(t.state);
    add_sq(t.next_state);
  }
  std::vector<double> scale(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double sd = std::sqrt(sq[k] / count);
    scale[k] = sd > 1e-12 ? sd : 1.0;
  }
  return standardized(std::move(mean), std::move(scale));
}

void StateEncoder::encode(const State& state, std::vector<double>& out) const {
  switch (kind_) {
    case Kind::raw: {
      const auto& v = state_vector(state);
      out.insert(out.end(), v.begin(), v.end());
      return;
    }
    case Kind::one_hot: {
      const std::size_t s = state_id(state);
      if (s >= dim_) throw InvalidArgument("StateEncoder: state id out of range");
      const std::size_t base = out.size();
      out.resize(base + dim_, 0.0);
      out[base + s] = 1.0;
      return;
    }
    case Kind::standardized: {
      const auto& v = state_vector(state);
      if (v.size() != dim_) throw InvalidArgument("StateEncoder: state dimension mismatch");
      for (std::size_t k = 0; k < dim_; ++k) out.push_back((v[k] - mean_[k]) / scale_[k]);
      return;
    }
  }
}

std::string StateEncoder::describe() const {
  switch (kind_) {
    case Kind::raw: return "raw";
    case Kind::one_hot: return "one_hot(" + std::to_string(dim_) + ")";
    case Kind::standardized: return "standardized(" + std::to_string(dim_) + ")";
  }
  return "unknown";
}

FeatureMap::FeatureMap(StateEncoder encoder, std::size_t num_actions, double action_scale)
    : encoder_(std::move(encoder)), num_actions_(num_actions), action_scale_(action_scale) {
  if (num_actions == 0) throw InvalidArgument("FeatureMap: empty action set");
  if (!(action_scale > 0.0)) throw InvalidArgument("FeatureMap: action_scale must be positive");
}

std::vector<double> FeatureMap::operator()(const State& state, std::size_t action) const {
  if (action >= num_actions_) throw InvalidArgument("FeatureMap: action out of range");
  std::vector<double> out;
  out.reserve(encoder_.dim() + num_actions_);
  encoder_.encode(state, out);
  const std::size_t base = out.size();
  out.resize(base + num_actions_, 0.0);
  out[base + action] = action_scale_;
  return out;
}

Eigen::MatrixXd FeatureMap::dataset_features(const TransitionDataset& dataset) const {
  if (dataset.empty()) return {};
  const auto first = (*this)(dataset[0].state, dataset[0].action);
  Eigen::MatrixXd x(dataset.size(), first.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto f = (*this)(dataset[i].state, dataset[i].action);
    for (std::size_t k = 0; k < f.size(); ++k) x(i, k) = f[k];
  }
  return x;
}

std::vector<double> Kernel::embed(const State& state, std::size_t action) const {
  switch (family_) {
    case Family::rbf: return (*features_)(state, action);
    case Family::delta:
      if (!is_tabular(state)) throw InvalidArgument("delta kernel: continuous state");
      return {static_cast<double>(state_id(state)), static_cast<double>(action)};
    case Family::table: {
      if (!is_tabular(state)) throw InvalidArgument("table kernel: continuous state");
      const std::size_t index = state_id(state) * table_actions_ + action;
      if (action >= table_actions_ || index >= static_cast<std::size_t>(table_.rows()))
        throw InvalidArgument("table kernel: state-action out of range");
      return {static_cast<double>(index)};
    }
  }
  return {};
}

double Kernel::evaluate_embedded(std::span<const double> x, std::span<const double> y) const {
  switch (family_) {
    case Family::rbf: {
      double d2 = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) {
        const double diff = x[k] - y[k];
        d2 += diff * diff;
      }
      return std::exp(-d2 * inv_two_h2_);
    }
    case Family::delta: return x[0] == y[0] && x[1] == y[1] ? 1.0 : 0.0;
    case Family::table:
      return table_(static_cast<Eigen::Index>(x[0]), static_cast<Eigen::Index>(y[0]));
  }
  return 0.0;
}

double Kernel::operator()(const StateAction& x, const StateAction& y) const {
  return evaluate_embedded(embed(x.state, x.action), embed(y.state, y.action));
}

Kernel rbf_kernel(double bandwidth, FeatureMap features) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw InvalidArgument("rbf_kernel: bandwidth must be positive");
  std::ostringstream os;
  os.precision(12);
  os << "rbf(bandwidth=" << bandwidth << ", action_scale=" << features.action_scale()
     << ", states=" << features.encoder().describe() << ")";
  Kernel k(Kernel::Family::rbf, os.str());
  k.inv_two_h2_ = 1.0 / (2.0 * bandwidth * bandwidth);
  k.features_ = std::move(features);
  return k;
}

Kernel rbf_kernel(double bandwidth, std::size_t num_actions, double action_scale) {
  return rbf_kernel(bandwidth, FeatureMap(StateEncoder::raw(), num_actions, action_scale));
}

Kernel delta_kernel() { return Kernel(Kernel::Family::delta, "delta"); }

Kernel table_kernel(Eigen::MatrixXd gram, std::size_t num_actions, std::string descriptor) {
  if (gram.rows() != gram.cols() || gram.rows() == 0)
    throw InvalidArgument("table_kernel: Gram matrix must be square and nonempty");
  if (num_actions == 0 || static_cast<std::size_t>(gram.rows()) % num_actions != 0)
    throw InvalidArgument("table_kernel: size is not a multiple of the action count");
  Kernel k(Kernel::Family::table, std::move(descriptor));
  k.table_ = std::move(gram);
  k.table_actions_ = num_actions;
  return k;
}

Percentile parse_percentile(int value) {
  switch (value) {
    case 25: return Percentile::p25;
    case 50: return Percentile::p50;
    case 75: return Percentile::p75;
    default: throw InvalidArgument("percentile must be 25, 50 or 75");
  }
}

double nearest_rank(std::vector<double> values, double percent) {
  if (values.empty()) throw InvalidArgument("nearest_rank: no values");
  if (!(percent >= 0.0 && percent <= 100.0))
    throw InvalidArgument("nearest_rank: percent outside [0, 100]");
  std::sort(values.begin(), values.end());
  const double m = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(percent * m / 100.0 - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

double median_bandwidth(std::span<const StateAction> points, Percentile percentile,
                        const FeatureMap& features) {
  if (points.size() < 2) throw InvalidArgument("median_bandwidth: need at least two points");
  std::vector<std::vector<double>> phi;
  phi.reserve(points.size());
  for (const auto& p : points) phi.push_back(features(p.state, p.action));
  std::vector<double> distances;
  distances.reserve(points.size() * (points.size() - 1) / 2);
  bool any_nonzero = false;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    for (std::size_t j = i + 1; j < phi.size(); ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < phi[i].size(); ++k) {
        const double diff = phi[i][k] - phi[j][k];
        d2 += diff * diff;
      }
      const double d = std::sqrt(d2);
      any_nonzero = any_nonzero || d > 0.0;
      distances.push_back(d);
    }
  }
  if (!any_nonzero) throw InvalidArgument("median_bandwidth: all pairwise distances are zero");
  const double h = nearest_rank(std::move(distances), static_cast<double>(percentile));
  if (!(h > 0.0))
    throw InvalidArgument("median_bandwidth: requested percentile of the distances is zero");
  return h;
}

namespace {

struct Successor {
  double prob;
  std::vector<double> embedding;
};

}  // namespace

KernelMatrices assemble_matrices(const TransitionDataset& dataset, const Policy& target,
                                 const Kernel& kernel) {
  const std::size_t n = dataset.size();
  if (n == 0) throw InvalidArgument("assemble_matrices: empty dataset");
  const std::size_t A = target.num_actions();
  std::vector<std::vector<double>> x(n);
  std::vector<std::vector<Successor>> succ(n);
  std::vector<double> probs(A);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = dataset[i];
    if (t.action >= A) throw InvalidArgument("assemble_matrices: action outside the policy's set");
    x[i] = kernel.embed(t.state, t.action);
    target.probabilities(t.next_state, probs);
    for (std::size_t a = 0; a < A; ++a)
      if (probs[a] > 0.0) succ[i].push_back({probs[a], kernel.embed(t.next_state, a)});
  }

  KernelMatrices m;
  m.k0.resize(n, n);
  m.k1.resize(n, n);
  m.k2.resize(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v0 = kernel.evaluate_embedded(x[i], x[j]);
      m.k0(i, j) = v0;
      m.k0(j, i) = v0;
      double v2 = 0.0;
      for (const auto& p : succ[i])
        for (const auto& q : succ[j]) v2 += p.prob * q.prob * kernel.evaluate_embedded(p.embedding, q.embedding);
      m.k2(i, j) = v2;
      m.k2(j, i) = v2;
    }
    for (std::size_t j = 0; j < n; ++j) {
      double v1 = 0.0;
      for (const auto& q : succ[j]) v1 += q.prob * kernel.evaluate_embedded(x[i], q.embedding);
      m.k1(i, j) = v1;
    }
  }
  m.k = m.k0 - 2.0 * m.k1 + m.k2;
  m.k_sym = 0.5 * (m.k + m.k.transpose());
  return m;
}

TransformedKernel::TransformedKernel(Kernel base, const TabularMdp& mdp, const Policy& policy)
    : base_(std::move(base)), num_actions_(mdp.num_actions()) {
  const std::size_t S = mdp.num_states();
  const std::size_t A = mdp.num_actions();
  if (policy.num_actions() != A)
    throw InvalidArgument("transformed_kernel: policy and MDP action sets differ");
  const std::size_t N = S * A;
  std::vector<std::vector<double>> pi(S);
  for (std::size_t s = 0; s < S; ++s) pi[s] = policy.probabilities(State{s});

  Eigen::MatrixXd g(N, N);
  for (std::size_t x = 0; x < N; ++x)
    for (std::size_t y = 0; y < N; ++y)
      g(x, y) = base_(StateAction{State{x / A}, x % A}, StateAction{State{y / A}, y % A});

  // q[x] lists (x', prob) with prob = P(s'|s,a) pi(a'|s').
  std::vector<std::vector<std::pair<std::size_t, double>>> q(N);
  for (std::size_t x = 0; x < N; ++x) {
    const auto next = mdp.next_state_distribution(x / A, x % A);
    for (std::size_t s2 = 0; s2 < S; ++s2)
      for (std::size_t a2 = 0; a2 < A; ++a2)
        if (next[s2] * pi[s2][a2] > 0.0) q[x].emplace_back(s2 * A + a2, next[s2] * pi[s2][a2]);
  }

  table_.resize(N, N);
  for (std::size_t x = 0; x < N; ++x) {
    for (std::size_t y = x; y < N; ++y) {
      double value = g(x, y);
      for (const auto& [y2, qy] : q[y]) value -= qy * g(x, y2);
      for (const auto& [x2, qx] : q[x]) value -= qx * g(x2, y);
      for (const auto& [x2, qx] : q[x])
        for (const auto& [y2, qy] : q[y]) value += qx * qy * g(x2, y2);
      table_(x, y) = value;
      table_(y, x) = value;
    }
  }
}

double TransformedKernel::operator()(const StateAction& x, const StateAction& y) const {
  const std::size_t i = state_id(x.state) * num_actions_ + x.action;
  const std::size_t j = state_id(y.state) * num_actions_ + y.action;
  if (x.action >= num_actions_ || y.action >= num_actions_ ||
      i >= static_cast<std::size_t>(table_.rows()) || j >= static_cast<std::size_t>(table_.rows()))
    throw InvalidArgument("transformed kernel: state-action out of range");
  return table_(i, j);
}

Kernel TransformedKernel::as_kernel() const {
  return table_kernel(table_, num_actions_, "transformed(" + base_.descriptor() + ")");
}

TransformedKernel transformed_kernel(const Kernel& base, const TabularMdp& mdp,
                                     const Policy& policy) {
  return TransformedKernel(base, mdp, policy);
}

}  // namespace bbope
