#include "bbope/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/SVD>

#include "bbope/errors.hpp"
#include "bbope/mmd.hpp"

namespace bbope {

OptimizerConfig default_tabular_optimizer() {
  OptimizerConfig c;
  c.method = OptimizerMethod::exp_gradient;
  c.step_size = 1.0;
  c.iterations = 100000;
  c.tolerance = 1e-10;
  return c;
}

EstimateReport blackbox_estimate(const TransitionDataset& dataset, const Policy& target,
                                 const Kernel& kernel, const BlackboxConfig& config) {
  if (dataset.empty()) throw InvalidArgument("blackbox_estimate: empty dataset");
  EstimateReport report;
  report.method = "blackbox";
  report.n = dataset.size();
  report.seed = config.optimizer.seed;
  if (config.model == WeightModelKind::tabular) {
    if (!dataset.is_tabular()) throw InvalidArgument("blackbox_estimate: tabular weights need tabular data");
    const CompressedDataset c = compress_tabular(dataset);
    const KernelMatrices m = assemble_matrices(c.atoms, target, kernel);
    const TabularSolution sol = solve_tabular(m, c.atoms, config.optimizer, c.multiplicity);
    report.estimate = sol.weights.dot(c.atoms.rewards());
    report.final_loss = sol.loss;
    report.iterations = sol.iterations;
  } else {
    if (!config.inputs) throw InvalidArgument("blackbox_estimate: MLP weights need an input feature map");
    if (config.restarts == 0) throw InvalidArgument("blackbox_estimate: restarts must be at least 1");
    const TransitionDataset probe = dataset.subset(std::vector<std::size_t>{0});
    const auto dim = static_cast<std::size_t>(config.inputs->dataset_features(probe).cols());
    for (std::size_t r = 0; r < config.restarts; ++r) {
      const std::uint64_t init_seed = r == 0 ? config.optimizer.seed : mix_seed(config.optimizer.seed, r);
      MlpWeightModel model = MlpWeightModel::initialized(dim, init_seed, config.hidden);
      const ParametricResult res =
          train_parametric(dataset, kernel, target, *config.inputs, std::move(model), config.optimizer);
      if (r == 0 || res.final_loss < report.final_loss) {
        report.estimate = res.weights.dot(dataset.rewards());
        report.final_loss = res.final_loss;
      }
      report.iterations += res.iterations;
    }
  }
  return report;
}

EstimateReport naive_average(const TransitionDataset& dataset) {
  if (dataset.empty()) throw InvalidArgument("naive_average: empty dataset");
  double total = 0.0;
  for (const auto& t : dataset) total += t.reward;
  EstimateReport report;
  report.method = "naive";
  report.estimate = total / static_cast<double>(dataset.size());
  report.n = dataset.size();
  return report;
}

EstimateReport model_based_estimate(const TransitionDataset& dataset, const Policy& target,
                                    const Kernel& kernel, const ModelBasedConfig& config) {
  if (dataset.size() < 2) throw InvalidArgument("model_based_estimate: need at least two transitions");
  if (!(config.ridge >= 0.0)) throw InvalidArgument("model_based_estimate: ridge must be nonnegative");

  // Sample points with multiplicities: tabular rows merged, continuous rows
  // optionally subsampled.
  TransitionDataset points;
  std::vector<double> mult;
  if (dataset.is_tabular()) {
    CompressedDataset c = compress_tabular(dataset);
    points = std::move(c.atoms);
    mult = std::move(c.multiplicity);
  } else if (config.max_rows > 0 && dataset.size() > config.max_rows) {
    points = dataset.subset(subsample_indices(dataset.size(), config.max_rows, config.seed));
    mult.assign(points.size(), 1.0);
  } else {
    points = dataset;
    mult.assign(points.size(), 1.0);
  }
  const std::size_t m = points.size();
  const auto M = static_cast<Eigen::Index>(m);

  std::vector<std::vector<double>> emb(m);
  for (std::size_t j = 0; j < m; ++j) emb[j] = kernel.embed(points[j].state, points[j].action);
  double total_mult = 0.0;
  for (double v : mult) total_mult += v;

  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(M, M);
  std::vector<double> probs(target.num_actions());
  Eigen::VectorXd kv(M);
  for (std::size_t i = 0; i < m; ++i) {
    const auto I = static_cast<Eigen::Index>(i);
    target.probabilities(points[i].next_state, probs);
    double kept = 0.0;
    for (std::size_t a = 0; a < probs.size(); ++a) {
      if (probs[a] <= 0.0) continue;
      const std::vector<double> f = kernel.embed(points[i].next_state, a);
      double z = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        kv[static_cast<Eigen::Index>(j)] = kernel.evaluate_embedded(f, emb[j]) * mult[j];
        z += kv[static_cast<Eigen::Index>(j)];
      }
      if (!(z > 0.0)) continue;
      t.row(I) += (probs[a] / z) * kv.transpose();
      kept += probs[a];
    }
    if (kept > 0.0) {
      t.row(I) /= kept;
    } else {
      for (std::size_t j = 0; j < m; ++j) t(I, static_cast<Eigen::Index>(j)) = mult[j] / total_mult;
    }
    t(I, I) += config.ridge;
    t.row(I) /= 1.0 + config.ridge;
  }

  const Eigen::MatrixXd tt = t.transpose();
  Eigen::VectorXd d(M);
  for (std::size_t j = 0; j < m; ++j) d[static_cast<Eigen::Index>(j)] = mult[j] / total_mult;
  double residual = 0.0;
  std::size_t it = 0;
  for (;; ++it) {
    const Eigen::VectorXd next = tt * d;
    residual = (next - d).cwiseAbs().maxCoeff();
    if (residual <= config.tolerance) break;
    if (it >= config.max_iterations)
      throw ConvergenceError("model_based_estimate: power iteration did not converge", it, residual);
    d = 0.5 * (d + next);
    d /= d.sum();
  }

  EstimateReport report;
  report.method = "model_based";
  report.n = dataset.size();
  report.iterations = it;
  report.seed = config.seed;
  const std::vector<double> r = points.rewards();
  for (std::size_t j = 0; j < m; ++j) report.estimate += d[static_cast<Eigen::Index>(j)] * r[j];
  return report;
}

EstimateReport tabular_stationary_ips(const TransitionDataset& dataset, const Policy& behavior,
                                      const Policy& target) {
  if (dataset.empty()) throw InvalidArgument("tabular_stationary_ips: empty dataset");
  if (!dataset.is_tabular()) throw InvalidArgument("tabular_stationary_ips: dataset is not tabular");
  if (behavior.num_actions() != target.num_actions())
    throw InvalidArgument("tabular_stationary_ips: policy action sets differ");
  const std::size_t n = dataset.size();

  std::vector<bool> last(n, false);
  if (dataset.has_boundaries()) {
    for (std::size_t b : dataset.boundaries())
      if (b > 0) last[b - 1] = true;
    last[n - 1] = true;
  }
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < n; ++i)
    if (!last[i]) used.push_back(i);
  if (used.empty()) throw InvalidArgument("tabular_stationary_ips: no consecutive transitions");

  std::map<std::size_t, Eigen::Index> column;
  auto col = [&](std::size_t s) {
    return column.try_emplace(s, static_cast<Eigen::Index>(column.size())).first->second;
  };
  std::vector<double> beta(n, 0.0);
  for (std::size_t i : used) {
    const auto& t = dataset[i];
    const double pb = behavior.probability(t.state, t.action);
    if (!(pb > 0.0))
      throw InvalidArgument("tabular_stationary_ips: behavior probability is zero at " + describe(t.state));
    beta[i] = target.probability(t.state, t.action) / pb;
    col(state_id(t.state));
    col(state_id(t.next_state));
  }
  const auto S = static_cast<Eigen::Index>(column.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(S, S);
  for (std::size_t i : used) {
    const Eigen::Index from = column.at(state_id(dataset[i].state));
    const Eigen::Index to = column.at(state_id(dataset[i].next_state));
    a(to, to) += 1.0;
    a(to, from) -= beta[i];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  Eigen::VectorXd x = svd.matrixV().col(S - 1);
  double scale = 0.0;
  for (std::size_t i : used) scale += x[column.at(state_id(dataset[i].state))];
  if (scale == 0.0) throw Error("tabular_stationary_ips: degenerate ratio estimate");
  x *= static_cast<double>(used.size()) / scale;

  double num = 0.0;
  double den = 0.0;
  for (std::size_t i : used) {
    const double wi = x[column.at(state_id(dataset[i].state))] * beta[i];
    num += wi * dataset[i].reward;
    den += wi;
  }
  if (!(std::abs(den) > 0.0)) throw Error("tabular_stationary_ips: weights sum to zero");
  EstimateReport report;
  report.method = "ips";
  report.estimate = num / den;
  report.n = n;
  return report;
}

double ground_truth_rollout(const TabularMdp& mdp, const Policy& policy, std::size_t length,
                            std::uint64_t seed) {
  const Trajectory t = sample_trajectory(mdp, policy, length, seed);
  double total = 0.0;
  for (const auto& s : t.steps) total += s.reward;
  return total / static_cast<double>(t.steps.size());
}

double ground_truth_rollout(const ContinuousEnv& env, const Policy& policy, std::size_t length,
                            std::uint64_t seed) {
  if (length == 0) throw InvalidArgument("ground_truth_rollout: length must be positive");
  double total = 0.0;
  std::size_t done = 0;
  while (done < length) {
    const Trajectory t = sample_trajectory(env, policy, length - done, seed, done);
    for (const auto& s : t.steps) total += s.reward;
    done += t.steps.size();
  }
  return total / static_cast<double>(length);
}

AggregateReport aggregate(std::string method, std::span<const double> estimates, double truth) {
  if (estimates.empty()) throw InvalidArgument("aggregate: no runs");
  AggregateReport r;
  r.method = std::move(method);
  r.truth = truth;
  r.runs.assign(estimates.begin(), estimates.end());
  const double k = static_cast<double>(estimates.size());
  double mean = 0.0;
  double sq = 0.0;
  for (double e : estimates) {
    mean += e;
    sq += (e - truth) * (e - truth);
  }
  mean /= k;
  double var = 0.0;
  for (double e : estimates) var += (e - mean) * (e - mean);
  var /= k;
  r.rmse = std::sqrt(sq / k);
  r.bias = mean - truth;
  r.std = std::sqrt(var);
  r.median = nearest_rank(r.runs, 50.0);
  r.q25 = nearest_rank(r.runs, 25.0);
  r.q75 = nearest_rank(r.runs, 75.0);
  return r;
}

AggregateReport aggregate(std::string method, std::span<const EstimateReport> runs, double truth) {
  std::vector<double> estimates;
  estimates.reserve(runs.size());
  for (const auto& r : runs) estimates.push_back(r.estimate);
  return aggregate(std::move(method), std::span<const double>(estimates), truth);
}

}  // namespace bbope
