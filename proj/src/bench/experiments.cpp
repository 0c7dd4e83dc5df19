#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

#include "bbope/bench.hpp"
#include "bbope/errors.hpp"
#include "bbope/mmd.hpp"
#include "bbope/oracle.hpp"

namespace bbope::bench {

std::vector<RunOutcome> run_jobs(std::size_t count, std::size_t workers,
                                 const std::function<RunOutcome(std::size_t)>& job) {
  if (workers == 0) throw InvalidArgument("run_jobs: workers must be positive");
  std::vector<RunOutcome> out(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        out[i] = job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min(workers, std::max<std::size_t>(count, 1));
  if (n <= 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

TransitionDataset behavior_data(const TabularMdp& mdp, const Policy& behavior, std::size_t count,
                                std::size_t horizon, std::size_t budget, std::uint64_t seed) {
  if (count == 0 || horizon == 0) throw InvalidArgument("behavior_data: empty request");
  std::vector<Trajectory> trajs;
  trajs.reserve(count);
  for (std::size_t k = 0; k < count && k * horizon < budget; ++k) {
    const std::size_t len = std::min(horizon, budget - k * horizon);
    trajs.push_back(sample_trajectory(mdp, behavior, len, seed, k * horizon));
  }
  return dataset_from_trajectories(trajs);
}

TransitionDataset behavior_data(const ContinuousEnv& env, const Policy& behavior, std::size_t count,
                                std::size_t horizon, std::uint64_t seed) {
  if (count == 0 || horizon == 0) throw InvalidArgument("behavior_data: empty request");
  std::vector<Trajectory> trajs;
  trajs.reserve(count);
  for (std::size_t k = 0; k < count; ++k) trajs.push_back(sample_trajectory(env, behavior, horizon, seed, k * horizon));
  return dataset_from_trajectories(trajs);
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.method != b.method) return a.method < b.method;
    return a.setting < b.setting;
  });
}

namespace {

// Aggregates outcomes laid out as settings.size() blocks of `runs` jobs.
std::vector<ResultRow> collect(const ExperimentConfig& config, const std::vector<double>& settings,
                               std::size_t runs, const std::vector<RunOutcome>& outcomes,
                               const std::vector<double>& truths) {
  std::vector<ResultRow> rows;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    std::map<std::string, std::vector<double>> by_method;
    for (std::size_t r = 0; r < runs; ++r) {
      const RunOutcome& o = outcomes[s * runs + r];
      for (std::size_t m = 0; m < o.methods.size(); ++m) by_method[o.methods[m]].push_back(o.estimates[m]);
    }
    for (const auto& [method, estimates] : by_method) {
      const AggregateReport a = aggregate(method, estimates, truths[s]);
      ResultRow row;
      row.experiment = config.id();
      row.method = method;
      row.setting = settings[s];
      row.rmse = a.rmse;
      row.bias = a.bias;
      row.std = a.std;
      row.median = a.median;
      row.q25 = a.q25;
      row.q75 = a.q75;
      row.runs = estimates.size();
      row.seed = config.base_seed;
      row.truth = truths[s];
      rows.push_back(std::move(row));
    }
  }
  sort_rows(rows);
  return rows;
}

RunOutcome tabular_methods(const TransitionDataset& ds, const Policy& behavior, const Policy& target,
                           const ExperimentConfig& config) {
  const Kernel k = delta_kernel();
  BlackboxConfig bb;
  bb.model = WeightModelKind::tabular;
  bb.optimizer = config.tabular;
  RunOutcome o;
  o.methods = {"blackbox", "ips", "model_based", "naive"};
  o.estimates = {blackbox_estimate(ds, target, k, bb).estimate, tabular_stationary_ips(ds, behavior, target).estimate,
                 model_based_estimate(ds, target, k, config.model_based).estimate, naive_average(ds).estimate};
  return o;
}

struct ControlSetup {
  ContinuousEnv env;
  Policy plus;
  Policy minus;
  Policy target;
  double truth = 0.0;
};

ControlSetup control_setup(const ExperimentConfig& config) {
  const ControlTask task = parse_control_task(config.env);
  ControlSetup s{infinite_horizon(classic_control(task)), scripted_near_optimal(task), Policy::uniform(1),
                 Policy::uniform(1)};
  s.minus = Policy::uniform(s.env.num_actions());
  s.target = mix_policies(s.plus, s.minus, config.control.alpha_target);
  s.truth = ground_truth_rollout(s.env, s.target, config.control.t_tar,
                                 derive_seed(config.base_seed, config.id() + "/truth", 0));
  return s;
}

// Kernel estimators on one continuous dataset. A percentile of 0 skips the method.
RunOutcome control_methods(const TransitionDataset& ds, const Policy& target, std::size_t num_actions,
                           int blackbox_pct, int model_based_pct, const ExperimentConfig& config,
                           std::uint64_t seed, bool with_naive) {
  const FeatureMap fm(StateEncoder::fit(ds), num_actions, config.kernel.action_scale);
  const std::size_t m = std::min(config.kernel.bandwidth_points, ds.size());
  std::vector<StateAction> pts;
  pts.reserve(m);
  for (std::size_t i : subsample_indices(ds.size(), m, mix_seed(seed, 1))) pts.push_back({ds[i].state, ds[i].action});
  auto kernel_at = [&](int pct) { return rbf_kernel(median_bandwidth(pts, parse_percentile(pct), fm), fm); };

  RunOutcome o;
  if (blackbox_pct != 0) {
    BlackboxConfig bb;
    bb.model = WeightModelKind::mlp;
    bb.optimizer = config.blackbox.optimizer;
    bb.optimizer.seed = seed;
    bb.inputs = fm;
    bb.hidden = config.blackbox.hidden;
    bb.restarts = config.blackbox.restarts;
    o.methods.push_back("blackbox");
    o.estimates.push_back(blackbox_estimate(ds, target, kernel_at(blackbox_pct), bb).estimate);
  }
  if (model_based_pct != 0) {
    ModelBasedConfig mc = config.model_based;
    mc.seed = seed;
    o.methods.push_back("model_based");
    o.estimates.push_back(model_based_estimate(ds, target, kernel_at(model_based_pct), mc).estimate);
  }
  if (with_naive) {
    o.methods.push_back("naive");
    o.estimates.push_back(naive_average(ds).estimate);
  }
  return o;
}

}  // namespace

TuningChoice tune_control(const ExperimentConfig& config, const ContinuousEnv& env, const Policy& plus,
                          double truth) {
  const auto& pcts = config.kernel.percentiles;
  if (pcts.size() == 1) return {pcts[0], pcts[0]};
  const Policy minus = Policy::uniform(env.num_actions());
  const Policy behavior = mix_policies(plus, minus, config.control.alpha_behavior);
  const Policy target = mix_policies(plus, minus, config.control.alpha_target);
  const std::size_t runs = config.control.tuning_runs;
  const std::string id = config.id() + "/tune";
  const auto outcomes = run_jobs(pcts.size() * runs, config.workers, [&](std::size_t j) {
    const std::size_t r = j % runs;
    const int pct = pcts[j / runs];
    const std::uint64_t seed = derive_seed(config.base_seed, id, r);
    const TransitionDataset ds =
        behavior_data(env, behavior, config.control.tuning_trajectories, config.control.t_beh, seed);
    return control_methods(ds, target, env.num_actions(), pct, pct, config, seed, false);
  });
  TuningChoice best;
  double best_bb = std::numeric_limits<double>::infinity();
  double best_mb = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < pcts.size(); ++p) {
    double bb = 0.0;
    double mb = 0.0;
    for (std::size_t r = 0; r < runs; ++r) {
      const RunOutcome& o = outcomes[p * runs + r];
      bb += (o.estimates[0] - truth) * (o.estimates[0] - truth);
      mb += (o.estimates[1] - truth) * (o.estimates[1] - truth);
    }
    if (bb < best_bb) {
      best_bb = bb;
      best.blackbox_percentile = pcts[p];
    }
    if (mb < best_mb) {
      best_mb = mb;
      best.model_based_percentile = pcts[p];
    }
  }
  return best;
}

std::vector<ResultRow> run_modelwin_horizon(const ExperimentConfig& config) {
  config.validate();
  const TabularMdp mdp = model_win(config.modelwin.p);
  const Policy behavior = model_win_policy(config.modelwin.behavior_first);
  const Policy target = model_win_policy(config.modelwin.target_first);
  const double truth = exact_average_reward(mdp, target);
  const auto& horizons = config.modelwin.horizons;
  const std::size_t budget = config.modelwin.budget;
  const auto outcomes = run_jobs(horizons.size() * config.runs, config.workers, [&](std::size_t j) {
    const std::size_t h = horizons[j / config.runs];
    const std::uint64_t seed = derive_seed(config.base_seed, config.id(), j % config.runs);
    const TransitionDataset ds = behavior_data(mdp, behavior, (budget + h - 1) / h, h, budget, seed);
    return tabular_methods(ds, behavior, target, config);
  });
  std::vector<double> settings(horizons.begin(), horizons.end());
  return collect(config, settings, config.runs, outcomes, std::vector<double>(settings.size(), truth));
}

std::vector<ResultRow> run_bias_variance(const ExperimentConfig& config) {
  config.validate();
  const TabularMdp mdp = model_win(config.modelwin.p);
  const Policy behavior = model_win_policy(config.modelwin.behavior_first);
  const Policy target = model_win_policy(config.modelwin.target_first);
  const double truth = exact_average_reward(mdp, target);
  const auto& counts = config.bias_variance.trajectory_counts;
  const std::size_t runs = config.bias_variance.runs;
  const std::size_t len = config.bias_variance.length;
  const auto outcomes = run_jobs(counts.size() * runs, config.workers, [&](std::size_t j) {
    const std::size_t count = counts[j / runs];
    const std::uint64_t seed = derive_seed(config.base_seed, config.id(), j % runs);
    const TransitionDataset ds = behavior_data(mdp, behavior, count, len, count * len, seed);
    return tabular_methods(ds, behavior, target, config);
  });
  std::vector<double> settings(counts.begin(), counts.end());
  return collect(config, settings, runs, outcomes, std::vector<double>(settings.size(), truth));
}

std::vector<ResultRow> run_control_rmse(const ExperimentConfig& config) {
  config.validate();
  const ControlSetup s = control_setup(config);
  const TuningChoice tuned = tune_control(config, s.env, s.plus, s.truth);
  const Policy behavior = mix_policies(s.plus, s.minus, config.control.alpha_behavior);
  const auto& counts = config.control.trajectory_counts;
  const auto outcomes = run_jobs(counts.size() * config.runs, config.workers, [&](std::size_t j) {
    const std::uint64_t seed = derive_seed(config.base_seed, config.id(), j % config.runs);
    const TransitionDataset ds = behavior_data(s.env, behavior, counts[j / config.runs], config.control.t_beh, seed);
    return control_methods(ds, s.target, s.env.num_actions(), tuned.blackbox_percentile,
                           tuned.model_based_percentile, config, seed, true);
  });
  std::vector<double> settings(counts.begin(), counts.end());
  return collect(config, settings, config.runs, outcomes, std::vector<double>(settings.size(), s.truth));
}

std::vector<ResultRow> run_sensitivity(const ExperimentConfig& config) {
  config.validate();
  const ControlSetup s = control_setup(config);
  ExperimentConfig tuning = config;
  tuning.control.tuning_trajectories = config.sensitivity.trajectories;
  const TuningChoice tuned = tune_control(tuning, s.env, s.plus, s.truth);
  const auto& alphas = config.sensitivity.alphas;
  std::vector<Policy> behaviors;
  for (double a : alphas) behaviors.push_back(mix_policies(s.plus, s.minus, a));
  const auto outcomes = run_jobs(alphas.size() * config.runs, config.workers, [&](std::size_t j) {
    const std::uint64_t seed = derive_seed(config.base_seed, config.id(), j % config.runs);
    const TransitionDataset ds =
        behavior_data(s.env, behaviors[j / config.runs], config.sensitivity.trajectories, config.control.t_beh, seed);
    return control_methods(ds, s.target, s.env.num_actions(), tuned.blackbox_percentile,
                           tuned.model_based_percentile, config, seed, true);
  });
  return collect(config, alphas, config.runs, outcomes, std::vector<double>(alphas.size(), s.truth));
}

std::vector<ResultRow> run_theorem1(const ExperimentConfig& config) {
  config.validate();
  const auto& t = config.theorem1;
  const auto outcomes = run_jobs(t.instances, config.workers, [&](std::size_t k) {
    const std::uint64_t seed = derive_seed(config.base_seed, config.id(), k);
    const TabularMdp mdp = random_tabular_mdp(t.states, t.actions, mix_seed(seed, 1));
    const Policy policy = random_tabular_policy(t.states, t.actions, mix_seed(seed, 2));
    CounterRng rng(seed, 0, StreamTag::generic);
    std::vector<double> d(t.states * t.actions);
    double total = 0.0;
    for (double& x : d) total += (x = -std::log(1.0 - rng.uniform()));
    for (double& x : d) x /= total;
    const Kernel kernel = rbf_kernel(t.bandwidth, FeatureMap(StateEncoder::one_hot(t.states), t.actions, 1.0));
    const Theorem1Check c = check_theorem1(mdp, policy, d, kernel);
    RunOutcome o;
    o.methods = {"operator_mmd", "parity_gap", "transformed_mmd"};
    o.estimates = {c.lhs, std::abs(c.lhs - c.rhs), c.rhs};
    return o;
  });
  std::vector<double> settings(t.instances);
  for (std::size_t k = 0; k < t.instances; ++k) settings[k] = static_cast<double>(k);
  return collect(config, settings, 1, outcomes, std::vector<double>(t.instances, 0.0));
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& config) {
  switch (config.experiment) {
    case ExperimentKind::modelwin_horizon: return run_modelwin_horizon(config);
    case ExperimentKind::control_rmse: return run_control_rmse(config);
    case ExperimentKind::sensitivity: return run_sensitivity(config);
    case ExperimentKind::bias_variance: return run_bias_variance(config);
    case ExperimentKind::theorem1_check: return run_theorem1(config);
  }
  throw InvalidArgument("run_experiment: unknown experiment");
}

}  // namespace bbope::bench
