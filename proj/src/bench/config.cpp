#include <fstream>
#include <limits>
#include <set>

#include "bbope/bench.hpp"
#include "bbope/errors.hpp"

namespace bbope::bench {

using nlohmann::json;

namespace {

constexpr std::size_t kFullBatch = std::numeric_limits<std::size_t>::max();

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw InvalidArgument("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw InvalidArgument("config: unknown key '" + where + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument("config: bad value for '" + where + key + "': " + e.what());
  }
}

void read_batch(const json& obj, std::size_t& out, const std::string& where) {
  if (!obj.contains("batch_size")) return;
  const json& v = obj.at("batch_size");
  if (v.is_string() && v.get<std::string>() == "full") {
    out = kFullBatch;
  } else if (v.is_number_integer() && v.get<long long>() > 0) {
    out = v.get<std::size_t>();
  } else {
    throw InvalidArgument("config: '" + where + "batch_size' must be a positive integer or \"full\"");
  }
}

json batch_json(std::size_t b) { return b == kFullBatch ? json("full") : json(b); }

}  // namespace

ExperimentKind parse_experiment(std::string_view name) {
  if (name == "modelwin_horizon" || name == "modelwin") return ExperimentKind::modelwin_horizon;
  if (name == "control_rmse" || name == "control") return ExperimentKind::control_rmse;
  if (name == "sensitivity") return ExperimentKind::sensitivity;
  if (name == "bias_variance" || name == "bias-variance") return ExperimentKind::bias_variance;
  if (name == "theorem1_check" || name == "theorem1") return ExperimentKind::theorem1_check;
  throw InvalidArgument("unknown experiment '" + std::string(name) + "'");
}

std::string_view to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::modelwin_horizon: return "modelwin_horizon";
    case ExperimentKind::control_rmse: return "control_rmse";
    case ExperimentKind::sensitivity: return "sensitivity";
    case ExperimentKind::bias_variance: return "bias_variance";
    case ExperimentKind::theorem1_check: return "theorem1_check";
  }
  return "unknown";
}

ExperimentConfig::ExperimentConfig() {
  blackbox.optimizer.method = OptimizerMethod::sgd_adamlike;
  blackbox.optimizer.step_size = 3e-2;
  blackbox.optimizer.iterations = 4000;
  blackbox.optimizer.batch_size = kFullBatch;
  blackbox.optimizer.max_rows = 1000;
  model_based.max_rows = 1000;
}

void ExperimentConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw InvalidArgument(std::string("config: ") + what + " must be positive");
  };
  auto probability = [](double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument(std::string("config: ") + what + " must lie in [0, 1]");
  };
  positive(runs, "runs");
  positive(workers, "workers");
  probability(modelwin.p, "modelwin.p");
  probability(modelwin.behavior_first, "modelwin.behavior_first");
  probability(modelwin.target_first, "modelwin.target_first");
  positive(modelwin.budget, "modelwin.budget");
  if (modelwin.horizons.empty()) throw InvalidArgument("config: modelwin.horizons is empty");
  for (auto h : modelwin.horizons) positive(h, "modelwin.horizons entries");
  probability(control.alpha_behavior, "control.alpha_behavior");
  probability(control.alpha_target, "control.alpha_target");
  positive(control.t_beh, "control.t_beh");
  positive(control.t_tar, "control.t_tar");
  if (control.trajectory_counts.empty()) throw InvalidArgument("config: control.trajectory_counts is empty");
  for (auto c : control.trajectory_counts) positive(c, "control.trajectory_counts entries");
  positive(control.tuning_trajectories, "control.tuning_trajectories");
  positive(control.tuning_runs, "control.tuning_runs");
  if (sensitivity.alphas.empty()) throw InvalidArgument("config: sensitivity.alphas is empty");
  for (double a : sensitivity.alphas) probability(a, "sensitivity.alphas entries");
  positive(sensitivity.trajectories, "sensitivity.trajectories");
  positive(bias_variance.length, "bias_variance.length");
  positive(bias_variance.runs, "bias_variance.runs");
  if (bias_variance.trajectory_counts.empty())
    throw InvalidArgument("config: bias_variance.trajectory_counts is empty");
  for (auto c : bias_variance.trajectory_counts) positive(c, "bias_variance.trajectory_counts entries");
  positive(theorem1.instances, "theorem1.instances");
  positive(theorem1.states, "theorem1.states");
  positive(theorem1.actions, "theorem1.actions");
  if (!(theorem1.bandwidth > 0.0)) throw InvalidArgument("config: theorem1.bandwidth must be positive");
  if (kernel.percentiles.empty()) throw InvalidArgument("config: kernel.percentiles is empty");
  for (int p : kernel.percentiles) parse_percentile(p);
  if (!(kernel.action_scale > 0.0)) throw InvalidArgument("config: kernel.action_scale must be positive");
  if (kernel.bandwidth_points < 2) throw InvalidArgument("config: kernel.bandwidth_points must be at least 2");
  blackbox.optimizer.validate();
  positive(blackbox.restarts, "blackbox.restarts");
  tabular.validate();
  if (!(model_based.ridge >= 0.0)) throw InvalidArgument("config: model_based.ridge must be nonnegative");
  if (experiment == ExperimentKind::control_rmse || experiment == ExperimentKind::sensitivity)
    parse_control_task(env);
}

void ExperimentConfig::apply_paper_scale() {
  runs = experiment == ExperimentKind::modelwin_horizon ? 10 : 20;
  control.trajectory_counts = {10, 25, 50, 100, 200};
  bias_variance.runs = 200;
  bias_variance.trajectory_counts = {250, 500, 1000, 2000, 4000};
}

std::string ExperimentConfig::id() const {
  std::string out(to_string(experiment));
  if (experiment == ExperimentKind::control_rmse || experiment == ExperimentKind::sensitivity) out += "/" + env;
  return out;
}

ExperimentConfig config_from_json(const json& doc, ExperimentConfig c) {
  check_keys(doc,
             {"schema_version", "experiment", "env", "base_seed", "runs", "workers", "output_dir", "svg",
              "modelwin", "control", "sensitivity", "bias_variance", "theorem1", "kernel", "blackbox",
              "tabular", "model_based"},
             "");
  if (!doc.contains("schema_version")) throw InvalidArgument("config: missing schema_version");
  if (doc.at("schema_version") != kSchemaVersion)
    throw InvalidArgument("config: unsupported schema_version " + doc.at("schema_version").dump());
  if (doc.contains("experiment")) c.experiment = parse_experiment(doc.at("experiment").get<std::string>());
  read(doc, "env", c.env, "");
  read(doc, "base_seed", c.base_seed, "");
  read(doc, "runs", c.runs, "");
  read(doc, "workers", c.workers, "");
  if (doc.contains("output_dir")) c.output_dir = doc.at("output_dir").get<std::string>();
  read(doc, "svg", c.svg, "");

  if (doc.contains("modelwin")) {
    const json& s = doc.at("modelwin");
    check_keys(s, {"p", "behavior_first", "target_first", "budget", "horizons"}, "modelwin.");
    read(s, "p", c.modelwin.p, "modelwin.");
    read(s, "behavior_first", c.modelwin.behavior_first, "modelwin.");
    read(s, "target_first", c.modelwin.target_first, "modelwin.");
    read(s, "budget", c.modelwin.budget, "modelwin.");
    read(s, "horizons", c.modelwin.horizons, "modelwin.");
  }
  if (doc.contains("control")) {
    const json& s = doc.at("control");
    check_keys(s,
               {"alpha_behavior", "alpha_target", "t_beh", "t_tar", "trajectory_counts", "tuning_trajectories",
                "tuning_runs"},
               "control.");
    read(s, "alpha_behavior", c.control.alpha_behavior, "control.");
    read(s, "alpha_target", c.control.alpha_target, "control.");
    read(s, "t_beh", c.control.t_beh, "control.");
    read(s, "t_tar", c.control.t_tar, "control.");
    read(s, "trajectory_counts", c.control.trajectory_counts, "control.");
    read(s, "tuning_trajectories", c.control.tuning_trajectories, "control.");
    read(s, "tuning_runs", c.control.tuning_runs, "control.");
  }
  if (doc.contains("sensitivity")) {
    const json& s = doc.at("sensitivity");
    check_keys(s, {"alphas", "trajectories"}, "sensitivity.");
    read(s, "alphas", c.sensitivity.alphas, "sensitivity.");
    read(s, "trajectories", c.sensitivity.trajectories, "sensitivity.");
  }
  if (doc.contains("bias_variance")) {
    const json& s = doc.at("bias_variance");
    check_keys(s, {"length", "trajectory_counts", "runs"}, "bias_variance.");
    read(s, "length", c.bias_variance.length, "bias_variance.");
    read(s, "trajectory_counts", c.bias_variance.trajectory_counts, "bias_variance.");
    read(s, "runs", c.bias_variance.runs, "bias_variance.");
  }
  if (doc.contains("theorem1")) {
    const json& s = doc.at("theorem1");
    check_keys(s, {"instances", "states", "actions", "bandwidth"}, "theorem1.");
    read(s, "instances", c.theorem1.instances, "theorem1.");
    read(s, "states", c.theorem1.states, "theorem1.");
    read(s, "actions", c.theorem1.actions, "theorem1.");
    read(s, "bandwidth", c.theorem1.bandwidth, "theorem1.");
  }
  if (doc.contains("kernel")) {
    const json& s = doc.at("kernel");
    check_keys(s, {"percentiles", "action_scale", "bandwidth_points"}, "kernel.");
    read(s, "percentiles", c.kernel.percentiles, "kernel.");
    read(s, "action_scale", c.kernel.action_scale, "kernel.");
    read(s, "bandwidth_points", c.kernel.bandwidth_points, "kernel.");
  }
  if (doc.contains("blackbox")) {
    const json& s = doc.at("blackbox");
    check_keys(s, {"step_size", "iterations", "batch_size", "max_rows", "restarts", "hidden", "cosine_decay"},
               "blackbox.");
    read(s, "step_size", c.blackbox.optimizer.step_size, "blackbox.");
    read(s, "iterations", c.blackbox.optimizer.iterations, "blackbox.");
    read_batch(s, c.blackbox.optimizer.batch_size, "blackbox.");
    read(s, "max_rows", c.blackbox.optimizer.max_rows, "blackbox.");
    read(s, "restarts", c.blackbox.restarts, "blackbox.");
    read(s, "hidden", c.blackbox.hidden, "blackbox.");
    read(s, "cosine_decay", c.blackbox.optimizer.cosine_decay, "blackbox.");
  }
  if (doc.contains("tabular")) {
    const json& s = doc.at("tabular");
    check_keys(s, {"method", "step_size", "iterations", "tolerance"}, "tabular.");
    if (s.contains("method")) c.tabular.method = parse_optimizer_method(s.at("method").get<std::string>());
    read(s, "step_size", c.tabular.step_size, "tabular.");
    read(s, "iterations", c.tabular.iterations, "tabular.");
    read(s, "tolerance", c.tabular.tolerance, "tabular.");
  }
  if (doc.contains("model_based")) {
    const json& s = doc.at("model_based");
    check_keys(s, {"ridge", "tolerance", "max_iterations", "max_rows"}, "model_based.");
    read(s, "ridge", c.model_based.ridge, "model_based.");
    read(s, "tolerance", c.model_based.tolerance, "model_based.");
    read(s, "max_iterations", c.model_based.max_iterations, "model_based.");
    read(s, "max_rows", c.model_based.max_rows, "model_based.");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("config: cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(doc, std::move(base));
}

json config_to_json(const ExperimentConfig& c) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["experiment"] = std::string(to_string(c.experiment));
  doc["env"] = c.env;
  doc["base_seed"] = c.base_seed;
  doc["runs"] = c.runs;
  doc["workers"] = c.workers;
  doc["output_dir"] = c.output_dir.string();
  doc["svg"] = c.svg;
  doc["modelwin"] = {{"p", c.modelwin.p},
                     {"behavior_first", c.modelwin.behavior_first},
                     {"target_first", c.modelwin.target_first},
                     {"budget", c.modelwin.budget},
                     {"horizons", c.modelwin.horizons}};
  doc["control"] = {{"alpha_behavior", c.control.alpha_behavior},
                    {"alpha_target", c.control.alpha_target},
                    {"t_beh", c.control.t_beh},
                    {"t_tar", c.control.t_tar},
                    {"trajectory_counts", c.control.trajectory_counts},
                    {"tuning_trajectories", c.control.tuning_trajectories},
                    {"tuning_runs", c.control.tuning_runs}};
  doc["sensitivity"] = {{"alphas", c.sensitivity.alphas}, {"trajectories", c.sensitivity.trajectories}};
  doc["bias_variance"] = {{"length", c.bias_variance.length},
                          {"trajectory_counts", c.bias_variance.trajectory_counts},
                          {"runs", c.bias_variance.runs}};
  doc["theorem1"] = {{"instances", c.theorem1.instances},
                     {"states", c.theorem1.states},
                     {"actions", c.theorem1.actions},
                     {"bandwidth", c.theorem1.bandwidth}};
  doc["kernel"] = {{"percentiles", c.kernel.percentiles},
                   {"action_scale", c.kernel.action_scale},
                   {"bandwidth_points", c.kernel.bandwidth_points}};
  doc["blackbox"] = {{"step_size", c.blackbox.optimizer.step_size},
                     {"iterations", c.blackbox.optimizer.iterations},
                     {"batch_size", batch_json(c.blackbox.optimizer.batch_size)},
                     {"max_rows", c.blackbox.optimizer.max_rows},
                     {"restarts", c.blackbox.restarts},
                     {"hidden", c.blackbox.hidden},
                     {"cosine_decay", c.blackbox.optimizer.cosine_decay}};
  doc["tabular"] = {{"method", std::string(to_string(c.tabular.method))},
                    {"step_size", c.tabular.step_size},
                    {"iterations", c.tabular.iterations},
                    {"tolerance", c.tabular.tolerance}};
  doc["model_based"] = {{"ridge", c.model_based.ridge},
                        {"tolerance", c.model_based.tolerance},
                        {"max_iterations", c.model_based.max_iterations},
                        {"max_rows", c.model_based.max_rows}};
  return doc;
}

}  // namespace bbope::bench
