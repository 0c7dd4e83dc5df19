// Classic-control dynamics. The equations and constants follow the widely
// used Gym formulations (CartPole-v1, MountainCar-v0, Pendulum-v1,
// Acrobot-v1); rewards and action sets are the off-policy benchmark variants:
//   pendulum      torques {-2,-1,0,1,2}, reward -(theta^2 + 0.1 thetadot^2 + 0.001 a^2)
//   mountain_car  3 actions, +100 on reaching the goal, -1 otherwise
//   cartpole      2 actions, -100 when the pole falls, +1 otherwise
//   acrobot       torques {-1,0,1}, +100 on reaching the goal, -1 otherwise
// config/classic_control.constants mirrors classic_control_constants().

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bbope/envs.hpp"
#include "bbope/errors.hpp"

namespace bbope {

namespace {

constexpr double kPi = std::numbers::pi;

namespace cartpole {
constexpr double gravity = 9.8;
constexpr double mass_cart = 1.0;
constexpr double mass_pole = 0.1;
constexpr double total_mass = mass_cart + mass_pole;
constexpr double half_length = 0.5;
constexpr double pole_mass_length = mass_pole * half_length;
constexpr double force_mag = 10.0;
constexpr double tau = 0.02;
constexpr double theta_threshold = 12.0 * 2.0 * kPi / 360.0;
constexpr double x_threshold = 2.4;
constexpr double reset_half_width = 0.05;
constexpr double fall_reward = -100.0;
constexpr double alive_reward = 1.0;
}  // namespace cartpole

namespace mountain_car {
constexpr double min_position = -1.2;
constexpr double max_position = 0.6;
constexpr double max_speed = 0.07;
constexpr double goal_position = 0.5;
constexpr double force = 0.001;
constexpr double gravity = 0.0025;
constexpr double reset_low = -0.6;
constexpr double reset_high = -0.4;
constexpr double goal_reward = 100.0;
constexpr double step_reward = -1.0;
}  // namespace mountain_car

namespace pendulum {
constexpr double max_speed = 8.0;
constexpr double max_torque = 2.0;
constexpr double dt = 0.05;
constexpr double gravity = 10.0;
constexpr double mass = 1.0;
constexpr double length = 1.0;
constexpr double reset_max_speed = 1.0;
}  // namespace pendulum

namespace acrobot {
constexpr double dt = 0.2;
constexpr double link_length_1 = 1.0;
constexpr double link_mass_1 = 1.0;
constexpr double link_mass_2 = 1.0;
constexpr double link_com_1 = 0.5;
constexpr double link_com_2 = 0.5;
constexpr double link_moi = 1.0;
constexpr double gravity = 9.8;
constexpr double max_vel_1 = 4.0 * kPi;
constexpr double max_vel_2 = 9.0 * kPi;
constexpr double reset_half_width = 0.1;
constexpr double goal_height = 1.0;
constexpr double goal_reward = 100.0;
constexpr double step_reward = -1.0;
}  // namespace acrobot

double wrap_angle(double x) {
  // [-pi, pi)
  double y = std::fmod(x + kPi, 2.0 * kPi);
  if (y < 0.0) y += 2.0 * kPi;
  return y - kPi;
}

ContinuousEnv make_cartpole() {
  using namespace cartpole;
  ContinuousEnv env;
  env.name = "cartpole";
  env.state_dim = 4;
  env.action_values = {-force_mag, force_mag};
  env.min_reward = fall_reward;
  env.max_reward = alive_reward;
  env.reset = [](CounterRng& rng) {
    std::vector<double> s(4);
    for (auto& v : s) v = rng.uniform(-reset_half_width, reset_half_width);
    return s;
  };
  env.step = [](std::span<const double> s, std::size_t action, CounterRng&) {
    const double x = s[0], x_dot = s[1], theta = s[2], theta_dot = s[3];
    const double f = action == 1 ? force_mag : -force_mag;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double temp = (f + pole_mass_length * theta_dot * theta_dot * sin_t) / total_mass;
    const double theta_acc =
        (gravity * sin_t - cos_t * temp) /
        (half_length * (4.0 / 3.0 - mass_pole * cos_t * cos_t / total_mass));
    const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;
    EnvStep out;
    out.next_state = {x + tau * x_dot, x_dot + tau * x_acc, theta + tau * theta_dot,
                      theta_dot + tau * theta_acc};
    const auto& n = out.next_state;
    out.terminated = n[0] < -x_threshold || n[0] > x_threshold || n[2] < -theta_threshold ||
                     n[2] > theta_threshold;
    out.reward = out.terminated ? fall_reward : alive_reward;
    return out;
  };
  return env;
}

ContinuousEnv make_mountain_car() {
  using namespace mountain_car;
  ContinuousEnv env;
  env.name = "mountain_car";
  env.state_dim = 2;
  env.action_values = {-1.0, 0.0, 1.0};
  env.min_reward = step_reward;
  env.max_reward = goal_reward;
  env.reset = [](CounterRng& rng) {
    return std::vector<double>{rng.uniform(reset_low, reset_high), 0.0};
  };
  env.step = [](std::span<const double> s, std::size_t action, CounterRng&) {
    double position = s[0];
    double velocity = s[1];
    velocity += (static_cast<double>(action) - 1.0) * force + std::cos(3.0 * position) * -gravity;
    velocity = std::clamp(velocity, -max_speed, max_speed);
    position += velocity;
    position = std::clamp(position, min_position, max_position);
    if (position == min_position && velocity < 0.0) velocity = 0.0;
    EnvStep out;
    out.next_state = {position, velocity};
    out.terminated = position >= goal_position;
    out.reward = out.terminated ? goal_reward : step_reward;
    return out;
  };
  return env;
}

ContinuousEnv make_pendulum() {
  using namespace pendulum;
  ContinuousEnv env;
  env.name = "pendulum";
  env.state_dim = 2;
  env.action_values = {-2.0, -1.0, 0.0, 1.0, 2.0};
  env.min_reward = -(kPi * kPi + 0.1 * max_speed * max_speed + 0.001 * max_torque * max_torque);
  env.max_reward = 0.0;
  env.reset = [](CounterRng& rng) {
    const double theta = rng.uniform(-kPi, kPi);
    return std::vector<double>{theta, rng.uniform(-reset_max_speed, reset_max_speed)};
  };
  env.step = [actions = env.action_values](std::span<const double> s, std::size_t action,
                                           CounterRng&) {
    const double theta = wrap_angle(s[0]);
    const double theta_dot = s[1];
    const double u = std::clamp(actions[action], -max_torque, max_torque);
    const double cost = theta * theta + 0.1 * theta_dot * theta_dot + 0.001 * u * u;
    double new_theta_dot =
        theta_dot + (3.0 * gravity / (2.0 * length) * std::sin(theta) +
                     3.0 / (mass * length * length) * u) *
                        dt;
    new_theta_dot = std::clamp(new_theta_dot, -max_speed, max_speed);
    EnvStep out;
    out.next_state = {wrap_angle(theta + new_theta_dot * dt), new_theta_dot};
    out.reward = -cost;
    out.terminated = false;
    return out;
  };
  return env;
}

struct AcrobotState {
  double theta1, theta2, dtheta1, dtheta2;
};

AcrobotState acrobot_derivative(const AcrobotState& s, double torque) {
  using namespace acrobot;
  const double m1 = link_mass_1, m2 = link_mass_2, l1 = link_length_1;
  const double lc1 = link_com_1, lc2 = link_com_2, i1 = link_moi, i2 = link_moi, g = gravity;
  const double d1 =
      m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * std::cos(s.theta2)) + i1 + i2;
  const double d2 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(s.theta2)) + i2;
  const double phi2 = m2 * lc2 * g * std::cos(s.theta1 + s.theta2 - kPi / 2.0);
  const double phi1 = -m2 * l1 * lc2 * s.dtheta2 * s.dtheta2 * std::sin(s.theta2) -
                      2.0 * m2 * l1 * lc2 * s.dtheta2 * s.dtheta1 * std::sin(s.theta2) +
                      (m1 * lc1 + m2 * l1) * g * std::cos(s.theta1 - kPi / 2.0) + phi2;
  const double ddtheta2 =
      (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * s.dtheta1 * s.dtheta1 * std::sin(s.theta2) -
       phi2) /
      (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
  const double ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
  return {s.dtheta1, s.dtheta2, ddtheta1, ddtheta2};
}

AcrobotState rk4(const AcrobotState& s, double torque, double h) {
  auto axpy = [](const AcrobotState& x, double a, const AcrobotState& d) {
    return AcrobotState{x.theta1 + a * d.theta1, x.theta2 + a * d.theta2,
                        x.dtheta1 + a * d.dtheta1, x.dtheta2 + a * d.dtheta2};
  };
  const AcrobotState k1 = acrobot_derivative(s, torque);
  const AcrobotState k2 = acrobot_derivative(axpy(s, h / 2.0, k1), torque);
  const AcrobotState k3 = acrobot_derivative(axpy(s, h / 2.0, k2), torque);
  const AcrobotState k4 = acrobot_derivative(axpy(s, h, k3), torque);
  return {s.theta1 + h / 6.0 * (k1.theta1 + 2.0 * k2.theta1 + 2.0 * k3.theta1 + k4.theta1),
          s.theta2 + h / 6.0 * (k1.theta2 + 2.0 * k2.theta2 + 2.0 * k3.theta2 + k4.theta2),
          s.dtheta1 + h / 6.0 * (k1.dtheta1 + 2.0 * k2.dtheta1 + 2.0 * k3.dtheta1 + k4.dtheta1),
          s.dtheta2 + h / 6.0 * (k1.dtheta2 + 2.0 * k2.dtheta2 + 2.0 * k3.dtheta2 + k4.dtheta2)};
}

std::vector<double> acrobot_observation(const AcrobotState& s) {
  return {std::cos(s.theta1), std::sin(s.theta1), std::cos(s.theta2), std::sin(s.theta2),
          s.dtheta1, s.dtheta2};
}

AcrobotState acrobot_from_observation(std::span<const double> o) {
  return {std::atan2(o[1], o[0]), std::atan2(o[3], o[2]), o[4], o[5]};
}

ContinuousEnv make_acrobot() {
  using namespace acrobot;
  ContinuousEnv env;
  env.name = "acrobot";
  env.state_dim = 6;
  env.action_values = {-1.0, 0.0, 1.0};
  env.min_reward = step_reward;
  env.max_reward = goal_reward;
  env.reset = [](CounterRng& rng) {
    AcrobotState s{};
    s.theta1 = rng.uniform(-reset_half_width, reset_half_width);
    s.theta2 = rng.uniform(-reset_half_width, reset_half_width);
    s.dtheta1 = rng.uniform(-reset_half_width, reset_half_width);
    s.dtheta2 = rng.uniform(-reset_half_width, reset_half_width);
    return acrobot_observation(s);
  };
  env.step = [actions = env.action_values](std::span<const double> o, std::size_t action,
                                           CounterRng&) {
    AcrobotState s = rk4(acrobot_from_observation(o), actions[action], dt);
    s.theta1 = wrap_angle(s.theta1);
    s.theta2 = wrap_angle(s.theta2);
    s.dtheta1 = std::clamp(s.dtheta1, -max_vel_1, max_vel_1);
    s.dtheta2 = std::clamp(s.dtheta2, -max_vel_2, max_vel_2);
    EnvStep out;
    out.terminated = -std::cos(s.theta1) - std::cos(s.theta2 + s.theta1) > goal_height;
    out.reward = out.terminated ? goal_reward : step_reward;
    out.next_state = acrobot_observation(s);
    return out;
  };
  return env;
}

std::size_t nearest_action(std::span<const double> values, double target) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (std::abs(values[k] - target) < std::abs(values[best] - target)) best = k;
  return best;
}

}  // namespace

ControlTask parse_control_task(std::string_view name) {
  if (name == "pendulum") return ControlTask::pendulum;
  if (name == "mountain_car" || name == "mountaincar") return ControlTask::mountain_car;
  if (name == "cartpole") return ControlTask::cartpole;
  if (name == "acrobot") return ControlTask::acrobot;
  throw InvalidArgument("unknown control task '" + std::string(name) + "'");
}

std::string_view to_string(ControlTask task) noexcept {
  switch (task) {
    case ControlTask::pendulum: return "pendulum";
    case ControlTask::mountain_car: return "mountain_car";
    case ControlTask::cartpole: return "cartpole";
    case ControlTask::acrobot: return "acrobot";
  }
  return "unknown";
}

ContinuousEnv classic_control(ControlTask task) {
  switch (task) {
    case ControlTask::pendulum: return make_pendulum();
    case ControlTask::mountain_car: return make_mountain_car();
    case ControlTask::cartpole: return make_cartpole();
    case ControlTask::acrobot: return make_acrobot();
  }
  throw InvalidArgument("classic_control: unknown task");
}

ContinuousEnv infinite_horizon(ContinuousEnv env) {
  env.name += "/infinite";
  env.step = [inner = env.step, reset = env.reset](std::span<const double> s, std::size_t a,
                                                    CounterRng& rng) {
    EnvStep out = inner(s, a, rng);
    if (out.terminated) {
      out.next_state = reset(rng);
      out.terminated = false;
    }
    return out;
  };
  return env;
}

Policy scripted_near_optimal(ControlTask task) {
  switch (task) {
    case ControlTask::cartpole:
      // Linear state feedback on cart and pole.
      return Policy::deterministic(
          2,
          [](const State& state) -> std::size_t {
            const auto& s = state_vector(state);
            const double score = 0.083 * s[0] + 0.521 * s[1] + s[2] + 0.407 * s[3];
            return score > 0.0 ? 1 : 0;
          },
          "cartpole_feedback");
    case ControlTask::mountain_car:
      // Push along the current velocity to pump energy.
      return Policy::deterministic(
          3,
          [](const State& state) -> std::size_t {
            const auto& s = state_vector(state);
            return s[1] >= 0.0 ? 2 : 0;
          },
          "mountain_car_pump");
    case ControlTask::pendulum:
      // Energy pumping far from upright, PD stabilisation near it.
      return Policy::deterministic(
          5,
          [values = std::vector<double>{-2.0, -1.0, 0.0, 1.0, 2.0}](const State& state) {
            const auto& s = state_vector(state);
            const double theta = wrap_angle(s[0]);
            const double theta_dot = s[1];
            if (std::cos(theta) > 0.85) {
              return nearest_action(values, -(12.0 * theta + 2.5 * theta_dot));
            }
            const double energy = 0.5 * theta_dot * theta_dot + 15.0 * std::cos(theta);
            const double pump = (15.0 - energy) * theta_dot;
            return pump >= 0.0 ? std::size_t{4} : std::size_t{0};
          },
          "pendulum_energy");
    case ControlTask::acrobot:
      // Torque along the swing of the second link.
      return Policy::deterministic(
          3,
          [](const State& state) -> std::size_t {
            const auto& o = state_vector(state);
            return o[5] >= 0.0 ? 2 : 0;
          },
          "acrobot_pump");
  }
  throw InvalidArgument("scripted_near_optimal: unknown task");
}

const std::map<std::string, double>& classic_control_constants() {
  static const std::map<std::string, double> constants = {
      {"cartpole.gravity", cartpole::gravity},
      {"cartpole.mass_cart", cartpole::mass_cart},
      {"cartpole.mass_pole", cartpole::mass_pole},
      {"cartpole.half_length", cartpole::half_length},
      {"cartpole.force_mag", cartpole::force_mag},
      {"cartpole.tau", cartpole::tau},
      {"cartpole.theta_threshold", cartpole::theta_threshold},
      {"cartpole.x_threshold", cartpole::x_threshold},
      {"cartpole.reset_half_width", cartpole::reset_half_width},
      {"cartpole.fall_reward", cartpole::fall_reward},
      {"cartpole.alive_reward", cartpole::alive_reward},
      {"mountain_car.min_position", mountain_car::min_position},
      {"mountain_car.max_position", mountain_car::max_position},
      {"mountain_car.max_speed", mountain_car::max_speed},
      {"mountain_car.goal_position", mountain_car::goal_position},
      {"mountain_car.force", mountain_car::force},
      {"mountain_car.gravity", mountain_car::gravity},
      {"mountain_car.reset_low", mountain_car::reset_low},
      {"mountain_car.reset_high", mountain_car::reset_high},
      {"mountain_car.goal_reward", mountain_car::goal_reward},
      {"mountain_car.step_reward", mountain_car::step_reward},
      {"pendulum.max_speed", pendulum::max_speed},
      {"pendulum.max_torque", pendulum::max_torque},
      {"pendulum.dt", pendulum::dt},
      {"pendulum.gravity", pendulum::gravity},
      {"pendulum.mass", pendulum::mass},
      {"pendulum.length", pendulum::length},
      {"pendulum.reset_max_speed", pendulum::reset_max_speed},
      {"acrobot.dt", acrobot::dt},
      {"acrobot.link_length_1", acrobot::link_length_1},
      {"acrobot.link_mass_1", acrobot::link_mass_1},
      {"acrobot.link_mass_2", acrobot::link_mass_2},
      {"acrobot.link_com_1", acrobot::link_com_1},
      {"acrobot.link_com_2", acrobot::link_com_2},
      {"acrobot.link_moi", acrobot::link_moi},
      {"acrobot.gravity", acrobot::gravity},
      {"acrobot.max_vel_1", acrobot::max_vel_1},
      {"acrobot.max_vel_2", acrobot::max_vel_2},
      {"acrobot.reset_half_width", acrobot::reset_half_width},
      {"acrobot.goal_height", acrobot::goal_height},
      {"acrobot.goal_reward", acrobot::goal_reward},
      {"acrobot.step_reward", acrobot::step_reward},
  };
  return constants;
}

std::string format_constants() {
  std::string out;
  char buf[32];
  for (const auto& [key, value] : classic_control_constants()) {
    const auto end = std::to_chars(buf, buf + sizeof buf, value).ptr;
    out += key + " = " + std::string(buf, end) + "\n";
  }
  return out;
}

std::map<std::string, double> parse_constants(std::string_view text) {
  std::map<std::string, double> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos)
      throw InvalidArgument("parse_constants: line " + std::to_string(line_no) + " has no '='");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      std::size_t used = 0;
      out[key] = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw InvalidArgument("parse_constants: bad value on line " + std::to_string(line_no));
    }
  }
  return out;
}

}  // namespace bbope
