#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "bgpo/policies.hpp"
#include "bgpo/rng.hpp"
#include "bgpo/types.hpp"

namespace bgpo {

struct ActionSpace {
  std::size_t n = 0;        // number of discrete actions; 0 for a box
  Eigen::VectorXd low;      // box bounds (continuous only)
  Eigen::VectorXd high;

  bool is_discrete() const { return n > 0; }
  static ActionSpace discrete(std::size_t n) { return ActionSpace{n, {}, {}}; }
  static ActionSpace box(Eigen::VectorXd low, Eigen::VectorXd high) {
    return ActionSpace{0, std::move(low), std::move(high)};
  }
};

struct EnvSpec {
  std::string name;
  std::size_t state_dim = 0;
  ActionSpace action_space;
  std::size_t horizon = 1;
  double gamma = 0.99;
  double reward_min = 0.0;  // documented per-step reward range
  double reward_max = 0.0;

  void validate() const;
};

struct StepResult {
  State next_state;
  double reward = 0.0;
  bool done = false;
};

/// One rollout's worth of data. `states` holds s_0..s_length (the last entry
/// is the state after the final action); log-probs are recorded at sampling
/// time under the sampling parameters.
struct Trajectory {
  std::vector<State> states;
  std::vector<Action> actions;
  std::vector<double> rewards;
  std::vector<double> log_probs;
  bool terminated = false;  // true termination, as opposed to horizon truncation

  std::size_t length() const { return actions.size(); }
  /// Throws std::logic_error if the per-step arrays disagree in length.
  void check_consistent() const;
};

/// A stateful environment instance owned by one rollout worker. step() after
/// a terminal transition (or before the first reset) is rejected.
class Environment {
 public:
  explicit Environment(EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }
  State reset(Rng& rng);
  /// Continuous actions are clamped to the box before the dynamics run.
  StepResult step(const Action& action, Rng& rng);
  bool done() const { return done_; }
  virtual std::unique_ptr<Environment> clone() const = 0;

 protected:
  virtual State sample_initial_state(Rng& rng) = 0;
  virtual StepResult transition(const Action& action, Rng& rng) = 0;

  EnvSpec spec_;
  State state_;

 private:
  bool done_ = true;
};

// --- classic control --------------------------------------------------------

namespace cartpole {
inline constexpr double kGravity = 9.8;
inline constexpr double kMassCart = 1.0;
inline constexpr double kMassPole = 0.1;
inline constexpr double kTotalMass = kMassCart + kMassPole;
inline constexpr double kHalfLength = 0.5;  // half the pole length
inline constexpr double kPoleMassLength = kMassPole * kHalfLength;
inline constexpr double kForceMag = 10.0;
inline constexpr double kTau = 0.02;  // Euler step, seconds
inline constexpr double kThetaThreshold = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
inline constexpr double kXThreshold = 2.4;
inline constexpr double kInitRange = 0.05;  // each state component ~ U(-0.05, 0.05)

/// One Euler step of (x, x_dot, theta, theta_dot) under push left (0) or right (1).
State dynamics(const State& s, std::size_t action);
bool terminal(const State& s);
}  // namespace cartpole

/// Cart-pole balancing. +1 reward per step (including the terminating one);
/// terminates when |x| > 2.4 or |theta| > 12 degrees.
class CartPole final : public Environment {
 public:
  explicit CartPole(std::size_t horizon = 100, double gamma = 0.99);
  std::unique_ptr<Environment> clone() const override { return std::make_unique<CartPole>(*this); }

 protected:
  State sample_initial_state(Rng& rng) override;
  StepResult transition(const Action& action, Rng& rng) override;
};

namespace mountain_car {
inline constexpr double kMinPosition = -1.2;
inline constexpr double kMaxPosition = 0.6;
inline constexpr double kMaxSpeed = 0.07;
inline constexpr double kGoalPosition = 0.45;
inline constexpr double kGoalVelocity = 0.0;
inline constexpr double kPower = 0.0015;
inline constexpr double kGravityTerm = 0.0025;  // velocity -= 0.0025 cos(3 x)
inline constexpr double kGoalReward = 100.0;
inline constexpr double kActionCost = 0.1;  // reward -= 0.1 a^2

/// (position, velocity) after applying force in [-1, 1]; returns the goal flag.
State dynamics(const State& s, double force, bool* reached_goal = nullptr);
}  // namespace mountain_car

/// Continuous mountain car. Reward -0.1 a^2 per step, +100 on reaching the
/// goal (which terminates). Start: position ~ U(-0.6, -0.4), velocity 0.
class MountainCarContinuous final : public Environment {
 public:
  explicit MountainCarContinuous(std::size_t horizon = 500, double gamma = 0.99);
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<MountainCarContinuous>(*this);
  }

 protected:
  State sample_initial_state(Rng& rng) override;
  StepResult transition(const Action& action, Rng& rng) override;
};

namespace pendulum {
inline constexpr double kMaxSpeed = 8.0;
inline constexpr double kMaxTorque = 2.0;
inline constexpr double kDt = 0.05;
inline constexpr double kGravity = 10.0;
inline constexpr double kMass = 1.0;
inline constexpr double kLength = 1.0;

/// Angle wrapped into [-pi, pi).
double normalize_angle(double theta);
}  // namespace pendulum

/// Torque-limited pendulum swing-up. Observation (cos th, sin th, th_dot);
/// reward -(th^2 + 0.1 th_dot^2 + 0.001 a^2) with th wrapped to [-pi, pi).
/// Start: th ~ U(-pi, pi), th_dot ~ U(-1, 1). Never terminates.
class Pendulum final : public Environment {
 public:
  explicit Pendulum(std::size_t horizon = 500, double gamma = 0.99);
  std::unique_ptr<Environment> clone() const override { return std::make_unique<Pendulum>(*this); }

  /// Underlying (angle, angular velocity).
  const Eigen::Vector2d& physical_state() const { return physical_; }

 protected:
  State sample_initial_state(Rng& rng) override;
  StepResult transition(const Action& action, Rng& rng) override;

 private:
  State observe() const;
  Eigen::Vector2d physical_ = Eigen::Vector2d::Zero();
};

// --- tabular ----------------------------------------------------------------

/// Finite MDP {S, A, P, r, gamma, rho0} with horizon H.
struct TabularMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  /// P[(s * n_actions + a)] is the next-state distribution for (s, a).
  std::vector<Eigen::VectorXd> transitions;
  RowMatrix rewards;  // n_states x n_actions
  Eigen::VectorXd rho0;
  double gamma = 0.99;
  std::size_t horizon = 1;

  const Eigen::VectorXd& next_distribution(std::size_t s, std::size_t a) const {
    return transitions[s * n_actions + a];
  }
  /// Throws std::invalid_argument on shape errors, rows not summing to 1
  /// within 1e-12, negative probabilities or non-finite rewards.
  void validate() const;

  /// {"P": [s][a][s'], "r": [s][a], "rho0": [s], "gamma": g, "H": h}
  static TabularMdp from_json(const nlohmann::json& j);
  static TabularMdp load(const std::string& path);

  /// Built-in 4-state / 2-action benchmark used by tests and presets.
  static TabularMdp benchmark(std::size_t horizon = 5, double gamma = 0.9);
};

State one_hot(std::size_t index, std::size_t size);

/// Environment view of a TabularMdp; states are one-hot vectors.
class TabularEnv final : public Environment {
 public:
  explicit TabularEnv(TabularMdp mdp);
  std::unique_ptr<Environment> clone() const override { return std::make_unique<TabularEnv>(*this); }
  const TabularMdp& mdp() const { return mdp_; }

 protected:
  State sample_initial_state(Rng& rng) override;
  StepResult transition(const Action& action, Rng& rng) override;

 private:
  TabularMdp mdp_;
  std::size_t current_ = 0;
};

/// Names: "cartpole", "mountaincar", "pendulum", "tabular" (needs an MDP file
/// path or uses the built-in benchmark when `mdp_path` is empty).
std::unique_ptr<Environment> make_environment(const std::string& name, std::size_t horizon,
                                              double gamma, const std::string& mdp_path = {});

/// Runs one episode of at most `horizon` steps (<= env.spec().horizon).
Trajectory rollout(Environment& env, const Policy& policy,
                   const Eigen::Ref<const ParamVector>& theta, Rng& rng, std::size_t horizon);

}  // namespace bgpo
