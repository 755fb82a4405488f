#include "bgpo/environments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace bgpo {

void EnvSpec::validate() const {
  if (horizon < 1) throw std::invalid_argument(name + ": horizon must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument(name + ": gamma must be in (0,1)");
  if (state_dim < 1) throw std::invalid_argument(name + ": state_dim must be >= 1");
}

void Trajectory::check_consistent() const {
  const auto n = actions.size();
  const bool states_ok = states.size() == n + 1 || (n == 0 && states.empty());
  if (rewards.size() != n || log_probs.size() != n || !states_ok) {
    throw std::logic_error("trajectory arrays have inconsistent lengths");
  }
}

State Environment::reset(Rng& rng) {
  state_ = sample_initial_state(rng);
  done_ = false;
  return state_;
}

StepResult Environment::step(const Action& action, Rng& rng) {
  if (done_) {
    throw std::logic_error(spec_.name + ": step() after the episode ended; call reset() first");
  }
  const auto& space = spec_.action_space;
  StepResult result;
  if (space.is_discrete()) {
    if (!action.is_discrete() || action.index >= space.n) {
      throw std::invalid_argument(spec_.name + ": invalid discrete action");
    }
    result = transition(action, rng);
  } else {
    if (action.value.size() != space.low.size()) {
      throw std::invalid_argument(spec_.name + ": action has the wrong dimension");
    }
    const Action clamped =
        Action::continuous(action.value.cwiseMax(space.low).cwiseMin(space.high));
    result = transition(clamped, rng);
  }
  state_ = result.next_state;
  done_ = result.done;
  return result;
}

// --- CartPole ---------------------------------------------------------------

namespace cartpole {

State dynamics(const State& s, std::size_t action) {
  const double x = s[0], x_dot = s[1], theta = s[2], theta_dot = s[3];
  const double force = action == 1 ? kForceMag : -kForceMag;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp = (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
  const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                           (kHalfLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / kTotalMass));
  const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

  State next(4);
  next << x + kTau * x_dot, x_dot + kTau * x_acc, theta + kTau * theta_dot,
      theta_dot + kTau * theta_acc;
  return next;
}

bool terminal(const State& s) {
  return s[0] < -kXThreshold || s[0] > kXThreshold || s[2] < -kThetaThreshold ||
         s[2] > kThetaThreshold;
}

}  // namespace cartpole

CartPole::CartPole(std::size_t horizon, double gamma)
    : Environment(EnvSpec{"cartpole", 4, ActionSpace::discrete(2), horizon, gamma, 1.0, 1.0}) {}

State CartPole::sample_initial_state(Rng& rng) {
  std::uniform_real_distribution<double> init(-cartpole::kInitRange, cartpole::kInitRange);
  State s(4);
  for (Eigen::Index i = 0; i < 4; ++i) s[i] = init(rng);
  return s;
}

StepResult CartPole::transition(const Action& action, Rng& /*rng*/) {
  State next = cartpole::dynamics(state_, action.index);
  const bool done = cartpole::terminal(next);
  return StepResult{std::move(next), 1.0, done};
}

// --- MountainCarContinuous ----------------------------------------------------

namespace mountain_car {

State dynamics(const State& s, double force, bool* reached_goal) {
  double position = s[0];
  double velocity = s[1];
  velocity += force * kPower - kGravityTerm * std::cos(3.0 * position);
  velocity = std::clamp(velocity, -kMaxSpeed, kMaxSpeed);
  position += velocity;
  position = std::clamp(position, kMinPosition, kMaxPosition);
  if (position == kMinPosition && velocity < 0.0) velocity = 0.0;
  if (reached_goal != nullptr) {
    *reached_goal = position >= kGoalPosition && velocity >= kGoalVelocity;
  }
  State next(2);
  next << position, velocity;
  return next;
}

}  // namespace mountain_car

MountainCarContinuous::MountainCarContinuous(std::size_t horizon, double gamma)
    : Environment(EnvSpec{"mountaincar", 2,
                          ActionSpace::box(Eigen::VectorXd::Constant(1, -1.0),
                                           Eigen::VectorXd::Constant(1, 1.0)),
                          horizon, gamma, -mountain_car::kActionCost,
                          mountain_car::kGoalReward}) {}

State MountainCarContinuous::sample_initial_state(Rng& rng) {
  std::uniform_real_distribution<double> init(-0.6, -0.4);
  State s(2);
  s << init(rng), 0.0;
  return s;
}

StepResult MountainCarContinuous::transition(const Action& action, Rng& /*rng*/) {
  const double force = action.value[0];
  bool goal = false;
  State next = mountain_car::dynamics(state_, force, &goal);
  double reward = -mountain_car::kActionCost * force * force;
  if (goal) reward += mountain_car::kGoalReward;
  return StepResult{std::move(next), reward, goal};
}

// --- Pendulum -----------------------------------------------------------------

namespace pendulum {
double normalize_angle(double theta) {
  const double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(theta + std::numbers::pi, two_pi);
  if (wrapped < 0.0) wrapped += two_pi;
  return wrapped - std::numbers::pi;
}
}  // namespace pendulum

Pendulum::Pendulum(std::size_t horizon, double gamma)
    : Environment(EnvSpec{
          "pendulum", 3,
          ActionSpace::box(Eigen::VectorXd::Constant(1, -pendulum::kMaxTorque),
                           Eigen::VectorXd::Constant(1, pendulum::kMaxTorque)),
          horizon, gamma,
          -(std::numbers::pi * std::numbers::pi +
            0.1 * pendulum::kMaxSpeed * pendulum::kMaxSpeed +
            0.001 * pendulum::kMaxTorque * pendulum::kMaxTorque),
          0.0}) {}

State Pendulum::observe() const {
  State obs(3);
  obs << std::cos(physical_[0]), std::sin(physical_[0]), physical_[1];
  return obs;
}

State Pendulum::sample_initial_state(Rng& rng) {
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> speed(-1.0, 1.0);
  physical_[0] = angle(rng);
  physical_[1] = speed(rng);
  return observe();
}

StepResult Pendulum::transition(const Action& action, Rng& /*rng*/) {
  using namespace pendulum;
  const double u = action.value[0];
  const double th = physical_[0];
  const double th_dot = physical_[1];
  const double angle = normalize_angle(th);
  const double cost = angle * angle + 0.1 * th_dot * th_dot + 0.001 * u * u;

  double new_th_dot = th_dot + (3.0 * kGravity / (2.0 * kLength) * std::sin(th) +
                                3.0 / (kMass * kLength * kLength) * u) *
                                   kDt;
  new_th_dot = std::clamp(new_th_dot, -kMaxSpeed, kMaxSpeed);
  physical_[0] = th + new_th_dot * kDt;
  physical_[1] = new_th_dot;
  return StepResult{observe(), -cost, false};
}

// --- Tabular ------------------------------------------------------------------

State one_hot(std::size_t index, std::size_t size) {
  State s = State::Zero(static_cast<Eigen::Index>(size));
  s[static_cast<Eigen::Index>(index)] = 1.0;
  return s;
}

void TabularMdp::validate() const {
  if (n_states == 0 || n_actions == 0) {
    throw std::invalid_argument("TabularMdp needs at least one state and one action");
  }
  if (transitions.size() != n_states * n_actions) {
    throw std::invalid_argument("TabularMdp: transition table has the wrong shape");
  }
  for (const auto& row : transitions) {
    if (row.size() != static_cast<Eigen::Index>(n_states)) {
      throw std::invalid_argument("TabularMdp: transition row has the wrong length");
    }
    if ((row.array() < 0.0).any() || std::abs(row.sum() - 1.0) > 1e-12) {
      throw std::invalid_argument("TabularMdp: transition row is not a distribution");
    }
  }
  if (rewards.rows() != static_cast<Eigen::Index>(n_states) ||
      rewards.cols() != static_cast<Eigen::Index>(n_actions) || !rewards.allFinite()) {
    throw std::invalid_argument("TabularMdp: reward table has the wrong shape or is not finite");
  }
  if (rho0.size() != static_cast<Eigen::Index>(n_states) || (rho0.array() < 0.0).any() ||
      std::abs(rho0.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("TabularMdp: rho0 is not a distribution");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("TabularMdp: gamma must be in (0,1)");
  if (horizon < 1) throw std::invalid_argument("TabularMdp: H must be >= 1");
}

TabularMdp TabularMdp::from_json(const nlohmann::json& j) {
  TabularMdp mdp;
  const auto& p = j.at("P");
  mdp.n_states = p.size();
  mdp.n_actions = mdp.n_states == 0 ? 0 : p.at(0).size();
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (p.at(s).size() != mdp.n_actions) {
      throw std::invalid_argument("TabularMdp: ragged P");
    }
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const auto row = p.at(s).at(a).get<std::vector<double>>();
      mdp.transitions.emplace_back(
          Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(row.size())));
    }
  }
  const auto& r = j.at("r");
  mdp.rewards = RowMatrix::Zero(static_cast<Eigen::Index>(mdp.n_states),
                                static_cast<Eigen::Index>(mdp.n_actions));
  if (r.size() != mdp.n_states) throw std::invalid_argument("TabularMdp: r has the wrong shape");
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto row = r.at(s).get<std::vector<double>>();
    if (row.size() != mdp.n_actions) throw std::invalid_argument("TabularMdp: r has the wrong shape");
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      mdp.rewards(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = row[a];
    }
  }
  const auto rho = j.at("rho0").get<std::vector<double>>();
  mdp.rho0 = Eigen::Map<const Eigen::VectorXd>(rho.data(), static_cast<Eigen::Index>(rho.size()));
  mdp.gamma = j.at("gamma").get<double>();
  mdp.horizon = j.at("H").get<std::size_t>();
  mdp.validate();
  return mdp;
}

TabularMdp TabularMdp::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open MDP file " + path);
  return from_json(nlohmann::json::parse(in));
}

TabularMdp TabularMdp::benchmark(std::size_t horizon, double gamma) {
  // A slippery 4-state chain: action 1 moves right, action 0 moves left, each
  // succeeding with probability 0.8. Small reward for action 0 at the left end,
  // large reward for action 1 at the right end.
  TabularMdp mdp;
  mdp.n_states = 4;
  mdp.n_actions = 2;
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t a = 0; a < 2; ++a) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(4);
      const std::size_t target = a == 1 ? std::min<std::size_t>(s + 1, 3) : (s == 0 ? 0 : s - 1);
      row[static_cast<Eigen::Index>(target)] += 0.8;
      row[static_cast<Eigen::Index>(s)] += 0.2;
      mdp.transitions.push_back(row);
    }
  }
  mdp.rewards = RowMatrix::Zero(4, 2);
  mdp.rewards(0, 0) = 0.1;
  mdp.rewards(2, 1) = 0.2;
  mdp.rewards(3, 1) = 1.0;
  mdp.rho0 = Eigen::VectorXd::Zero(4);
  mdp.rho0 << 0.6, 0.4, 0.0, 0.0;
  mdp.gamma = gamma;
  mdp.horizon = horizon;
  mdp.validate();
  return mdp;
}

TabularEnv::TabularEnv(TabularMdp mdp)
    : Environment(EnvSpec{"tabular", mdp.n_states, ActionSpace::discrete(mdp.n_actions),
                          mdp.horizon, mdp.gamma, mdp.rewards.minCoeff(), mdp.rewards.maxCoeff()}),
      mdp_(std::move(mdp)) {
  mdp_.validate();
}

State TabularEnv::sample_initial_state(Rng& rng) {
  current_ = sample_categorical(mdp_.rho0, rng);
  return one_hot(current_, mdp_.n_states);
}

StepResult TabularEnv::transition(const Action& action, Rng& rng) {
  const double reward = mdp_.rewards(static_cast<Eigen::Index>(current_),
                                     static_cast<Eigen::Index>(action.index));
  current_ = sample_categorical(mdp_.next_distribution(current_, action.index), rng);
  return StepResult{one_hot(current_, mdp_.n_states), reward, false};
}

// ------------------------------------------------------------------------------

std::unique_ptr<Environment> make_environment(const std::string& name, std::size_t horizon,
                                              double gamma, const std::string& mdp_path) {
  if (name == "cartpole") return std::make_unique<CartPole>(horizon, gamma);
  if (name == "mountaincar") return std::make_unique<MountainCarContinuous>(horizon, gamma);
  if (name == "pendulum") return std::make_unique<Pendulum>(horizon, gamma);
  if (name == "tabular") {
    TabularMdp mdp = mdp_path.empty() ? TabularMdp::benchmark() : TabularMdp::load(mdp_path);
    mdp.horizon = horizon;
    mdp.gamma = gamma;
    return std::make_unique<TabularEnv>(std::move(mdp));
  }
  throw std::invalid_argument("unknown environment '" + name + "'");
}

Trajectory rollout(Environment& env, const Policy& policy,
                   const Eigen::Ref<const ParamVector>& theta, Rng& rng, std::size_t horizon) {
  if (horizon > env.spec().horizon) {
    throw std::invalid_argument("rollout horizon exceeds the environment horizon");
  }
  Trajectory traj;
  traj.actions.reserve(horizon);
  traj.rewards.reserve(horizon);
  traj.log_probs.reserve(horizon);
  traj.states.reserve(horizon + 1);
  if (horizon == 0) {
    return traj;
  }
  traj.states.push_back(env.reset(rng));
  for (std::size_t t = 0; t < horizon; ++t) {
    Action action = policy.sample(theta, traj.states.back(), rng);
    traj.log_probs.push_back(policy.log_prob(theta, traj.states.back(), action));
    StepResult result = env.step(action, rng);
    traj.actions.push_back(std::move(action));
    traj.rewards.push_back(result.reward);
    traj.states.push_back(std::move(result.next_state));
    if (result.done) {
      traj.terminated = true;
      break;
    }
  }
  return traj;
}

}  // namespace bgpo
