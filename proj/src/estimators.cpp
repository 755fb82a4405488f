#include "bgpo/estimators.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bgpo/adam.hpp"

namespace bgpo {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string name_of(const EstimatorKind& kind) {
  return std::visit(overloaded{
                        [](const Reinforce&) -> std::string { return "reinforce"; },
                        [](const Pgt&) -> std::string { return "pgt"; },
                        [](const GaeActorCritic&) -> std::string { return "gae"; },
                    },
                    kind);
}

void ClipRange::validate() const {
  if (!(lo > 0.0 && lo <= 1.0 && hi >= 1.0)) {
    throw std::invalid_argument("clip range must satisfy 0 < lo <= 1 <= hi");
  }
}

double discounted_return(std::span<const double> rewards, double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

ParamVector estimate_gradient(const EstimatorKind& kind, const Trajectory& traj,
                              const Policy& policy, const Eigen::Ref<const ParamVector>& theta,
                              const Critic* critic, double gamma) {
  ParamVector grad = ParamVector::Zero(static_cast<Eigen::Index>(policy.num_params()));
  const std::size_t T = traj.length();
  if (T == 0) {
    if (std::holds_alternative<GaeActorCritic>(kind) && critic == nullptr) {
      throw std::invalid_argument("GAE estimator requires a value network");
    }
    return grad;
  }
  traj.check_consistent();

  // Per-step coefficient c_t such that g = sum_t c_t score_t.
  std::vector<double> coeff(T, 0.0);
  std::visit(
      overloaded{
          [&](const Reinforce& r) {
            const double centered = discounted_return(traj.rewards, gamma) - r.baseline;
            std::fill(coeff.begin(), coeff.end(), centered);
          },
          [&](const Pgt& p) {
            if (!p.per_step_baseline.empty() && p.per_step_baseline.size() < T) {
              throw std::invalid_argument("Pgt per-step baseline is shorter than the trajectory");
            }
            std::vector<double> discount(T);
            double d = 1.0;
            for (std::size_t t = 0; t < T; ++t) {
              discount[t] = d;
              d *= gamma;
            }
            double to_go = 0.0;
            for (std::size_t t = T; t-- > 0;) {
              const double b = p.per_step_baseline.empty() ? p.baseline : p.per_step_baseline[t];
              to_go += discount[t] * traj.rewards[t] - b;
              coeff[t] = to_go;
            }
          },
          [&](const GaeActorCritic& g) {
            if (critic == nullptr) {
              throw std::invalid_argument("GAE estimator requires a value network");
            }
            const GaeResult gae =
                gae_advantages(traj, *critic, gamma, g.lambda_gae, g.bootstrap_truncated);
            double d = 1.0;
            for (std::size_t t = 0; t < T; ++t) {
              coeff[t] = d * gae.advantages[t];
              d *= gamma;
            }
          },
      },
      kind);

  for (std::size_t t = 0; t < T; ++t) {
    if (coeff[t] != 0.0) {
      policy.accumulate_score(theta, traj.states[t], traj.actions[t], coeff[t], grad);
    }
  }
  return grad;
}

GaeResult gae_advantages(const Trajectory& traj, const Critic& critic, double gamma,
                         double lambda_gae, bool bootstrap_truncated) {
  const std::size_t T = traj.length();
  if (T == 0) {
    throw std::invalid_argument("gae_advantages needs a non-empty trajectory");
  }
  if (!(lambda_gae >= 0.0 && lambda_gae <= 1.0)) {
    throw std::invalid_argument("lambda_gae must be in [0,1]");
  }
  traj.check_consistent();
  std::vector<double> values(T + 1, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    values[t] = critic.net.value(critic.params, traj.states[t]);
  }
  if (bootstrap_truncated && !traj.terminated) {
    values[T] = critic.net.value(critic.params, traj.states[T]);
  }

  GaeResult out;
  out.advantages.assign(T, 0.0);
  out.value_targets.assign(T, 0.0);
  double running = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const double delta = traj.rewards[t] + gamma * values[t + 1] - values[t];
    running = delta + gamma * lambda_gae * running;
    out.advantages[t] = running;
    out.value_targets[t] = running + values[t];
  }
  return out;
}

double log_importance_ratio(const Trajectory& traj, const Policy& policy,
                            const Eigen::Ref<const ParamVector>& theta_old,
                            const Eigen::Ref<const ParamVector>& theta_new) {
  double total = 0.0;
  for (std::size_t t = 0; t < traj.length(); ++t) {
    total += policy.log_prob(theta_old, traj.states[t], traj.actions[t]) -
             policy.log_prob(theta_new, traj.states[t], traj.actions[t]);
  }
  return total;
}

ImportanceWeight importance_weight(const Trajectory& traj, const Policy& policy,
                                   const Eigen::Ref<const ParamVector>& theta_old,
                                   const Eigen::Ref<const ParamVector>& theta_new,
                                   const ClipRange& clip) {
  clip.validate();
  ImportanceWeight w;
  w.log_ratio = log_importance_ratio(traj, policy, theta_old, theta_new);
  if (std::isnan(w.log_ratio)) {
    w.nonfinite = true;
    w.clipped = true;
    w.weight = clip.hi;
    return w;
  }
  w.nonfinite = std::isinf(w.log_ratio);
  // Compare in the log domain so exp() never overflows.
  if (w.log_ratio > std::log(clip.hi)) {
    w.weight = clip.hi;
    w.clipped = true;
  } else if (w.log_ratio < std::log(clip.lo)) {
    w.weight = clip.lo;
    w.clipped = true;
  } else {
    w.weight = std::exp(w.log_ratio);
  }
  return w;
}

double value_loss(const ValueNetwork& net, const Eigen::Ref<const ParamVector>& params,
                  std::span<const State> states, std::span<const double> targets) {
  if (states.size() != targets.size()) {
    throw std::invalid_argument("value_loss: states and targets differ in length");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const double err = net.value(params, states[i]) - targets[i];
    loss += err * err;
  }
  return loss;
}

ValueFit fit_value_network(const ValueNetwork& net, ParamVector params,
                           std::span<const State> states, std::span<const double> targets,
                           double lr, std::size_t epochs) {
  if (!(lr > 0.0)) throw std::invalid_argument("value learning rate must be > 0");
  if (states.size() != targets.size()) {
    throw std::invalid_argument("fit_value_network: states and targets differ in length");
  }
  ValueFit fit;
  Adam adam(params.size(), lr);
  ParamVector grad(params.size());
  double loss = 0.0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    grad.setZero();
    loss = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
      // Forward once, then scale the reverse pass by dLoss/dV = 2 (V - y).
      Mlp::Tape tape;
      const double v = net.mlp().forward(params, states[i], tape)[0];
      const double err = v - targets[i];
      loss += err * err;
      net.mlp().accumulate_gradient(params, tape, Eigen::VectorXd::Ones(1), 2.0 * err, grad);
    }
    if (epoch == 0) fit.initial_loss = loss;
    adam.step(params, grad);
  }
  fit.final_loss = value_loss(net, params, states, targets);
  if (epochs == 0) fit.initial_loss = fit.final_loss;
  if (!params.allFinite()) {
    throw NumericError("value network parameters became non-finite");
  }
  fit.params = std::move(params);
  return fit;
}

}  // namespace bgpo
