#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bgpo/environments.hpp"
#include "bgpo/policies.hpp"
#include "bgpo/types.hpp"

namespace bgpo {

/// g = (sum_t score_t) (sum_t gamma^t r_t - baseline).
struct Reinforce {
  double baseline = 0.0;
};

/// g = sum_t score_t sum_{j>=t} (gamma^j r_j - b_j). b_j is
/// `per_step_baseline[j]` when given, else the constant `baseline`.
struct Pgt {
  double baseline = 0.0;
  std::vector<double> per_step_baseline;
};

/// g = sum_t gamma^t score_t A_t with GAE advantages A_t from a value network.
/// The gamma^t factor keeps the estimator aligned with the finite-horizon
/// discounted objective: with V = 0 and lambda_gae = 1 it equals Pgt.
struct GaeActorCritic {
  double lambda_gae = 0.97;
  bool bootstrap_truncated = false;  // bootstrap V(s_H) at horizon truncation
};

using EstimatorKind = std::variant<Reinforce, Pgt, GaeActorCritic>;

std::string name_of(const EstimatorKind& kind);

/// Clip range for the trajectory importance weight; 0 < lo <= 1 <= hi.
struct ClipRange {
  double lo = 0.5;
  double hi = 1.5;
  void validate() const;
};

/// A value network bound to its parameters.
struct Critic {
  const ValueNetwork& net;
  const ParamVector& params;
};

/// sum_t gamma^t r_t.
double discounted_return(std::span<const double> rewards, double gamma);

/// Ascent-direction estimate of grad J(theta) from one trajectory. The
/// trajectory's states/actions are rescored at `theta`, so the same
/// trajectory can be evaluated at parameters other than the sampling ones.
/// Throws std::invalid_argument for GaeActorCritic without a critic.
ParamVector estimate_gradient(const EstimatorKind& kind, const Trajectory& traj,
                              const Policy& policy, const Eigen::Ref<const ParamVector>& theta,
                              const Critic* critic, double gamma);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> value_targets;  // A_t + V(s_t)
};

/// delta_t = r_t + gamma V(s_{t+1}) - V(s_t), A_t = sum_l (gamma lambda)^l delta_{t+l}.
/// V after the last step is 0 unless `bootstrap_truncated` and the
/// trajectory was cut by the horizon rather than terminated.
GaeResult gae_advantages(const Trajectory& traj, const Critic& critic, double gamma,
                         double lambda_gae, bool bootstrap_truncated = false);

/// sum_t [log pi_old(a_t|s_t) - log pi_new(a_t|s_t)].
double log_importance_ratio(const Trajectory& traj, const Policy& policy,
                            const Eigen::Ref<const ParamVector>& theta_old,
                            const Eigen::Ref<const ParamVector>& theta_new);

struct ImportanceWeight {
  double weight = 1.0;     // clipped
  double log_ratio = 0.0;  // unclipped, may be non-finite
  bool clipped = false;
  bool nonfinite = false;
};

/// w(tau | theta_old, theta_new) = p(tau|theta_old) / p(tau|theta_new),
/// computed in the log domain and clipped to [clip.lo, clip.hi]. A NaN log
/// ratio is clipped to clip.hi and flagged.
ImportanceWeight importance_weight(const Trajectory& traj, const Policy& policy,
                                   const Eigen::Ref<const ParamVector>& theta_old,
                                   const Eigen::Ref<const ParamVector>& theta_new,
                                   const ClipRange& clip);

/// sum_i (V(s_i) - target_i)^2.
double value_loss(const ValueNetwork& net, const Eigen::Ref<const ParamVector>& params,
                  std::span<const State> states, std::span<const double> targets);

struct ValueFit {
  ParamVector params;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// `epochs` full-batch Adam steps (beta1 0.9, beta2 0.999, eps 1e-8) on the
/// summed squared loss. epochs = 0 leaves the parameters untouched.
ValueFit fit_value_network(const ValueNetwork& net, ParamVector params,
                           std::span<const State> states, std::span<const double> targets,
                           double lr, std::size_t epochs);

}  // namespace bgpo
