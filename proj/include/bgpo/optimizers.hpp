#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bgpo/environments.hpp"
#include "bgpo/estimators.hpp"
#include "bgpo/mirror_maps.hpp"
#include "bgpo/policies.hpp"

namespace bgpo {

enum class Algorithm { kBgpo, kVrBgpo };

std::string name_of(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& name);

struct OptimizerKind {
  Algorithm algorithm = Algorithm::kBgpo;
  bool actor_critic = false;
};

/// Tuning parameters {lambda, b, m, c}.
struct ScheduleParams {
  double b = 1.5;
  double m = 2.0;
  double c = 25.0;
  double lambda = 1e-3;

  void validate() const;

  /// Smallest m that satisfies the step-size conditions of both convergence
  /// theorems for the given b and c: max(2, b^2, b^3, (cb)^2, (cb)^3, (c b^2)^{3/2}).
  static double theorem_m(double b, double c);
  static ScheduleParams theorem_regime(double b, double c, double lambda);
};

struct ScheduleValue {
  double value = 1.0;  // after clamping to <= 1
  double raw = 1.0;    // formula value
  bool clamped = false;
};

/// BGPO: b / (m + k)^{1/2}; VR-BGPO: b / (m + k)^{1/3}; clamped to <= 1.
ScheduleValue eta_schedule(Algorithm algorithm, const ScheduleParams& params, std::uint64_t k);

/// BGPO: c eta; VR-BGPO: c eta^2; clamped to <= 1.
ScheduleValue beta_schedule(Algorithm algorithm, const ScheduleParams& params, double eta_prev);

/// u_{k+1} = -beta g_new + (1 - beta) u.
ParamVector bgpo_momentum(const Eigen::Ref<const ParamVector>& u,
                          const Eigen::Ref<const ParamVector>& g_new, double beta);

/// u_{k+1} = -beta g_new + (1 - beta) (u + (w g_old - g_new)), where
/// `weighted_g_old` is the (batch mean of) w(tau|theta_k,theta_{k+1}) g(tau|theta_k).
ParamVector vr_bgpo_momentum(const Eigen::Ref<const ParamVector>& u,
                             const Eigen::Ref<const ParamVector>& g_new,
                             const Eigen::Ref<const ParamVector>& weighted_g_old, double beta);

/// Momentum buffer plus the schedule values it was built with.
struct GradientEstimate {
  ParamVector u;          // estimate of grad f = -grad J (descent direction)
  std::uint64_t k = 1;    // iteration index of u
  double eta = 1.0;       // eta used by the latest parameter update
  double beta = 1.0;      // beta used to form u
};

struct ValueFitSettings {
  double lr = 2.5e-3;
  std::size_t epochs = 10;
};

struct OptimizerSettings {
  OptimizerKind kind;
  ScheduleParams schedule;
  MirrorMapKind mirror = DiagonalAdaptive{};
  EstimatorKind estimator = GaeActorCritic{};
  double gamma = 0.99;
  ClipRange clip;
  ValueFitSettings value_fit;

  void validate() const;
};

/// Diagnostics of the most recent iteration.
struct IterationStats {
  double eta = 1.0;
  bool eta_clamped = false;
  double beta = 1.0;
  bool beta_clamped = false;
  double metric = 0.0;             // ||(theta_k - prox) / lambda||, u_k surrogate
  std::size_t clipped_weights = 0;
  std::size_t nonfinite_weights = 0;
  double value_loss_before = 0.0;
  double value_loss_after = 0.0;
};

using BatchSampler = std::function<std::vector<Trajectory>(const ParamVector& theta)>;

/// BGPO / VR-BGPO iteration state. One iteration is
///   update_parameters()   prox step + interpolation (+ value fit)
///   sample a batch at the returned theta_{k+1}
///   update_momentum()     new momentum buffer u_{k+1}
/// With a batch of B > 1 trajectories every g is the batch mean, and the
/// importance weights are applied per trajectory before averaging.
class BregmanPolicyOptimizer {
 public:
  /// `value_net` is required (and only used) when the estimator is GAE.
  BregmanPolicyOptimizer(OptimizerSettings settings, const Policy& policy,
                         const ValueNetwork* value_net = nullptr);

  /// theta_1, its batch tau_1 and (actor-critic) theta_v_1; u_1 = -g(tau_1|theta_1).
  void initialize(ParamVector theta, std::span<const Trajectory> batch,
                  ParamVector value_params = {});

  /// Steps 4-5 of one iteration, then the value-network fit for GAE. Returns
  /// theta_{k+1}. Throws NumericError on non-finite parameters.
  const ParamVector& update_parameters();

  /// Step 6 with a batch sampled at theta_{k+1}. Advances k.
  void update_momentum(std::span<const Trajectory> batch);

  /// update_parameters(), sample, update_momentum().
  void step(const BatchSampler& sample);

  /// ||B|| of the latest parameter update (u_k in place of grad f).
  double convergence_metric() const { return stats_.metric; }

  /// ||B^{psi_k}_{lambda, <., direction>}(theta_k)|| for an arbitrary direction
  /// (e.g. the exact grad f on a tabular problem), with the current psi_k.
  double metric_for(const Eigen::Ref<const ParamVector>& direction) const;

  const ParamVector& theta() const { return theta_; }
  /// theta_k after update_parameters() (the parameters the momentum step reweights from).
  const ParamVector& previous_theta() const { return theta_prev_; }
  const ParamVector& value_params() const { return value_params_; }
  const GradientEstimate& estimate() const { return estimate_; }
  const MirrorState& mirror_state() const { return mirror_; }
  const IterationStats& stats() const { return stats_; }
  const OptimizerSettings& settings() const { return settings_; }
  std::uint64_t iteration() const { return estimate_.k; }
  std::size_t value_fits() const { return value_fits_; }
  bool uses_critic() const;

  /// Batch mean of estimate_gradient at `theta` (ascent direction).
  ParamVector batch_gradient(std::span<const Trajectory> batch,
                             const Eigen::Ref<const ParamVector>& theta) const;

 private:
  std::optional<Critic> make_critic() const;
  void record_value_targets(std::span<const Trajectory> batch);
  void check_finite(const ParamVector& v, const char* what) const;

  OptimizerSettings settings_;
  const Policy& policy_;
  const ValueNetwork* value_net_;

  ParamVector theta_;
  ParamVector theta_prev_;
  ParamVector value_params_;
  GradientEstimate estimate_;
  MirrorState mirror_;
  IterationStats stats_;
  bool initialized_ = false;
  bool awaiting_momentum_ = false;
  std::size_t value_fits_ = 0;

  std::vector<State> fit_states_;
  std::vector<double> fit_targets_;
};

}  // namespace bgpo
