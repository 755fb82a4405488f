#include "bgpo/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace bgpo {

std::string name_of(Algorithm algorithm) {
  return algorithm == Algorithm::kBgpo ? "bgpo" : "vr-bgpo";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "bgpo") return Algorithm::kBgpo;
  if (name == "vr-bgpo" || name == "vrbgpo") return Algorithm::kVrBgpo;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

void ScheduleParams::validate() const {
  if (!(b > 0.0 && m > 0.0 && c > 0.0 && lambda > 0.0)) {
    throw std::invalid_argument("schedule parameters b, m, c, lambda must all be > 0");
  }
}

double ScheduleParams::theorem_m(double b, double c) {
  const double cb = c * b;
  return std::max({2.0, b * b, b * b * b, cb * cb, cb * cb * cb, std::pow(c * b * b, 1.5)});
}

ScheduleParams ScheduleParams::theorem_regime(double b, double c, double lambda) {
  ScheduleParams p{b, theorem_m(b, c), c, lambda};
  p.validate();
  return p;
}

ScheduleValue eta_schedule(Algorithm algorithm, const ScheduleParams& params, std::uint64_t k) {
  if (k < 1) throw std::invalid_argument("eta_schedule: k must be >= 1");
  const double base = params.m + static_cast<double>(k);
  const double root = algorithm == Algorithm::kBgpo ? std::sqrt(base) : std::cbrt(base);
  ScheduleValue out;
  out.raw = params.b / root;
  out.clamped = out.raw > 1.0;
  out.value = out.clamped ? 1.0 : out.raw;
  return out;
}

ScheduleValue beta_schedule(Algorithm algorithm, const ScheduleParams& params, double eta_prev) {
  if (!(eta_prev > 0.0 && eta_prev <= 1.0)) {
    throw std::invalid_argument("beta_schedule: eta must be in (0,1]");
  }
  ScheduleValue out;
  out.raw = algorithm == Algorithm::kBgpo ? params.c * eta_prev : params.c * eta_prev * eta_prev;
  out.clamped = out.raw > 1.0;
  out.value = out.clamped ? 1.0 : out.raw;
  return out;
}

ParamVector bgpo_momentum(const Eigen::Ref<const ParamVector>& u,
                          const Eigen::Ref<const ParamVector>& g_new, double beta) {
  return (-beta) * g_new + (1.0 - beta) * u;
}

ParamVector vr_bgpo_momentum(const Eigen::Ref<const ParamVector>& u,
                             const Eigen::Ref<const ParamVector>& g_new,
                             const Eigen::Ref<const ParamVector>& weighted_g_old, double beta) {
  const ParamVector corrected = u + (weighted_g_old - g_new);
  return (-beta) * g_new + (1.0 - beta) * corrected;
}

void OptimizerSettings::validate() const {
  schedule.validate();
  bgpo::validate(mirror);
  clip.validate();
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
  if (const auto* gae = std::get_if<GaeActorCritic>(&estimator)) {
    if (!(gae->lambda_gae >= 0.0 && gae->lambda_gae <= 1.0)) {
      throw std::invalid_argument("lambda_gae must be in [0,1]");
    }
  }
  if (kind.actor_critic && !std::holds_alternative<GaeActorCritic>(estimator)) {
    throw std::invalid_argument("actor-critic optimizers need the GAE estimator");
  }
  if (!(value_fit.lr > 0.0)) throw std::invalid_argument("value learning rate must be > 0");
}

BregmanPolicyOptimizer::BregmanPolicyOptimizer(OptimizerSettings settings, const Policy& policy,
                                               const ValueNetwork* value_net)
    : settings_(std::move(settings)), policy_(policy), value_net_(value_net) {
  settings_.validate();
  if (uses_critic() && value_net_ == nullptr) {
    throw std::invalid_argument("the GAE estimator requires a value network");
  }
}

bool BregmanPolicyOptimizer::uses_critic() const {
  return std::holds_alternative<GaeActorCritic>(settings_.estimator);
}

std::optional<Critic> BregmanPolicyOptimizer::make_critic() const {
  if (!uses_critic()) return std::nullopt;
  return Critic{*value_net_, value_params_};
}

ParamVector BregmanPolicyOptimizer::batch_gradient(std::span<const Trajectory> batch,
                                                   const Eigen::Ref<const ParamVector>& theta) const {
  if (batch.empty()) throw std::invalid_argument("empty trajectory batch");
  ParamVector sum = ParamVector::Zero(static_cast<Eigen::Index>(policy_.num_params()));
  const std::optional<Critic> critic = make_critic();
  const Critic* critic_ptr = critic ? &*critic : nullptr;
  for (const auto& traj : batch) {
    sum += estimate_gradient(settings_.estimator, traj, policy_, theta, critic_ptr,
                             settings_.gamma);
  }
  return sum / static_cast<double>(batch.size());
}

void BregmanPolicyOptimizer::record_value_targets(std::span<const Trajectory> batch) {
  fit_states_.clear();
  fit_targets_.clear();
  if (!uses_critic()) return;
  const auto& gae = std::get<GaeActorCritic>(settings_.estimator);
  const Critic critic{*value_net_, value_params_};
  for (const auto& traj : batch) {
    if (traj.length() == 0) continue;
    const GaeResult result =
        gae_advantages(traj, critic, settings_.gamma, gae.lambda_gae, gae.bootstrap_truncated);
    for (std::size_t t = 0; t < traj.length(); ++t) {
      fit_states_.push_back(traj.states[t]);
      fit_targets_.push_back(result.value_targets[t]);
    }
  }
}

void BregmanPolicyOptimizer::check_finite(const ParamVector& v, const char* what) const {
  if (!v.allFinite()) {
    throw NumericError(std::string(what) + " became non-finite at iteration " +
                           std::to_string(estimate_.k),
                       static_cast<long>(estimate_.k));
  }
}

void BregmanPolicyOptimizer::initialize(ParamVector theta, std::span<const Trajectory> batch,
                                        ParamVector value_params) {
  if (theta.size() != static_cast<Eigen::Index>(policy_.num_params())) {
    throw std::invalid_argument("initial theta has the wrong size");
  }
  if (std::holds_alternative<NegativeEntropy>(settings_.mirror) &&
      !on_simplex(std::get<NegativeEntropy>(settings_.mirror), theta)) {
    throw std::invalid_argument("entropy mirror map needs theta on the simplex");
  }
  theta_ = std::move(theta);
  theta_prev_ = theta_;
  if (uses_critic()) {
    if (value_params.size() != static_cast<Eigen::Index>(value_net_->num_params())) {
      throw std::invalid_argument("initial value parameters have the wrong size");
    }
    value_params_ = std::move(value_params);
  }
  mirror_ = MirrorState::zeros(policy_.num_params());
  estimate_ = GradientEstimate{};
  estimate_.k = 1;
  estimate_.u = -batch_gradient(batch, theta_);
  check_finite(estimate_.u, "momentum");
  record_value_targets(batch);
  stats_ = IterationStats{};
  value_fits_ = 0;
  initialized_ = true;
  awaiting_momentum_ = false;
}

const ParamVector& BregmanPolicyOptimizer::update_parameters() {
  if (!initialized_) throw std::logic_error("optimizer used before initialize()");
  if (awaiting_momentum_) throw std::logic_error("update_parameters() called twice in a row");
  const Algorithm algorithm = settings_.kind.algorithm;
  const double lambda = settings_.schedule.lambda;

  mirror_ = advance_mirror_state(settings_.mirror, mirror_, estimate_.u);
  const ScheduleValue eta = eta_schedule(algorithm, settings_.schedule, estimate_.k);

  const ParamVector breg = bregman_gradient(settings_.mirror, mirror_, theta_, estimate_.u, lambda);
  stats_.metric = breg.norm();
  stats_.eta = eta.value;
  stats_.eta_clamped = eta.clamped;
  estimate_.eta = eta.value;

  theta_prev_ = theta_;
  if (std::holds_alternative<NegativeEntropy>(settings_.mirror)) {
    const ParamVector target = prox_step(settings_.mirror, mirror_, theta_, estimate_.u, lambda);
    theta_ = theta_ + eta.value * (target - theta_);
  } else {
    theta_ = theta_ - (lambda * eta.value) * breg;
  }
  check_finite(theta_, "policy parameters");

  if (uses_critic()) {
    const ValueFit fit = fit_value_network(*value_net_, value_params_, fit_states_, fit_targets_,
                                           settings_.value_fit.lr, settings_.value_fit.epochs);
    value_params_ = fit.params;
    stats_.value_loss_before = fit.initial_loss;
    stats_.value_loss_after = fit.final_loss;
    ++value_fits_;
  }
  awaiting_momentum_ = true;
  return theta_;
}

void BregmanPolicyOptimizer::update_momentum(std::span<const Trajectory> batch) {
  if (!awaiting_momentum_) throw std::logic_error("update_momentum() without update_parameters()");
  const Algorithm algorithm = settings_.kind.algorithm;
  const ScheduleValue beta = beta_schedule(algorithm, settings_.schedule, estimate_.eta);
  stats_.beta = beta.value;
  stats_.beta_clamped = beta.clamped;
  stats_.clipped_weights = 0;
  stats_.nonfinite_weights = 0;

  const ParamVector g_new = batch_gradient(batch, theta_);
  if (algorithm == Algorithm::kBgpo) {
    estimate_.u = bgpo_momentum(estimate_.u, g_new, beta.value);
  } else {
    ParamVector weighted_old = ParamVector::Zero(theta_.size());
    const std::optional<Critic> critic = make_critic();
    const Critic* critic_ptr = critic ? &*critic : nullptr;
    for (const auto& traj : batch) {
      const ImportanceWeight w =
          importance_weight(traj, policy_, theta_prev_, theta_, settings_.clip);
      stats_.clipped_weights += w.clipped ? 1 : 0;
      stats_.nonfinite_weights += w.nonfinite ? 1 : 0;
      weighted_old += w.weight * estimate_gradient(settings_.estimator, traj, policy_,
                                                   theta_prev_, critic_ptr, settings_.gamma);
    }
    weighted_old /= static_cast<double>(batch.size());
    estimate_.u = vr_bgpo_momentum(estimate_.u, g_new, weighted_old, beta.value);
  }
  estimate_.beta = beta.value;
  check_finite(estimate_.u, "momentum");
  ++estimate_.k;
  record_value_targets(batch);
  awaiting_momentum_ = false;
}

void BregmanPolicyOptimizer::step(const BatchSampler& sample) {
  const ParamVector& theta = update_parameters();
  const std::vector<Trajectory> batch = sample(theta);
  update_momentum(batch);
}

double BregmanPolicyOptimizer::metric_for(const Eigen::Ref<const ParamVector>& direction) const {
  return bregman_gradient(settings_.mirror, mirror_, theta_prev_, direction,
                          settings_.schedule.lambda)
      .norm();
}

}  // namespace bgpo
