#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "bgpo/mlp.hpp"
#include "bgpo/rng.hpp"
#include "bgpo/types.hpp"

namespace bgpo {

/// An action from either a discrete or a continuous action space.
struct Action {
  std::size_t index = 0;  // discrete spaces
  Eigen::VectorXd value;  // continuous spaces; empty for discrete

  static Action discrete(std::size_t i) { return Action{i, {}}; }
  static Action continuous(Eigen::VectorXd v) { return Action{0, std::move(v)}; }
  bool is_discrete() const { return value.size() == 0; }

  friend bool operator==(const Action& a, const Action& b) {
    return a.index == b.index && a.value.size() == b.value.size() && a.value == b.value;
  }
};

/// A stochastic policy pi_theta(a|s). The object holds only structure;
/// parameters are passed explicitly so the same policy can be evaluated at
/// several parameter vectors (e.g. theta_k and theta_{k+1}).
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t num_params() const = 0;
  virtual ParamVector initial_params(Rng& rng) const = 0;

  virtual double log_prob(const Eigen::Ref<const ParamVector>& theta, const State& state,
                          const Action& action) const = 0;

  /// Returns log pi(a|s) and adds scale * grad_theta log pi(a|s) into `grad`.
  virtual double accumulate_score(const Eigen::Ref<const ParamVector>& theta,
                                  const State& state, const Action& action, double scale,
                                  Eigen::Ref<ParamVector> grad) const = 0;

  virtual Action sample(const Eigen::Ref<const ParamVector>& theta, const State& state,
                        Rng& rng) const = 0;

  /// Number of discrete actions, or 0 for continuous policies.
  virtual std::size_t num_actions() const = 0;

  /// grad_theta log pi(a|s).
  ParamVector score(const Eigen::Ref<const ParamVector>& theta, const State& state,
                    const Action& action) const;
};

/// Softmax over the MLP's logits, one per discrete action.
class CategoricalPolicy final : public Policy {
 public:
  explicit CategoricalPolicy(MlpSpec spec);

  std::string kind() const override { return "categorical"; }
  std::size_t num_params() const override { return mlp_.num_params(); }
  ParamVector initial_params(Rng& rng) const override { return mlp_.init_params(rng); }
  double log_prob(const Eigen::Ref<const ParamVector>& theta, const State& state,
                  const Action& action) const override;
  double accumulate_score(const Eigen::Ref<const ParamVector>& theta, const State& state,
                          const Action& action, double scale,
                          Eigen::Ref<ParamVector> grad) const override;
  Action sample(const Eigen::Ref<const ParamVector>& theta, const State& state,
                Rng& rng) const override;
  std::size_t num_actions() const override { return mlp_.spec().output_size(); }

  Eigen::VectorXd probabilities(const Eigen::Ref<const ParamVector>& theta,
                                const State& state) const;
  const Mlp& mlp() const { return mlp_; }

 private:
  Mlp mlp_;
};

/// Diagonal Gaussian with an MLP mean and state-independent log standard
/// deviations appended after the MLP parameters.
class GaussianPolicy final : public Policy {
 public:
  explicit GaussianPolicy(MlpSpec spec);

  std::string kind() const override { return "gaussian"; }
  std::size_t num_params() const override { return mlp_.num_params() + action_dim(); }
  /// MLP init; log_std = 0.
  ParamVector initial_params(Rng& rng) const override;
  double log_prob(const Eigen::Ref<const ParamVector>& theta, const State& state,
                  const Action& action) const override;
  double accumulate_score(const Eigen::Ref<const ParamVector>& theta, const State& state,
                          const Action& action, double scale,
                          Eigen::Ref<ParamVector> grad) const override;
  Action sample(const Eigen::Ref<const ParamVector>& theta, const State& state,
                Rng& rng) const override;
  std::size_t num_actions() const override { return 0; }

  std::size_t action_dim() const { return mlp_.spec().output_size(); }
  Eigen::VectorXd mean(const Eigen::Ref<const ParamVector>& theta, const State& state) const;
  Eigen::VectorXd log_std(const Eigen::Ref<const ParamVector>& theta) const;
  const Mlp& mlp() const { return mlp_; }

 private:
  Mlp mlp_;
};

/// Direct parameterization: theta holds pi(a|s) for each state, row-major by
/// state, every row on the action simplex. States are one-hot vectors; the
/// argmax entry is the state index.
class TabularSoftmaxPolicy final : public Policy {
 public:
  TabularSoftmaxPolicy(std::size_t n_states, std::size_t n_actions);

  std::string kind() const override { return "tabular"; }
  std::size_t num_params() const override { return n_states_ * n_actions_; }
  /// Uniform rows; `rng` is unused.
  ParamVector initial_params(Rng& rng) const override;
  double log_prob(const Eigen::Ref<const ParamVector>& theta, const State& state,
                  const Action& action) const override;
  double accumulate_score(const Eigen::Ref<const ParamVector>& theta, const State& state,
                          const Action& action, double scale,
                          Eigen::Ref<ParamVector> grad) const override;
  Action sample(const Eigen::Ref<const ParamVector>& theta, const State& state,
                Rng& rng) const override;
  std::size_t num_actions() const override { return n_actions_; }

  std::size_t num_states() const { return n_states_; }

 private:
  std::size_t state_index(const State& state) const;
  std::size_t n_states_;
  std::size_t n_actions_;
};

/// Scalar state-value function V_{theta_v}(s).
class ValueNetwork {
 public:
  /// `hidden` sizes between the state input and the scalar output.
  ValueNetwork(std::size_t state_dim, std::vector<std::size_t> hidden);
  explicit ValueNetwork(MlpSpec spec);

  std::size_t num_params() const { return mlp_.num_params(); }
  ParamVector initial_params(Rng& rng) const { return mlp_.init_params(rng); }
  double value(const Eigen::Ref<const ParamVector>& params, const State& state) const;
  ParamVector value_grad(const Eigen::Ref<const ParamVector>& params, const State& state) const;
  /// Returns V(s) and adds scale * dV/dparams into `grad`.
  double accumulate_value_grad(const Eigen::Ref<const ParamVector>& params, const State& state,
                               double scale, Eigen::Ref<ParamVector> grad) const;
  const Mlp& mlp() const { return mlp_; }

 private:
  Mlp mlp_;
};

/// Categorical draw from a probability vector.
std::size_t sample_categorical(const Eigen::Ref<const Eigen::VectorXd>& probs, Rng& rng);

}  // namespace bgpo
