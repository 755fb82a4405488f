#include "bgpo/policies.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace bgpo {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void require_discrete(const Action& action, std::size_t n_actions) {
  if (!action.is_discrete() || action.index >= n_actions) {
    throw std::invalid_argument("invalid discrete action index " + std::to_string(action.index));
  }
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return (logits.array() - lse).matrix();
}

}  // namespace

std::size_t sample_categorical(const Eigen::Ref<const Eigen::VectorXd>& probs, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double draw = unit(rng) * probs.sum();
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (draw < cumulative) return static_cast<std::size_t>(i);
  }
  // Rounding at the top end: last action with positive mass.
  for (Eigen::Index i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return static_cast<std::size_t>(i);
  }
  return 0;
}

ParamVector Policy::score(const Eigen::Ref<const ParamVector>& theta, const State& state,
                          const Action& action) const {
  ParamVector grad = ParamVector::Zero(static_cast<Eigen::Index>(num_params()));
  accumulate_score(theta, state, action, 1.0, grad);
  return grad;
}

// ---------------------------------------------------------------------------

CategoricalPolicy::CategoricalPolicy(MlpSpec spec) : mlp_(std::move(spec)) {}

Eigen::VectorXd CategoricalPolicy::probabilities(const Eigen::Ref<const ParamVector>& theta,
                                                 const State& state) const {
  return log_softmax(mlp_.forward(theta, state)).array().exp();
}

double CategoricalPolicy::log_prob(const Eigen::Ref<const ParamVector>& theta,
                                   const State& state, const Action& action) const {
  require_discrete(action, num_actions());
  return log_softmax(mlp_.forward(theta, state))[static_cast<Eigen::Index>(action.index)];
}

double CategoricalPolicy::accumulate_score(const Eigen::Ref<const ParamVector>& theta,
                                           const State& state, const Action& action,
                                           double scale, Eigen::Ref<ParamVector> grad) const {
  require_discrete(action, num_actions());
  Mlp::Tape tape;
  const Eigen::VectorXd logp = log_softmax(mlp_.forward(theta, state, tape));
  // d log softmax_a / d logits = e_a - softmax.
  Eigen::VectorXd dlogits = -logp.array().exp().matrix();
  dlogits[static_cast<Eigen::Index>(action.index)] += 1.0;
  mlp_.accumulate_gradient(theta, tape, dlogits, scale, grad);
  return logp[static_cast<Eigen::Index>(action.index)];
}

Action CategoricalPolicy::sample(const Eigen::Ref<const ParamVector>& theta, const State& state,
                                 Rng& rng) const {
  return Action::discrete(sample_categorical(probabilities(theta, state), rng));
}

// ---------------------------------------------------------------------------

GaussianPolicy::GaussianPolicy(MlpSpec spec) : mlp_(std::move(spec)) {}

ParamVector GaussianPolicy::initial_params(Rng& rng) const {
  ParamVector theta = ParamVector::Zero(static_cast<Eigen::Index>(num_params()));
  theta.head(static_cast<Eigen::Index>(mlp_.num_params())) = mlp_.init_params(rng);
  return theta;
}

Eigen::VectorXd GaussianPolicy::mean(const Eigen::Ref<const ParamVector>& theta,
                                     const State& state) const {
  return mlp_.forward(theta.head(static_cast<Eigen::Index>(mlp_.num_params())), state);
}

Eigen::VectorXd GaussianPolicy::log_std(const Eigen::Ref<const ParamVector>& theta) const {
  return theta.tail(static_cast<Eigen::Index>(action_dim()));
}

double GaussianPolicy::log_prob(const Eigen::Ref<const ParamVector>& theta, const State& state,
                                const Action& action) const {
  if (action.value.size() != static_cast<Eigen::Index>(action_dim())) {
    throw std::invalid_argument("GaussianPolicy: action has the wrong dimension");
  }
  const Eigen::ArrayXd mu = mean(theta, state).array();
  const Eigen::ArrayXd ls = log_std(theta).array();
  const Eigen::ArrayXd z = (action.value.array() - mu) / ls.exp();
  return (-0.5 * z.square() - ls - kHalfLog2Pi).sum();
}

double GaussianPolicy::accumulate_score(const Eigen::Ref<const ParamVector>& theta,
                                        const State& state, const Action& action, double scale,
                                        Eigen::Ref<ParamVector> grad) const {
  if (action.value.size() != static_cast<Eigen::Index>(action_dim())) {
    throw std::invalid_argument("GaussianPolicy: action has the wrong dimension");
  }
  const auto n_mlp = static_cast<Eigen::Index>(mlp_.num_params());
  const auto d = static_cast<Eigen::Index>(action_dim());
  Mlp::Tape tape;
  const Eigen::ArrayXd mu = mlp_.forward(theta.head(n_mlp), state, tape).array();
  const Eigen::ArrayXd ls = theta.tail(d).array();
  const Eigen::ArrayXd sigma = ls.exp();
  const Eigen::ArrayXd z = (action.value.array() - mu) / sigma;

  const Eigen::VectorXd dmean = (z / sigma).matrix();
  mlp_.accumulate_gradient(theta.head(n_mlp), tape, dmean, scale, grad.head(n_mlp));
  grad.tail(d) += scale * (z.square() - 1.0).matrix();
  return (-0.5 * z.square() - ls - kHalfLog2Pi).sum();
}

Action GaussianPolicy::sample(const Eigen::Ref<const ParamVector>& theta, const State& state,
                              Rng& rng) const {
  const Eigen::VectorXd mu = mean(theta, state);
  const Eigen::VectorXd sigma = log_std(theta).array().exp();
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd a(mu.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a[i] = mu[i] + sigma[i] * normal(rng);
  }
  return Action::continuous(std::move(a));
}

// ---------------------------------------------------------------------------

TabularSoftmaxPolicy::TabularSoftmaxPolicy(std::size_t n_states, std::size_t n_actions)
    : n_states_(n_states), n_actions_(n_actions) {
  if (n_states == 0 || n_actions == 0) {
    throw std::invalid_argument("TabularSoftmaxPolicy needs at least one state and action");
  }
}

ParamVector TabularSoftmaxPolicy::initial_params(Rng& /*rng*/) const {
  return ParamVector::Constant(static_cast<Eigen::Index>(num_params()),
                               1.0 / static_cast<double>(n_actions_));
}

std::size_t TabularSoftmaxPolicy::state_index(const State& state) const {
  if (state.size() != static_cast<Eigen::Index>(n_states_)) {
    throw std::invalid_argument("TabularSoftmaxPolicy expects one-hot states");
  }
  Eigen::Index index = 0;
  state.maxCoeff(&index);
  return static_cast<std::size_t>(index);
}

double TabularSoftmaxPolicy::log_prob(const Eigen::Ref<const ParamVector>& theta,
                                      const State& state, const Action& action) const {
  require_discrete(action, n_actions_);
  return std::log(theta[static_cast<Eigen::Index>(state_index(state) * n_actions_ + action.index)]);
}

double TabularSoftmaxPolicy::accumulate_score(const Eigen::Ref<const ParamVector>& theta,
                                              const State& state, const Action& action,
                                              double scale, Eigen::Ref<ParamVector> grad) const {
  require_discrete(action, n_actions_);
  const auto at = static_cast<Eigen::Index>(state_index(state) * n_actions_ + action.index);
  grad[at] += scale / theta[at];
  return std::log(theta[at]);
}

Action TabularSoftmaxPolicy::sample(const Eigen::Ref<const ParamVector>& theta,
                                    const State& state, Rng& rng) const {
  const auto row = static_cast<Eigen::Index>(state_index(state) * n_actions_);
  return Action::discrete(
      sample_categorical(theta.segment(row, static_cast<Eigen::Index>(n_actions_)), rng));
}

// ---------------------------------------------------------------------------

namespace {
MlpSpec value_spec(std::size_t state_dim, std::vector<std::size_t> hidden) {
  MlpSpec spec;
  spec.layer_sizes.push_back(state_dim);
  spec.layer_sizes.insert(spec.layer_sizes.end(), hidden.begin(), hidden.end());
  spec.layer_sizes.push_back(1);
  return spec;
}
}  // namespace

ValueNetwork::ValueNetwork(std::size_t state_dim, std::vector<std::size_t> hidden)
    : mlp_(value_spec(state_dim, std::move(hidden))) {}

ValueNetwork::ValueNetwork(MlpSpec spec) : mlp_(std::move(spec)) {
  if (mlp_.spec().output_size() != 1) {
    throw std::invalid_argument("ValueNetwork needs a scalar output layer");
  }
}

double ValueNetwork::value(const Eigen::Ref<const ParamVector>& params, const State& state) const {
  return mlp_.forward(params, state)[0];
}

ParamVector ValueNetwork::value_grad(const Eigen::Ref<const ParamVector>& params,
                                     const State& state) const {
  ParamVector grad = ParamVector::Zero(static_cast<Eigen::Index>(num_params()));
  accumulate_value_grad(params, state, 1.0, grad);
  return grad;
}

double ValueNetwork::accumulate_value_grad(const Eigen::Ref<const ParamVector>& params,
                                           const State& state, double scale,
                                           Eigen::Ref<ParamVector> grad) const {
  Mlp::Tape tape;
  const double v = mlp_.forward(params, state, tape)[0];
  mlp_.accumulate_gradient(params, tape, Eigen::VectorXd::Ones(1), scale, grad);
  return v;
}

}  // namespace bgpo
