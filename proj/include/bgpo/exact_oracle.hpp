#pragma once

#include "bgpo/environments.hpp"
#include "bgpo/policies.hpp"

namespace bgpo {

/// Largest tabular problem the exact oracle accepts.
inline constexpr std::size_t kExactMaxStates = 8;
inline constexpr std::size_t kExactMaxHorizon = 10;

struct ExactValue {
  double value = 0.0;     // J(theta) = E[sum_{t<H} gamma^t r_t]
  ParamVector gradient;   // grad_theta J(theta)
};

/// Exact finite-horizon discounted objective and its gradient for a discrete
/// policy over one-hot states (TabularSoftmaxPolicy or a CategoricalPolicy
/// taking one-hot inputs), by forward state-occupancy and backward
/// rest-of-horizon action values:
///   grad J = sum_t gamma^t sum_s d_t(s) sum_a pi(a|s) score(s,a) Q_t(s,a).
/// Throws std::invalid_argument beyond kExactMaxStates / kExactMaxHorizon.
ExactValue exact_policy_value_and_gradient(const TabularMdp& mdp, const Policy& policy,
                                           const Eigen::Ref<const ParamVector>& theta);

}  // namespace bgpo
