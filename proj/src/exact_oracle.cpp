#include "bgpo/exact_oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace bgpo {

ExactValue exact_policy_value_and_gradient(const TabularMdp& mdp, const Policy& policy,
                                           const Eigen::Ref<const ParamVector>& theta) {
  mdp.validate();
  if (mdp.n_states > kExactMaxStates || mdp.horizon > kExactMaxHorizon) {
    throw std::invalid_argument("exact oracle supports at most " +
                                std::to_string(kExactMaxStates) + " states and horizon " +
                                std::to_string(kExactMaxHorizon));
  }
  if (policy.num_actions() != mdp.n_actions) {
    throw std::invalid_argument("exact oracle: policy and MDP disagree on the action count");
  }
  const auto S = static_cast<Eigen::Index>(mdp.n_states);
  const auto A = static_cast<Eigen::Index>(mdp.n_actions);
  const std::size_t H = mdp.horizon;

  RowMatrix pi(S, A);
  for (Eigen::Index s = 0; s < S; ++s) {
    const State state = one_hot(static_cast<std::size_t>(s), mdp.n_states);
    for (Eigen::Index a = 0; a < A; ++a) {
      pi(s, a) = std::exp(policy.log_prob(theta, state, Action::discrete(static_cast<std::size_t>(a))));
    }
  }

  // q[t](s,a): expected sum_{j>=t} gamma^{j-t} r_j given (s_t, a_t) = (s, a).
  std::vector<RowMatrix> q(H, RowMatrix::Zero(S, A));
  Eigen::VectorXd v_next = Eigen::VectorXd::Zero(S);
  for (std::size_t t = H; t-- > 0;) {
    for (Eigen::Index s = 0; s < S; ++s) {
      for (Eigen::Index a = 0; a < A; ++a) {
        q[t](s, a) = mdp.rewards(s, a) +
                     mdp.gamma * mdp.next_distribution(static_cast<std::size_t>(s),
                                                       static_cast<std::size_t>(a))
                                     .dot(v_next);
      }
    }
    v_next = (pi.array() * q[t].array()).rowwise().sum();
  }

  ExactValue out;
  out.value = mdp.rho0.dot(v_next);
  out.gradient = ParamVector::Zero(static_cast<Eigen::Index>(policy.num_params()));

  Eigen::VectorXd occupancy = mdp.rho0;
  double discount = 1.0;
  for (std::size_t t = 0; t < H; ++t) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(S);
    for (Eigen::Index s = 0; s < S; ++s) {
      if (occupancy[s] == 0.0) continue;
      const State state = one_hot(static_cast<std::size_t>(s), mdp.n_states);
      for (Eigen::Index a = 0; a < A; ++a) {
        const double weight = discount * occupancy[s] * pi(s, a) * q[t](s, a);
        if (weight != 0.0) {
          policy.accumulate_score(theta, state, Action::discrete(static_cast<std::size_t>(a)),
                                  weight, out.gradient);
        }
        next += occupancy[s] * pi(s, a) *
                mdp.next_distribution(static_cast<std::size_t>(s), static_cast<std::size_t>(a));
      }
    }
    occupancy = next;
    discount *= mdp.gamma;
  }
  return out;
}

}  // namespace bgpo
