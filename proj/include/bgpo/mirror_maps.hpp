#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>

#include "bgpo/types.hpp"

namespace bgpo {

/// psi(x) = 1/2 ||x||^2 on R^d.
struct Euclidean {};

/// psi(x) = 1/2 ||x||_p^2 on R^d, with the p-norm link functions.
struct LpNorm {
  double p = 2.0;
};

/// psi_k(x) = 1/2 x^T H_k x with H_k = diag(sqrt(v_k) + alpha), where v_k is an
/// exponential moving average of squared momentum entries.
struct DiagonalAdaptive {
  double alpha = 1e-8;
  double beta_ema = 0.999;
};

/// psi(x) = sum_i x_i log x_i on a product of probability simplices.
/// The parameter vector is split into consecutive blocks of `block_size`
/// entries, each of which lives on its own simplex; 0 means one block.
struct NegativeEntropy {
  std::size_t block_size = 0;
};

using MirrorMapKind = std::variant<Euclidean, LpNorm, DiagonalAdaptive, NegativeEntropy>;

/// Per-run mirror state. `v` is only touched by DiagonalAdaptive.
struct MirrorState {
  Eigen::VectorXd v;
  std::uint64_t step_count = 0;

  static MirrorState zeros(std::size_t dim) {
    return MirrorState{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)), 0};
  }
};

/// Throws std::invalid_argument when the map parameters are out of range
/// (p <= 1, alpha <= 0, beta_ema outside (0,1)).
void validate(const MirrorMapKind& kind);

std::string name_of(const MirrorMapKind& kind);

/// Strong-convexity modulus nu of the map w.r.t. the Euclidean norm, as used
/// in <u, prox - theta> <= -(nu/lambda) ||prox - theta||^2.
/// Euclidean: 1. DiagonalAdaptive: alpha. NegativeEntropy: 1 (Pinsker).
/// LpNorm: p - 1 for p <= 2 and 0 for p > 2, where 1/2 ||x||_p^2 is not
/// uniformly strongly convex in the Euclidean norm.
double strong_convexity(const MirrorMapKind& kind);

/// True when every block of `x` is on the probability simplex
/// (componentwise > 0, sum 1 within `tol`).
bool on_simplex(const NegativeEntropy& map, const Eigen::Ref<const Eigen::VectorXd>& x,
                double tol = 1e-9);

/// Gradient of psi at x (mirror map gradient). For LpNorm this is `link`.
Eigen::VectorXd mirror_gradient(const MirrorMapKind& kind, const MirrorState& state,
                                const Eigen::Ref<const Eigen::VectorXd>& x);

/// D_psi(y, x) = psi(y) - psi(x) - <grad psi(x), y - x>.
double bregman_distance(const MirrorMapKind& kind, const MirrorState& state,
                        const Eigen::Ref<const Eigen::VectorXd>& y,
                        const Eigen::Ref<const Eigen::VectorXd>& x);

/// Exact minimizer of <u, theta'> + (1/lambda) D_psi(theta', theta) over the
/// map's feasible set. `u` is the descent direction (estimate of grad f with
/// f = -J), so the step moves along -u. Throws NumericError on a non-finite
/// result.
ParamVector prox_step(const MirrorMapKind& kind, const MirrorState& state,
                      const Eigen::Ref<const Eigen::VectorXd>& theta,
                      const Eigen::Ref<const Eigen::VectorXd>& u, double lambda);

/// (theta - prox_step(theta, u, lambda)) / lambda. Returned in closed form for
/// Euclidean (u) and DiagonalAdaptive (H^{-1} u).
ParamVector bregman_gradient(const MirrorMapKind& kind, const MirrorState& state,
                             const Eigen::Ref<const Eigen::VectorXd>& theta,
                             const Eigen::Ref<const Eigen::VectorXd>& u, double lambda);

/// p-norm link: x_j -> sign(x_j) |x_j|^{p-1} / ||x||_p^{p-2}; link(0) = 0.
Eigen::VectorXd link(const LpNorm& map, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Inverse link, the same formula with the conjugate exponent q = p/(p-1).
Eigen::VectorXd link_conjugate(const LpNorm& map, const Eigen::Ref<const Eigen::VectorXd>& y);

/// v' = beta_ema v + (1 - beta_ema) u^2; step_count incremented.
MirrorState update_diagonal_state(const MirrorState& state,
                                  const Eigen::Ref<const Eigen::VectorXd>& u, double beta_ema,
                                  double alpha);

/// Applies update_diagonal_state for DiagonalAdaptive; only bumps step_count
/// for the other maps.
MirrorState advance_mirror_state(const MirrorMapKind& kind, const MirrorState& state,
                                 const Eigen::Ref<const Eigen::VectorXd>& u);

}  // namespace bgpo
