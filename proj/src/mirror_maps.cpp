#include "bgpo/mirror_maps.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bgpo {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kEntropyFloor = 1e-12;

void require_same_size(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

Eigen::Index block_length(const NegativeEntropy& map, Eigen::Index dim) {
  const auto block = map.block_size == 0 ? dim : static_cast<Eigen::Index>(map.block_size);
  if (block <= 0 || dim % block != 0) {
    throw std::invalid_argument("NegativeEntropy: dimension " + std::to_string(dim) +
                                " is not a multiple of the block size " +
                                std::to_string(block));
  }
  return block;
}

void require_simplex(const NegativeEntropy& map, const Eigen::Ref<const Eigen::VectorXd>& x,
                     const char* what) {
  if (!on_simplex(map, x)) {
    throw std::invalid_argument(std::string(what) + ": argument is not on the simplex");
  }
}

// ||x||_p with the max entry factored out.
double pnorm(double p, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double largest = x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
  if (largest == 0.0 || !std::isfinite(largest)) return largest;
  return largest * std::pow((x.array().abs() / largest).pow(p).sum(), 1.0 / p);
}

// sign(x) |x|^{p-1} / ||x||_p^{p-2}, evaluated as sign(x) (|x|/n)^{p-1} n to
// keep intermediate powers bounded.
Eigen::VectorXd pnorm_link(double p, const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  const double norm = pnorm(p, x);
  if (norm == 0.0) {
    return out;
  }
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x[j] == 0.0) continue;
    const double magnitude = std::pow(std::abs(x[j]) / norm, p - 1.0) * norm;
    out[j] = std::copysign(magnitude, x[j]);
  }
  return out;
}

double half_pnorm_squared(double p, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double norm = pnorm(p, x);
  return 0.5 * norm * norm;
}

Eigen::ArrayXd diagonal_scale(const DiagonalAdaptive& map, const MirrorState& state,
                              Eigen::Index dim) {
  require_same_size(state.v.size(), dim, "DiagonalAdaptive state");
  return state.v.array().sqrt() + map.alpha;
}

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite result");
  }
}

}  // namespace

void validate(const MirrorMapKind& kind) {
  std::visit(overloaded{
                 [](const Euclidean&) {},
                 [](const LpNorm& m) {
                   if (!(m.p > 1.0) || !std::isfinite(m.p)) {
                     throw std::invalid_argument("LpNorm requires finite p > 1");
                   }
                 },
                 [](const DiagonalAdaptive& m) {
                   if (!(m.alpha > 0.0)) {
                     throw std::invalid_argument("DiagonalAdaptive requires alpha > 0");
                   }
                   if (!(m.beta_ema > 0.0 && m.beta_ema < 1.0)) {
                     throw std::invalid_argument("DiagonalAdaptive requires beta_ema in (0,1)");
                   }
                 },
                 [](const NegativeEntropy&) {},
             },
             kind);
}

std::string name_of(const MirrorMapKind& kind) {
  return std::visit(overloaded{
                        [](const Euclidean&) -> std::string { return "euclidean"; },
                        [](const LpNorm&) -> std::string { return "lp"; },
                        [](const DiagonalAdaptive&) -> std::string { return "diagonal"; },
                        [](const NegativeEntropy&) -> std::string { return "entropy"; },
                    },
                    kind);
}

double strong_convexity(const MirrorMapKind& kind) {
  return std::visit(overloaded{
                        [](const Euclidean&) { return 1.0; },
                        [](const LpNorm& m) { return m.p <= 2.0 ? m.p - 1.0 : 0.0; },
                        [](const DiagonalAdaptive& m) { return m.alpha; },
                        [](const NegativeEntropy&) { return 1.0; },
                    },
                    kind);
}

bool on_simplex(const NegativeEntropy& map, const Eigen::Ref<const Eigen::VectorXd>& x,
                double tol) {
  if (x.size() == 0) return false;
  const auto block = block_length(map, x.size());
  for (Eigen::Index start = 0; start < x.size(); start += block) {
    const auto row = x.segment(start, block);
    if ((row.array() <= 0.0).any() || !row.allFinite()) return false;
    if (std::abs(row.sum() - 1.0) > tol) return false;
  }
  return true;
}

Eigen::VectorXd mirror_gradient(const MirrorMapKind& kind, const MirrorState& state,
                                const Eigen::Ref<const Eigen::VectorXd>& x) {
  return std::visit(
      overloaded{
          [&](const Euclidean&) -> Eigen::VectorXd { return x; },
          [&](const LpNorm& m) -> Eigen::VectorXd { return link(m, x); },
          [&](const DiagonalAdaptive& m) -> Eigen::VectorXd {
            return (diagonal_scale(m, state, x.size()) * x.array()).matrix();
          },
          [&](const NegativeEntropy&) -> Eigen::VectorXd {
            return (x.array().log() + 1.0).matrix();
          },
      },
      kind);
}

double bregman_distance(const MirrorMapKind& kind, const MirrorState& state,
                        const Eigen::Ref<const Eigen::VectorXd>& y,
                        const Eigen::Ref<const Eigen::VectorXd>& x) {
  require_same_size(y.size(), x.size(), "bregman_distance");
  if (const auto* entropy = std::get_if<NegativeEntropy>(&kind)) {
    require_simplex(*entropy, y, "bregman_distance(y)");
    require_simplex(*entropy, x, "bregman_distance(x)");
  }
  if (y == x) return 0.0;

  const double d = std::visit(
      overloaded{
          [&](const Euclidean&) { return 0.5 * (y - x).squaredNorm(); },
          [&](const LpNorm& m) {
            return half_pnorm_squared(m.p, y) - half_pnorm_squared(m.p, x) -
                   link(m, x).dot(y - x);
          },
          [&](const DiagonalAdaptive& m) {
            const Eigen::ArrayXd diff = (y - x).array();
            return 0.5 * (diagonal_scale(m, state, x.size()) * diff.square()).sum();
          },
          [&](const NegativeEntropy&) {
            const Eigen::ArrayXd ya = y.array();
            const Eigen::ArrayXd xa = x.array();
            return (ya * (ya / xa).log() - ya + xa).sum();
          },
      },
      kind);
  return std::max(d, 0.0);
}

Eigen::VectorXd link(const LpNorm& map, const Eigen::Ref<const Eigen::VectorXd>& x) {
  validate(map);
  return pnorm_link(map.p, x);
}

Eigen::VectorXd link_conjugate(const LpNorm& map, const Eigen::Ref<const Eigen::VectorXd>& y) {
  validate(map);
  const double q = map.p / (map.p - 1.0);
  return pnorm_link(q, y);
}

ParamVector prox_step(const MirrorMapKind& kind, const MirrorState& state,
                      const Eigen::Ref<const Eigen::VectorXd>& theta,
                      const Eigen::Ref<const Eigen::VectorXd>& u, double lambda) {
  require_same_size(theta.size(), u.size(), "prox_step");
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("prox_step requires lambda > 0");
  }
  if (u.allFinite() && (u.array() == 0.0).all() && !std::holds_alternative<NegativeEntropy>(kind)) {
    return theta;
  }
  ParamVector out = std::visit(
      overloaded{
          [&](const Euclidean&) -> ParamVector { return theta - lambda * u; },
          [&](const LpNorm& m) -> ParamVector {
            return link_conjugate(m, link(m, theta) - lambda * u);
          },
          [&](const DiagonalAdaptive& m) -> ParamVector {
            const Eigen::ArrayXd scale = diagonal_scale(m, state, theta.size());
            return (theta.array() - lambda * u.array() / scale).matrix();
          },
          [&](const NegativeEntropy& m) -> ParamVector {
            require_simplex(m, theta, "prox_step(theta)");
            const auto block = block_length(m, theta.size());
            ParamVector next(theta.size());
            for (Eigen::Index start = 0; start < theta.size(); start += block) {
              // Multiplicative weights in the log domain, shifted by the max.
              Eigen::ArrayXd logits = theta.segment(start, block).array().log() -
                                      lambda * u.segment(start, block).array();
              logits -= logits.maxCoeff();
              Eigen::ArrayXd w = logits.exp();
              w /= w.sum();
              w = w.max(kEntropyFloor);
              w /= w.sum();
              next.segment(start, block) = w.matrix();
            }
            return next;
          },
      },
      kind);
  require_finite(out, "prox_step");
  return out;
}

ParamVector bregman_gradient(const MirrorMapKind& kind, const MirrorState& state,
                             const Eigen::Ref<const Eigen::VectorXd>& theta,
                             const Eigen::Ref<const Eigen::VectorXd>& u, double lambda) {
  require_same_size(theta.size(), u.size(), "bregman_gradient");
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("bregman_gradient requires lambda > 0");
  }
  if (std::holds_alternative<Euclidean>(kind)) {
    return u;
  }
  if (const auto* diag = std::get_if<DiagonalAdaptive>(&kind)) {
    ParamVector g = (u.array() / diagonal_scale(*diag, state, theta.size())).matrix();
    require_finite(g, "bregman_gradient");
    return g;
  }
  return (theta - prox_step(kind, state, theta, u, lambda)) / lambda;
}

MirrorState update_diagonal_state(const MirrorState& state,
                                  const Eigen::Ref<const Eigen::VectorXd>& u, double beta_ema,
                                  double alpha) {
  validate(DiagonalAdaptive{alpha, beta_ema});
  require_same_size(state.v.size(), u.size(), "update_diagonal_state");
  MirrorState next;
  next.v = beta_ema * state.v.array() + (1.0 - beta_ema) * u.array().square();
  next.step_count = state.step_count + 1;
  return next;
}

MirrorState advance_mirror_state(const MirrorMapKind& kind, const MirrorState& state,
                                 const Eigen::Ref<const Eigen::VectorXd>& u) {
  if (const auto* diag = std::get_if<DiagonalAdaptive>(&kind)) {
    return update_diagonal_state(state, u, diag->beta_ema, diag->alpha);
  }
  MirrorState next = state;
  ++next.step_count;
  return next;
}

}  // namespace bgpo
