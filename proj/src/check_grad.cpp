#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "bgpo/estimators.hpp"
#include "bgpo/exact_oracle.hpp"
#include "bgpo/gradcheck.hpp"
#include "bgpo/harness.hpp"

namespace bgpo {

ParamVector central_difference(const ScalarFn& f, const ParamVector& x, double h) {
  ParamVector grad(x.size());
  ParamVector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

ParamVector central_difference_weights(const ScalarFn& f, const MlpSpec& spec,
                                       const ParamVector& x, const WeightPacker& pack,
                                       double h) {
  const auto n = static_cast<Eigen::Index>(spec.num_params());
  const MlpWeights base = unflatten(spec, x.head(n));
  const ParamVector tail = x.tail(x.size() - n);
  const auto eval = [&](const MlpWeights& w) {
    ParamVector p(x.size());
    p.head(n) = pack(w);
    p.tail(tail.size()) = tail;
    return f(p);
  };
  ParamVector grad(x.size());
  Eigen::Index idx = 0;
  MlpWeights probe = base;
  for (std::size_t l = 0; l < base.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < base.weights[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < base.weights[l].cols(); ++j) {
        const double w0 = base.weights[l](i, j);
        probe.weights[l](i, j) = w0 + h;
        const double up = eval(probe);
        probe.weights[l](i, j) = w0 - h;
        const double down = eval(probe);
        probe.weights[l](i, j) = w0;
        grad[idx++] = (up - down) / (2.0 * h);
      }
    }
    for (Eigen::Index i = 0; i < base.biases[l].size(); ++i) {
      const double b0 = base.biases[l][i];
      probe.biases[l][i] = b0 + h;
      const double up = eval(probe);
      probe.biases[l][i] = b0 - h;
      const double down = eval(probe);
      probe.biases[l][i] = b0;
      grad[idx++] = (up - down) / (2.0 * h);
    }
  }
  ParamVector probe_x = x;
  for (Eigen::Index i = n; i < x.size(); ++i) {
    probe_x[i] = x[i] + h;
    const double up = f(probe_x);
    probe_x[i] = x[i] - h;
    const double down = f(probe_x);
    probe_x[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

ParamVector flatten_column_major(const MlpWeights& weights) {
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < weights.weights.size(); ++l) {
    total += weights.weights[l].size() + weights.biases[l].size();
  }
  ParamVector out(total);
  Eigen::Index idx = 0;
  for (std::size_t l = 0; l < weights.weights.size(); ++l) {
    const auto& w = weights.weights[l];
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) out[idx++] = w(i, j);
    }
    out.segment(idx, weights.biases[l].size()) = weights.biases[l];
    idx += weights.biases[l].size();
  }
  return out;
}

double relative_error(const ParamVector& a, const ParamVector& b, double floor) {
  const double scale = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / scale;
}

bool CheckReport::passed() const {
  return std::all_of(items.begin(), items.end(), [](const CheckItem& c) { return c.passed; });
}

std::string CheckReport::text() const {
  std::ostringstream out;
  for (const auto& item : items) {
    out << (item.passed ? "PASS " : "FAIL ") << item.name << ": " << item.detail << '\n';
  }
  if (!tabular_z_scores.empty()) {
    out << "tabular z-scores:";
    for (double z : tabular_z_scores) out << fmt::format(" {:+.2f}", z);
    out << '\n';
  }
  return out.str();
}

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kFdTolerance = 1e-4;

State random_state(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal;
  State s(static_cast<Eigen::Index>(dim));
  for (auto& v : s) v = normal(rng);
  return s;
}

WeightPacker packer(bool corrupt) {
  if (corrupt) return [](const MlpWeights& w) { return flatten_column_major(w); };
  return [](const MlpWeights& w) { return flatten(w); };
}

CheckItem summarize(const std::string& name, const std::vector<double>& errors) {
  const double worst = *std::max_element(errors.begin(), errors.end());
  return CheckItem{name, worst <= kFdTolerance,
                   fmt::format("{} instances, max relative error {:.3e} (tol {:.0e})",
                               errors.size(), worst, kFdTolerance)};
}

CheckItem check_mlp_policy(const Policy& policy, const MlpSpec& spec, std::size_t instances,
                           bool corrupt, Rng& rng, const std::string& name) {
  std::normal_distribution<double> normal;
  std::vector<double> errors;
  for (std::size_t n = 0; n < instances; ++n) {
    ParamVector theta = policy.initial_params(rng);
    for (auto& v : theta) v += 0.3 * normal(rng);
    const State s = random_state(spec.input_size(), rng);
    const Action a = policy.sample(theta, s, rng);
    const ParamVector analytic = policy.score(theta, s, a);
    const ScalarFn f = [&](const ParamVector& p) { return policy.log_prob(p, s, a); };
    const ParamVector fd = central_difference_weights(f, spec, theta, packer(corrupt), kFdStep);
    errors.push_back(relative_error(analytic, fd));
  }
  return summarize(name, errors);
}

}  // namespace

CheckReport check_grad(const CheckOptions& options) {
  CheckReport report;
  Rng rng(derive_seed(options.seed, 0));
  const std::size_t instances = options.quick ? 25 : 100;

  {
    const MlpSpec spec{{4, 8, 8, 3}};
    const CategoricalPolicy policy(spec);
    report.items.push_back(
        check_mlp_policy(policy, spec, instances, options.corrupt_flatten, rng, "categorical score"));
  }
  {
    const MlpSpec spec{{3, 8, 8, 2}};
    const GaussianPolicy policy(spec);
    report.items.push_back(
        check_mlp_policy(policy, spec, instances, options.corrupt_flatten, rng, "gaussian score"));
  }
  {
    const TabularSoftmaxPolicy policy(3, 4);
    std::gamma_distribution<double> gamma(2.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, 2);
    std::vector<double> errors;
    for (std::size_t n = 0; n < instances; ++n) {
      ParamVector theta(12);
      for (auto& v : theta) v = gamma(rng) + 0.05;
      for (Eigen::Index s = 0; s < 3; ++s) theta.segment(4 * s, 4) /= theta.segment(4 * s, 4).sum();
      const State s = one_hot(pick(rng), 3);
      const Action a = policy.sample(theta, s, rng);
      const ScalarFn f = [&](const ParamVector& p) { return policy.log_prob(p, s, a); };
      errors.push_back(relative_error(policy.score(theta, s, a), central_difference(f, theta, kFdStep)));
    }
    report.items.push_back(summarize("tabular score", errors));
  }
  {
    const ValueNetwork net(4, {16, 16});
    const MlpSpec& spec = net.mlp().spec();
    std::normal_distribution<double> normal;
    std::vector<double> errors;
    for (std::size_t n = 0; n < instances; ++n) {
      ParamVector params = net.initial_params(rng);
      for (auto& v : params) v += 0.3 * normal(rng);
      const State s = random_state(4, rng);
      const ScalarFn f = [&](const ParamVector& p) { return net.value(p, s); };
      const ParamVector fd =
          central_difference_weights(f, spec, params, packer(options.corrupt_flatten), kFdStep);
      errors.push_back(relative_error(net.value_grad(params, s), fd));
    }
    report.items.push_back(summarize("value gradient", errors));
  }
  {
    const TabularMdp mdp = TabularMdp::benchmark();
    TabularEnv env(mdp);
    const CategoricalPolicy policy(MlpSpec{{mdp.n_states, mdp.n_actions}});
    ParamVector theta = policy.initial_params(rng);
    const ParamVector exact = exact_policy_value_and_gradient(mdp, policy, theta).gradient;
    const std::size_t samples = options.quick ? 20000 : 100000;
    const auto d = theta.size();
    ParamVector mean = ParamVector::Zero(d);
    ParamVector m2 = ParamVector::Zero(d);
    for (std::size_t n = 1; n <= samples; ++n) {
      const Trajectory traj = rollout(env, policy, theta, rng, mdp.horizon);
      const ParamVector g = estimate_gradient(Pgt{}, traj, policy, theta, nullptr, mdp.gamma);
      const ParamVector delta = g - mean;
      mean += delta / static_cast<double>(n);
      m2 += delta.cwiseProduct(g - mean);
    }
    const ParamVector se = (m2 / static_cast<double>(samples - 1)).cwiseSqrt() /
                           std::sqrt(static_cast<double>(samples));
    double worst = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double z = se[i] > 0.0 ? (mean[i] - exact[i]) / se[i] : 0.0;
      report.tabular_z_scores.push_back(z);
      worst = std::max(worst, std::abs(z));
    }
    report.items.push_back(CheckItem{
        "tabular PGT vs exact", worst <= 3.0,
        fmt::format("{} samples, max |z| {:.2f} (tol 3)", samples, worst)});
  }
  return report;
}

}  // namespace bgpo
