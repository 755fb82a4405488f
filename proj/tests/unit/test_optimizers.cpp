#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "bgpo/environments.hpp"
#include "bgpo/optimizers.hpp"

using namespace bgpo;
using Eigen::VectorXd;

namespace {

struct Bench {
  TabularMdp mdp = TabularMdp::benchmark(5, 0.9);
  TabularEnv env{mdp};
  CategoricalPolicy policy{MlpSpec{{4, 2}}};
  TabularSoftmaxPolicy tabular{4, 2};
};

BatchSampler make_sampler(Environment& env, const Policy& policy, Rng& rng, std::size_t batch,
                          std::size_t* count = nullptr) {
  return [&env, &policy, &rng, batch, count](const ParamVector& theta) {
    std::vector<Trajectory> out;
    for (std::size_t i = 0; i < batch; ++i) out.push_back(rollout(env, policy, theta, rng, env.spec().horizon));
    if (count != nullptr) *count += batch;
    return out;
  };
}

OptimizerSettings pgt_settings(Algorithm algorithm, MirrorMapKind mirror, ScheduleParams schedule) {
  OptimizerSettings s;
  s.kind = {algorithm, false};
  s.schedule = schedule;
  s.mirror = mirror;
  s.estimator = Pgt{};
  s.gamma = 0.9;
  return s;
}

ParamVector random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  ParamVector v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(Schedule, WorkedExamples) {
  const ScheduleParams table3;
  const ScheduleValue eta = eta_schedule(Algorithm::kBgpo, table3, 1);
  EXPECT_NEAR(eta.value, 0.866025, 1e-6);
  EXPECT_FALSE(eta.clamped);
  const ScheduleValue vr = eta_schedule(Algorithm::kVrBgpo, table3, 1);
  EXPECT_NEAR(vr.raw, 1.040042, 1e-6);
  EXPECT_EQ(vr.value, 1.0);
  EXPECT_TRUE(vr.clamped);
  const ScheduleValue beta = beta_schedule(Algorithm::kBgpo, table3, 0.866);
  EXPECT_NEAR(beta.raw, 21.65, 1e-12);
  EXPECT_EQ(beta.value, 1.0);
  EXPECT_TRUE(beta.clamped);
  const ScheduleValue vr_beta = beta_schedule(Algorithm::kVrBgpo, table3, 0.1);
  EXPECT_NEAR(vr_beta.value, 0.25, 1e-15);
  EXPECT_FALSE(vr_beta.clamped);
  const ScheduleValue small = beta_schedule(Algorithm::kBgpo, ScheduleParams{1.5, 2.0, 0.5, 1e-3}, 0.8);
  EXPECT_EQ(small.value, 0.5 * 0.8);
}

TEST(Schedule, FormulaExactnessAndMonotonicity) {
  const ScheduleParams p;
  for (std::uint64_t k : {1ULL, 10ULL, 1000ULL, 1000000ULL}) {
    const double base = p.m + static_cast<double>(k);
    EXPECT_LE(rel(eta_schedule(Algorithm::kBgpo, p, k).raw, p.b / std::sqrt(base)), 1e-15);
    EXPECT_LE(rel(eta_schedule(Algorithm::kVrBgpo, p, k).raw, p.b / std::cbrt(base)), 1e-15);
  }
  double prev = 2.0;
  for (std::uint64_t k = 1; k < 5000; ++k) {
    const double eta = eta_schedule(Algorithm::kVrBgpo, p, k).value;
    EXPECT_LE(eta, prev);
    EXPECT_GT(eta, 0.0);
    prev = eta;
  }
  EXPECT_THROW(eta_schedule(Algorithm::kBgpo, p, 0), std::invalid_argument);
  EXPECT_THROW(beta_schedule(Algorithm::kBgpo, p, 0.0), std::invalid_argument);
  EXPECT_THROW(beta_schedule(Algorithm::kBgpo, p, 1.5), std::invalid_argument);
}

TEST(Schedule, ParamsValidationAndTheoremRegime) {
  EXPECT_THROW((ScheduleParams{0.0, 2.0, 25.0, 1e-3}.validate()), std::invalid_argument);
  EXPECT_THROW((ScheduleParams{1.5, 2.0, 25.0, -1.0}.validate()), std::invalid_argument);
  const ScheduleParams t = ScheduleParams::theorem_regime(1.0, 1.0, 0.5);
  EXPECT_GE(t.m, std::pow(t.b, 3.0));
  EXPECT_GE(t.m, std::pow(t.c * t.b, 3.0));
  EXPECT_GE(t.m, 2.0);
  // Under the theorem regime neither schedule needs clamping.
  for (Algorithm a : {Algorithm::kBgpo, Algorithm::kVrBgpo}) {
    const ScheduleValue eta = eta_schedule(a, t, 1);
    EXPECT_FALSE(eta.clamped);
    EXPECT_FALSE(beta_schedule(a, t, eta.value).clamped);
  }
  EXPECT_EQ(parse_algorithm("vr-bgpo"), Algorithm::kVrBgpo);
  EXPECT_EQ(name_of(parse_algorithm("bgpo")), "bgpo");
  EXPECT_THROW(parse_algorithm("ppo"), std::invalid_argument);
}

TEST(Momentum, BetaOneForgetsHistory) {
  Rng rng(1);
  const ParamVector u = random_vector(6, rng);
  const ParamVector g = random_vector(6, rng);
  const ParamVector g_old = random_vector(6, rng);
  EXPECT_EQ(bgpo_momentum(u, g, 1.0), -g);
  EXPECT_EQ(vr_bgpo_momentum(u, g, g_old, 1.0), -g);
}

TEST(Momentum, VrCollapsesToBgpoWhenThetaIsFrozen) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const ParamVector u = random_vector(6, rng);
    const ParamVector g = random_vector(6, rng);
    const double beta = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    EXPECT_EQ(vr_bgpo_momentum(u, g, g, beta), bgpo_momentum(u, g, beta));
  }
}

TEST(Optimizer, EuclideanBetaOneIsVanillaPolicyGradient) {
  Bench bench;
  const ScheduleParams schedule{1.5, 2.0, 1e6, 0.05};
  const OptimizerSettings settings = pgt_settings(Algorithm::kBgpo, Euclidean{}, schedule);
  Rng init(3);
  const ParamVector theta0 = bench.policy.initial_params(init);

  Rng rng_a(4);
  BregmanPolicyOptimizer opt(settings, bench.policy);
  const BatchSampler sample_a = make_sampler(bench.env, bench.policy, rng_a, 3);
  opt.initialize(theta0, sample_a(theta0));

  Rng rng_b(4);
  const BatchSampler sample_b = make_sampler(bench.env, bench.policy, rng_b, 3);
  ParamVector theta = theta0;
  ParamVector g = opt.batch_gradient(sample_b(theta), theta);
  for (std::uint64_t k = 1; k <= 100; ++k) {
    opt.step(sample_a);
    const double eta = std::min(1.0, schedule.b / std::sqrt(schedule.m + static_cast<double>(k)));
    theta = theta + (schedule.lambda * eta) * g;
    g = opt.batch_gradient(sample_b(theta), theta);
    ASSERT_EQ(opt.theta(), theta) << k;
    EXPECT_EQ(opt.stats().beta, 1.0);
  }
}

TEST(Optimizer, EntropyStepIsMultiplicativeWeights) {
  Bench bench;
  const double lambda = 0.3;
  const OptimizerSettings settings =
      pgt_settings(Algorithm::kBgpo, NegativeEntropy{2}, ScheduleParams{1.5, 2.0, 25.0, lambda});
  Rng rng(5);
  ParamVector theta(8);
  theta << 0.2, 0.8, 0.5, 0.5, 0.9, 0.1, 0.3, 0.7;
  BregmanPolicyOptimizer opt(settings, bench.tabular);
  const BatchSampler sample = make_sampler(bench.env, bench.tabular, rng, 4);
  opt.initialize(theta, sample(theta));
  const ParamVector u = opt.estimate().u;
  opt.update_parameters();

  const double eta = 1.5 / std::sqrt(3.0);
  for (Eigen::Index s = 0; s < 4; ++s) {
    VectorXd row = theta.segment(2 * s, 2).array() * (-lambda * u.segment(2 * s, 2).array()).exp();
    row /= row.sum();
    const VectorXd expected = theta.segment(2 * s, 2) + eta * (row - theta.segment(2 * s, 2));
    EXPECT_LT((opt.theta().segment(2 * s, 2) - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Optimizer, EntropyIteratesStayOnSimplex) {
  Bench bench;
  for (Algorithm algorithm : {Algorithm::kBgpo, Algorithm::kVrBgpo}) {
    const OptimizerSettings settings =
        pgt_settings(algorithm, NegativeEntropy{2}, ScheduleParams{1.5, 2.0, 25.0, 0.5});
    Rng rng(6);
    BregmanPolicyOptimizer opt(settings, bench.tabular);
    const BatchSampler sample = make_sampler(bench.env, bench.tabular, rng, 5);
    const ParamVector theta = ParamVector::Constant(8, 0.5);
    opt.initialize(theta, sample(theta));
    for (int k = 0; k < 200; ++k) {
      opt.step(sample);
      for (Eigen::Index s = 0; s < 4; ++s) {
        EXPECT_NEAR(opt.theta().segment(2 * s, 2).sum(), 1.0, 1e-12);
        EXPECT_GT(opt.theta().segment(2 * s, 2).minCoeff(), 0.0);
      }
    }
  }
}

TEST(Optimizer, ZeroGradientStreamFreezesTheta) {
  Bench bench;
  bench.mdp.rewards.setZero();
  TabularEnv env(bench.mdp);
  for (const MirrorMapKind& mirror :
       {MirrorMapKind{Euclidean{}}, MirrorMapKind{DiagonalAdaptive{}}, MirrorMapKind{LpNorm{1.5}}}) {
    for (Algorithm algorithm : {Algorithm::kBgpo, Algorithm::kVrBgpo}) {
      Rng rng(7);
      Rng init(8);
      const ParamVector theta = bench.policy.initial_params(init);
      BregmanPolicyOptimizer opt(pgt_settings(algorithm, mirror, ScheduleParams{}), bench.policy);
      const BatchSampler sample = make_sampler(env, bench.policy, rng, 2);
      opt.initialize(theta, sample(theta));
      for (int k = 0; k < 20; ++k) {
        opt.step(sample);
        EXPECT_EQ(opt.theta(), theta);
        EXPECT_EQ(opt.stats().metric, 0.0);
      }
    }
  }
}

TEST(Optimizer, EuclideanMetricIsMomentumNorm) {
  Bench bench;
  Rng rng(9);
  Rng init(10);
  const ParamVector theta = bench.policy.initial_params(init);
  BregmanPolicyOptimizer opt(pgt_settings(Algorithm::kBgpo, Euclidean{}, ScheduleParams{1.5, 2.0, 0.5, 0.1}),
                             bench.policy);
  const BatchSampler sample = make_sampler(bench.env, bench.policy, rng, 2);
  opt.initialize(theta, sample(theta));
  for (int k = 0; k < 10; ++k) {
    const double expected = opt.estimate().u.norm();
    opt.update_parameters();
    EXPECT_EQ(opt.stats().metric, expected);
    EXPECT_EQ(opt.metric_for(opt.estimate().u), expected);
    opt.update_momentum(sample(opt.theta()));
  }
}

TEST(Optimizer, VrWithFrozenThetaFollowsBgpoRule) {
  Bench bench;
  // lambda * eta * B underflows against theta, so theta never moves.
  const ScheduleParams schedule{1.5, 2.0, 0.5, 1e-300};
  Rng rng(11);
  Rng init(12);
  const ParamVector theta = bench.policy.initial_params(init).array() + 0.5;
  BregmanPolicyOptimizer opt(pgt_settings(Algorithm::kVrBgpo, Euclidean{}, schedule), bench.policy);
  const BatchSampler sample = make_sampler(bench.env, bench.policy, rng, 3);
  opt.initialize(theta, sample(theta));
  for (int k = 0; k < 20; ++k) {
    const ParamVector u = opt.estimate().u;
    opt.update_parameters();
    ASSERT_EQ(opt.theta(), opt.previous_theta());
    const auto batch = sample(opt.theta());
    const double beta = beta_schedule(Algorithm::kVrBgpo, schedule, opt.stats().eta).value;
    const ParamVector expected = bgpo_momentum(u, opt.batch_gradient(batch, opt.theta()), beta);
    opt.update_momentum(batch);
    EXPECT_EQ(opt.estimate().u, expected) << k;
    EXPECT_EQ(opt.stats().clipped_weights, 0u);
  }
}

TEST(Optimizer, IterationAccounting) {
  Bench bench;
  for (Algorithm algorithm : {Algorithm::kBgpo, Algorithm::kVrBgpo}) {
    Rng rng(13);
    std::size_t count = 0;
    const BatchSampler sample = make_sampler(bench.env, bench.policy, rng, 7, &count);
    Rng init(14);
    const ParamVector theta = bench.policy.initial_params(init);
    BregmanPolicyOptimizer opt(pgt_settings(algorithm, DiagonalAdaptive{}, ScheduleParams{}), bench.policy);
    const auto first = sample(theta);
    opt.initialize(theta, std::span<const Trajectory>(first.data(), 1));
    count = 1;
    for (int k = 0; k < 12; ++k) opt.step(sample);
    EXPECT_EQ(count, 1u + 12u * 7u);
    EXPECT_EQ(opt.iteration(), 13u);
  }
}

TEST(Optimizer, ProtocolErrors) {
  Bench bench;
  BregmanPolicyOptimizer opt(pgt_settings(Algorithm::kBgpo, Euclidean{}, ScheduleParams{}), bench.policy);
  EXPECT_THROW(opt.update_parameters(), std::logic_error);
  Rng rng(15);
  const BatchSampler sample = make_sampler(bench.env, bench.policy, rng, 1);
  const ParamVector theta = ParamVector::Zero(10);
  opt.initialize(theta, sample(theta));
  EXPECT_THROW(opt.update_momentum(sample(theta)), std::logic_error);
  opt.update_parameters();
  EXPECT_THROW(opt.update_parameters(), std::logic_error);

  OptimizerSettings gae = pgt_settings(Algorithm::kBgpo, Euclidean{}, ScheduleParams{});
  gae.estimator = GaeActorCritic{};
  EXPECT_THROW(BregmanPolicyOptimizer(gae, bench.policy, nullptr), std::invalid_argument);
}

TEST(Optimizer, NonFiniteGradientReportsIteration) {
  Bench bench;
  Rng rng(16);
  BregmanPolicyOptimizer opt(pgt_settings(Algorithm::kBgpo, Euclidean{}, ScheduleParams{}), bench.policy);
  const BatchSampler sample = make_sampler(bench.env, bench.policy, rng, 1);
  const ParamVector theta = ParamVector::Zero(10);
  opt.initialize(theta, sample(theta));
  opt.step(sample);
  opt.update_parameters();
  auto batch = sample(opt.theta());
  batch[0].rewards[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    opt.update_momentum(batch);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.iteration(), 2);
  }
}

class ActorCritic : public ::testing::Test {
 protected:
  Bench bench;
  ValueNetwork value_net{4, {8}};

  OptimizerSettings gae_settings(std::size_t epochs) const {
    OptimizerSettings s = pgt_settings(Algorithm::kBgpo, DiagonalAdaptive{}, ScheduleParams{1.5, 2.0, 25.0, 1e-2});
    s.estimator = GaeActorCritic{1.0, false};
    s.value_fit.epochs = epochs;
    return s;
  }
};

TEST_F(ActorCritic, FrozenZeroCriticMatchesPgt) {
  Rng init(17);
  const ParamVector theta = bench.policy.initial_params(init);
  const ParamVector zero_v = ParamVector::Zero(static_cast<Eigen::Index>(value_net.num_params()));

  Rng rng_a(18);
  BregmanPolicyOptimizer ac(gae_settings(0), bench.policy, &value_net);
  const BatchSampler sample_a = make_sampler(bench.env, bench.policy, rng_a, 4);
  ac.initialize(theta, sample_a(theta), zero_v);

  Rng rng_b(18);
  OptimizerSettings plain = gae_settings(0);
  plain.estimator = Pgt{};
  BregmanPolicyOptimizer pg(plain, bench.policy);
  const BatchSampler sample_b = make_sampler(bench.env, bench.policy, rng_b, 4);
  pg.initialize(theta, sample_b(theta));

  for (int k = 0; k < 30; ++k) {
    ac.step(sample_a);
    pg.step(sample_b);
    EXPECT_LT((ac.theta() - pg.theta()).cwiseAbs().maxCoeff(), 1e-12) << k;
    EXPECT_EQ(ac.value_params(), zero_v);
  }
  EXPECT_TRUE(ac.uses_critic());
  EXPECT_FALSE(pg.uses_critic());
}

TEST_F(ActorCritic, OneIterationFitsOnceAndRunsAreDeterministic) {
  Rng init(19);
  const ParamVector theta = bench.policy.initial_params(init);
  const ParamVector v0 = value_net.initial_params(init);
  std::vector<ParamVector> thetas[2];
  std::vector<ParamVector> values[2];
  for (int run = 0; run < 2; ++run) {
    Rng rng(20);
    BregmanPolicyOptimizer opt(gae_settings(10), bench.policy, &value_net);
    const BatchSampler sample = make_sampler(bench.env, bench.policy, rng, 3);
    opt.initialize(theta, sample(theta), v0);
    EXPECT_EQ(opt.value_fits(), 0u);
    opt.step(sample);
    EXPECT_EQ(opt.value_fits(), 1u);
    EXPECT_NE(opt.value_params(), v0);
    for (int k = 0; k < 10; ++k) {
      opt.step(sample);
      thetas[run].push_back(opt.theta());
      values[run].push_back(opt.value_params());
    }
  }
  EXPECT_EQ(thetas[0], thetas[1]);
  EXPECT_EQ(values[0], values[1]);
}
