#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "bgpo/config.hpp"
#include "bgpo/environments.hpp"
#include "bgpo/estimators.hpp"
#include "bgpo/exact_oracle.hpp"
#include "bgpo/harness.hpp"
#include "bgpo/mirror_maps.hpp"
#include "bgpo/optimizers.hpp"
#include "bgpo/policies.hpp"
#include "oracles.hpp"

using namespace bgpo;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

VectorXd random_normal(Eigen::Index n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  VectorXd v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

VectorXd random_simplex(Eigen::Index n, Rng& rng) {
  std::gamma_distribution<double> gamma(1.5, 1.0);
  VectorXd v(n);
  for (auto& x : v) x = gamma(rng) + 1e-3;
  return v / v.sum();
}

BatchSampler make_sampler(Environment& env, const Policy& policy, Rng& rng, std::size_t batch) {
  return [&env, &policy, &rng, batch](const ParamVector& theta) {
    std::vector<Trajectory> out;
    for (std::size_t i = 0; i < batch; ++i) {
      out.push_back(rollout(env, policy, theta, rng, env.spec().horizon));
    }
    return out;
  };
}

OptimizerSettings pgt_settings(Algorithm algorithm, MirrorMapKind mirror, ScheduleParams schedule) {
  OptimizerSettings s;
  s.kind = {algorithm, false};
  s.schedule = schedule;
  s.mirror = std::move(mirror);
  s.estimator = Pgt{};
  s.gamma = 0.9;
  return s;
}

bool same_bits(const ParamVector& a, const ParamVector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median of an empty range");
  std::sort(xs.begin(), xs.end());
  const std::size_t mid = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
}

// 1. Closed-form prox against direct numerical minimization.
Outcome prox_equivalence() {
  const Stopwatch clock;
  Rng rng(101);
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  std::uniform_real_distribution<double> lambdas(0.05, 1.0);
  const std::vector<MirrorMapKind> maps{Euclidean{},         LpNorm{1.5},
                                        LpNorm{2.0},         LpNorm{3.0},
                                        DiagonalAdaptive{0.1, 0.9}, NegativeEntropy{}};
  std::vector<double> worst(maps.size(), 0.0);
  for (int n = 0; n < 1000; ++n) {
    MirrorState st = MirrorState::zeros(5);
    for (auto& x : st.v) x = unif(rng);
    const VectorXd u = random_normal(5, rng);
    const double lambda = lambdas(rng);
    for (std::size_t m = 0; m < maps.size(); ++m) {
      const bool entropy = std::holds_alternative<NegativeEntropy>(maps[m]);
      const VectorXd theta = entropy ? random_simplex(5, rng) : random_normal(5, rng);
      const VectorXd closed = prox_step(maps[m], st, theta, u, lambda);
      const VectorXd numeric = oracle::prox_oracle(maps[m], st, theta, u, lambda);
      worst[m] = std::max(worst[m], (closed - numeric).cwiseAbs().maxCoeff());
    }
  }
  const double elapsed = clock.seconds();
  bool ok = elapsed < 30.0;
  std::string detail;
  for (std::size_t m = 0; m < maps.size(); ++m) {
    ok = ok && worst[m] <= 1e-6;
    std::string label = name_of(maps[m]);
    if (const auto* lp = std::get_if<LpNorm>(&maps[m])) label += fmt::format("{:g}", lp->p);
    detail += fmt::format("{} {:.1e}, ", label, worst[m]);
  }
  return {ok, fmt::format("max-abs error over 1000 instances: {}runtime {:.1f} s", detail, elapsed)};
}

// 2. Lp link and its conjugate are inverse maps.
Outcome link_conjugacy() {
  Rng rng(102);
  std::uniform_real_distribution<double> log_scale(-6.0, 6.0);
  std::uniform_int_distribution<int> dims(1, 12);
  double worst = 0.0;
  std::string detail;
  for (double p : {1.5, 2.0, 3.0}) {
    const LpNorm map{p};
    double worst_p = 0.0;
    for (int n = 0; n < 10000; ++n) {
      const VectorXd x = random_normal(dims(rng), rng, std::exp(log_scale(rng)));
      const double forward = (link_conjugate(map, link(map, x)) - x).norm() / x.norm();
      const double backward = (link(map, link_conjugate(map, x)) - x).norm() / x.norm();
      worst_p = std::max({worst_p, forward, backward});
    }
    worst = std::max(worst, worst_p);
    detail += fmt::format("p={:g} {:.1e}, ", p, worst_p);
  }
  return {worst <= 1e-9, fmt::format("max relative round-trip error over 1e4 vectors: {}tol 1e-9",
                                     detail)};
}

// 3. Analytic score and value gradients against central differences.
Outcome gradient_correctness() {
  const CheckReport report = check_grad(CheckOptions{false, 7, false});
  bool ok = true;
  std::string detail;
  for (const auto& item : report.items) {
    if (item.name.find("vs exact") != std::string::npos) continue;
    ok = ok && item.passed;
    detail += fmt::format("{}: {}; ", item.name, item.detail);
  }
  return {ok, detail};
}

// 4. Mean of PGT estimates against the exact gradient.
Outcome pgt_unbiasedness() {
  const Stopwatch clock;
  const TabularMdp mdp = TabularMdp::benchmark(5, 0.9);
  TabularEnv env(mdp);
  const TabularSoftmaxPolicy policy(mdp.n_states, mdp.n_actions);
  Rng init(103);
  ParamVector theta(static_cast<Eigen::Index>(policy.num_params()));
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    theta.segment(static_cast<Eigen::Index>(s * mdp.n_actions), static_cast<Eigen::Index>(mdp.n_actions)) =
        random_simplex(static_cast<Eigen::Index>(mdp.n_actions), init);
  }
  const ExactValue exact = exact_policy_value_and_gradient(mdp, policy, theta);

  constexpr std::size_t samples = 100000;
  Rng rng(104);
  VectorXd sum = VectorXd::Zero(theta.size());
  VectorXd sum_sq = VectorXd::Zero(theta.size());
  for (std::size_t i = 0; i < samples; ++i) {
    const Trajectory traj = rollout(env, policy, theta, rng, mdp.horizon);
    const ParamVector g = estimate_gradient(Pgt{}, traj, policy, theta, nullptr, mdp.gamma);
    sum += g;
    sum_sq += g.cwiseProduct(g);
  }
  const double n = static_cast<double>(samples);
  const VectorXd mean = sum / n;
  const VectorXd var = (sum_sq / n - mean.cwiseProduct(mean)) * (n / (n - 1.0));
  double worst = 0.0;
  bool ok = true;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double se = std::sqrt(var[j] / n);
    const double diff = std::abs(mean[j] - exact.gradient[j]);
    // A component whose estimator has zero variance must match exactly.
    if (se == 0.0) {
      ok = ok && diff <= 1e-12;
      continue;
    }
    worst = std::max(worst, diff / se);
  }
  const double elapsed = clock.seconds();
  ok = ok && worst <= 3.0 && elapsed < 120.0;
  return {ok, fmt::format("{} parameters, max |mean - exact| / SE = {:.2f} (tol 3), runtime {:.1f} s",
                          theta.size(), worst, elapsed)};
}

// 5. Unclipped importance weights have mean 1; spread grows with the perturbation.
Outcome importance_weight_law() {
  Pendulum env(10, 0.99);
  const GaussianPolicy policy(MlpSpec{{3, 1}});
  Rng init(105);
  const ParamVector theta_new = policy.initial_params(init);
  VectorXd direction = random_normal(theta_new.size(), init);
  direction.normalize();

  const std::vector<double> sizes{0.01, 0.05, 0.1};
  constexpr std::size_t samples = 100000;
  std::vector<double> sum(sizes.size(), 0.0);
  std::vector<double> sum_sq(sizes.size(), 0.0);
  Rng rng(106);
  for (std::size_t i = 0; i < samples; ++i) {
    const Trajectory traj = rollout(env, policy, theta_new, rng, 10);
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      const ParamVector theta_old = theta_new + sizes[s] * direction;
      const double w = std::exp(log_importance_ratio(traj, policy, theta_old, theta_new));
      sum[s] += w;
      sum_sq[s] += w * w;
    }
  }
  bool ok = true;
  double prev_var = -1.0;
  std::string detail;
  const double n = static_cast<double>(samples);
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    const double mean = sum[s] / n;
    const double var = (sum_sq[s] / n - mean * mean) * (n / (n - 1.0));
    ok = ok && std::abs(mean - 1.0) <= 0.02 && var > prev_var;
    prev_var = var;
    detail += fmt::format("size {:g}: mean {:.4f} var {:.3e}; ", sizes[s], mean, var);
  }
  return {ok, detail + "1e5 pendulum trajectories, H=10"};
}

// 6. Step-size and momentum schedules, clamp flags.
Outcome schedule_exactness() {
  const ScheduleParams table3;  // b=1.5, m=2, c=25
  bool ok = true;
  double worst = 0.0;
  int flag_mismatches = 0;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
  for (std::uint64_t k : {1ULL, 10ULL, 1000ULL, 1000000ULL}) {
    const double base = table3.m + static_cast<double>(k);
    for (Algorithm algorithm : {Algorithm::kBgpo, Algorithm::kVrBgpo}) {
      const bool vr = algorithm == Algorithm::kVrBgpo;
      const ScheduleValue eta = eta_schedule(algorithm, table3, k);
      const double eta_formula = table3.b / (vr ? std::cbrt(base) : std::sqrt(base));
      worst = std::max(worst, rel(eta.raw, eta_formula));
      flag_mismatches += eta.clamped != (eta.raw > 1.0);
      ok = ok && eta.value == std::min(eta.raw, 1.0);

      const ScheduleValue beta = beta_schedule(algorithm, table3, eta.value);
      const double beta_formula = vr ? table3.c * eta.value * eta.value : table3.c * eta.value;
      worst = std::max(worst, rel(beta.raw, beta_formula));
      flag_mismatches += beta.clamped != (beta.raw > 1.0);
      ok = ok && beta.value == std::min(beta.raw, 1.0);
    }
  }
  const ScheduleValue vr_eta = eta_schedule(Algorithm::kVrBgpo, table3, 1);
  const ScheduleValue bgpo_eta = eta_schedule(Algorithm::kBgpo, table3, 1);
  const ScheduleValue bgpo_beta = beta_schedule(Algorithm::kBgpo, table3, bgpo_eta.value);
  const ScheduleValue vr_beta = beta_schedule(Algorithm::kVrBgpo, table3, vr_eta.value);
  const bool both_clamps = vr_eta.clamped && bgpo_beta.clamped && vr_beta.clamped;
  ok = ok && worst <= 1e-15 && flag_mismatches == 0 && both_clamps;
  return {ok, fmt::format("max relative error {:.1e} (tol 1e-15), {} clamp-flag mismatches; at k=1 "
                          "VR eta raw {:.6f} clamped={}, BGPO beta raw {:.4f} clamped={}",
                          worst, flag_mismatches, vr_eta.raw, vr_eta.clamped, bgpo_beta.raw,
                          bgpo_beta.clamped)};
}

// 7a. Euclidean map with beta = 1 against plain gradient ascent.
std::string vanilla_pg(bool& ok) {
  const TabularMdp mdp = TabularMdp::benchmark(5, 0.9);
  TabularEnv env(mdp);
  const CategoricalPolicy policy(MlpSpec{{4, 2}});
  const ScheduleParams schedule{1.5, 2.0, 1e6, 0.05};
  Rng init(107);
  const ParamVector theta0 = policy.initial_params(init);

  Rng rng_a(108);
  BregmanPolicyOptimizer opt(pgt_settings(Algorithm::kBgpo, Euclidean{}, schedule), policy);
  const BatchSampler sample_a = make_sampler(env, policy, rng_a, 3);
  opt.initialize(theta0, sample_a(theta0));

  TabularEnv env_b(mdp);
  Rng rng_b(108);
  const BatchSampler sample_b = make_sampler(env_b, policy, rng_b, 3);
  ParamVector theta = theta0;
  ParamVector g = opt.batch_gradient(sample_b(theta), theta);
  int matched = 0;
  for (std::uint64_t k = 1; k <= 100; ++k) {
    opt.step(sample_a);
    const double eta = std::min(1.0, schedule.b / std::sqrt(schedule.m + static_cast<double>(k)));
    theta = theta + (schedule.lambda * eta) * g;
    g = opt.batch_gradient(sample_b(theta), theta);
    if (!same_bits(opt.theta(), theta) || opt.stats().beta != 1.0) break;
    ++matched;
  }
  ok = ok && matched == 100;
  return fmt::format("(a) {}/100 iterations bitwise equal", matched);
}

// 7b. Entropy-map step against exponentiated-gradient weights.
std::string multiplicative_weights(bool& ok) {
  const TabularMdp mdp = TabularMdp::benchmark(5, 0.9);
  TabularEnv env(mdp);
  const TabularSoftmaxPolicy policy(4, 2);
  Rng rng(109);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const double lambda = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    const ScheduleParams schedule{1.5, 2.0, 25.0, lambda};
    BregmanPolicyOptimizer opt(pgt_settings(Algorithm::kBgpo, NegativeEntropy{2}, schedule), policy);
    ParamVector theta(8);
    for (Eigen::Index s = 0; s < 4; ++s) theta.segment(2 * s, 2) = random_simplex(2, rng);
    const BatchSampler sample = make_sampler(env, policy, rng, 4);
    opt.initialize(theta, sample(theta));
    const ParamVector u = opt.estimate().u;
    opt.update_parameters();
    const double eta = std::min(1.0, schedule.b / std::sqrt(schedule.m + 1.0));
    for (Eigen::Index s = 0; s < 4; ++s) {
      VectorXd row =
          theta.segment(2 * s, 2).array() * (-lambda * u.segment(2 * s, 2).array()).exp();
      row /= row.sum();
      const VectorXd expected = theta.segment(2 * s, 2) + eta * (row - theta.segment(2 * s, 2));
      worst = std::max(worst, (opt.theta().segment(2 * s, 2) - expected).cwiseAbs().maxCoeff());
    }
  }
  ok = ok && worst <= 1e-12;
  return fmt::format("(b) max deviation {:.1e} over 50 steps (tol 1e-12)", worst);
}

// 7c. VR-BGPO momentum with theta held fixed.
std::string frozen_vr(bool& ok) {
  const TabularMdp mdp = TabularMdp::benchmark(5, 0.9);
  TabularEnv env(mdp);
  const CategoricalPolicy policy(MlpSpec{{4, 2}});
  // lambda * eta * B underflows against theta, so theta stays put.
  const ScheduleParams schedule{1.5, 2.0, 0.5, 1e-300};
  Rng rng(110);
  Rng init(111);
  const ParamVector theta = policy.initial_params(init).array() + 0.5;
  BregmanPolicyOptimizer opt(pgt_settings(Algorithm::kVrBgpo, Euclidean{}, schedule), policy);
  const BatchSampler sample = make_sampler(env, policy, rng, 3);
  opt.initialize(theta, sample(theta));
  int matched = 0;
  for (int k = 0; k < 50; ++k) {
    const ParamVector u = opt.estimate().u;
    opt.update_parameters();
    if (opt.theta() != opt.previous_theta()) break;
    const auto batch = sample(opt.theta());
    const double beta = beta_schedule(Algorithm::kVrBgpo, schedule, opt.stats().eta).value;
    const ParamVector expected = bgpo_momentum(u, opt.batch_gradient(batch, opt.theta()), beta);
    opt.update_momentum(batch);
    // Exact equality; the two rules may differ only in the sign of a zero.
    if (opt.estimate().u != expected) break;
    ++matched;
  }
  ok = ok && matched == 50;
  return fmt::format("(c) {}/50 frozen-theta momentum updates equal", matched);
}

Outcome unification() {
  bool ok = true;
  const std::string a = vanilla_pg(ok);
  const std::string b = multiplicative_weights(ok);
  const std::string c = frozen_vr(ok);
  return {ok, a + "; " + b + "; " + c};
}

// 8. CartPole learning curve with the diagonal map.
Outcome cartpole_learning(const fs::path& work) {
  const Stopwatch clock;
  const RunConfig base = preset("cartpole-bgpo-diag");
  const std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  const fs::path dir = work / "cartpole-bgpo-diag";
  const SweepResult sweep = run_sweep(base, seeds, dir, 1);
  plot_csv(dir / "aggregate.csv", dir / "aggregate.svg");
  int reached = 0;
  std::string detail;
  for (std::size_t i = 0; i < sweep.runs.size(); ++i) {
    const auto& records = sweep.runs[i].records;
    double best = -1.0;
    std::uint64_t first = 0;
    for (const auto& r : records) {
      if (r.eval_return_mean >= 90.0 && first == 0) first = r.grid_timesteps;
      best = std::max(best, r.eval_return_mean);
    }
    reached += best >= 90.0;
    detail += fmt::format("seed {}: best {:.1f} final {:.1f}{}; ", sweep.seeds[i], best,
                          records.back().eval_return_mean,
                          first > 0 ? fmt::format(" (>= 90 at {})", first) : "");
  }
  const double elapsed = clock.seconds();
  return {reached >= 4 && elapsed <= 600.0,
          fmt::format("{}/5 seeds reach eval >= 90 within 5e5 steps ({}runtime {:.0f} s)", reached,
                      detail, elapsed)};
}

// 9. Exact Bregman-gradient norm decreases on the tabular benchmark.
Outcome metric_trend() {
  bool ok = true;
  std::string detail;
  for (const std::string name : {"tabular-theorem-bgpo", "tabular-theorem-vrbgpo"}) {
    int decreasing = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      RunConfig c = preset(name);
      c.seed = seed;
      const RunResult r = run_training(c);
      const auto& trace = r.exact_metric_trace;
      const std::size_t tenth = std::max<std::size_t>(1, trace.size() / 10);
      const double head = median({trace.begin(), trace.begin() + static_cast<long>(tenth)});
      const double tail = median({trace.end() - static_cast<long>(tenth), trace.end()});
      decreasing += tail < head;
      if (seed == 0) {
        detail += fmt::format("{} seed 0: {} iterations, median {:.4f} -> {:.4f}; ", name,
                              trace.size(), head, tail);
      }
    }
    ok = ok && decreasing == 5;
    detail += fmt::format("{} decreasing on {}/5 seeds; ", name, decreasing);
  }
  return {ok, detail};
}

// 10. Repeated CLI runs and degenerate aggregation.
Outcome determinism(const fs::path& work, const std::string& cli) {
  const fs::path dir = work / "determinism";
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "config.json");
    cfg << R"({"preset": "cartpole-bgpo-diag", "total_timesteps": 20000, "eval_interval": 5000,
              "batch_size": 20, "seed": 11})";
  }
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = fmt::format("\"{}\" train --config \"{}\" --out \"{}\" > /dev/null 2>&1",
                                        cli, (dir / "config.json").string(), (dir / run).string());
    ok = ok && std::system(cmd.c_str()) == 0;
  }
  const bool identical = ok && slurp(dir / "a" / "records.csv") == slurp(dir / "b" / "records.csv");
  const std::size_t rows = ok ? read_records(dir / "a" / "records.csv").size() : 0;

  RunConfig tiny = preset("tabular-theorem-bgpo");
  tiny.total_timesteps = 500;
  tiny.eval_interval = 100;
  const SweepResult single = run_sweep(tiny, {3}, dir / "single", 1);
  bool single_exact = single.rows.size() == single.runs[0].records.size();
  for (std::size_t i = 0; single_exact && i < single.rows.size(); ++i) {
    const auto& rec = single.runs[0].records[i];
    const auto& row = single.rows[i];
    single_exact = row.n == 1 && row.eval_mean == rec.eval_return_mean &&
                   row.train_mean == rec.train_return && row.eval_std == 0.0 &&
                   row.train_std == 0.0;
  }

  std::vector<RunRecord> constant = single.runs[0].records;
  for (auto& r : constant) {
    r.eval_return_mean = 0.1;
    r.train_return = 0.7;
  }
  const auto rows_const = aggregate(std::vector<std::vector<RunRecord>>(5, constant));
  bool constant_exact = !rows_const.empty();
  for (const auto& row : rows_const) {
    constant_exact = constant_exact && row.eval_mean == 0.1 && row.eval_std == 0.0 &&
                     row.train_mean == 0.7 && row.train_std == 0.0 && row.n == 5;
  }
  return {ok && identical && rows > 1 && single_exact && constant_exact,
          fmt::format("two CLI train runs exit 0: {}, records.csv byte-identical ({} rows): {}; "
                      "single-seed aggregate exact: {}; constant-return aggregate exact: {}",
                      ok, rows, identical, single_exact, constant_exact)};
}

// 11. Paired BGPO / VR-BGPO report on mountain car at a reduced budget.
Outcome paired_report(const fs::path& work) {
  const Stopwatch clock;
  RunConfig base = preset("mountaincar-bgpo-diag");
  base.batch_size = 10;
  base.total_timesteps = 100000;
  base.eval_interval = 20000;
  base.eval_episodes = 5;
  const PairedReport report = run_paired(base, {0, 1}, work / "mountaincar-paired", 1);
  const bool files = fs::exists(report.csv) && fs::exists(report.svg) && fs::exists(report.summary);
  std::size_t polylines = 0;
  if (files) {
    const std::string svg = slurp(report.svg);
    const std::regex tag("<polyline");
    polylines = static_cast<std::size_t>(
        std::distance(std::sregex_iterator(svg.begin(), svg.end(), tag), std::sregex_iterator()));
  }
  const auto& b = report.bgpo.rows.back();
  const auto& v = report.vr_bgpo.rows.back();
  return {files && polylines == 2 && b.grid_timesteps == v.grid_timesteps,
          fmt::format("{} written, {} curves; final eval at {} steps: BGPO {:.2f} +- {:.2f}, "
                      "VR-BGPO {:.2f} +- {:.2f} (report only); runtime {:.0f} s",
                      report.svg.filename().string(), polylines, b.grid_timesteps, b.eval_mean,
                      b.eval_std, v.eval_mean, v.eval_std, clock.seconds())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  std::string work = "acceptance-runs";
  std::string cli = BGPO_CLI_PATH;
  app.add_option("--only", only, "Criterion numbers to run (default: all)");
  app.add_option("--workdir", work, "Directory for run outputs");
  app.add_option("--cli", cli, "Path of the bgpo executable");
  CLI11_PARSE(app, argc, argv);

  const fs::path root = fs::absolute(work);
  fs::remove_all(root);
  fs::create_directories(root);

  const std::vector<Criterion> criteria{
      {1, "prox closed form vs numerical oracle", prox_equivalence},
      {2, "lp link conjugacy", link_conjugacy},
      {3, "score and value gradients vs finite differences", gradient_correctness},
      {4, "PGT unbiasedness on the tabular benchmark", pgt_unbiasedness},
      {5, "importance-weight mean and variance", importance_weight_law},
      {6, "schedule and clamp exactness", schedule_exactness},
      {7, "unification: vanilla PG, multiplicative weights, frozen VR", unification},
      {8, "cartpole BGPO-diag learning", [&] { return cartpole_learning(root); }},
      {9, "exact Bregman-gradient norm trend", metric_trend},
      {10, "determinism and degenerate aggregation", [&] { return determinism(root, cli); }},
      {11, "mountain car paired BGPO vs VR-BGPO report", [&] { return paired_report(root); }},
  };

  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && selected.count(c.id) == 0) continue;
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failures += !outcome.passed;
    std::cout << fmt::format("[{}] criterion {:>2}: {} | {}", outcome.passed ? "PASS" : "FAIL", c.id,
                             c.name, outcome.detail)
              << std::endl;
  }
  std::cout << (failures == 0 ? "all selected criteria passed" : fmt::format("{} criteria failed", failures))
            << std::endl;
  return failures == 0 ? 0 : 1;
}
