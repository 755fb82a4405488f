#include "bgpo/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

#include "bgpo/exact_oracle.hpp"

namespace bgpo {
namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  const std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!names.contains(item.key())) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string mirror_kind_name(const MirrorMapKind& m) {
  if (std::holds_alternative<Euclidean>(m)) return "euclidean";
  if (std::holds_alternative<LpNorm>(m)) return "lp";
  if (std::holds_alternative<DiagonalAdaptive>(m)) return "diagonal";
  return "entropy";
}

MirrorMapKind default_mirror(const std::string& kind) {
  if (kind == "euclidean") return Euclidean{};
  if (kind == "lp") return LpNorm{};
  if (kind == "diagonal") return DiagonalAdaptive{};
  if (kind == "entropy") return NegativeEntropy{};
  throw ConfigError("unknown mirror map '" + kind + "'");
}

EstimatorKind default_estimator(const std::string& kind) {
  if (kind == "reinforce") return Reinforce{};
  if (kind == "pgt") return Pgt{};
  if (kind == "gae") return GaeActorCritic{};
  throw ConfigError("unknown estimator '" + kind + "'");
}

void apply_mirror(const json& j, MirrorMapKind& mirror) {
  check_keys(j, {"kind", "p", "alpha", "beta_ema", "block_size"}, "mirror");
  if (j.contains("kind")) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind != mirror_kind_name(mirror)) mirror = default_mirror(kind);
  }
  std::visit(
      [&](auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LpNorm>) {
          read(j, "p", m.p);
        } else if constexpr (std::is_same_v<M, DiagonalAdaptive>) {
          read(j, "alpha", m.alpha);
          read(j, "beta_ema", m.beta_ema);
        } else if constexpr (std::is_same_v<M, NegativeEntropy>) {
          read(j, "block_size", m.block_size);
        }
      },
      mirror);
}

void apply_estimator(const json& j, EstimatorKind& estimator, ClipRange& clip) {
  check_keys(j, {"kind", "lambda_gae", "bootstrap_truncated", "baseline", "clip"}, "estimator");
  if (j.contains("kind")) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind != name_of(estimator)) estimator = default_estimator(kind);
  }
  std::visit(
      [&](auto& e) {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, GaeActorCritic>) {
          read(j, "lambda_gae", e.lambda_gae);
          read(j, "bootstrap_truncated", e.bootstrap_truncated);
        } else {
          read(j, "baseline", e.baseline);
        }
      },
      estimator);
  if (j.contains("clip")) {
    const auto c = j.at("clip").get<std::vector<double>>();
    if (c.size() != 2) throw ConfigError("estimator.clip must be [lo, hi]");
    clip = ClipRange{c[0], c[1]};
  }
}

RunConfig table3_cartpole(Algorithm algorithm, MirrorMapKind mirror, double lambda) {
  RunConfig c;
  c.env = EnvConfig{"cartpole", 100, 0.99, {}};
  c.policy = PolicyConfig{"auto", {8, 8}};
  c.value = ValueConfig{{32, 32}, 2.5e-3, 10, false};
  c.optimizer = OptimizerKind{algorithm, true};
  c.schedule = ScheduleParams{1.5, 2.0, 25.0, lambda};
  c.mirror = mirror;
  c.estimator = GaeActorCritic{};
  c.batch_size = 50;
  c.total_timesteps = 500000;
  c.eval_interval = 10000;
  return c;
}

RunConfig table3_mountaincar(Algorithm algorithm) {
  RunConfig c;
  c.env = EnvConfig{"mountaincar", 500, 0.99, {}};
  c.policy = PolicyConfig{"auto", {64, 64}};
  c.value = ValueConfig{{32, 32}, 2.5e-3, 10, false};
  c.optimizer = OptimizerKind{algorithm, true};
  c.schedule = ScheduleParams{1.5, 2.0, 25.0, 1e-3};
  c.mirror = DiagonalAdaptive{};
  c.estimator = GaeActorCritic{};
  c.batch_size = 100;
  c.total_timesteps = 7500000;
  c.eval_interval = 100000;
  return c;
}

RunConfig tabular_theorem(Algorithm algorithm) {
  RunConfig c;
  c.env = EnvConfig{"tabular", 5, 0.9, {}};
  c.policy = PolicyConfig{"categorical", {}};
  c.optimizer = OptimizerKind{algorithm, false};
  c.schedule = ScheduleParams::theorem_regime(1.0, 1.0, 0.5);
  c.mirror = Euclidean{};
  c.estimator = Pgt{};
  c.batch_size = 10;
  c.total_timesteps = 20000;
  c.eval_interval = 1000;
  c.exact_metric = true;
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"cartpole-bgpo-diag",      "cartpole-vrbgpo-diag",  "cartpole-bgpo-lp1.5",
          "cartpole-bgpo-lp2",       "cartpole-bgpo-lp3",     "mountaincar-bgpo-diag",
          "mountaincar-vrbgpo-diag", "pendulum-bgpo-diag",    "tabular-theorem-bgpo",
          "tabular-theorem-vrbgpo",  "tabular-bgpo-entropy"};
}

RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "cartpole-bgpo-diag") {
    c = table3_cartpole(Algorithm::kBgpo, DiagonalAdaptive{}, 1e-3);
  } else if (name == "cartpole-vrbgpo-diag") {
    c = table3_cartpole(Algorithm::kVrBgpo, DiagonalAdaptive{}, 1e-3);
  } else if (name == "cartpole-bgpo-lp1.5") {
    c = table3_cartpole(Algorithm::kBgpo, LpNorm{1.5}, 0.0064);
  } else if (name == "cartpole-bgpo-lp2") {
    c = table3_cartpole(Algorithm::kBgpo, LpNorm{2.0}, 0.0016);
  } else if (name == "cartpole-bgpo-lp3") {
    c = table3_cartpole(Algorithm::kBgpo, LpNorm{3.0}, 0.0008);
  } else if (name == "mountaincar-bgpo-diag") {
    c = table3_mountaincar(Algorithm::kBgpo);
  } else if (name == "mountaincar-vrbgpo-diag") {
    c = table3_mountaincar(Algorithm::kVrBgpo);
  } else if (name == "pendulum-bgpo-diag") {
    c.env = EnvConfig{"pendulum", 500, 0.99, {}};
    c.policy = PolicyConfig{"auto", {32, 32}};
    c.schedule = ScheduleParams{1.5, 2.0, 25.0, 1e-2};
    c.batch_size = 50;
    c.total_timesteps = 1000000;
    c.eval_interval = 20000;
  } else if (name == "tabular-theorem-bgpo") {
    c = tabular_theorem(Algorithm::kBgpo);
  } else if (name == "tabular-theorem-vrbgpo") {
    c = tabular_theorem(Algorithm::kVrBgpo);
  } else if (name == "tabular-bgpo-entropy") {
    c = tabular_theorem(Algorithm::kBgpo);
    c.policy = PolicyConfig{"tabular", {}};
    c.mirror = NegativeEntropy{2};
    c.schedule.lambda = 0.1;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  c.preset = name;
  return c;
}

void RunConfig::validate() const {
  static const std::set<std::string> envs{"cartpole", "mountaincar", "pendulum", "tabular"};
  if (!envs.contains(env.name)) throw ConfigError("unknown environment '" + env.name + "'");
  if (env.horizon == 0) throw ConfigError("horizon must be >= 1");
  if (!(env.gamma > 0.0 && env.gamma < 1.0)) throw ConfigError("gamma must be in (0,1)");
  if (!env.mdp_path.empty() && env.name != "tabular") {
    throw ConfigError("mdp_path is only valid for the tabular environment");
  }
  static const std::set<std::string> policies{"auto", "categorical", "gaussian", "tabular"};
  if (!policies.contains(policy.kind)) throw ConfigError("unknown policy kind '" + policy.kind + "'");
  const bool discrete_env = env.name == "cartpole" || env.name == "tabular";
  if (policy.kind == "gaussian" && discrete_env) {
    throw ConfigError("gaussian policy needs a continuous-action environment");
  }
  if (policy.kind == "categorical" && !discrete_env) {
    throw ConfigError("categorical policy needs a discrete-action environment");
  }
  if (policy.kind == "tabular" && env.name != "tabular") {
    throw ConfigError("tabular policy needs the tabular environment");
  }
  for (auto h : policy.hidden) {
    if (h == 0) throw ConfigError("policy hidden layer sizes must be >= 1");
  }
  for (auto h : value.hidden) {
    if (h == 0) throw ConfigError("value hidden layer sizes must be >= 1");
  }
  if (std::holds_alternative<NegativeEntropy>(mirror) && policy.kind != "tabular") {
    throw ConfigError("the entropy mirror map needs the tabular (direct) policy");
  }
  if (policy.kind == "tabular" && !std::holds_alternative<NegativeEntropy>(mirror)) {
    throw ConfigError("the tabular (direct) policy lives on the simplex and needs the entropy map");
  }
  if (optimizer.actor_critic != std::holds_alternative<GaeActorCritic>(estimator)) {
    throw ConfigError("actor_critic must be true exactly when the estimator is gae");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (total_timesteps < env.horizon) throw ConfigError("total_timesteps must be >= horizon");
  if (eval_interval == 0) throw ConfigError("eval_interval must be >= 1");
  if (eval_episodes == 0) throw ConfigError("eval_episodes must be >= 1");
  if (exact_metric) {
    if (env.name != "tabular") throw ConfigError("exact_metric needs the tabular environment");
    if (env.horizon > kExactMaxHorizon) throw ConfigError("exact_metric: horizon too long");
  }
  try {
    optimizer_settings().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

OptimizerSettings RunConfig::optimizer_settings() const {
  OptimizerSettings s;
  s.kind = optimizer;
  s.schedule = schedule;
  s.mirror = mirror;
  s.estimator = estimator;
  s.gamma = env.gamma;
  s.clip = clip;
  s.value_fit = ValueFitSettings{value.lr, value.epochs};
  return s;
}

RunConfig config_from_json(const json& j, const std::string& override_preset) {
  try {
    check_keys(j,
               {"preset", "env", "policy", "value", "optimizer", "mirror", "estimator",
                "batch_size", "total_timesteps", "seed", "eval_interval", "eval_episodes",
                "exact_metric", "output_dir"},
               "config");
    std::string preset_name = override_preset;
    if (preset_name.empty() && j.contains("preset")) preset_name = j.at("preset").get<std::string>();
    RunConfig c = preset_name.empty() ? RunConfig{} : preset(preset_name);

    if (j.contains("env")) {
      const auto& e = j.at("env");
      check_keys(e, {"name", "horizon", "gamma", "mdp_path"}, "env");
      read(e, "name", c.env.name);
      read(e, "horizon", c.env.horizon);
      read(e, "gamma", c.env.gamma);
      read(e, "mdp_path", c.env.mdp_path);
    }
    if (j.contains("policy")) {
      const auto& p = j.at("policy");
      check_keys(p, {"kind", "hidden"}, "policy");
      read(p, "kind", c.policy.kind);
      read(p, "hidden", c.policy.hidden);
    }
    if (j.contains("value")) {
      const auto& v = j.at("value");
      check_keys(v, {"hidden", "lr", "epochs", "zero_init"}, "value");
      read(v, "hidden", c.value.hidden);
      read(v, "lr", c.value.lr);
      read(v, "epochs", c.value.epochs);
      read(v, "zero_init", c.value.zero_init);
    }
    bool actor_critic_given = false;
    bool actor_critic = false;
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      check_keys(o, {"algorithm", "actor_critic", "b", "m", "c", "lambda"}, "optimizer");
      if (o.contains("algorithm")) c.optimizer.algorithm = parse_algorithm(o.at("algorithm"));
      if (o.contains("actor_critic")) {
        actor_critic_given = true;
        actor_critic = o.at("actor_critic").get<bool>();
      }
      read(o, "b", c.schedule.b);
      read(o, "m", c.schedule.m);
      read(o, "c", c.schedule.c);
      read(o, "lambda", c.schedule.lambda);
    }
    if (j.contains("mirror")) apply_mirror(j.at("mirror"), c.mirror);
    if (j.contains("estimator")) apply_estimator(j.at("estimator"), c.estimator, c.clip);
    c.optimizer.actor_critic =
        actor_critic_given ? actor_critic : std::holds_alternative<GaeActorCritic>(c.estimator);

    read(j, "batch_size", c.batch_size);
    read(j, "total_timesteps", c.total_timesteps);
    read(j, "seed", c.seed);
    read(j, "eval_interval", c.eval_interval);
    read(j, "eval_episodes", c.eval_episodes);
    read(j, "exact_metric", c.exact_metric);
    read(j, "output_dir", c.output_dir);
    if (auto* entropy = std::get_if<NegativeEntropy>(&c.mirror);
        entropy != nullptr && entropy->block_size == 0 && c.env.name == "tabular") {
      const TabularMdp mdp =
          c.env.mdp_path.empty() ? TabularMdp::benchmark() : TabularMdp::load(c.env.mdp_path);
      entropy->block_size = mdp.n_actions;
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

RunConfig load_config(const std::string& path, const std::string& override_preset) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return config_from_json(j, override_preset);
}

json config_to_json(const RunConfig& c) {
  json mirror{{"kind", mirror_kind_name(c.mirror)}};
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LpNorm>) {
          mirror["p"] = m.p;
        } else if constexpr (std::is_same_v<M, DiagonalAdaptive>) {
          mirror["alpha"] = m.alpha;
          mirror["beta_ema"] = m.beta_ema;
        } else if constexpr (std::is_same_v<M, NegativeEntropy>) {
          mirror["block_size"] = m.block_size;
        }
      },
      c.mirror);
  json estimator{{"kind", name_of(c.estimator)}, {"clip", {c.clip.lo, c.clip.hi}}};
  std::visit(
      [&](const auto& e) {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, GaeActorCritic>) {
          estimator["lambda_gae"] = e.lambda_gae;
          estimator["bootstrap_truncated"] = e.bootstrap_truncated;
        } else {
          estimator["baseline"] = e.baseline;
        }
      },
      c.estimator);
  return json{
      {"preset", c.preset},
      {"env",
       {{"name", c.env.name},
        {"horizon", c.env.horizon},
        {"gamma", c.env.gamma},
        {"mdp_path", c.env.mdp_path}}},
      {"policy", {{"kind", c.policy.kind}, {"hidden", c.policy.hidden}}},
      {"value",
       {{"hidden", c.value.hidden},
        {"lr", c.value.lr},
        {"epochs", c.value.epochs},
        {"zero_init", c.value.zero_init}}},
      {"optimizer",
       {{"algorithm", name_of(c.optimizer.algorithm)},
        {"actor_critic", c.optimizer.actor_critic},
        {"b", c.schedule.b},
        {"m", c.schedule.m},
        {"c", c.schedule.c},
        {"lambda", c.schedule.lambda}}},
      {"mirror", mirror},
      {"estimator", estimator},
      {"batch_size", c.batch_size},
      {"total_timesteps", c.total_timesteps},
      {"seed", c.seed},
      {"eval_interval", c.eval_interval},
      {"eval_episodes", c.eval_episodes},
      {"exact_metric", c.exact_metric},
      {"output_dir", c.output_dir},
  };
}

RunComponents build_components(const RunConfig& config) {
  config.validate();
  RunComponents out;
  if (config.env.name == "tabular") {
    out.tabular = true;
    out.mdp = config.env.mdp_path.empty() ? TabularMdp::benchmark()
                                          : TabularMdp::load(config.env.mdp_path);
    out.mdp.horizon = config.env.horizon;
    out.mdp.gamma = config.env.gamma;
    out.mdp.validate();
    out.env = std::make_unique<TabularEnv>(out.mdp);
  } else {
    out.env = make_environment(config.env.name, config.env.horizon, config.env.gamma);
  }
  const EnvSpec& spec = out.env->spec();

  std::vector<std::size_t> layers{spec.state_dim};
  layers.insert(layers.end(), config.policy.hidden.begin(), config.policy.hidden.end());
  if (config.policy.kind == "tabular") {
    out.policy = std::make_unique<TabularSoftmaxPolicy>(out.mdp.n_states, out.mdp.n_actions);
  } else if (spec.action_space.is_discrete()) {
    layers.push_back(spec.action_space.n);
    out.policy = std::make_unique<CategoricalPolicy>(MlpSpec{layers});
  } else {
    layers.push_back(static_cast<std::size_t>(spec.action_space.low.size()));
    out.policy = std::make_unique<GaussianPolicy>(MlpSpec{layers});
  }
  if (std::holds_alternative<GaeActorCritic>(config.estimator)) {
    out.value_net = std::make_unique<ValueNetwork>(spec.state_dim, config.value.hidden);
  }
  if (config.exact_metric && out.mdp.n_states > kExactMaxStates) {
    throw ConfigError("exact_metric: too many states for the exact oracle");
  }
  return out;
}

}  // namespace bgpo
