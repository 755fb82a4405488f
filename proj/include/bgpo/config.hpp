#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "bgpo/environments.hpp"
#include "bgpo/estimators.hpp"
#include "bgpo/mirror_maps.hpp"
#include "bgpo/optimizers.hpp"
#include "bgpo/policies.hpp"

namespace bgpo {

struct EnvConfig {
  std::string name = "cartpole";
  std::size_t horizon = 100;
  double gamma = 0.99;
  std::string mdp_path;  // tabular only; empty means the built-in benchmark
};

struct PolicyConfig {
  std::string kind = "auto";  // auto | categorical | gaussian | tabular
  std::vector<std::size_t> hidden{8, 8};
};

struct ValueConfig {
  std::vector<std::size_t> hidden{32, 32};
  double lr = 2.5e-3;
  std::size_t epochs = 10;
  bool zero_init = false;
};

struct RunConfig {
  std::string preset;
  EnvConfig env;
  PolicyConfig policy;
  ValueConfig value;
  OptimizerKind optimizer{Algorithm::kBgpo, true};
  ScheduleParams schedule;
  MirrorMapKind mirror = DiagonalAdaptive{};
  EstimatorKind estimator = GaeActorCritic{};
  ClipRange clip;
  std::size_t batch_size = 50;
  std::uint64_t total_timesteps = 500000;
  std::uint64_t seed = 0;
  std::uint64_t eval_interval = 10000;
  std::size_t eval_episodes = 10;
  bool exact_metric = false;  // tabular only: log the exact Bregman-gradient norm
  std::string output_dir;

  /// Throws ConfigError on any inconsistency.
  void validate() const;
  OptimizerSettings optimizer_settings() const;
};

/// Named presets. Unknown names throw ConfigError.
std::vector<std::string> preset_names();
RunConfig preset(const std::string& name);

/// Reads a config: starts from the preset named in `j["preset"]` (or the
/// built-in defaults), then applies every field present in `j`. Unknown keys
/// are rejected. `override_preset` takes precedence over the file's preset.
RunConfig config_from_json(const nlohmann::json& j, const std::string& override_preset = {});
RunConfig load_config(const std::string& path, const std::string& override_preset = {});

/// Fully resolved form, including every default.
nlohmann::json config_to_json(const RunConfig& config);

/// Components built from a validated config.
struct RunComponents {
  std::unique_ptr<Environment> env;
  std::unique_ptr<Policy> policy;
  std::unique_ptr<ValueNetwork> value_net;  // null unless the estimator is GAE
  TabularMdp mdp;                           // filled for the tabular environment
  bool tabular = false;
};

RunComponents build_components(const RunConfig& config);

}  // namespace bgpo
