#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "bgpo/harness.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kRuntimeError = 2, kInvariantFailure = 3 };

bgpo::RunConfig resolve(const std::string& config_path, const std::string& preset_name,
                        std::optional<std::uint64_t> seed, const std::string& out) {
  bgpo::RunConfig config;
  if (!config_path.empty()) {
    config = bgpo::load_config(config_path, preset_name);
  } else if (!preset_name.empty()) {
    config = bgpo::preset(preset_name);
  } else {
    throw bgpo::ConfigError("either --config or --preset is required");
  }
  if (seed) config.seed = *seed;
  if (!out.empty()) config.output_dir = out;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bregman gradient policy optimization (BGPO / VR-BGPO)"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string config_path;
  std::string preset_name;
  std::optional<std::uint64_t> seed;
  std::string out;

  auto* train = app.add_subcommand("train", "Run one training job");
  train->add_option("--config", config_path, "Run-config JSON");
  train->add_option("--preset", preset_name, "Preset name (overrides the file's preset)");
  train->add_option("--seed", seed, "Master seed");
  train->add_option("--out", out, "Output directory (default $BGPO_OUTPUT_ROOT/<preset>-seed<N>)");

  std::string seeds;
  bool paired = false;
  std::size_t threads = 0;
  auto* sweep = app.add_subcommand("sweep", "Run a config over several seeds and aggregate");
  sweep->add_option("--config", config_path, "Run-config JSON");
  sweep->add_option("--preset", preset_name, "Preset name");
  sweep->add_option("--seeds", seeds, "Comma-separated seeds")->required();
  sweep->add_option("--out", out, "Output directory");
  sweep->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");
  sweep->add_flag("--paired", paired, "Run BGPO and VR-BGPO side by side and write a report");

  bool quick = false;
  bool corrupt = false;
  std::uint64_t check_seed = 7;
  auto* check = app.add_subcommand("check-grad", "Gradient and estimator invariant battery");
  check->add_flag("--quick", quick, "Reduced sample counts");
  check->add_option("--seed", check_seed, "Seed");
  check->add_flag("--corrupt-flatten", corrupt, "Negative control: scramble the flattening order")
      ->group("");

  std::string csv;
  std::string svg;
  auto* plot = app.add_subcommand("plot", "SVG chart of a records or aggregate csv");
  plot->add_option("csv", csv, "Input csv")->required();
  plot->add_option("-o,--output", svg, "Output svg")->required();

  app.add_subcommand("presets", "List preset names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (app.got_subcommand("presets")) {
      for (const auto& name : bgpo::preset_names()) std::cout << name << '\n';
      return kOk;
    }
    if (app.got_subcommand(train)) {
      const bgpo::RunConfig config = resolve(config_path, preset_name, seed, "");
      const auto dir = out.empty() ? bgpo::default_run_dir(config) : std::filesystem::path(out);
      const auto result = bgpo::run_training(config, dir);
      const auto& last = result.records.back();
      spdlog::info("{} iterations, {} timesteps, final eval return {:.2f} +- {:.2f} -> {}",
                   result.iterations, result.timesteps, last.eval_return_mean,
                   last.eval_return_std, dir.string());
      return kOk;
    }
    if (app.got_subcommand(sweep)) {
      const auto seed_list = bgpo::parse_seeds(seeds);
      const bgpo::RunConfig config = resolve(config_path, preset_name, std::nullopt, "");
      const std::string name = config.preset.empty() ? "sweep" : config.preset;
      const auto dir = out.empty() ? bgpo::output_root() / (name + (paired ? "-paired" : "-sweep"))
                                   : std::filesystem::path(out);
      if (paired) {
        const auto report = bgpo::run_paired(config, seed_list, dir, threads);
        spdlog::info("paired report: {} {} {}", report.csv.string(), report.svg.string(),
                     report.summary.string());
      } else {
        const auto result = bgpo::run_sweep(config, seed_list, dir, threads);
        spdlog::info("{} seeds aggregated into {}", result.seeds.size(),
                     (dir / "aggregate.csv").string());
      }
      return kOk;
    }
    if (app.got_subcommand(check)) {
      const auto report = bgpo::check_grad({quick, check_seed, corrupt});
      std::cout << report.text();
      return report.passed() ? kOk : kInvariantFailure;
    }
    if (app.got_subcommand(plot)) {
      bgpo::plot_csv(csv, svg);
      return kOk;
    }
  } catch (const bgpo::ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfigError;
  } catch (const bgpo::NumericError& e) {
    spdlog::error("numeric failure at iteration {}: {}", e.iteration(), e.what());
    return kRuntimeError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntimeError;
  }
  return kOk;
}
