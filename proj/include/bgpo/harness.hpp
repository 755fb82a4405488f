#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "bgpo/config.hpp"

namespace bgpo {

inline constexpr const char* kRecordsSchema = "# bgpo-records v1";
inline constexpr const char* kAggregateSchema = "# bgpo-aggregate v1";
inline constexpr const char* kPairedSchema = "# bgpo-paired v1";

/// Environment variable naming the root directory for run outputs.
inline constexpr const char* kOutputRootEnv = "BGPO_OUTPUT_ROOT";

/// One row of records.csv. Iteration 0 is the initial policy.
struct RunRecord {
  std::uint64_t iteration = 0;
  std::uint64_t timesteps = 0;       // env steps consumed by iteration batches
  std::uint64_t grid_timesteps = 0;  // eval grid point this row belongs to
  std::uint64_t trajectories = 0;    // including the initial one
  double train_return = 0.0;         // mean undiscounted return of the latest batch
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double metric = 0.0;               // u_k surrogate of the Bregman-gradient norm
  double exact_metric = std::numeric_limits<double>::quiet_NaN();
  double eta = 0.0;
  double beta = 0.0;
  bool eta_clamped = false;
  bool beta_clamped = false;
  std::size_t clipped_weights = 0;
  double value_loss = std::numeric_limits<double>::quiet_NaN();
};

std::string records_header();
std::string format_record(const RunRecord& r);

struct RunResult {
  std::vector<RunRecord> records;
  std::vector<double> metric_trace;        // one entry per iteration
  std::vector<double> exact_metric_trace;  // tabular runs with exact_metric only
  ParamVector theta;
  ParamVector value_params;
  std::uint64_t iterations = 0;
  std::uint64_t timesteps = 0;
  std::uint64_t trajectories = 0;
  std::size_t value_fits = 0;
};

/// Called after every completed iteration.
using IterationObserver = std::function<void(const BregmanPolicyOptimizer&)>;

/// Trains per `config`. With a non-empty `out_dir` writes resolved-config.json,
/// records.csv (flushed per row), timing.csv, theta.bin/.json and, for
/// actor-critic runs, value_params.bin/.json. A NumericError writes error.json
/// next to the partial log and is rethrown.
RunResult run_training(const RunConfig& config, const std::filesystem::path& out_dir = {},
                       const IterationObserver& observer = {});

/// Mean and population std of undiscounted returns over `episodes` episodes.
struct EvalStats {
  double mean = 0.0;
  double std = 0.0;
};
EvalStats evaluate_policy(const Environment& env, const Policy& policy,
                          const Eigen::Ref<const ParamVector>& theta, Rng& rng,
                          std::size_t episodes);

/// `$BGPO_OUTPUT_ROOT/<name>` (root defaults to "runs").
std::filesystem::path output_root();
std::filesystem::path default_run_dir(const RunConfig& config);

/// Little-endian float64 dump plus a JSON sidecar (`path` with .json).
void write_params(const std::filesystem::path& path, const ParamVector& params,
                  const nlohmann::json& meta);
ParamVector read_params(const std::filesystem::path& path);

/// records.csv / aggregate.csv reading. Throws std::runtime_error on a
/// missing schema line or no data rows.
struct CsvTable {
  std::string schema;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::size_t column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);
std::vector<RunRecord> read_records(const std::filesystem::path& path);

struct AggregateRow {
  std::uint64_t grid_timesteps = 0;
  std::size_t n = 0;
  double eval_mean = 0.0;
  double eval_std = 0.0;  // population std across seeds
  double train_mean = 0.0;
  double train_std = 0.0;
  double metric_mean = 0.0;
};

/// Aligns runs on grid_timesteps and reduces across seeds in seed order.
std::vector<AggregateRow> aggregate(const std::vector<std::vector<RunRecord>>& runs);
void write_aggregate(const std::filesystem::path& path, const std::vector<AggregateRow>& rows);

std::vector<std::uint64_t> parse_seeds(const std::string& list);

struct SweepResult {
  std::vector<std::uint64_t> seeds;
  std::vector<RunResult> runs;
  std::vector<AggregateRow> rows;
};

/// Runs every seed (threads, independent state) into `out_dir/seed-<s>` and
/// writes `out_dir/aggregate.csv`.
SweepResult run_sweep(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                      const std::filesystem::path& out_dir, std::size_t max_threads = 0);

struct PairedReport {
  SweepResult bgpo;
  SweepResult vr_bgpo;
  std::filesystem::path csv;
  std::filesystem::path svg;
  std::filesystem::path summary;
};

/// BGPO and VR-BGPO sweeps of `base` at the same timestep budget, with
/// paired.csv, paired.svg and paired-summary.json in `out_dir`.
PairedReport run_paired(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                        const std::filesystem::path& out_dir, std::size_t max_threads = 0);

/// SVG line chart of mean +- std bands.
struct Series {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> std;
};

struct ChartLayout {
  double width = 720.0;
  double height = 420.0;
  double margin = 60.0;
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;

  double px(double x) const;
  double py(double y) const;
  /// Pixels per data unit on the y axis.
  double y_scale() const;
};

ChartLayout layout_for(const std::vector<Series>& series);
std::string render_svg(const std::vector<Series>& series, const std::string& title);

/// Plots a records.csv (eval_return_mean/std) or aggregate.csv (eval_mean/std).
/// Throws without writing when the csv has no data rows.
void plot_csv(const std::filesystem::path& csv, const std::filesystem::path& svg);

struct CheckItem {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckOptions {
  bool quick = false;
  std::uint64_t seed = 7;
  bool corrupt_flatten = false;  // test hook: column-major weights in the FD perturbation
};

struct CheckReport {
  std::vector<CheckItem> items;
  std::vector<double> tabular_z_scores;
  bool passed() const;
  std::string text() const;
};

/// Finite-difference gradient checks for every policy kind and the value
/// network, plus the tabular PGT-vs-exact comparison with z-scores.
CheckReport check_grad(const CheckOptions& options = {});

}  // namespace bgpo
