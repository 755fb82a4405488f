#include "bgpo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "bgpo/exact_oracle.hpp"

namespace bgpo {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "";
  return fmt::format("{}", v);
}

double mean_return(const std::vector<Trajectory>& batch) {
  double total = 0.0;
  for (const auto& t : batch) {
    for (double r : t.rewards) total += r;
  }
  return total / static_cast<double>(batch.size());
}

std::uint64_t batch_steps(const std::vector<Trajectory>& batch) {
  std::uint64_t n = 0;
  for (const auto& t : batch) n += t.length();
  return n;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("bad number '" + s + "' in csv");
  return v;
}

}  // namespace

std::string records_header() {
  return "iteration,timesteps,grid_timesteps,trajectories,train_return,eval_return_mean,"
         "eval_return_std,metric,exact_metric,eta,beta,eta_clamped,beta_clamped,"
         "clipped_weights,value_loss";
}

std::string format_record(const RunRecord& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", r.iteration, r.timesteps,
                     r.grid_timesteps, r.trajectories, num(r.train_return),
                     num(r.eval_return_mean), num(r.eval_return_std), num(r.metric),
                     num(r.exact_metric), num(r.eta), num(r.beta), r.eta_clamped ? 1 : 0,
                     r.beta_clamped ? 1 : 0, r.clipped_weights, num(r.value_loss));
}

EvalStats evaluate_policy(const Environment& env, const Policy& policy,
                          const Eigen::Ref<const ParamVector>& theta, Rng& rng,
                          std::size_t episodes) {
  if (episodes == 0) throw std::invalid_argument("evaluate_policy: episodes must be >= 1");
  auto local = env.clone();
  std::vector<double> returns;
  returns.reserve(episodes);
  for (std::size_t i = 0; i < episodes; ++i) {
    const Trajectory t = rollout(*local, policy, theta, rng, env.spec().horizon);
    double total = 0.0;
    for (double r : t.rewards) total += r;
    returns.push_back(total);
  }
  EvalStats s;
  for (double r : returns) s.mean += r;
  s.mean /= static_cast<double>(episodes);
  double var = 0.0;
  for (double r : returns) var += (r - s.mean) * (r - s.mean);
  s.std = std::sqrt(var / static_cast<double>(episodes));
  return s;
}

fs::path output_root() {
  const char* root = std::getenv(kOutputRootEnv);
  return root != nullptr && *root != '\0' ? fs::path(root) : fs::path("runs");
}

fs::path default_run_dir(const RunConfig& config) {
  if (!config.output_dir.empty()) return config.output_dir;
  const std::string name = config.preset.empty() ? "run" : config.preset;
  return output_root() / fmt::format("{}-seed{}", name, config.seed);
}

void write_params(const fs::path& path, const ParamVector& params, const json& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(params[i]);
    char bytes[8];
    for (int b = 0; b < 8; ++b) {
      bytes[b] = static_cast<char>(bits & 0xFF);
      bits >>= 8;
    }
    out.write(bytes, 8);
  }
  json side = meta;
  side["dtype"] = "float64";
  side["byte_order"] = "little";
  side["size"] = params.size();
  fs::path sidecar = path;
  sidecar.replace_extension(".json");
  write_json(sidecar, side);
}

ParamVector read_params(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<double> values;
  char bytes[8];
  while (in.read(bytes, 8)) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(bytes[b]);
    values.push_back(std::bit_cast<double>(bits));
  }
  if (in.gcount() != 0) throw std::runtime_error(path.string() + " is truncated");
  return Eigen::Map<const ParamVector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

RunResult run_training(const RunConfig& config, const fs::path& out_dir,
                       const IterationObserver& observer) {
  config.validate();
  RunComponents comps = build_components(config);
  Environment& env = *comps.env;
  const Policy& policy = *comps.policy;
  const std::size_t horizon = config.env.horizon;

  const bool writing = !out_dir.empty();
  std::ofstream records_out;
  std::ofstream timing_out;
  if (writing) {
    fs::create_directories(out_dir);
    json resolved = config_to_json(config);
    resolved["output_dir"] = out_dir.string();
    write_json(out_dir / "resolved-config.json", resolved);
    fs::remove(out_dir / "error.json");
    records_out.open(out_dir / "records.csv");
    timing_out.open(out_dir / "timing.csv");
    if (!records_out || !timing_out) throw std::runtime_error("cannot write to " + out_dir.string());
    records_out << kRecordsSchema << '\n' << records_header() << '\n';
    timing_out << "iteration,wall_seconds\n";
  }

  Rng train_rng = make_rng(config.seed, Stream::kTraining);
  Rng init_rng = make_rng(config.seed, Stream::kInitialization);
  ParamVector theta = policy.initial_params(init_rng);
  ParamVector value_params;
  if (comps.value_net) {
    value_params = config.value.zero_init ? ParamVector::Zero(comps.value_net->num_params())
                                          : comps.value_net->initial_params(init_rng);
  }

  const auto sample = [&](const ParamVector& th, std::size_t count) {
    std::vector<Trajectory> batch;
    batch.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      batch.push_back(rollout(env, policy, th, train_rng, horizon));
    }
    return batch;
  };

  RunResult result;
  const auto start = std::chrono::steady_clock::now();
  const auto emit = [&](RunRecord rec, const ParamVector& th) {
    Rng eval_rng = make_rng(config.seed, Stream::kEvaluation);
    const EvalStats ev = evaluate_policy(env, policy, th, eval_rng, config.eval_episodes);
    rec.eval_return_mean = ev.mean;
    rec.eval_return_std = ev.std;
    result.records.push_back(rec);
    if (writing) {
      records_out << format_record(rec) << '\n' << std::flush;
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      timing_out << rec.iteration << ',' << fmt::format("{:.3f}", wall) << '\n' << std::flush;
    }
  };

  const auto record_error = [&](const NumericError& e) {
    if (!writing) return;
    write_json(out_dir / "error.json", json{{"error", "numeric"},
                                            {"message", e.what()},
                                            {"iteration", e.iteration()},
                                            {"timesteps", result.timesteps}});
  };

  BregmanPolicyOptimizer opt(config.optimizer_settings(), policy, comps.value_net.get());
  std::vector<Trajectory> batch = sample(theta, 1);
  try {
    opt.initialize(theta, batch, value_params);
  } catch (const NumericError& e) {
    record_error(e);
    throw;
  }
  result.trajectories = 1;

  RunRecord initial;
  initial.trajectories = 1;
  initial.train_return = mean_return(batch);
  initial.metric = std::numeric_limits<double>::quiet_NaN();
  emit(initial, opt.theta());

  std::uint64_t next_grid = config.eval_interval;
  try {
    while (result.timesteps < config.total_timesteps) {
      ParamVector exact_direction;
      if (config.exact_metric) {
        exact_direction = -exact_policy_value_and_gradient(comps.mdp, policy, opt.theta()).gradient;
      }
      const ParamVector& next = opt.update_parameters();
      if (config.exact_metric) result.exact_metric_trace.push_back(opt.metric_for(exact_direction));
      batch = sample(next, config.batch_size);
      result.timesteps += batch_steps(batch);
      result.trajectories += config.batch_size;
      opt.update_momentum(batch);
      ++result.iterations;
      result.metric_trace.push_back(opt.stats().metric);
      if (observer) observer(opt);

      const bool last = result.timesteps >= config.total_timesteps;
      if (last || result.timesteps >= next_grid) {
        RunRecord rec;
        rec.iteration = result.iterations;
        rec.timesteps = result.timesteps;
        rec.grid_timesteps =
            last ? config.total_timesteps
                 : result.timesteps / config.eval_interval * config.eval_interval;
        next_grid = rec.grid_timesteps + config.eval_interval;
        rec.trajectories = result.trajectories;
        rec.train_return = mean_return(batch);
        const auto& st = opt.stats();
        rec.metric = st.metric;
        if (config.exact_metric) rec.exact_metric = result.exact_metric_trace.back();
        rec.eta = st.eta;
        rec.beta = st.beta;
        rec.eta_clamped = st.eta_clamped;
        rec.beta_clamped = st.beta_clamped;
        rec.clipped_weights = st.clipped_weights;
        if (opt.uses_critic()) rec.value_loss = st.value_loss_after;
        emit(rec, opt.theta());
        spdlog::debug("iter {} steps {} eval {:.2f}", rec.iteration, rec.timesteps,
                      result.records.back().eval_return_mean);
      }
    }
  } catch (const NumericError& e) {
    record_error(e);
    throw;
  }

  result.theta = opt.theta();
  result.value_params = opt.value_params();
  result.value_fits = opt.value_fits();
  if (writing) {
    json meta{{"policy_kind", policy.kind()}, {"iterations", result.iterations}};
    write_params(out_dir / "theta.bin", result.theta, meta);
    if (comps.value_net) {
      write_params(out_dir / "value_params.bin", result.value_params,
                   json{{"layer_sizes", comps.value_net->mlp().spec().layer_sizes}});
    }
  }
  return result;
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::runtime_error("csv has no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw std::runtime_error(path.string() + ": missing schema line");
  }
  table.schema = line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header");
  table.columns = split(line, ',');
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != table.columns.size()) {
      throw std::runtime_error(path.string() + ": ragged row");
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_double(f));
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw std::runtime_error(path.string() + ": no data rows");
  return table;
}

std::vector<RunRecord> read_records(const fs::path& path) {
  const CsvTable t = read_csv(path);
  if (t.schema != kRecordsSchema) throw std::runtime_error(path.string() + " is not a records file");
  std::vector<RunRecord> out;
  for (const auto& row : t.rows) {
    RunRecord r;
    const auto get = [&](const char* name) { return row[t.column(name)]; };
    r.iteration = static_cast<std::uint64_t>(get("iteration"));
    r.timesteps = static_cast<std::uint64_t>(get("timesteps"));
    r.grid_timesteps = static_cast<std::uint64_t>(get("grid_timesteps"));
    r.trajectories = static_cast<std::uint64_t>(get("trajectories"));
    r.train_return = get("train_return");
    r.eval_return_mean = get("eval_return_mean");
    r.eval_return_std = get("eval_return_std");
    r.metric = get("metric");
    r.exact_metric = get("exact_metric");
    r.eta = get("eta");
    r.beta = get("beta");
    r.eta_clamped = get("eta_clamped") != 0.0;
    r.beta_clamped = get("beta_clamped") != 0.0;
    r.clipped_weights = static_cast<std::size_t>(get("clipped_weights"));
    r.value_loss = get("value_loss");
    out.push_back(r);
  }
  return out;
}

std::vector<AggregateRow> aggregate(const std::vector<std::vector<RunRecord>>& runs) {
  std::map<std::uint64_t, std::vector<const RunRecord*>> by_grid;
  for (const auto& run : runs) {
    for (const auto& r : run) by_grid[r.grid_timesteps].push_back(&r);
  }
  std::vector<AggregateRow> rows;
  for (const auto& [grid, recs] : by_grid) {
    AggregateRow row;
    row.grid_timesteps = grid;
    row.n = recs.size();
    const double n = static_cast<double>(recs.size());
    // Sums are taken relative to the first seed so constant columns reduce exactly.
    const double eval_shift = recs.front()->eval_return_mean;
    const double train_shift = recs.front()->train_return;
    double eval_sum = 0.0;
    double train_sum = 0.0;
    double metric_n = 0.0;
    for (const auto* r : recs) {
      eval_sum += r->eval_return_mean - eval_shift;
      train_sum += r->train_return - train_shift;
      if (!std::isnan(r->metric)) {
        row.metric_mean += r->metric;
        metric_n += 1.0;
      }
    }
    row.eval_mean = eval_shift + eval_sum / n;
    row.train_mean = train_shift + train_sum / n;
    row.metric_mean = metric_n > 0.0 ? row.metric_mean / metric_n
                                     : std::numeric_limits<double>::quiet_NaN();
    for (const auto* r : recs) {
      row.eval_std += (r->eval_return_mean - row.eval_mean) * (r->eval_return_mean - row.eval_mean);
      row.train_std += (r->train_return - row.train_mean) * (r->train_return - row.train_mean);
    }
    row.eval_std = std::sqrt(row.eval_std / n);
    row.train_std = std::sqrt(row.train_std / n);
    rows.push_back(row);
  }
  return rows;
}

void write_aggregate(const fs::path& path, const std::vector<AggregateRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kAggregateSchema << '\n'
      << "grid_timesteps,n,eval_mean,eval_std,train_mean,train_std,metric_mean\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{}\n", r.grid_timesteps, r.n, num(r.eval_mean),
                       num(r.eval_std), num(r.train_mean), num(r.train_std), num(r.metric_mean));
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> seeds;
  for (auto field : split(list, ',')) {
    const auto first = field.find_first_not_of(" \t");
    field = first == std::string::npos ? "" : field.substr(first, field.find_last_not_of(" \t") - first + 1);
    if (field.empty()) throw ConfigError("empty entry in seed list '" + list + "'");
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(field, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + field + "'");
    }
    if (used != field.size() || field.front() == '-') throw ConfigError("bad seed '" + field + "'");
    if (std::find(seeds.begin(), seeds.end(), v) != seeds.end()) {
      throw ConfigError("duplicate seed '" + field + "'");
    }
    seeds.push_back(v);
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

SweepResult run_sweep(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                      const fs::path& out_dir, std::size_t max_threads) {
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  base.validate();
  SweepResult sweep;
  sweep.seeds = seeds;
  sweep.runs.resize(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());

  std::size_t threads = max_threads != 0 ? max_threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, seeds.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      RunConfig cfg = base;
      cfg.seed = seeds[i];
      cfg.output_dir.clear();
      try {
        const fs::path dir = out_dir.empty() ? fs::path{} : out_dir / fmt::format("seed-{}", seeds[i]);
        sweep.runs[i] = run_training(cfg, dir);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<std::vector<RunRecord>> records;
  for (const auto& run : sweep.runs) records.push_back(run.records);
  sweep.rows = aggregate(records);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_aggregate(out_dir / "aggregate.csv", sweep.rows);
  }
  return sweep;
}

PairedReport run_paired(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                        const fs::path& out_dir, std::size_t max_threads) {
  if (out_dir.empty()) throw std::invalid_argument("run_paired needs an output directory");
  RunConfig bgpo_cfg = base;
  bgpo_cfg.optimizer.algorithm = Algorithm::kBgpo;
  RunConfig vr_cfg = base;
  vr_cfg.optimizer.algorithm = Algorithm::kVrBgpo;

  PairedReport report;
  report.bgpo = run_sweep(bgpo_cfg, seeds, out_dir / "bgpo", max_threads);
  report.vr_bgpo = run_sweep(vr_cfg, seeds, out_dir / "vr-bgpo", max_threads);

  std::map<std::uint64_t, std::pair<const AggregateRow*, const AggregateRow*>> joined;
  for (const auto& r : report.bgpo.rows) joined[r.grid_timesteps].first = &r;
  for (const auto& r : report.vr_bgpo.rows) joined[r.grid_timesteps].second = &r;

  report.csv = out_dir / "paired.csv";
  std::ofstream out(report.csv);
  if (!out) throw std::runtime_error("cannot write " + report.csv.string());
  out << kPairedSchema << '\n'
      << "grid_timesteps,bgpo_mean,bgpo_std,vr_bgpo_mean,vr_bgpo_std,difference\n";
  Series s_bgpo{"BGPO", "#1f77b4", {}, {}, {}};
  Series s_vr{"VR-BGPO", "#d62728", {}, {}, {}};
  double area_bgpo = 0.0;
  double area_vr = 0.0;
  std::size_t shared = 0;
  for (const auto& [grid, pair] : joined) {
    const auto [a, b] = pair;
    if (a == nullptr || b == nullptr) continue;
    out << fmt::format("{},{},{},{},{},{}\n", grid, num(a->eval_mean), num(a->eval_std),
                       num(b->eval_mean), num(b->eval_std), num(b->eval_mean - a->eval_mean));
    for (auto [s, r] : {std::pair{&s_bgpo, a}, std::pair{&s_vr, b}}) {
      s->x.push_back(static_cast<double>(grid));
      s->mean.push_back(r->eval_mean);
      s->std.push_back(r->eval_std);
    }
    area_bgpo += a->eval_mean;
    area_vr += b->eval_mean;
    ++shared;
  }
  out.close();
  if (shared == 0) throw std::runtime_error("paired sweeps share no grid points");

  report.svg = out_dir / "paired.svg";
  std::ofstream svg(report.svg);
  svg << render_svg({s_bgpo, s_vr}, "BGPO vs VR-BGPO on " + base.env.name);

  report.summary = out_dir / "paired-summary.json";
  write_json(report.summary,
             json{{"env", base.env.name},
                  {"seeds", seeds},
                  {"total_timesteps", base.total_timesteps},
                  {"grid_points", shared},
                  {"bgpo_final_mean", s_bgpo.mean.back()},
                  {"vr_bgpo_final_mean", s_vr.mean.back()},
                  {"bgpo_mean_over_grid", area_bgpo / static_cast<double>(shared)},
                  {"vr_bgpo_mean_over_grid", area_vr / static_cast<double>(shared)}});
  return report;
}

}  // namespace bgpo
