// Subcommand implementations and the argument-parsing entry point.
#include "biooss/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"

#include "biooss/artifacts.hpp"
#include "biooss/common.hpp"
#include "biooss/dataset.hpp"
#include "biooss/experiments.hpp"
#include "biooss/grid.hpp"
#include "biooss/model.hpp"
#include "biooss/scan.hpp"
#include "biooss/signals.hpp"
#include "biooss/spectral.hpp"
#include "biooss/train.hpp"

namespace biooss {

namespace {

using ojson = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------- plumbing

struct RunContext {
  std::string out_dir;
  std::string run_id;
  std::uint64_t seed = 0;
  Clock::time_point t0;
};

std::set<std::string> with_run_keys(std::initializer_list<const char*> extra) {
  std::set<std::string> keys = {"run.id", "run.out", "run.seed", "run.threads",
                                "run.deterministic"};
  for (const char* k : extra) keys.insert(k);
  return keys;
}

// Reads the [run] section, validates it, and prepares the output directory.
RunContext begin_command(const RunConfig& cfg, const std::string& command) {
  RunContext ctx;
  ctx.t0 = Clock::now();
  const char* env_out = std::getenv("BIOOSS_OUT");
  ctx.out_dir = cfg.get_string("run.out", env_out ? env_out : ".");
  ctx.run_id = cfg.get_string("run.id", command);
  ctx.seed = cfg.get_u64("run.seed", 0);
  if (ctx.run_id.find('/') != std::string::npos ||
      ctx.run_id.find('\\') != std::string::npos) {
    throw ConfigError("run.id '" + ctx.run_id +
                      "' must not contain path separators");
  }
  const long threads = cfg.get_int("run.threads", 1);
  if (threads < 1) {
    throw ConfigError("run.threads must be >= 1, got " +
                      std::to_string(threads));
  }
  // Recorded for the manifest; all pipelines already run single-threaded in
  // one canonical order, so the flag never changes results.
  cfg.get_bool("run.deterministic", true);
  std::filesystem::create_directories(ctx.out_dir);
  return ctx;
}

std::string iso_utc_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os.good()) {
    throw ConfigError("cannot write '" + path + "'");
  }
  os << text;
}

// Writes the manifest (effective config echo, output list, timing) and
// assembles the command result. The timestamp and elapsed_seconds fields
// are the only values that vary between identical re-runs.
CommandResult finish_command(const RunContext& ctx, const std::string& command,
                             const RunConfig& cfg,
                             std::vector<std::string> outputs) {
  const double elapsed =
      std::chrono::duration<double>(Clock::now() - ctx.t0).count();
  std::sort(outputs.begin(), outputs.end());
  ojson manifest;
  manifest["command"] = command;
  ojson config = ojson::object();
  for (const auto& [key, value] : cfg.effective()) {
    config[key] = value;
  }
  manifest["config"] = config;
  manifest["outputs"] = outputs;
  manifest["elapsed_seconds"] = elapsed;
  manifest["timestamp"] = iso_utc_now();
  const std::string path =
      artifact_path(ctx.out_dir, ctx.run_id, "manifest.json");
  write_text(path, manifest.dump(2) + "\n");
  outputs.push_back(std::filesystem::path(path).filename().string());
  std::sort(outputs.begin(), outputs.end());
  return CommandResult{ctx.out_dir, std::move(outputs)};
}

GridShape shape_from(const RunConfig& cfg, int def_h, int def_w,
                     double def_dt) {
  GridShape shape;
  shape.h = static_cast<int>(cfg.get_int("grid.h", def_h));
  shape.w = static_cast<int>(cfg.get_int("grid.w", def_w));
  shape.dx = cfg.get_double("grid.dx", 1.0);
  shape.dt = cfg.get_double("grid.dt", def_dt);
  try {
    shape.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  return shape;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Population standard deviation: the spread over exactly the seeds run.
double std_of(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

ojson mean_std(const std::vector<double>& xs) {
  return ojson{{"mean", mean_of(xs)}, {"std", std_of(xs)}};
}

// -------------------------------------------------------------- simulate

std::vector<Field> build_drives(const RunConfig& cfg, const GridShape& shape,
                                std::uint64_t seed, std::size_t t_steps) {
  const std::string kind = cfg.get_string("simulate.drive", "impulse");
  const double amplitude = cfg.get_double("simulate.amplitude", 1.0);
  std::vector<Field> drives(t_steps, Field(shape.h, shape.w));
  const int ci = shape.h / 2;
  const int cj = shape.w / 2;
  if (kind == "none") {
    cfg.get_double("simulate.band_lo", 0.0);
    cfg.get_double("simulate.band_hi", 0.25 / shape.dt);
    return drives;
  }
  if (kind == "impulse") {
    cfg.get_double("simulate.band_lo", 0.0);
    cfg.get_double("simulate.band_hi", 0.25 / shape.dt);
    drives[0].at(ci, cj) = amplitude;
    return drives;
  }
  if (kind == "constant") {
    cfg.get_double("simulate.band_lo", 0.0);
    cfg.get_double("simulate.band_hi", 0.25 / shape.dt);
    for (auto& d : drives) d.at(ci, cj) = amplitude;
    return drives;
  }
  if (kind == "noise") {
    BandedNoiseSpec spec;
    spec.f_lo = cfg.get_double("simulate.band_lo", 0.0);
    spec.f_hi = cfg.get_double("simulate.band_hi", 0.25 / shape.dt);
    spec.t_steps = t_steps;
    spec.dt = shape.dt;
    spec.seed = seed;
    spec.amplitude = amplitude;
    std::vector<double> signal;
    try {
      signal = banded_white_noise(spec);
    } catch (const Error& e) {
      throw ConfigError(std::string("simulate drive: ") + e.what());
    }
    for (std::size_t n = 0; n < t_steps; ++n) {
      drives[n].at(ci, cj) = signal[n];
    }
    return drives;
  }
  throw ConfigError("simulate.drive must be none, impulse, constant, or "
                    "noise; got '" +
                    kind + "'");
}

}  // namespace

CommandResult cmd_simulate(const RunConfig& cfg) {
  cfg.require_known(with_run_keys(
      {"grid.h", "grid.w", "grid.dx", "grid.dt", "params.c", "params.kp",
       "params.ko", "simulate.t_steps", "simulate.engine", "simulate.bc",
       "simulate.record_every", "simulate.strict", "simulate.drive",
       "simulate.amplitude", "simulate.band_lo", "simulate.band_hi"}));
  const RunContext ctx = begin_command(cfg, "simulate");
  const GridShape shape = shape_from(cfg, 16, 16, 0.01);

  PhysicalParams params;
  try {
    params = PhysicalParams::uniform(shape, cfg.get_double("params.c", 1.0),
                                     cfg.get_double("params.kp", 0.1),
                                     cfg.get_double("params.ko", 0.1));
    params.validate(shape);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("params: ") + e.what());
  }

  const long t_steps = cfg.get_int("simulate.t_steps", 10);
  if (t_steps < 1) {
    throw ConfigError("simulate.t_steps must be >= 1, got " +
                      std::to_string(t_steps));
  }
  const std::string engine = cfg.get_string("simulate.engine", "sequential");
  const std::string bc_name = cfg.get_string("simulate.bc", "periodic");
  if (engine != "sequential" && engine != "scan") {
    throw ConfigError("simulate.engine must be sequential or scan, got '" +
                      engine + "'");
  }
  BoundaryCondition bc = BoundaryCondition::Periodic;
  if (bc_name == "zeropad") {
    bc = BoundaryCondition::ZeroPad;
  } else if (bc_name != "periodic") {
    throw ConfigError("simulate.bc must be periodic or zeropad, got '" +
                      bc_name + "'");
  }
  if (engine == "scan" && bc != BoundaryCondition::Periodic) {
    throw ConfigError("the scan engine requires periodic boundaries");
  }
  const long record_every = cfg.get_int("simulate.record_every", 0);
  if (record_every < 0) {
    throw ConfigError("simulate.record_every must be >= 0, got " +
                      std::to_string(record_every));
  }
  const bool strict = cfg.get_bool("simulate.strict", false);

  std::vector<std::string> outputs;
  if (strict) {
    const StabilityReport report = check_stability(params, shape);
    if (!report.ok()) {
      // Dump the violation table before failing, so the run leaves evidence.
      std::vector<std::vector<double>> rows;
      for (const StabilityViolation& v : report.violations) {
        rows.push_back({static_cast<double>(v.i), static_cast<double>(v.j),
                        v.c_actual, v.c_max});
      }
      write_csv(artifact_path(ctx.out_dir, ctx.run_id, "stability_report.csv"),
                {"i", "j", "c_actual", "c_max"}, rows);
      throw StabilityError(
          std::to_string(report.violations.size()) +
          " cells exceed the wave-speed bound; worst eigenvalue magnitude " +
          format_double(report.worst_eig_magnitude));
    }
  }

  const std::vector<Field> drives =
      build_drives(cfg, shape, ctx.seed, static_cast<std::size_t>(t_steps));
  const int re = record_every == 0 ? static_cast<int>(t_steps)
                                   : static_cast<int>(record_every);

  // Recorded steps follow one rule for both engines: every re-th plus last.
  std::vector<long> steps;
  for (long n = 1; n <= t_steps; ++n) {
    if (n % re == 0 || n == t_steps) steps.push_back(n);
  }

  const GridState x0(shape);
  std::vector<GridState> recorded;
  if (engine == "sequential") {
    recorded = simulate(x0, params, drives, shape, bc, re);
  } else {
    const DiagonalizedSystem sys(params, shape, bc);
    const std::vector<GridState> all = run_recurrence_scan(sys, x0, drives);
    for (long n : steps) {
      recorded.push_back(all[static_cast<std::size_t>(n - 1)]);
    }
  }
  if (recorded.size() != steps.size()) {
    throw NumericError("recorded " + std::to_string(recorded.size()) +
                       " states for " + std::to_string(steps.size()) +
                       " scheduled snapshots");
  }

  for (std::size_t k = 0; k < steps.size(); ++k) {
    char name[40];
    std::snprintf(name, sizeof(name), "p_%06ld.csv", steps[k]);
    const std::string path = artifact_path(ctx.out_dir, ctx.run_id, name);
    std::ofstream os(path, std::ios::binary);
    if (!os.good()) {
      throw ConfigError("cannot write '" + path + "'");
    }
    write_field_snapshot(os, recorded[k].p, "p", steps[k]);
    outputs.push_back(std::filesystem::path(path).filename().string());
  }
  return finish_command(ctx, "simulate", cfg, std::move(outputs));
}

// ----------------------------------------------------------- eigen-report

namespace {

// The four fixed quadrant bands used by the frequency-selectivity layout.
constexpr std::array<std::array<double, 2>, 4> kQuadrantBands = {
    {{0.0, 10.0}, {10.0, 20.0}, {20.0, 30.0}, {30.0, 40.0}}};

PhysicalParams params_from_layout(const RunConfig& cfg,
                                  const GridShape& shape) {
  const std::string layout = cfg.get_string("params.layout", "uniform");
  try {
    if (layout == "uniform") {
      PhysicalParams params = PhysicalParams::uniform(
          shape, cfg.get_double("params.c", 1.0),
          cfg.get_double("params.kp", 0.1), cfg.get_double("params.ko", 0.1));
      params.validate(shape);
      return params;
    }
    if (layout == "quadrant") {
      if (shape.h % 2 != 0 || shape.w % 2 != 0) {
        throw ConfigError("the quadrant layout needs even grid dimensions");
      }
      const double kp = cfg.get_double("params.kp", 3.0);
      const double ko = cfg.get_double("params.ko", 3.0);
      PhysicalParams params(shape);
      for (int q = 0; q < 4; ++q) {
        const BandInitResult init = init_for_band(
            kQuadrantBands[static_cast<std::size_t>(q)][0],
            kQuadrantBands[static_cast<std::size_t>(q)][1], kp, ko, shape.dt,
            shape.dx, shape, ModePolicy::StencilEdge);
        const int r0 = (q / 2) * (shape.h / 2);
        const int c0 = (q % 2) * (shape.w / 2);
        for (int i = r0; i < r0 + shape.h / 2; ++i) {
          for (int j = c0; j < c0 + shape.w / 2; ++j) {
            params.c.at(i, j) = init.c;
            params.kp.at(i, j) = kp;
            params.ko.at(i, j) = ko;
          }
        }
      }
      params.validate(shape);
      return params;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("params: ") + e.what());
  }
  throw ConfigError("params.layout must be uniform or quadrant, got '" +
                    layout + "'");
}

}  // namespace

CommandResult cmd_eigen_report(const RunConfig& cfg) {
  cfg.require_known(with_run_keys({"grid.h", "grid.w", "grid.dx", "grid.dt",
                                   "params.layout", "params.c", "params.kp",
                                   "params.ko", "eigen.modes"}));
  const RunContext ctx = begin_command(cfg, "eigen-report");
  const GridShape shape = shape_from(cfg, 16, 16, 0.01);
  const PhysicalParams params = params_from_layout(cfg, shape);

  const FourierMode edge{M_PI / shape.dx, M_PI / shape.dx};
  std::vector<FourierMode> modes;
  {
    const std::string spec = cfg.get_string("eigen.modes", "dc,edge");
    std::istringstream is(spec);
    std::string token;
    while (std::getline(is, token, ',')) {
      if (token == "dc") {
        modes.push_back(FourierMode{0.0, 0.0});
      } else if (token == "edge") {
        modes.push_back(edge);
      } else if (token == "fundamental") {
        modes.push_back(FourierMode{2.0 * M_PI / (shape.h * shape.dx),
                                    2.0 * M_PI / (shape.w * shape.dx)});
      } else {
        throw ConfigError("eigen.modes token '" + token +
                          "' is not dc, edge, or fundamental");
      }
    }
    if (modes.empty()) {
      throw ConfigError("eigen.modes names no modes");
    }
  }

  std::vector<std::string> outputs;
  {
    // Stencil symbol and FFT-comparable frequency units: the table then
    // describes the discrete stepper itself, so stable configurations show
    // magnitude <= 1 on every row.
    std::ostringstream os;
    write_eigen_report(os, params, shape, modes,
                       FrequencyConvention::Physical, SymbolKind::Stencil);
    const std::string path =
        artifact_path(ctx.out_dir, ctx.run_id, "eigen_modes.csv");
    write_text(path, os.str());
    outputs.push_back(std::filesystem::path(path).filename().string());
  }
  {
    const Field freq =
        frequency_map(params, shape, edge, PhaseModel::Exact,
                      FrequencyConvention::Physical, SymbolKind::Stencil);
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(shape.cells()));
    for (int i = 0; i < shape.h; ++i) {
      for (int j = 0; j < shape.w; ++j) {
        rows.push_back({static_cast<double>(i), static_cast<double>(j),
                        freq.at(i, j)});
      }
    }
    const std::string csv_path =
        artifact_path(ctx.out_dir, ctx.run_id, "freq_map.csv");
    write_csv(csv_path, {"i", "j", "f"}, rows);
    outputs.push_back(std::filesystem::path(csv_path).filename().string());

    const auto pixels = quantize_gray(freq, 0.0, 0.5 / shape.dt);
    const std::string pgm_path =
        artifact_path(ctx.out_dir, ctx.run_id, "freq_map.pgm");
    const std::string png_path =
        artifact_path(ctx.out_dir, ctx.run_id, "freq_map.png");
    write_pgm(pgm_path, shape.h, shape.w, pixels);
    write_png_gray8(png_path, shape.h, shape.w, pixels);
    outputs.push_back(std::filesystem::path(pgm_path).filename().string());
    outputs.push_back(std::filesystem::path(png_path).filename().string());
  }
  return finish_command(ctx, "eigen-report", cfg, std::move(outputs));
}

// --------------------------------------------------------------- quadrant

CommandResult cmd_quadrant(const RunConfig& cfg) {
  cfg.require_known(with_run_keys(
      {"grid.h", "grid.w", "grid.dx", "grid.dt", "quadrant.t_steps",
       "quadrant.kp", "quadrant.ko", "quadrant.amplitude",
       "quadrant.input_lo", "quadrant.input_hi", "quadrant.margin",
       "quadrant.texture_order", "quadrant.band0_lo", "quadrant.band0_hi",
       "quadrant.band1_lo", "quadrant.band1_hi", "quadrant.band2_lo",
       "quadrant.band2_hi", "quadrant.band3_lo", "quadrant.band3_hi"}));
  const RunContext ctx = begin_command(cfg, "quadrant");

  QuadrantConfig qc;
  qc.shape = shape_from(cfg, 64, 64, 0.01);
  const long t_steps = cfg.get_int("quadrant.t_steps", 2000);
  if (t_steps < 1) {
    throw ConfigError("quadrant.t_steps must be >= 1, got " +
                      std::to_string(t_steps));
  }
  qc.t_steps = static_cast<std::size_t>(t_steps);
  qc.kp = cfg.get_double("quadrant.kp", 3.0);
  qc.ko = cfg.get_double("quadrant.ko", 3.0);
  qc.amplitude = cfg.get_double("quadrant.amplitude", 1.0);
  qc.input_band.f_lo = cfg.get_double("quadrant.input_lo", 0.0);
  qc.input_band.f_hi = cfg.get_double("quadrant.input_hi", 50.0);
  qc.interior_margin =
      static_cast<int>(cfg.get_int("quadrant.margin", 3));
  qc.texture_order =
      static_cast<int>(cfg.get_int("quadrant.texture_order", 6));
  qc.seed = ctx.seed;
  for (int q = 0; q < 4; ++q) {
    const std::string base = "quadrant.band" + std::to_string(q);
    qc.bands[static_cast<std::size_t>(q)].f_lo = cfg.get_double(
        base + "_lo", kQuadrantBands[static_cast<std::size_t>(q)][0]);
    qc.bands[static_cast<std::size_t>(q)].f_hi = cfg.get_double(
        base + "_hi", kQuadrantBands[static_cast<std::size_t>(q)][1]);
  }
  // Full feasibility check up front: every failure below is caused by the
  // configuration, so it should surface as a configuration error.
  try {
    qc.validate();
    for (const FrequencyBand& band : qc.bands) {
      init_for_band(band.f_lo, band.f_hi, qc.kp, qc.ko, qc.shape.dt,
                    qc.shape.dx, qc.shape, ModePolicy::StencilEdge);
    }
  } catch (const Error& e) {
    throw ConfigError(std::string("quadrant: ") + e.what());
  }

  const SpectralSummary summary = quadrant_experiment(qc);
  write_quadrant_outputs(summary, ctx.out_dir, ctx.run_id);
  std::vector<std::string> outputs;
  for (const char* name :
       {"dominant_freq.csv", "spectra.csv", "trace_last200.csv",
        "p_final.csv", "dominant_freq.pgm", "dominant_freq.png",
        "p_final.pgm", "p_final.png"}) {
    outputs.push_back(std::filesystem::path(
        artifact_path(ctx.out_dir, ctx.run_id, name)).filename().string());
  }

  ojson summary_json;
  summary_json["wave_speed"] = summary.wave_speed;
  summary_json["quadrant_mean"] = summary.quadrant_mean;
  summary_json["in_band_fraction"] = summary.in_band_fraction;
  ojson probes = ojson::array();
  for (const auto& [i, j] : summary.probe_points) {
    probes.push_back(ojson::array({i, j}));
  }
  summary_json["probe_points"] = probes;
  const std::string summary_path =
      artifact_path(ctx.out_dir, ctx.run_id, "summary.json");
  write_text(summary_path, summary_json.dump(2) + "\n");
  outputs.push_back(
      std::filesystem::path(summary_path).filename().string());
  return finish_command(ctx, "quadrant", cfg, std::move(outputs));
}

// ----------------------------------------------------- train and classify

namespace {

struct TaskData {
  Batch batch;
  int input_dim = 1;
  int classes = 2;
};

const std::initializer_list<const char*> kModelDataKeys = {
    "grid.h",         "grid.w",         "grid.dx",         "grid.dt",
    "model.layers",   "model.patch",    "model.band_lo",   "model.band_hi",
    "model.kp",       "model.ko",       "data.dir",        "task.tones",
    "task.sigma",     "task.n_per_class", "task.t_steps"};

// The labeled data a run trains on: a dataset directory when configured,
// otherwise the built-in tone discrimination task.
TaskData load_task_data(const RunConfig& cfg, const GridShape& shape,
                        std::uint64_t seed) {
  if (cfg.has("data.dir")) {
    const LoadedDataset ds = load_dataset(cfg.get_string("data.dir", ""));
    if (ds.classes < 2) {
      throw DatasetError("classification needs at least two classes, got " +
                         std::to_string(ds.classes));
    }
    return TaskData{ds.batch, ds.meta.channels, ds.classes};
  }
  const std::vector<double> tones =
      cfg.get_double_list("task.tones", {5.0, 15.0});
  const double sigma = cfg.get_double("task.sigma", 0.5);
  const long n_per_class = cfg.get_int("task.n_per_class", 16);
  const long t_steps = cfg.get_int("task.t_steps", 200);
  try {
    Batch batch = make_frequency_discrimination_task(
        tones, sigma, static_cast<int>(n_per_class),
        static_cast<std::size_t>(t_steps), shape.dt, seed);
    return TaskData{std::move(batch), 1, static_cast<int>(tones.size())};
  } catch (const Error& e) {
    throw ConfigError(std::string("task: ") + e.what());
  }
}

// Seeded model with the configured depth, optional band-targeted wave
// speeds, and an optional patch layout for the first layer's input map.
ModelSpec build_model(const RunConfig& cfg, const GridShape& shape, int m,
                      int k, std::uint64_t seed) {
  InitDims dims;
  dims.input_dim = m;
  dims.output_dim = k;
  dims.layers = static_cast<int>(cfg.get_int("model.layers", 1));
  if (dims.layers < 1) {
    throw ConfigError("model.layers must be >= 1, got " +
                      std::to_string(dims.layers));
  }
  std::optional<BandPlan> plan;
  if (cfg.has("model.band_lo") || cfg.has("model.band_hi")) {
    BandPlan p;
    p.regions = {RegionBand{0, shape.h, 0, shape.w,
                            cfg.get_double("model.band_lo", 0.0),
                            cfg.get_double("model.band_hi", 0.0)}};
    p.kp = cfg.get_double("model.kp", 1.0);
    p.ko = cfg.get_double("model.ko", 1.0);
    plan = std::move(p);
  }
  ModelSpec model;
  try {
    model = init_model(seed, dims, shape, plan);
  } catch (const Error& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  const long patch = cfg.get_int("model.patch", 0);
  if (patch != 0) {
    try {
      model.layers.front().input_map =
          patch_input_map(m, shape, static_cast<int>(patch));
    } catch (const Error& e) {
      throw ConfigError(std::string("model.patch: ") + e.what());
    }
  }
  return model;
}

int argmax_index(const Eigen::VectorXd& v) {
  int arg = 0;
  v.maxCoeff(&arg);
  return arg;
}

}  // namespace

CommandResult cmd_train(const RunConfig& cfg) {
  std::set<std::string> keys = with_run_keys(kModelDataKeys);
  for (const char* k : {"train.steps", "train.lr", "train.batch",
                        "train.optimizer", "train.seeds"}) {
    keys.insert(k);
  }
  cfg.require_known(keys);
  const RunContext ctx = begin_command(cfg, "train");
  const GridShape shape = shape_from(cfg, 16, 16, 0.01);
  const TaskData data = load_task_data(cfg, shape, ctx.seed);

  TrainConfig base;
  base.lr = cfg.get_double("train.lr", 1e-3);
  base.steps = static_cast<int>(cfg.get_int("train.steps", 100));
  base.batch_size = static_cast<int>(cfg.get_int("train.batch", 0));
  const std::string opt = cfg.get_string("train.optimizer", "adam");
  if (opt == "adam") {
    base.optimizer = OptimizerKind::Adam;
  } else if (opt == "sgd") {
    base.optimizer = OptimizerKind::Sgd;
  } else {
    throw ConfigError("train.optimizer must be adam or sgd, got '" + opt +
                      "'");
  }
  const long seeds = cfg.get_int("train.seeds", 1);
  if (seeds < 1) {
    throw ConfigError("train.seeds must be >= 1, got " +
                      std::to_string(seeds));
  }
  try {
    base.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }

  ojson per_seed = ojson::array();
  std::vector<double> train_accs, val_accs, test_accs;
  std::optional<TrainResult> last;
  for (long s = 0; s < seeds; ++s) {
    const std::uint64_t seed_i = ctx.seed + static_cast<std::uint64_t>(s);
    const SplitIndices split = split_70_15_15(data.batch.size(), seed_i);
    const ModelSpec model =
        build_model(cfg, shape, data.input_dim, data.classes, seed_i);
    TrainConfig tc = base;
    tc.seed = seed_i;
    TrainResult result =
        train_loop(model, subset(data.batch, split.train), tc);
    const double train_acc =
        classification_accuracy(result.model, subset(data.batch, split.train));
    const double val_acc =
        classification_accuracy(result.model, subset(data.batch, split.val));
    const double test_acc =
        classification_accuracy(result.model, subset(data.batch, split.test));
    train_accs.push_back(train_acc);
    val_accs.push_back(val_acc);
    test_accs.push_back(test_acc);
    per_seed.push_back(ojson{{"seed", seed_i},
                             {"train_accuracy", train_acc},
                             {"val_accuracy", val_acc},
                             {"test_accuracy", test_acc},
                             {"final_loss", result.trace.back().loss}});
    last = std::move(result);
  }

  ojson metrics;
  metrics["command"] = "train";
  metrics["items"] = data.batch.size();
  metrics["classes"] = data.classes;
  metrics["per_seed"] = per_seed;
  metrics["summary"] = ojson{{"train_accuracy", mean_std(train_accs)},
                             {"val_accuracy", mean_std(val_accs)},
                             {"test_accuracy", mean_std(test_accs)}};

  std::vector<std::string> outputs;
  const std::string metrics_path =
      artifact_path(ctx.out_dir, ctx.run_id, "metrics.json");
  write_text(metrics_path, metrics.dump(2) + "\n");
  outputs.push_back(std::filesystem::path(metrics_path).filename().string());

  const std::string ckpt_path =
      artifact_path(ctx.out_dir, ctx.run_id, "model.ckpt");
  save_checkpoint(last->model, ckpt_path);
  outputs.push_back(std::filesystem::path(ckpt_path).filename().string());

  const std::string trace_path =
      artifact_path(ctx.out_dir, ctx.run_id, "trace.csv");
  {
    std::ofstream os(trace_path, std::ios::binary);
    if (!os.good()) {
      throw ConfigError("cannot write '" + trace_path + "'");
    }
    write_loss_trace(os, last->trace);
  }
  outputs.push_back(std::filesystem::path(trace_path).filename().string());
  return finish_command(ctx, "train", cfg, std::move(outputs));
}

CommandResult cmd_classify(const RunConfig& cfg) {
  std::set<std::string> keys = with_run_keys(kModelDataKeys);
  keys.insert("classify.reg");
  keys.insert("classify.seeds");
  cfg.require_known(keys);
  const RunContext ctx = begin_command(cfg, "classify");
  const GridShape shape = shape_from(cfg, 16, 16, 0.01);
  const TaskData data = load_task_data(cfg, shape, ctx.seed);

  const double reg = cfg.get_double("classify.reg", 1e-6);
  const long seeds = cfg.get_int("classify.seeds", 1);
  if (seeds < 1) {
    throw ConfigError("classify.seeds must be >= 1, got " +
                      std::to_string(seeds));
  }

  ojson per_seed = ojson::array();
  std::vector<double> train_accs, val_accs, test_accs;
  std::optional<ModelSpec> last_model;
  std::optional<RidgeFit> last_fit;
  for (long s = 0; s < seeds; ++s) {
    const std::uint64_t seed_i = ctx.seed + static_cast<std::uint64_t>(s);
    const SplitIndices split = split_70_15_15(data.batch.size(), seed_i);
    const ModelSpec model =
        build_model(cfg, shape, data.input_dim, data.classes, seed_i);

    Eigen::MatrixXd feats(static_cast<long>(data.batch.size()),
                          3 * shape.cells());
    for (std::size_t i = 0; i < data.batch.size(); ++i) {
      feats.row(static_cast<long>(i)) =
          energy_features(model, data.batch.inputs[i]).transpose();
    }
    Eigen::MatrixXd train_feats(static_cast<long>(split.train.size()),
                                feats.cols());
    std::vector<int> train_labels;
    for (std::size_t r = 0; r < split.train.size(); ++r) {
      train_feats.row(static_cast<long>(r)) =
          feats.row(static_cast<long>(split.train[r]));
      train_labels.push_back(data.batch.labels[split.train[r]]);
    }
    const RidgeFit fit = ridge_readout_fit(
        train_feats, one_hot_targets(train_labels, data.classes), reg);

    const auto split_accuracy = [&](const std::vector<std::size_t>& idx) {
      int correct = 0;
      for (std::size_t i : idx) {
        const Eigen::VectorXd score =
            fit.w.transpose() * feats.row(static_cast<long>(i)).transpose() +
            fit.b;
        correct += argmax_index(score) == data.batch.labels[i] ? 1 : 0;
      }
      return static_cast<double>(correct) / static_cast<double>(idx.size());
    };
    const double train_acc = split_accuracy(split.train);
    const double val_acc = split_accuracy(split.val);
    const double test_acc = split_accuracy(split.test);
    train_accs.push_back(train_acc);
    val_accs.push_back(val_acc);
    test_accs.push_back(test_acc);
    per_seed.push_back(ojson{{"seed", seed_i},
                             {"train_accuracy", train_acc},
                             {"val_accuracy", val_acc},
                             {"test_accuracy", test_acc}});
    last_model = model;
    last_fit = fit;
  }

  ojson metrics;
  metrics["command"] = "classify";
  metrics["items"] = data.batch.size();
  metrics["classes"] = data.classes;
  metrics["reg"] = reg;
  metrics["per_seed"] = per_seed;
  metrics["summary"] = ojson{{"train_accuracy", mean_std(train_accs)},
                             {"val_accuracy", mean_std(val_accs)},
                             {"test_accuracy", mean_std(test_accs)}};

  std::vector<std::string> outputs;
  const std::string metrics_path =
      artifact_path(ctx.out_dir, ctx.run_id, "metrics.json");
  write_text(metrics_path, metrics.dump(2) + "\n");
  outputs.push_back(std::filesystem::path(metrics_path).filename().string());

  // Readout table: one row per energy feature, then the intercept row.
  {
    std::vector<std::string> header;
    for (int k = 0; k < data.classes; ++k) {
      header.push_back("class" + std::to_string(k));
    }
    std::vector<std::vector<double>> rows;
    for (long r = 0; r < last_fit->w.rows(); ++r) {
      std::vector<double> row;
      for (int k = 0; k < data.classes; ++k) {
        row.push_back(last_fit->w(r, k));
      }
      rows.push_back(std::move(row));
    }
    std::vector<double> intercept;
    for (int k = 0; k < data.classes; ++k) {
      intercept.push_back(last_fit->b[k]);
    }
    rows.push_back(std::move(intercept));
    const std::string ridge_path =
        artifact_path(ctx.out_dir, ctx.run_id, "ridge.csv");
    write_csv(ridge_path, header, rows);
    outputs.push_back(std::filesystem::path(ridge_path).filename().string());
  }

  const std::string ckpt_path =
      artifact_path(ctx.out_dir, ctx.run_id, "model.ckpt");
  save_checkpoint(*last_model, ckpt_path);
  outputs.push_back(std::filesystem::path(ckpt_path).filename().string());
  return finish_command(ctx, "classify", cfg, std::move(outputs));
}

// ------------------------------------------------------------------ bench

namespace {

// Least-squares slope of log(seconds) against log(n).
double loglog_slope(const std::vector<std::pair<double, double>>& points) {
  const double n = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    const double lx = std::log(x);
    const double ly = std::log(std::max(y, 1e-9));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double time_grid_steps(int edge, std::size_t t_steps, long repeat) {
  const GridShape shape{edge, edge, 1.0, 0.01};
  const double c = 0.9 * stability_bound(0.1, 0.1, shape.dt, shape.dx);
  const PhysicalParams params = PhysicalParams::uniform(shape, c, 0.1, 0.1);
  GridState x0(shape);
  x0.p.at(edge / 2, edge / 2) = 1.0;
  const Field quiet(edge, edge);
  double best = std::numeric_limits<double>::infinity();
  for (long r = 0; r < repeat; ++r) {
    GridState state = x0;
    StepWorkspace ws(shape);
    const auto t0 = Clock::now();
    for (std::size_t n = 0; n < t_steps; ++n) {
      step_in_place(state, params, quiet, shape, BoundaryCondition::Periodic,
                    ws);
    }
    best = std::min(best,
                    std::chrono::duration<double>(Clock::now() - t0).count());
  }
  return best;
}

std::vector<std::size_t> size_list(const RunConfig& cfg, const char* key,
                                   const std::vector<double>& fallback) {
  std::vector<std::size_t> out;
  for (double v : cfg.get_double_list(key, fallback)) {
    if (!(v >= 1.0) || v != std::floor(v)) {
      throw ConfigError(std::string(key) + " entries must be positive "
                        "integers, got " + format_double(v));
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

}  // namespace

BenchReport run_bench_measurements(const RunConfig& cfg) {
  const std::vector<std::size_t> t_list =
      size_list(cfg, "bench.t_list", {256.0, 512.0, 1024.0, 2048.0});
  const std::vector<std::size_t> edge_list =
      size_list(cfg, "bench.edge_list", {8.0, 16.0, 32.0});
  const long t_fixed = cfg.get_int("bench.t_fixed", 256);
  const long grid_edge = cfg.get_int("bench.grid_edge", 32);
  const long repeat = cfg.get_int("bench.repeat", 5);
  if (t_fixed < 1 || grid_edge < 2 || repeat < 1) {
    throw ConfigError("bench.t_fixed, bench.grid_edge, and bench.repeat must "
                      "be positive (grid_edge >= 2)");
  }

  BenchReport report;
  {
    // Timer overhead: an empty measured region.
    const auto t0 = Clock::now();
    const double seconds =
        std::chrono::duration<double>(Clock::now() - t0).count();
    report.rows.push_back(BenchRow{"overhead", 0, seconds, 0});
  }
  std::vector<std::pair<double, double>> t_points;
  for (std::size_t t : t_list) {
    const double seconds =
        time_grid_steps(static_cast<int>(grid_edge), t, repeat);
    report.rows.push_back(BenchRow{"sequential_t", t, seconds, 0});
    t_points.emplace_back(static_cast<double>(t), seconds);
  }
  std::vector<std::pair<double, double>> hw_points;
  for (std::size_t edge : edge_list) {
    const double seconds = time_grid_steps(
        static_cast<int>(edge), static_cast<std::size_t>(t_fixed), repeat);
    const std::size_t cells = edge * edge;
    report.rows.push_back(BenchRow{"sequential_hw", cells, seconds, 0});
    hw_points.emplace_back(static_cast<double>(cells), seconds);
  }
  for (std::size_t t : t_list) {
    // Combine counting: the element dimension is irrelevant to the count,
    // so a token three-lane element keeps the measurement cheap.
    ScanElement e;
    e.a = {Complex(0.95, 0.05), Complex(0.9, -0.1), Complex(0.8, 0.0)};
    e.b = {Complex(0.1, 0.0), Complex(0.0, 0.2), Complex(-0.3, 0.1)};
    const std::vector<ScanElement> elems(t, e);
    ScanStats stats;
    const auto t0 = Clock::now();
    parallel_scan(elems, &stats);
    const double seconds =
        std::chrono::duration<double>(Clock::now() - t0).count();
    report.rows.push_back(BenchRow{"scan_combines", t, seconds, stats.combines});
  }
  report.slope_t = loglog_slope(t_points);
  report.slope_hw = loglog_slope(hw_points);
  return report;
}

CommandResult cmd_bench(const RunConfig& cfg) {
  cfg.require_known(with_run_keys({"bench.t_list", "bench.edge_list",
                                   "bench.t_fixed", "bench.grid_edge",
                                   "bench.repeat"}));
  const RunContext ctx = begin_command(cfg, "bench");
  const BenchReport report = run_bench_measurements(cfg);

  std::vector<std::string> outputs;
  {
    std::ostringstream os;
    os << "kind,n,seconds,combines\n";
    for (const BenchRow& row : report.rows) {
      os << row.kind << "," << row.n << "," << format_double(row.seconds)
         << "," << row.combines << "\n";
    }
    const std::string path =
        artifact_path(ctx.out_dir, ctx.run_id, "timing.csv");
    write_text(path, os.str());
    outputs.push_back(std::filesystem::path(path).filename().string());
  }
  {
    double worst_ratio = 0.0;
    for (const BenchRow& row : report.rows) {
      if (row.kind == "scan_combines" && row.n > 0) {
        worst_ratio = std::max(
            worst_ratio, static_cast<double>(row.combines) /
                             (2.0 * static_cast<double>(row.n)));
      }
    }
    ojson summary;
    summary["slope_t"] = report.slope_t;
    summary["slope_hw"] = report.slope_hw;
    summary["max_combines_over_2t"] = worst_ratio;
    const std::string path =
        artifact_path(ctx.out_dir, ctx.run_id, "bench.json");
    write_text(path, summary.dump(2) + "\n");
    outputs.push_back(std::filesystem::path(path).filename().string());
  }
  return finish_command(ctx, "bench", cfg, std::move(outputs));
}

// --------------------------------------------------------------- dispatch

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Damped-wave grid toolkit: simulation, eigen reports, "
               "frequency-selectivity experiments, training, classification, "
               "and benchmarks."};
  app.name("biooss");
  app.require_subcommand(1);
  app.footer(
      "Configuration comes from --config (INI-style sections), overridden by\n"
      "--set section.key=value, then by the shorthand flags. The effective\n"
      "configuration is echoed into <id>_manifest.json next to the outputs.\n"
      "Output root: --out, else run.out, else $BIOOSS_OUT, else the current\n"
      "directory. Re-runs with one configuration are byte-identical except\n"
      "manifest timestamps/timing (and the bench command, which measures\n"
      "time). --threads caps workers (current pipelines are single-threaded)\n"
      "and --deterministic pins the canonical reduction order (already the\n"
      "only order); both are recorded in the manifest.\n"
      "Exit codes: 0 ok, 2 configuration, 3 stability (strict), 4 numeric,\n"
      "5 dataset, 1 other.");

  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  std::uint64_t seed = 0;
  long threads = 1;
  bool deterministic = false;
  std::string engine;
  bool strict = false;
  std::string data_dir;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "configuration file");
    sub->add_option("--set", sets, "override as section.key=value")
        ->type_size(1);
    sub->add_option("--out", out_dir, "output directory (run.out)");
    sub->add_option("--seed", seed, "master seed (run.seed)");
    sub->add_option("--threads", threads, "worker cap (run.threads)");
    sub->add_flag("--deterministic", deterministic,
                  "force the canonical reduction order (run.deterministic)");
  };

  CLI::App* sim = app.add_subcommand(
      "simulate", "integrate the damped-wave grid and write snapshots");
  add_common(sim);
  sim->add_option("--engine", engine,
                  "stepper: sequential or scan (simulate.engine)");
  sim->add_flag("--strict", strict,
                "fail with exit 3 when the wave speed exceeds the stability "
                "bound (simulate.strict)");

  CLI::App* eig = app.add_subcommand(
      "eigen-report", "per-mode eigen table and frequency heatmap");
  add_common(eig);

  CLI::App* quad = app.add_subcommand(
      "quadrant", "four-band frequency-selectivity experiment");
  add_common(quad);

  CLI::App* train_cmd = app.add_subcommand(
      "train", "gradient training with a seeded 70:15:15 split");
  add_common(train_cmd);
  train_cmd->add_option("--data", data_dir, "dataset directory (data.dir)");

  CLI::App* classify_cmd = app.add_subcommand(
      "classify", "ridge readout over per-cell energy features");
  add_common(classify_cmd);
  classify_cmd->add_option("--data", data_dir, "dataset directory (data.dir)");

  CLI::App* bench_cmd = app.add_subcommand(
      "bench", "wall-time scaling and scan combine counts");
  add_common(bench_cmd);

  std::vector<const char*> argv;
  argv.push_back("biooss");
  for (const std::string& a : args) {
    argv.push_back(a.c_str());
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      cfg = RunConfig::load(config_path);
    }
    for (const std::string& s : sets) {
      cfg.set_override(s);
    }
    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--out") > 0) cfg.set_override("run.out=" + out_dir);
    if (sub->count("--seed") > 0) {
      cfg.set_override("run.seed=" + std::to_string(seed));
    }
    if (sub->count("--threads") > 0) {
      cfg.set_override("run.threads=" + std::to_string(threads));
    }
    if (deterministic) cfg.set_override("run.deterministic=true");
    if (sub == sim) {
      if (sim->count("--engine") > 0) {
        cfg.set_override("simulate.engine=" + engine);
      }
      if (strict) cfg.set_override("simulate.strict=true");
    }
    if ((sub == train_cmd || sub == classify_cmd) &&
        sub->count("--data") > 0) {
      cfg.set_override("data.dir=" + data_dir);
    }

    CommandResult result;
    std::string command;
    if (sub == sim) {
      command = "simulate";
      result = cmd_simulate(cfg);
    } else if (sub == eig) {
      command = "eigen-report";
      result = cmd_eigen_report(cfg);
    } else if (sub == quad) {
      command = "quadrant";
      result = cmd_quadrant(cfg);
    } else if (sub == train_cmd) {
      command = "train";
      result = cmd_train(cfg);
    } else if (sub == classify_cmd) {
      command = "classify";
      result = cmd_classify(cfg);
    } else {
      command = "bench";
      result = cmd_bench(cfg);
    }
    out << command << ": wrote " << result.outputs.size() << " files under "
        << result.out_dir << "\n";
    for (const std::string& name : result.outputs) {
      out << "  " << name << "\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const StabilityError& e) {
    err << "stability error: " << e.what() << "\n";
    return 3;
  } catch (const TrainingDivergedError& e) {
    err << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const DatasetError& e) {
    err << "dataset error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    args.emplace_back(argv[i]);
  }
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace biooss
