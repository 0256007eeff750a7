// Command-line front end: subcommand dispatch, layered configuration, and
// the experiment commands themselves. Every command reads one RunConfig,
// writes its artifacts under one output directory with a shared run-id
// prefix, and finishes with a manifest echoing the effective configuration.
// Outside of the manifest's timestamp and timing fields (and the benchmark
// command, whose product is timing), re-running a command with the same
// configuration reproduces every output byte for byte.
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "biooss/config.hpp"

namespace biooss {

// Where a command wrote and what (sorted base names, manifest included).
struct CommandResult {
  std::string out_dir;
  std::vector<std::string> outputs;
};

// Wave-field simulation: uniform parameters, an impulse, constant, or
// band-limited noise drive at the center cell, snapshot files of the
// pressure field, and an optional strict stability gate that dumps the
// violation report and raises StabilityError.
CommandResult cmd_simulate(const RunConfig& cfg);

// Mode-resolved eigen table (stencil symbol, FFT-comparable frequency
// units) plus the per-cell frequency heatmap at the stencil corner mode.
CommandResult cmd_eigen_report(const RunConfig& cfg);

// The four-quadrant frequency-selectivity run with its full artifact
// bundle and a JSON summary of the per-quadrant statistics.
CommandResult cmd_quadrant(const RunConfig& cfg);

// Gradient training on a labeled dataset (on disk, or the built-in tone
// discrimination task): seeded 70:15:15 split, projected optimizer loop,
// per-seed metrics with mean and standard deviation, loss trace, and a
// checkpoint of the last seed's trained model.
CommandResult cmd_train(const RunConfig& cfg);

// Reservoir-style classification on the same data sources: per-cell energy
// features through a fixed seeded model, ridge readout fit on the training
// split, per-seed metrics, the readout weights, and the model checkpoint.
CommandResult cmd_classify(const RunConfig& cfg);

// Wall-time scaling of the sequential engine against sequence length and
// grid size, the scan engine's combine count, and the timer overhead.
CommandResult cmd_bench(const RunConfig& cfg);

struct BenchRow {
  std::string kind;  // sequential_t | sequential_hw | scan_combines | overhead
  std::size_t n = 0;       // steps, or cells for the grid sweep
  double seconds = 0.0;    // minimum over repeats
  std::size_t combines = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  double slope_t = 0.0;   // log-log slope of seconds vs steps
  double slope_hw = 0.0;  // log-log slope of seconds vs cells
};

// The measurements behind cmd_bench, exposed so the acceptance harness can
// apply the scaling criteria to exactly the numbers the CLI reports.
BenchReport run_bench_measurements(const RunConfig& cfg);

// Parses arguments (without the program name), dispatches the subcommand,
// and maps the error taxonomy to exit codes: 0 success, 2 configuration
// error, 3 stability violation under strict mode, 4 numeric failure,
// 5 dataset error, 1 anything else.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace biooss
