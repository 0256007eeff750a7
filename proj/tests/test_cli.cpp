// Tests for dataset directories, the seeded split, and the command-line
// surface: config merging, manifests, engine agreement, error exit codes,
// and byte-identical re-runs.
#include "biooss/cli.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "biooss/common.hpp"
#include "biooss/dataset.hpp"
#include "biooss/experiments.hpp"
#include "biooss/train.hpp"
#include "doctest.h"
#include "json.hpp"

namespace {

using biooss::Batch;
using biooss::DatasetError;
using biooss::DatasetMeta;
using biooss::load_dataset;
using biooss::LoadedDataset;
using biooss::make_frequency_discrimination_task;
using biooss::run_cli;
using biooss::save_dataset;
using biooss::split_70_15_15;
using biooss::SplitIndices;
using njson = nlohmann::json;

// Unique writable directory, removed when the guard leaves scope.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("biooss-cli-" + tag + "-" + std::to_string(getpid()) + "-" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

int run(const std::vector<std::string>& args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  std::ostringstream out;
  std::ostringstream err;
  const int rc = run_cli(args, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return rc;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE_MESSAGE(is.good(), "cannot open ", path);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return buffer.str();
}

njson read_json(const std::string& path) {
  return njson::parse(read_file(path));
}

// Values of a field snapshot or CSV table: every numeric cell of every
// non-comment, non-header line.
std::vector<double> csv_values(const std::string& path, bool skip_header) {
  std::ifstream is(path);
  REQUIRE_MESSAGE(is.good(), "cannot open ", path);
  std::vector<double> values;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (first && skip_header) {
      first = false;
      continue;
    }
    first = false;
    std::istringstream cells(line);
    std::string token;
    while (std::getline(cells, token, ',')) {
      values.push_back(std::strtod(token.c_str(), nullptr));
    }
  }
  return values;
}

// A small labeled tone batch for dataset tests (16 items, 1 channel).
Batch tone_batch() {
  return make_frequency_discrimination_task({5.0, 15.0}, 0.3, 8, 24, 0.01,
                                            11);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("dataset directories round trip bitwise") {
  const TempDir dir("dataset");
  const Batch batch = tone_batch();
  DatasetMeta meta;
  meta.channels = 1;
  meta.dt = 0.01;
  save_dataset(dir.str(), batch, meta);

  CHECK(std::filesystem::exists(dir.file("labels.csv")));
  CHECK(std::filesystem::exists(dir.file("meta")));
  CHECK(std::filesystem::exists(dir.file("seq_00000.csv")));
  CHECK(std::filesystem::exists(dir.file("seq_00015.csv")));

  const LoadedDataset loaded = load_dataset(dir.str());
  CHECK(loaded.meta.channels == 1);
  CHECK(loaded.meta.dt == 0.01);
  CHECK(loaded.classes == 2);
  REQUIRE(loaded.files.size() == batch.size());
  CHECK(std::is_sorted(loaded.files.begin(), loaded.files.end()));
  REQUIRE(loaded.batch.size() == batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(loaded.batch.labels[i] == batch.labels[i]);
    REQUIRE(loaded.batch.inputs[i].t_steps() == batch.inputs[i].t_steps());
    for (std::size_t n = 0; n < batch.inputs[i].t_steps(); ++n) {
      // 17-significant-digit text makes the reload exact, not approximate.
      CHECK(loaded.batch.inputs[i].values[n][0] ==
            batch.inputs[i].values[n][0]);
    }
  }
}

TEST_CASE("dataset loading enumerates all violations at once") {
  const TempDir dir("violations");
  save_dataset(dir.str(), tone_batch(), DatasetMeta{1, 0.01});

  // Break it four independent ways.
  std::filesystem::remove(dir.file("seq_00003.csv"));
  {
    std::ofstream os(dir.file("seq_00005.csv"));
    os << "ch0\nnot-a-number\n";
  }
  {
    std::ofstream os(dir.file("stray.csv"));
    os << "ch0\n1.0\n";
  }
  {
    std::ofstream os(dir.file("seq_00007.csv"));
    os << "wrong,header\n1.0,2.0\n";
  }

  try {
    load_dataset(dir.str());
    FAIL_CHECK("expected DatasetError");
  } catch (const DatasetError& e) {
    const std::string what = e.what();
    INFO("message: ", what);
    CHECK(what.find("'seq_00003.csv' does not exist") != std::string::npos);
    CHECK(what.find("'seq_00005.csv' line 2") != std::string::npos);
    CHECK(what.find("not a number") != std::string::npos);
    CHECK(what.find("'stray.csv' has no label") != std::string::npos);
    CHECK(what.find("'seq_00007.csv' header") != std::string::npos);
  }

  SUBCASE("missing pieces fail with pointed messages") {
    CHECK_THROWS_WITH_AS(load_dataset(dir.str() + "-nope"),
                         doctest::Contains("does not exist"), DatasetError);
    std::filesystem::remove(dir.file("meta"));
    CHECK_THROWS_WITH_AS(load_dataset(dir.str()),
                         doctest::Contains("no meta file"), DatasetError);
  }
}

TEST_CASE("seeded split cuts 70:15:15 and covers every item") {
  const SplitIndices split = split_70_15_15(20, 5);
  CHECK(split.train.size() == 14);
  CHECK(split.val.size() == 3);
  CHECK(split.test.size() == 3);

  std::set<std::size_t> seen;
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    for (std::size_t idx : *part) {
      CHECK(idx < 20);
      CHECK(seen.insert(idx).second);  // disjoint
    }
  }
  CHECK(seen.size() == 20);

  SUBCASE("deterministic in the seed") {
    const SplitIndices again = split_70_15_15(20, 5);
    CHECK(again.train == split.train);
    CHECK(again.test == split.test);
    const SplitIndices other = split_70_15_15(20, 6);
    CHECK(other.train != split.train);
  }
  SUBCASE("too few items for three non-empty parts") {
    CHECK_THROWS_AS(split_70_15_15(6, 1), DatasetError);
  }
}

TEST_CASE("simulate writes scheduled snapshots and a manifest") {
  const TempDir dir("simulate");
  std::string out_text;
  const int rc = run({"simulate", "--out", dir.str(), "--set",
                      "simulate.t_steps=12", "--set",
                      "simulate.record_every=4"},
                     &out_text);
  REQUIRE(rc == 0);
  CHECK(out_text.find("simulate: wrote") != std::string::npos);

  for (const char* name :
       {"simulate_p_000004.csv", "simulate_p_000008.csv",
        "simulate_p_000012.csv", "simulate_manifest.json"}) {
    CHECK_MESSAGE(std::filesystem::exists(dir.file(name)), name);
  }
  const std::string first_line =
      read_file(dir.file("simulate_p_000004.csv")).substr(0, 30);
  CHECK(first_line.find("# field=p H=16 W=16") != std::string::npos);

  const njson manifest = read_json(dir.file("simulate_manifest.json"));
  CHECK(manifest.at("command") == "simulate");
  // The echo holds the merged configuration, defaults included.
  CHECK(manifest.at("config").at("simulate.t_steps") == "12");
  CHECK(manifest.at("config").at("simulate.record_every") == "4");
  CHECK(manifest.at("config").at("grid.h") == "16");
  CHECK(manifest.at("config").at("simulate.engine") == "sequential");
  CHECK(manifest.at("config").at("run.seed") == "0");
  const auto outputs = manifest.at("outputs").get<std::vector<std::string>>();
  CHECK(outputs == std::vector<std::string>{"simulate_p_000004.csv",
                                            "simulate_p_000008.csv",
                                            "simulate_p_000012.csv"});
  CHECK(manifest.at("elapsed_seconds").get<double>() >= 0.0);
  CHECK(manifest.at("timestamp").get<std::string>().size() == 20);
}

TEST_CASE("scan and sequential engines agree through the command line") {
  const TempDir dir("engines");
  const std::vector<std::string> common = {
      "simulate",      "--out",
      dir.str(),       "--seed",
      "3",             "--set",
      "params.c=3",    "--set",
      "simulate.t_steps=30",
      "--set",         "simulate.record_every=0",
      "--set",         "simulate.drive=noise"};

  std::vector<std::string> seq = common;
  seq.push_back("--set");
  seq.push_back("run.id=seq");
  REQUIRE(run(seq) == 0);

  std::vector<std::string> scan = common;
  scan.push_back("--set");
  scan.push_back("run.id=scan");
  scan.push_back("--engine");
  scan.push_back("scan");
  REQUIRE(run(scan) == 0);

  const std::vector<double> a = csv_values(dir.file("seq_p_000030.csv"), false);
  const std::vector<double> b =
      csv_values(dir.file("scan_p_000030.csv"), false);
  REQUIRE(a.size() == 256);
  REQUIRE(a.size() == b.size());
  double max_diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(a[i] - b[i]));
  }
  CHECK(max_diff <= 1e-11);
}

TEST_CASE("strict mode exits 3 and leaves the violation table") {
  const TempDir dir("strict");
  std::string err_text;
  const int rc = run({"simulate", "--out", dir.str(), "--set", "params.c=300",
                      "--strict"},
                     nullptr, &err_text);
  CHECK(rc == 3);
  CHECK(err_text.find("stability error") != std::string::npos);

  const std::string report_path = dir.file("simulate_stability_report.csv");
  REQUIRE(std::filesystem::exists(report_path));
  const std::string report = read_file(report_path);
  CHECK(report.rfind("i,j,c_actual,c_max", 0) == 0);
  // Every cell of the 16x16 grid violates the bound at c = 300.
  CHECK(csv_values(report_path, true).size() == 256 * 4);
  // The failed run must not pretend it completed.
  CHECK_FALSE(std::filesystem::exists(dir.file("simulate_manifest.json")));

  SUBCASE("the same configuration without strict runs to completion") {
    REQUIRE(run({"simulate", "--out", dir.str(), "--set", "params.c=300",
                 "--set", "simulate.t_steps=3"}) == 0);
    CHECK(std::filesystem::exists(dir.file("simulate_manifest.json")));
  }
}

TEST_CASE("eigen report is contractive when stable and resolves quadrants") {
  const TempDir dir("eigen");
  REQUIRE(run({"eigen-report", "--out", dir.str(), "--set",
               "eigen.modes=dc,fundamental,edge"}) == 0);

  std::ifstream is(dir.file("eigen-report_eigen_modes.csv"));
  REQUIRE(is.good());
  std::string line;
  std::getline(is, line);
  CHECK(line == "i,j,xi_x,xi_y,re_l2,im_l2,magnitude,frequency");
  int rows = 0;
  int dc_rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    std::vector<double> cells;
    std::istringstream ls(line);
    std::string token;
    while (std::getline(ls, token, ',')) {
      cells.push_back(std::strtod(token.c_str(), nullptr));
    }
    REQUIRE(cells.size() == 8);
    CHECK(cells[6] <= 1.0 + 1e-12);  // stable config: no growing mode
    if (cells[2] == 0.0 && cells[3] == 0.0) {
      ++dc_rows;
      CHECK(cells[7] == 0.0);  // a zero-frequency row for the DC mode
    }
  }
  CHECK(rows == 3 * 256);      // three modes, one row per cell
  CHECK(dc_rows == 256);

  SUBCASE("quadrant layout produces four distinct frequency plateaus") {
    REQUIRE(run({"eigen-report", "--out", dir.str(), "--set", "run.id=quad",
                 "--set", "params.layout=quadrant"}) == 0);
    const std::vector<double> cells =
        csv_values(dir.file("quad_freq_map.csv"), true);
    REQUIRE(cells.size() == 256 * 3);
    std::set<long> plateaus;
    for (std::size_t r = 0; r < cells.size(); r += 3) {
      plateaus.insert(std::lround(cells[r + 2] * 1e6));
    }
    REQUIRE(plateaus.size() == 4);
    // The plateaus sit at the four band midpoints.
    std::vector<long> expected = {5000000, 15000000, 25000000, 35000000};
    CHECK(std::vector<long>(plateaus.begin(), plateaus.end()) == expected);
    CHECK(std::filesystem::exists(dir.file("quad_freq_map.pgm")));
    CHECK(std::filesystem::exists(dir.file("quad_freq_map.png")));
  }
}

TEST_CASE("default quadrant run separates the four bands") {
  const TempDir dir("quadrant");
  REQUIRE(run({"quadrant", "--out", dir.str()}) == 0);
  const njson summary = read_json(dir.file("quadrant_summary.json"));
  const auto means = summary.at("quadrant_mean").get<std::vector<double>>();
  const auto fractions =
      summary.at("in_band_fraction").get<std::vector<double>>();
  REQUIRE(means.size() == 4);
  REQUIRE(fractions.size() == 4);
  for (int q = 0; q < 4; ++q) {
    CHECK(fractions[static_cast<std::size_t>(q)] >= 0.9);
  }
  CHECK(means[0] < means[1]);
  CHECK(means[1] < means[2]);
  CHECK(means[2] < means[3]);
}

TEST_CASE("classify reaches full accuracy on the tone task") {
  const TempDir dir("classify");
  REQUIRE(run({"classify", "--out", dir.str(), "--seed", "1", "--set",
               "grid.h=10", "--set", "grid.w=10", "--set",
               "task.t_steps=150", "--set", "task.n_per_class=10"}) == 0);
  const njson metrics = read_json(dir.file("classify_metrics.json"));
  CHECK(metrics.at("items") == 20);
  CHECK(metrics.at("classes") == 2);
  const njson row = metrics.at("per_seed").at(0);
  CHECK(row.at("train_accuracy").get<double>() == 1.0);
  CHECK(row.at("test_accuracy").get<double>() >= 0.95);

  // Readout table: one row per energy feature plus the intercept row.
  std::ifstream is(dir.file("classify_ridge.csv"));
  REQUIRE(is.good());
  std::string line;
  std::getline(is, line);
  CHECK(line == "class0,class1");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 3 * 100 + 1);
  CHECK(std::filesystem::exists(dir.file("classify_model.ckpt")));
}

TEST_CASE("train with zero learning rate keeps the initial metrics") {
  const TempDir dir("lr0");
  const auto args = [&](const char* id, const char* steps) {
    return std::vector<std::string>{
        "train",        "--out", dir.str(),
        "--seed",       "4",     "--set",
        "grid.h=6",     "--set", "grid.w=6",
        "--set",        "task.t_steps=60",
        "--set",        "task.n_per_class=5",
        "--set",        "train.lr=0",
        "--set",        std::string("train.steps=") + steps,
        "--set",        std::string("run.id=") + id};
  };
  REQUIRE(run(args("short", "2")) == 0);
  REQUIRE(run(args("long", "8")) == 0);

  const njson a = read_json(dir.file("short_metrics.json"));
  const njson b = read_json(dir.file("long_metrics.json"));
  // No update ever moves the model, so any step count measures the same
  // initialized model.
  CHECK(a.at("per_seed") == b.at("per_seed"));

  std::set<std::string> losses;
  std::ifstream is(dir.file("long_trace.csv"));
  std::string line;
  std::getline(is, line);
  CHECK(line == "step,loss,grad_norm,max_eig_magnitude");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    const std::size_t c0 = line.find(',');
    losses.insert(line.substr(c0 + 1, line.find(',', c0 + 1) - c0 - 1));
  }
  CHECK(rows == 8);
  CHECK(losses.size() == 1);  // constant loss across all steps
}

TEST_CASE("multi-seed runs report mean and spread") {
  const TempDir dir("seeds");
  REQUIRE(run({"classify", "--out", dir.str(), "--seed", "2", "--set",
               "classify.seeds=5", "--set", "grid.h=8", "--set", "grid.w=8",
               "--set", "task.t_steps=80", "--set",
               "task.n_per_class=5"}) == 0);
  const njson metrics = read_json(dir.file("classify_metrics.json"));
  const njson rows = metrics.at("per_seed");
  REQUIRE(rows.size() == 5);
  double total = 0.0;
  for (int s = 0; s < 5; ++s) {
    CHECK(rows.at(s).at("seed") == 2 + s);
    total += rows.at(s).at("test_accuracy").get<double>();
  }
  const njson summary = metrics.at("summary").at("test_accuracy");
  CHECK(summary.at("mean").get<double>() ==
        doctest::Approx(total / 5.0).epsilon(1e-12));
  CHECK(summary.at("std").get<double>() >= 0.0);
  CHECK(metrics.at("summary").contains("train_accuracy"));
  CHECK(metrics.at("summary").contains("val_accuracy"));
}

TEST_CASE("a dataset directory drives classification") {
  const TempDir data("traindata");
  save_dataset(data.str(), tone_batch(), DatasetMeta{1, 0.01});

  const TempDir dir("fromdisk");
  REQUIRE(run({"classify", "--out", dir.str(), "--data", data.str(), "--set",
               "grid.h=8", "--set", "grid.w=8"}) == 0);
  const njson metrics = read_json(dir.file("classify_metrics.json"));
  CHECK(metrics.at("items") == 16);
  CHECK(metrics.at("classes") == 2);

  SUBCASE("a corrupted dataset fails with exit 5") {
    std::ofstream(data.file("seq_00002.csv")) << "ch0\nbroken\n";
    std::string err_text;
    const int rc = run({"classify", "--out", dir.str(), "--data", data.str()},
                       nullptr, &err_text);
    CHECK(rc == 5);
    CHECK(err_text.find("dataset error") != std::string::npos);
  }
}

TEST_CASE("re-runs are byte-identical except manifest timing") {
  const TempDir dir("rerun");
  const std::vector<std::string> args = {
      "quadrant", "--out",  dir.str(),
      "--seed",   "7",      "--set",
      "grid.h=16", "--set", "grid.w=16",
      "--set",    "quadrant.t_steps=400"};
  REQUIRE(run(args) == 0);

  std::map<std::string, std::string> first;
  for (const auto& entry : std::filesystem::directory_iterator(dir.path)) {
    first[entry.path().filename().string()] = read_file(entry.path().string());
  }
  REQUIRE(first.size() == 10);

  REQUIRE(run(args) == 0);
  for (const auto& [name, content] : first) {
    if (name == "quadrant_manifest.json") continue;
    CHECK_MESSAGE(read_file(dir.file(name)) == content, name);
  }
  njson m1 = njson::parse(first.at("quadrant_manifest.json"));
  njson m2 = read_json(dir.file("quadrant_manifest.json"));
  for (njson* m : {&m1, &m2}) {
    m->erase("elapsed_seconds");
    m->erase("timestamp");
  }
  CHECK(m1 == m2);
}

TEST_CASE("environment variable supplies the default output root") {
  const TempDir dir("envroot");
  REQUIRE(setenv("BIOOSS_OUT", dir.str().c_str(), 1) == 0);
  const int rc = run({"simulate", "--set", "simulate.t_steps=2"});
  unsetenv("BIOOSS_OUT");
  REQUIRE(rc == 0);
  CHECK(std::filesystem::exists(dir.file("simulate_manifest.json")));
  const njson manifest = read_json(dir.file("simulate_manifest.json"));
  CHECK(manifest.at("config").at("run.out") == dir.str());
}

TEST_CASE("exit codes map the error taxonomy") {
  const TempDir dir("exits");
  std::string err_text;

  SUBCASE("configuration errors exit 2") {
    CHECK(run({"simulate", "--out", dir.str(), "--set", "nope.key=1"},
              nullptr, &err_text) == 2);
    CHECK(err_text.find("unknown key 'nope.key'") != std::string::npos);
    CHECK(run({"simulate", "--out", dir.str(), "--set",
               "simulate.t_steps=soon"}) == 2);
    CHECK(run({"simulate", "--out", dir.str(), "--engine", "warp"}) == 2);
    CHECK(run({"simulate", "--out", dir.str(), "--engine", "scan", "--set",
               "simulate.bc=zeropad"},
              nullptr, &err_text) == 2);
    CHECK(err_text.find("periodic") != std::string::npos);
    CHECK(run({"simulate", "--config", dir.file("absent.ini")}) == 2);
    CHECK(run({"simulate", "--out", dir.str(), "--threads", "0"}) == 2);
    CHECK(run({"simulate", "--out", dir.str(), "--set",
               "run.id=a/b"}) == 2);
    CHECK(run({"quadrant", "--out", dir.str(), "--set",
               "quadrant.band3_lo=300", "--set",
               "quadrant.band3_hi=400"}) == 2);
  }
  SUBCASE("argument parse failures exit 2 and help exits 0") {
    CHECK(run({"simulate", "--bogus-flag"}) == 2);
    CHECK(run({}) == 2);  // a subcommand is required
    std::string out_text;
    CHECK(run({"--help"}, &out_text) == 0);
    CHECK(out_text.find("Subcommands") != std::string::npos);
    CHECK(out_text.find("Exit codes") != std::string::npos);
  }
  SUBCASE("numeric divergence exits 4") {
    CHECK(run({"train", "--out", dir.str(), "--seed", "4", "--set",
               "grid.h=6", "--set", "grid.w=6", "--set", "task.t_steps=60",
               "--set", "task.n_per_class=5", "--set", "train.steps=60",
               "--set", "train.lr=1000000", "--set", "train.optimizer=sgd"},
              nullptr, &err_text) == 4);
    CHECK(err_text.find("diverged") != std::string::npos);
  }
  SUBCASE("dataset failures exit 5") {
    CHECK(run({"train", "--out", dir.str(), "--data", dir.file("nothere")},
              nullptr, &err_text) == 5);
    CHECK(err_text.find("dataset error") != std::string::npos);
  }
}

TEST_CASE("the built binary answers help over its real argv") {
  const char* bin = std::getenv("BIOOSS_BIN");
  if (bin == nullptr) {
    MESSAGE("BIOOSS_BIN not set; skipping the process-level check");
    return;
  }
  const TempDir dir("binary");
  const std::string log = dir.file("help.txt");
  const int status =
      std::system((std::string(bin) + " --help > " + log + " 2>&1").c_str());
  REQUIRE(status != -1);
  CHECK(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(read_file(log).find("Subcommands") != std::string::npos);

  const int rc_bad = std::system(
      (std::string(bin) + " simulate --set nope.key=1 --out " + dir.str() +
       " > /dev/null 2>&1")
          .c_str());
  REQUIRE(rc_bad != -1);
  CHECK(WEXITSTATUS(rc_bad) == 2);
}

}  // TEST_SUITE("cli")
