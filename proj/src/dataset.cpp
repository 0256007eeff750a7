// Dataset directory reader/writer and the seeded 70:15:15 split.
#include "biooss/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "biooss/artifacts.hpp"
#include "biooss/common.hpp"
#include "biooss/config.hpp"
#include "biooss/rng.hpp"

namespace biooss {

namespace {

// Collects schema violations so one load reports them all at once.
class ViolationLog {
 public:
  void add(const std::string& message) {
    ++count_;
    if (count_ <= kMaxListed) {
      if (!text_.empty()) text_ += "; ";
      text_ += message;
    }
  }
  bool empty() const { return count_ == 0; }
  std::string render() const {
    std::string out = text_;
    if (count_ > kMaxListed) {
      out += "; and " + std::to_string(count_ - kMaxListed) + " more";
    }
    return out;
  }

 private:
  static constexpr int kMaxListed = 20;
  std::string text_;
  int count_ = 0;
};

std::string semantics_name(DtSemantics s) {
  return s == DtSemantics::PhysicalSeconds ? "physical" : "index";
}

bool parse_double_token(const std::string& token, double* out) {
  errno = 0;
  char* end = nullptr;
  *out = std::strtod(token.c_str(), &end);
  return !token.empty() && errno == 0 && end != token.c_str() && *end == '\0';
}

std::string expected_header(int channels) {
  std::string header;
  for (int c = 0; c < channels; ++c) {
    if (c > 0) header.push_back(',');
    header += "ch" + std::to_string(c);
  }
  return header;
}

// Reads one sequence CSV; logs violations instead of throwing so the
// caller can keep scanning the rest of the dataset.
Sequence load_sequence(const std::filesystem::path& path, int channels,
                       DtSemantics semantics, ViolationLog* log) {
  Sequence seq;
  seq.dt_semantics = semantics;
  std::ifstream is(path);
  const std::string name = path.filename().string();
  if (!is.good()) {
    log->add("labeled file '" + name + "' does not exist");
    return seq;
  }
  std::string line;
  if (!std::getline(is, line)) {
    log->add("'" + name + "' is empty");
    return seq;
  }
  if (line != expected_header(channels)) {
    log->add("'" + name + "' header '" + line + "' does not match the " +
             std::to_string(channels) + "-channel layout");
    return seq;
  }
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    Eigen::VectorXd row(channels);
    int got = 0;
    std::istringstream cells(line);
    std::string token;
    bool ok = true;
    while (std::getline(cells, token, ',')) {
      double v = 0.0;
      if (!parse_double_token(token, &v)) {
        log->add("'" + name + "' line " + std::to_string(line_no) +
                 ": '" + token + "' is not a number");
        ok = false;
        break;
      }
      if (!is_finite(v)) {
        log->add("'" + name + "' line " + std::to_string(line_no) +
                 ": non-finite value");
        ok = false;
        break;
      }
      if (got < channels) row[got] = v;
      ++got;
    }
    if (!ok) continue;
    if (got != channels) {
      log->add("'" + name + "' line " + std::to_string(line_no) + ": " +
               std::to_string(got) + " columns, expected " +
               std::to_string(channels));
      continue;
    }
    seq.values.push_back(std::move(row));
  }
  if (seq.values.empty()) {
    log->add("'" + name + "' holds no time steps");
  }
  return seq;
}

}  // namespace

void save_dataset(const std::string& dir, const Batch& batch,
                  const DatasetMeta& meta) {
  if (batch.task != TaskKind::Classify) {
    throw DatasetError("only labeled classification batches can be saved");
  }
  if (batch.size() == 0) {
    throw DatasetError("refusing to save an empty dataset");
  }
  if (batch.labels.size() != batch.size()) {
    throw DatasetError("batch holds " + std::to_string(batch.size()) +
                       " sequences but " + std::to_string(batch.labels.size()) +
                       " labels");
  }
  if (meta.channels < 1) {
    throw DatasetError("meta channel count must be >= 1, got " +
                       std::to_string(meta.channels));
  }
  if (!(meta.dt > 0.0) || !is_finite(meta.dt)) {
    throw DatasetError("meta dt must be positive and finite");
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.inputs[i].dim() != meta.channels) {
      throw DatasetError("sequence " + std::to_string(i) + " has " +
                         std::to_string(batch.inputs[i].dim()) +
                         " channels, meta says " +
                         std::to_string(meta.channels));
    }
    if (batch.labels[i] < 0) {
      throw DatasetError("sequence " + std::to_string(i) +
                         " has negative label " +
                         std::to_string(batch.labels[i]));
    }
  }

  std::filesystem::create_directories(dir);
  std::vector<std::string> header;
  for (int c = 0; c < meta.channels; ++c) {
    header.push_back("ch" + std::to_string(c));
  }
  std::string labels_text = "file,label\n";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "seq_%05zu.csv", i);
    std::vector<std::vector<double>> rows;
    rows.reserve(batch.inputs[i].t_steps());
    for (const auto& v : batch.inputs[i].values) {
      rows.emplace_back(v.data(), v.data() + v.size());
    }
    write_csv((std::filesystem::path(dir) / name).string(), header, rows);
    labels_text += std::string(name) + "," + std::to_string(batch.labels[i]) +
                   "\n";
  }
  {
    std::ofstream os(std::filesystem::path(dir) / "labels.csv");
    if (!os.good()) {
      throw ConfigError("cannot write labels.csv under '" + dir + "'");
    }
    os << labels_text;
  }
  {
    std::ofstream os(std::filesystem::path(dir) / "meta");
    if (!os.good()) {
      throw ConfigError("cannot write meta under '" + dir + "'");
    }
    os << "[meta]\n";
    os << "channels = " << meta.channels << "\n";
    os << "dt = " << format_double(meta.dt) << "\n";
    os << "dt_semantics = " << semantics_name(meta.dt_semantics) << "\n";
  }
}

LoadedDataset load_dataset(const std::string& dir) {
  const std::filesystem::path root(dir);
  if (!std::filesystem::is_directory(root)) {
    throw DatasetError("dataset directory '" + dir + "' does not exist");
  }

  LoadedDataset data;
  ViolationLog log;

  // Meta file.
  if (!std::filesystem::exists(root / "meta")) {
    throw DatasetError("dataset '" + dir + "' has no meta file");
  }
  try {
    const RunConfig meta_cfg = RunConfig::load((root / "meta").string());
    meta_cfg.require_known({"meta.channels", "meta.dt", "meta.dt_semantics"});
    data.meta.channels = static_cast<int>(meta_cfg.get_int("meta.channels", 0));
    data.meta.dt = meta_cfg.get_double("meta.dt", 1.0);
    const std::string sem = meta_cfg.get_string("meta.dt_semantics", "physical");
    if (sem == "physical") {
      data.meta.dt_semantics = DtSemantics::PhysicalSeconds;
    } else if (sem == "index") {
      data.meta.dt_semantics = DtSemantics::UnitlessIndex;
    } else {
      log.add("meta dt_semantics '" + sem + "' is not physical or index");
    }
  } catch (const ConfigError& e) {
    throw DatasetError(std::string("meta file: ") + e.what());
  }
  if (data.meta.channels < 1) {
    log.add("meta channel count must be >= 1, got " +
            std::to_string(data.meta.channels));
  }
  if (!(data.meta.dt > 0.0) || !is_finite(data.meta.dt)) {
    log.add("meta dt must be positive and finite");
  }

  // Label table.
  std::vector<std::pair<std::string, int>> labeled;
  {
    std::ifstream is(root / "labels.csv");
    if (!is.good()) {
      throw DatasetError("dataset '" + dir + "' has no labels.csv");
    }
    std::string line;
    if (!std::getline(is, line) || line != "file,label") {
      log.add("labels.csv must start with the header 'file,label'");
    }
    int line_no = 1;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::size_t comma = line.rfind(',');
      if (comma == std::string::npos || comma == 0) {
        log.add("labels.csv line " + std::to_string(line_no) +
                ": expected 'file,label'");
        continue;
      }
      const std::string file = line.substr(0, comma);
      const std::string token = line.substr(comma + 1);
      errno = 0;
      char* end = nullptr;
      const long label = std::strtol(token.c_str(), &end, 10);
      if (token.empty() || errno != 0 || end == token.c_str() ||
          *end != '\0') {
        log.add("labels.csv line " + std::to_string(line_no) + ": label '" +
                token + "' is not an integer");
        continue;
      }
      if (label < 0) {
        log.add("labels.csv line " + std::to_string(line_no) +
                ": label must be >= 0, got " + std::to_string(label));
        continue;
      }
      labeled.emplace_back(file, static_cast<int>(label));
    }
  }
  if (labeled.empty()) {
    log.add("labels.csv names no sequences");
  }
  std::sort(labeled.begin(), labeled.end());
  for (std::size_t i = 1; i < labeled.size(); ++i) {
    if (labeled[i].first == labeled[i - 1].first) {
      log.add("labels.csv lists '" + labeled[i].first + "' more than once");
    }
  }

  // Every sequence CSV in the directory must be labeled.
  {
    std::vector<std::string> unlabeled;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
      const std::string name = entry.path().filename().string();
      if (name == "labels.csv" || entry.path().extension() != ".csv") {
        continue;
      }
      const bool known =
          std::any_of(labeled.begin(), labeled.end(),
                      [&](const auto& kv) { return kv.first == name; });
      if (!known) unlabeled.push_back(name);
    }
    std::sort(unlabeled.begin(), unlabeled.end());
    for (const std::string& name : unlabeled) {
      log.add("sequence file '" + name + "' has no label");
    }
  }

  // Load the sequences. Only an unusable channel count prevents checking
  // file contents; any other violation still lets the scan continue so one
  // error reports everything that is wrong.
  data.batch.task = TaskKind::Classify;
  if (data.meta.channels >= 1) {
    for (const auto& [file, label] : labeled) {
      Sequence seq = load_sequence(root / file, data.meta.channels,
                                   data.meta.dt_semantics, &log);
      if (!seq.values.empty()) {
        data.files.push_back(file);
        data.batch.inputs.push_back(std::move(seq));
        data.batch.labels.push_back(label);
        data.classes = std::max(data.classes, label + 1);
      }
    }
  }

  if (!log.empty()) {
    throw DatasetError("dataset '" + dir + "': " + log.render());
  }
  return data;
}

SplitIndices split_70_15_15(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed, "dataset/split-70-15-15");
  // Fisher-Yates with the seeded stream; the shuffled order is the split.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(rng.uniform_index(static_cast<std::uint64_t>(i)));
    std::swap(order[i - 1], order[j]);
  }
  const std::size_t n_train = static_cast<std::size_t>(0.70 * static_cast<double>(n));
  const std::size_t n_val = static_cast<std::size_t>(0.15 * static_cast<double>(n));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw DatasetError("cannot split " + std::to_string(n) +
                       " items 70:15:15 without an empty part");
  }
  SplitIndices split;
  split.train.assign(order.begin(),
                     order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                   order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val),
                    order.end());
  return split;
}

Batch subset(const Batch& batch, const std::vector<std::size_t>& indices) {
  Batch out;
  out.task = batch.task;
  for (std::size_t idx : indices) {
    if (idx >= batch.size()) {
      throw DimensionError("subset index " + std::to_string(idx) +
                           " out of range for " + std::to_string(batch.size()) +
                           " items");
    }
    out.inputs.push_back(batch.inputs[idx]);
    if (batch.task == TaskKind::Classify) {
      out.labels.push_back(batch.labels[idx]);
    } else {
      out.targets.push_back(batch.targets[idx]);
    }
  }
  return out;
}

}  // namespace biooss
