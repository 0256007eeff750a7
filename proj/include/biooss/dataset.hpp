// On-disk sequence datasets: one CSV per sequence (rows = time steps,
// columns = channels), a labels.csv mapping each file to its integer class,
// and a meta file carrying the channel count and time-step semantics.
// Loading validates the whole layout and enumerates every violation in one
// DatasetError. A seeded shuffle provides the 70:15:15 split.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "biooss/train.hpp"

namespace biooss {

// Contents of the dataset's `meta` file (sections-and-keys text):
//   [meta]
//   channels = <int>
//   dt = <double>
//   dt_semantics = physical | index
struct DatasetMeta {
  int channels = 0;
  double dt = 1.0;
  DtSemantics dt_semantics = DtSemantics::PhysicalSeconds;
};

struct LoadedDataset {
  std::vector<std::string> files;  // label order, sorted by file name
  Batch batch;                     // Classify items aligned with `files`
  DatasetMeta meta;
  int classes = 0;  // 1 + the largest label
};

// Writes `batch` (task Classify, dim == meta.channels) into `dir` as
// seq_00000.csv ... plus labels.csv and meta. Sequence values carry 17
// significant digits so a reload is bit-exact. Throws DatasetError when the
// batch shape disagrees with the meta, and filesystem errors as ConfigError.
void save_dataset(const std::string& dir, const Batch& batch,
                  const DatasetMeta& meta);

// Reads the layout written by save_dataset (any file names work; sequence
// files are those named by labels.csv). Violations are collected and thrown
// together: missing meta or labels, unlabeled sequence files, labeled files
// that do not exist, channel-count mismatches, ragged or non-numeric rows,
// non-finite values, and out-of-range labels.
LoadedDataset load_dataset(const std::string& dir);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Deterministic split: indices 0..n-1 shuffled by the seeded stream, then
// cut 70:15:15 (floor for train and val, remainder to test). Throws
// DatasetError when any part would be empty (n < 7).
SplitIndices split_70_15_15(std::size_t n, std::uint64_t seed);

// The items of `batch` selected by `indices`, in that order.
Batch subset(const Batch& batch, const std::vector<std::size_t>& indices);

}  // namespace biooss
