// File artifact writers shared by the experiments and the CLI: grayscale
// heatmaps (PGM and 8-bit PNG) and full-precision CSV tables.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "biooss/grid.hpp"

namespace biooss {

// Maps field values affinely from [lo, hi] onto 0..255, clamping values
// outside the range. A degenerate range (lo == hi) maps everything to 0.
// Returns row-major H*W pixels. Throws DomainError when lo > hi or either
// bound is non-finite, and NumericError on non-finite field entries.
std::vector<std::uint8_t> quantize_gray(const Field& f, double lo, double hi);

// Binary PGM (P5, maxval 255). pixels is row-major h*w.
// Throws DimensionError when pixels.size() != h*w and ConfigError when the
// file cannot be opened.
void write_pgm(const std::string& path, int h, int w,
               const std::vector<std::uint8_t>& pixels);

// Minimal 8-bit grayscale PNG: IHDR + one zlib-compressed IDAT holding
// filter-0 scanlines + IEND. Same error contract as write_pgm.
void write_png_gray8(const std::string& path, int h, int w,
                     const std::vector<std::uint8_t>& pixels);

// CSV table with one header line. Every value is written with 17
// significant digits so doubles survive a round trip. Rows must all match
// the header width (DimensionError); ConfigError when the file cannot be
// opened; NumericError on non-finite values.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// `<dir>/<run_id>_<name>` with exactly one separating underscore; empty
// run_id gives `<dir>/<name>`. Throws DomainError when run_id or name
// contains a path separator.
std::string artifact_path(const std::string& dir, const std::string& run_id,
                          const std::string& name);

}  // namespace biooss
