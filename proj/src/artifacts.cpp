// Grayscale heatmap (PGM/PNG) and CSV artifact writers.
#include "biooss/artifacts.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "biooss/common.hpp"

namespace biooss {

namespace {

std::ofstream open_binary(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw ConfigError("cannot open " + path + " for writing");
  }
  return os;
}

void check_pixel_shape(int h, int w, std::size_t n) {
  if (h < 1 || w < 1) {
    throw DimensionError("image dimensions must be positive, got " +
                         std::to_string(h) + "x" + std::to_string(w));
  }
  if (n != static_cast<std::size_t>(h) * static_cast<std::size_t>(w)) {
    throw DimensionError("pixel buffer holds " + std::to_string(n) +
                         " bytes but the image needs " +
                         std::to_string(static_cast<std::size_t>(h) * w));
  }
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + type_at, static_cast<uInt>(4 + data.size()));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

std::vector<std::uint8_t> quantize_gray(const Field& f, double lo, double hi) {
  if (!is_finite(lo) || !is_finite(hi) || lo > hi) {
    throw DomainError("quantize range [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "] is not a finite interval");
  }
  std::vector<std::uint8_t> pixels(f.a.size(), 0);
  if (lo == hi) {
    for (double v : f.a) {
      if (!is_finite(v)) {
        throw NumericError("non-finite field value in quantize_gray");
      }
    }
    return pixels;
  }
  const double scale = 255.0 / (hi - lo);
  for (std::size_t i = 0; i < f.a.size(); ++i) {
    const double v = f.a[i];
    if (!is_finite(v)) {
      throw NumericError("non-finite field value in quantize_gray");
    }
    const double t = (v - lo) * scale;
    const double clamped = t < 0.0 ? 0.0 : (t > 255.0 ? 255.0 : t);
    pixels[i] = static_cast<std::uint8_t>(std::lround(clamped));
  }
  return pixels;
}

void write_pgm(const std::string& path, int h, int w,
               const std::vector<std::uint8_t>& pixels) {
  check_pixel_shape(h, w, pixels.size());
  std::ofstream os = open_binary(path);
  os << "P5\n" << w << " " << h << "\n255\n";
  os.write(reinterpret_cast<const char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
  if (!os) {
    throw ConfigError("failed writing " + path);
  }
}

void write_png_gray8(const std::string& path, int h, int w,
                     const std::vector<std::uint8_t>& pixels) {
  check_pixel_shape(h, w, pixels.size());

  // Filter byte 0 in front of every scanline, then one zlib stream.
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(h) * (static_cast<std::size_t>(w) + 1));
  for (int i = 0; i < h; ++i) {
    raw.push_back(0);
    const std::uint8_t* row = pixels.data() + static_cast<std::size_t>(i) * w;
    raw.insert(raw.end(), row, row + w);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> idat(bound);
  const int rc = compress2(idat.data(), &bound, raw.data(),
                           static_cast<uLong>(raw.size()), 9);
  if (rc != Z_OK) {
    throw NumericError("zlib compression failed with code " +
                       std::to_string(rc));
  }
  idat.resize(bound);

  std::vector<std::uint8_t> out = {0x89, 'P',  'N',  'G',
                                   0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(w));
  put_be32(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // color type: grayscale
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // interlace
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", idat);
  append_chunk(out, "IEND", {});

  std::ofstream os = open_binary(path);
  os.write(reinterpret_cast<const char*>(out.data()),
           static_cast<std::streamsize>(out.size()));
  if (!os) {
    throw ConfigError("failed writing " + path);
  }
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  if (header.empty()) {
    throw DimensionError("csv header must name at least one column");
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw ConfigError("cannot open " + path + " for writing");
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) os << ",";
    os << header[i];
  }
  os << "\n";
  char buf[32];
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != header.size()) {
      throw DimensionError("csv row " + std::to_string(r) + " has " +
                           std::to_string(rows[r].size()) + " values for " +
                           std::to_string(header.size()) + " columns");
    }
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      const double v = rows[r][i];
      if (!is_finite(v)) {
        throw NumericError("non-finite value in csv row " + std::to_string(r));
      }
      if (i) os << ",";
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      os << buf;
    }
    os << "\n";
  }
  if (!os) {
    throw ConfigError("failed writing " + path);
  }
}

std::string artifact_path(const std::string& dir, const std::string& run_id,
                          const std::string& name) {
  if (run_id.find('/') != std::string::npos ||
      name.find('/') != std::string::npos) {
    throw DomainError("artifact names must not contain path separators");
  }
  std::string file = run_id.empty() ? name : run_id + "_" + name;
  if (dir.empty()) {
    return file;
  }
  return dir.back() == '/' ? dir + file : dir + "/" + file;
}

}  // namespace biooss
