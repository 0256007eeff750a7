// Tests for the artifact writers: grayscale quantization, PGM and PNG
// encodings (PNG verified by inflating the IDAT back), and CSV precision.
#include "biooss/artifacts.hpp"

#include <unistd.h>
#include <zlib.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "biooss/common.hpp"
#include "doctest.h"

namespace {

using biooss::Field;

std::string temp_file(const char* tag) {
  return (std::filesystem::temp_directory_path() /
          (std::string("biooss-artifact-") + tag + "-" +
           std::to_string(::getpid())))
      .string();
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) |
         (std::uint32_t(b[at + 2]) << 8) | std::uint32_t(b[at + 3]);
}

}  // namespace

TEST_SUITE("artifacts") {

TEST_CASE("quantize_gray applies the affine map with clamping") {
  Field f(2, 3);
  f.at(0, 0) = 0.0;
  f.at(0, 1) = 0.5;
  f.at(0, 2) = 1.0;
  f.at(1, 0) = -2.0;  // below range: clamps to 0
  f.at(1, 1) = 3.0;   // above range: clamps to 255
  f.at(1, 2) = 0.25;

  const auto px = biooss::quantize_gray(f, 0.0, 1.0);
  REQUIRE(px.size() == 6);
  CHECK(px[0] == 0);
  CHECK(px[1] == 128);  // 127.5 rounds away from zero
  CHECK(px[2] == 255);
  CHECK(px[3] == 0);
  CHECK(px[4] == 255);
  CHECK(px[5] == 64);

  SUBCASE("degenerate range maps everything to zero") {
    const auto flat = biooss::quantize_gray(f, 2.0, 2.0);
    for (auto v : flat) CHECK(v == 0);
  }

  SUBCASE("invalid ranges and values are rejected") {
    CHECK_THROWS_AS(biooss::quantize_gray(f, 1.0, 0.0), biooss::DomainError);
    Field bad(1, 2);
    bad.at(0, 1) = std::nan("");
    CHECK_THROWS_AS(biooss::quantize_gray(bad, 0.0, 1.0),
                    biooss::NumericError);
  }
}

TEST_CASE("pgm output carries the P5 header and raw payload") {
  const std::vector<std::uint8_t> px = {10, 20, 30, 40, 50, 60};
  const std::string path = temp_file("gray.pgm");
  biooss::write_pgm(path, 2, 3, px);

  const auto bytes = read_bytes(path);
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == header.size() + px.size());
  CHECK(std::string(bytes.begin(), bytes.begin() + header.size()) == header);
  for (std::size_t i = 0; i < px.size(); ++i) {
    CHECK(bytes[header.size() + i] == px[i]);
  }
  std::filesystem::remove(path);

  CHECK_THROWS_AS(biooss::write_pgm(path, 2, 2, px), biooss::DimensionError);
  CHECK_THROWS_AS(biooss::write_pgm("/nonexistent-dir/x.pgm", 2, 3, px),
                  biooss::ConfigError);
}

TEST_CASE("png output inflates back to the original scanlines") {
  const int h = 3, w = 5;
  std::vector<std::uint8_t> px(h * w);
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = static_cast<std::uint8_t>(17 * i + 3);
  }
  const std::string path = temp_file("gray.png");
  biooss::write_png_gray8(path, h, w, px);
  const auto bytes = read_bytes(path);

  // Signature.
  const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  REQUIRE(bytes.size() > 8);
  for (int i = 0; i < 8; ++i) CHECK(bytes[i] == sig[i]);

  // Walk the chunks, checking each CRC against zlib's crc32.
  std::size_t at = 8;
  std::vector<std::uint8_t> idat;
  std::vector<std::string> order;
  while (at + 12 <= bytes.size()) {
    const std::uint32_t len = be32(bytes, at);
    const std::string type(bytes.begin() + at + 4, bytes.begin() + at + 8);
    REQUIRE(at + 12 + len <= bytes.size());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data() + at + 4, 4 + len);
    CHECK(be32(bytes, at + 8 + len) == static_cast<std::uint32_t>(crc));
    order.push_back(type);
    if (type == "IHDR") {
      CHECK(be32(bytes, at + 8) == static_cast<std::uint32_t>(w));
      CHECK(be32(bytes, at + 12) == static_cast<std::uint32_t>(h));
      CHECK(bytes[at + 16] == 8);  // bit depth
      CHECK(bytes[at + 17] == 0);  // grayscale
    }
    if (type == "IDAT") {
      idat.insert(idat.end(), bytes.begin() + at + 8,
                  bytes.begin() + at + 8 + len);
    }
    at += 12 + len;
  }
  CHECK(at == bytes.size());
  REQUIRE(order.size() == 3);
  CHECK(order[0] == "IHDR");
  CHECK(order[1] == "IDAT");
  CHECK(order[2] == "IEND");

  // Inflate the IDAT and compare to filter-0 scanlines.
  std::vector<std::uint8_t> raw(h * (w + 1));
  uLongf raw_len = raw.size();
  REQUIRE(uncompress(raw.data(), &raw_len, idat.data(), idat.size()) == Z_OK);
  REQUIRE(raw_len == raw.size());
  for (int i = 0; i < h; ++i) {
    CHECK(raw[i * (w + 1)] == 0);
    for (int j = 0; j < w; ++j) {
      CHECK(raw[i * (w + 1) + 1 + j] == px[i * w + j]);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("csv values survive a parse round trip at full precision") {
  const std::string path = temp_file("table.csv");
  const std::vector<double> values = {1.0 / 3.0, -2.5e-17, 12345.6789,
                                      0.1 + 0.2};
  std::vector<std::vector<double>> rows;
  for (double v : values) {
    rows.push_back({v, 2.0 * v});
  }
  biooss::write_csv(path, {"a", "b"}, rows);

  std::ifstream is(path);
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == "a,b");
  for (double v : values) {
    REQUIRE(std::getline(is, line));
    const std::size_t comma = line.find(',');
    REQUIRE(comma != std::string::npos);
    CHECK(std::strtod(line.substr(0, comma).c_str(), nullptr) == v);
    CHECK(std::strtod(line.substr(comma + 1).c_str(), nullptr) == 2.0 * v);
  }
  CHECK_FALSE(std::getline(is, line));
  std::filesystem::remove(path);

  SUBCASE("shape and value guards") {
    CHECK_THROWS_AS(biooss::write_csv(path, {}, {}), biooss::DimensionError);
    CHECK_THROWS_AS(biooss::write_csv(path, {"a"}, {{1.0, 2.0}}),
                    biooss::DimensionError);
    CHECK_THROWS_AS(
        biooss::write_csv(path, {"a"}, {{std::nan("")}}),
        biooss::NumericError);
    std::filesystem::remove(path);
  }
}

TEST_CASE("artifact paths join directory, run id, and name") {
  CHECK(biooss::artifact_path("out", "run7", "spectra.csv") ==
        "out/run7_spectra.csv");
  CHECK(biooss::artifact_path("out/", "run7", "spectra.csv") ==
        "out/run7_spectra.csv");
  CHECK(biooss::artifact_path("out", "", "spectra.csv") == "out/spectra.csv");
  CHECK(biooss::artifact_path("", "run7", "a.pgm") == "run7_a.pgm");
  CHECK_THROWS_AS(biooss::artifact_path("out", "x/y", "a.csv"),
                  biooss::DomainError);
  CHECK_THROWS_AS(biooss::artifact_path("out", "r", "a/b.csv"),
                  biooss::DomainError);
}

}  // TEST_SUITE
