#pragma once

// Report files. Every file starts with a "# seed=<n>" line; numbers use
// fixed precision so reruns are byte-identical.

#include <cstdint>
#include <filesystem>
#include <string>

#include "pa/bench.hpp"

namespace pa {

/// Fixed-point text with `digits` decimals; "inf", "-inf", "nan" otherwise.
std::string format_number(double v, int digits = 6);

/// summary.csv, summary.json, per_sample.csv, plotdata.csv in `dir` (created if missing).
void emit_report(const BenchmarkReport& report, const std::filesystem::path& dir);

/// transfer.csv, transfer.json, plotdata.csv in `dir`.
void emit_transfer_report(const TransferReport& report, const std::filesystem::path& dir);

/// Cross-check record written next to an exported ConvMetric weight file.
struct ExportFixture {
  std::filesystem::path image_a;
  std::filesystem::path image_b;
  double distance = 0.0;
  std::uint32_t crc32 = 0;  // of the whole weight file
};

/// JSON {image_a, image_b, distance, crc32}; image paths resolve against the
/// fixture's directory. crc32 may be a number or a hex string.
ExportFixture read_export_fixture(const std::filesystem::path& path);

struct FixtureCheck {
  double recorded = 0.0;
  double computed = 0.0;
  bool checksum_matches = false;
};

/// Loads the weights, scores the fixture's image pair, and compares checksums.
FixtureCheck check_export_fixture(const std::filesystem::path& fixture, const std::filesystem::path& weights);

/// zlib CRC32 of a file's bytes.
std::uint32_t file_crc32(const std::filesystem::path& path);

}  // namespace pa
