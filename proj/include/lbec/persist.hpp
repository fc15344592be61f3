// Output formats.
//
// Binary dataset (little endian):
//   char[8]  magic "LBECDAT\0"
//   u32      format version
//   u32      dtype (1 = float64, 2 = complex128 as interleaved re, im)
//   u32      rank
//   u64[rank] shape
//   u32 + bytes  units tag
//   u32 + bytes  JSON metadata (name, config_hash, axis labels, ...)
//   payload  row-major, prod(shape) elements
//
// CSV: one '#' comment line carrying the config hash and units, one header
// line with column names, then rows of numbers printed with 17 significant
// digits.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace lbec {

inline constexpr char kBinaryMagic[8] = {'L', 'B', 'E', 'C', 'D', 'A', 'T', '\0'};
inline constexpr std::uint32_t kBinaryVersion = 1;

enum class DType : std::uint32_t { float64 = 1, complex128 = 2 };

class PersistError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::string name;
  DType dtype = DType::float64;
  std::vector<std::uint64_t> shape;
  std::string units;
  /// Flat key/value metadata stored as a JSON object of strings.
  std::map<std::string, std::string> meta;
  /// Row-major payload; complex data is interleaved (re, im).
  std::vector<double> data;

  std::uint64_t element_count() const;
  bool operator==(const Dataset&) const = default;
};

void write_binary(const std::filesystem::path& path, const Dataset& ds);
Dataset read_binary(const std::filesystem::path& path);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  /// Free text for the '#' line (config hash, units).
  std::string comment;

  void add_row(std::vector<double> row);
  bool operator==(const Table&) const = default;
};

void write_csv(const std::filesystem::path& path, const Table& table);
Table read_csv(const std::filesystem::path& path);

/// 17 significant digits, shortest exponent form, parses back exactly.
std::string format_double(double v);

struct OutputRecord {
  std::string path;  // relative to the run directory
  std::string kind;  // "binary", "csv", "config"
};

struct RunManifest {
  std::string scenario;
  std::string config_hash;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string status = "ok";
  std::string error;
  double wall_time_s = 0.0;
  std::string started_utc;
  std::map<std::string, std::string> versions;
  std::vector<OutputRecord> outputs;
  /// Scalar results worth reading without opening the datasets.
  std::map<std::string, double> summary;
  int n_aborted = 0;
};

/// Library and toolchain versions recorded in every manifest.
std::map<std::string, std::string> software_versions();

std::string manifest_json(const RunManifest& m);
void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace lbec
