#include "lbec/persist.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

using namespace lbec;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "lbec_persist_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("binary round trip, real and complex") {
  Dataset real;
  real.name = "density";
  real.units = "atoms/xi";
  real.shape = {2, 3};
  real.data = {1.0, -2.5, 1e-300, 4.0, std::numeric_limits<double>::quiet_NaN(), 6.0};
  real.meta["config_hash"] = "0123456789abcdef";
  write_binary(scratch("real.bin"), real);
  const auto back = read_binary(scratch("real.bin"));
  CHECK(back.name == real.name);
  CHECK(back.units == real.units);
  CHECK(back.shape == real.shape);
  CHECK(back.meta == real.meta);
  CHECK(back.dtype == DType::float64);
  REQUIRE(back.data.size() == 6);
  for (int i = 0; i < 6; ++i)
    if (i != 4) CHECK(back.data[i] == real.data[i]);
  CHECK(std::isnan(back.data[4]));

  Dataset cx;
  cx.name = "smatrix";
  cx.dtype = DType::complex128;
  cx.shape = {1, 2};
  cx.data = {1.0, 2.0, -3.0, 0.25};
  write_binary(scratch("cx.bin"), cx);
  CHECK(read_binary(scratch("cx.bin")) == cx);
}

TEST_CASE("binary header layout") {
  Dataset d;
  d.name = "x";
  d.shape = {3};
  d.data = {1, 2, 3};
  write_binary(scratch("layout.bin"), d);
  std::ifstream is(scratch("layout.bin"), std::ios::binary);
  char magic[8];
  is.read(magic, 8);
  CHECK(std::string(magic, 7) == "LBECDAT");
  std::uint32_t version = 0, dtype = 0, rank = 0;
  std::uint64_t dim = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  is.read(reinterpret_cast<char*>(&dtype), 4);
  is.read(reinterpret_cast<char*>(&rank), 4);
  is.read(reinterpret_cast<char*>(&dim), 8);
  CHECK(version == kBinaryVersion);
  CHECK(dtype == 1);
  CHECK(rank == 1);
  CHECK(dim == 3);
}

TEST_CASE("binary reader rejects bad input") {
  {
    std::ofstream os(scratch("bad.bin"), std::ios::binary);
    os << "NOTADATASET_____";
  }
  CHECK_THROWS_AS(read_binary(scratch("bad.bin")), PersistError);
  Dataset d;
  d.name = "x";
  d.shape = {4};
  d.data = {1, 2, 3, 4};
  write_binary(scratch("trunc.bin"), d);
  fs::resize_file(scratch("trunc.bin"), fs::file_size(scratch("trunc.bin")) - 8);
  CHECK_THROWS_AS(read_binary(scratch("trunc.bin")), PersistError);
  d.shape = {5};
  CHECK_THROWS_AS(write_binary(scratch("mismatch.bin"), d), PersistError);
  CHECK_THROWS_AS(read_binary(scratch("missing.bin")), PersistError);
}

TEST_CASE("format_double keeps 17 significant digits and parses back exactly") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(u(rng) * 300));
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("CSV round trip is exact") {
  Table t;
  t.columns = {"t", "x", "value"};
  t.comment = "config_hash=abc units=xi";
  t.add_row({0.0, -1.0 / 3.0, 1e-17});
  t.add_row({100.0, 2.0 / 3.0, -123456.789});
  CHECK_THROWS_AS(t.add_row({1.0}), PersistError);
  write_csv(scratch("t.csv"), t);
  CHECK(read_csv(scratch("t.csv")) == t);
}

TEST_CASE("manifest round trip") {
  RunManifest m;
  m.scenario = "single_drain";
  m.config_hash = "0011223344556677";
  m.seed = 42;
  m.workers = 3;
  m.wall_time_s = 1.5;
  m.started_utc = "2026-01-01T00:00:00Z";
  m.versions = software_versions();
  m.outputs = {{"a.bin", "binary"}, {"a.csv", "csv"}};
  m.summary["gamma_0.1.flow_speed"] = 0.0999;
  m.summary["undefined"] = std::numeric_limits<double>::quiet_NaN();
  write_manifest(scratch("manifest.json"), m);
  const auto back = read_manifest(scratch("manifest.json"));
  CHECK(back.scenario == m.scenario);
  CHECK(back.config_hash == m.config_hash);
  CHECK(back.seed == 42);
  CHECK(back.workers == 3);
  CHECK(back.versions == m.versions);
  CHECK(back.outputs.size() == 2);
  CHECK(back.outputs[1].kind == "csv");
  CHECK(back.summary.at("gamma_0.1.flow_speed") == 0.0999);
  CHECK(std::isnan(back.summary.at("undefined")));
  CHECK(m.versions.count("eigen"));
  CHECK(m.versions.count("fftw"));
}
