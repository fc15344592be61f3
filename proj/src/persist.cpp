#include "lbec/persist.hpp"

#include <Eigen/Core>
#include <fftw3.h>
#include <json.hpp>

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lbec {

static_assert(std::endian::native == std::endian::little, "binary format assumes little endian");

namespace {

using nlohmann::json;

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw PersistError("truncated binary file " + path.string());
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is, const std::filesystem::path& path) {
  const auto n = get<std::uint32_t>(is, path);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw PersistError("truncated binary file " + path.string());
  return s;
}

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw PersistError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
  ensure_parent(path);
  std::ofstream os(path, mode);
  if (!os) throw PersistError("cannot open " + path.string() + " for writing");
  return os;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw PersistError("write failed for " + path.string());
}

}  // namespace

std::uint64_t Dataset::element_count() const {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void write_binary(const std::filesystem::path& path, const Dataset& ds) {
  const std::uint64_t per = ds.dtype == DType::complex128 ? 2 : 1;
  if (ds.element_count() * per != ds.data.size())
    throw PersistError("write_binary: payload size does not match shape for " + ds.name);
  json meta = ds.meta;
  meta["name"] = ds.name;
  auto os = open_out(path, std::ios::binary | std::ios::trunc);
  os.write(kBinaryMagic, sizeof kBinaryMagic);
  put(os, kBinaryVersion);
  put(os, static_cast<std::uint32_t>(ds.dtype));
  put(os, static_cast<std::uint32_t>(ds.shape.size()));
  for (auto d : ds.shape) put(os, d);
  put_string(os, ds.units);
  put_string(os, meta.dump());
  os.write(reinterpret_cast<const char*>(ds.data.data()),
           static_cast<std::streamsize>(ds.data.size() * sizeof(double)));
  finish(os, path);
}

Dataset read_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw PersistError("cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kBinaryMagic, 8) != 0)
    throw PersistError(path.string() + " is not an lbec dataset (bad magic)");
  const auto version = get<std::uint32_t>(is, path);
  if (version != kBinaryVersion)
    throw PersistError(path.string() + ": unsupported format version " + std::to_string(version));
  Dataset ds;
  const auto dtype = get<std::uint32_t>(is, path);
  if (dtype != 1 && dtype != 2) throw PersistError(path.string() + ": unknown dtype");
  ds.dtype = static_cast<DType>(dtype);
  const auto rank = get<std::uint32_t>(is, path);
  if (rank > 16) throw PersistError(path.string() + ": implausible rank");
  for (std::uint32_t i = 0; i < rank; ++i) ds.shape.push_back(get<std::uint64_t>(is, path));
  ds.units = get_string(is, path);
  const json meta = json::parse(get_string(is, path));
  for (auto it = meta.begin(); it != meta.end(); ++it) {
    if (it.key() == "name")
      ds.name = it.value().get<std::string>();
    else
      ds.meta[it.key()] = it.value().get<std::string>();
  }
  const std::uint64_t per = ds.dtype == DType::complex128 ? 2 : 1;
  ds.data.resize(ds.element_count() * per);
  if (!is.read(reinterpret_cast<char*>(ds.data.data()),
               static_cast<std::streamsize>(ds.data.size() * sizeof(double))))
    throw PersistError("truncated payload in " + path.string());
  if (is.peek() != std::char_traits<char>::eof())
    throw PersistError("trailing bytes in " + path.string());
  return ds;
}

void Table::add_row(std::vector<double> row) {
  if (row.size() != columns.size()) throw PersistError("Table::add_row: column count mismatch");
  rows.push_back(std::move(row));
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const std::filesystem::path& path, const Table& table) {
  auto os = open_out(path, std::ios::trunc);
  if (!table.comment.empty()) os << "# " << table.comment << "\n";
  for (std::size_t c = 0; c < table.columns.size(); ++c) os << (c ? "," : "") << table.columns[c];
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_double(row[c]);
    os << "\n";
  }
  finish(os, path);
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw PersistError("cannot open " + path.string());
  Table t;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      t.comment = line.size() > 2 ? line.substr(2) : "";
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header) {
      t.columns = cells;
      header = true;
      continue;
    }
    if (cells.size() != t.columns.size()) throw PersistError("ragged row in " + path.string());
    std::vector<double> row;
    for (const auto& c : cells) {
      double v = 0;
      auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || p != c.data() + c.size()) {
        if (c == "nan" || c == "-nan")
          v = std::numeric_limits<double>::quiet_NaN();
        else if (c == "inf" || c == "-inf")
          v = c[0] == '-' ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        else
          throw PersistError("bad number '" + c + "' in " + path.string());
      }
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::map<std::string, std::string> software_versions() {
  std::map<std::string, std::string> v;
  v["lbec"] = "1.0.0";
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  v["fftw"] = fftw_version;
#if defined(__clang__)
  v["compiler"] = "clang " __clang_version__;
#elif defined(__GNUC__)
  v["compiler"] = "gcc " __VERSION__;
#endif
  v["binary_format"] = std::to_string(kBinaryVersion);
  return v;
}

std::string manifest_json(const RunManifest& m) {
  json j;
  j["scenario"] = m.scenario;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["workers"] = m.workers;
  j["status"] = m.status;
  if (!m.error.empty()) j["error"] = m.error;
  j["wall_time_s"] = m.wall_time_s;
  j["started_utc"] = m.started_utc;
  j["versions"] = m.versions;
  j["outputs"] = json::array();
  for (const auto& o : m.outputs) j["outputs"].push_back({{"path", o.path}, {"kind", o.kind}});
  j["summary"] = json::object();
  for (const auto& [k, v] : m.summary) j["summary"][k] = std::isfinite(v) ? json(v) : json(nullptr);
  j["n_aborted"] = m.n_aborted;
  return j.dump(2) + "\n";
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  auto os = open_out(path, std::ios::trunc);
  os << manifest_json(m);
  finish(os, path);
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw PersistError("cannot open " + path.string());
  const json j = json::parse(is);
  RunManifest m;
  m.scenario = j.at("scenario");
  m.config_hash = j.at("config_hash");
  m.seed = j.at("seed");
  m.workers = j.at("workers");
  m.status = j.at("status");
  m.error = j.value("error", "");
  m.wall_time_s = j.at("wall_time_s");
  m.started_utc = j.value("started_utc", "");
  m.versions = j.at("versions").get<std::map<std::string, std::string>>();
  for (const auto& o : j.at("outputs")) m.outputs.push_back({o.at("path"), o.at("kind")});
  for (auto it = j.at("summary").begin(); it != j.at("summary").end(); ++it)
    m.summary[it.key()] = it.value().is_null() ? std::numeric_limits<double>::quiet_NaN() : it.value().get<double>();
  m.n_aborted = j.value("n_aborted", 0);
  return m;
}

}  // namespace lbec
