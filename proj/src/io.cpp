#include "qpat/io.hpp"

#include <bit>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "qpat/error.hpp"

namespace qpat::io {

namespace {

std::string number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

bool parse_double(std::string_view s, double& out) {
  // std::from_chars for double is missing from older libstdc++ builds.
  std::string tmp(s);
  char* end = nullptr;
  errno = 0;
  out = std::strtod(tmp.c_str(), &end);
  return !tmp.empty() && end == tmp.c_str() + tmp.size() && errno == 0;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string encode_pgrid(const GridData& grid) {
  grid.validate();
  std::string out = "PGRID v1 n=" + std::to_string(grid.dimension) + " dims=";
  for (std::size_t a = 0; a < grid.dims.size(); ++a) out += (a ? "," : "") + std::to_string(grid.dims[a]);
  out += " extent=";
  for (std::size_t a = 0; a < grid.extent.size(); ++a) out += (a ? "," : "") + number(grid.extent[a]);
  out += '\n';
  const std::size_t header = out.size();
  out.resize(header + 8 * grid.values.size());
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(grid.values[i]));
    std::memcpy(out.data() + header + 8 * i, &bits, 8);
  }
  return out;
}

GridData decode_pgrid(std::string_view bytes, const std::optional<std::vector<double>>& expected_extent) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw FormatError("PGRID: missing header line", 0);
  const std::string_view header = bytes.substr(0, nl);
  const auto tokens = split(header, ' ');
  if (tokens.size() != 5 || tokens[0] != "PGRID" || tokens[1] != "v1")
    throw FormatError("PGRID: header must read 'PGRID v1 n=.. dims=.. extent=..'", 0);
  auto field = [&](std::size_t i, std::string_view key) {
    if (tokens[i].substr(0, key.size()) != key) {
      const auto offset = static_cast<std::uint64_t>(tokens[i].data() - bytes.data());
      throw FormatError("PGRID: expected '" + std::string(key) + "'", offset);
    }
    return tokens[i].substr(key.size());
  };
  auto offset_of = [&](std::string_view part) { return static_cast<std::uint64_t>(part.data() - bytes.data()); };
  GridData g;
  const auto n = field(2, "n=");
  if (n != "2" && n != "3") throw FormatError("PGRID: n must be 2 or 3", offset_of(n));
  g.dimension = n[0] - '0';
  for (auto part : split(field(3, "dims="), ',')) {
    std::size_t d = 0;
    const auto r = std::from_chars(part.data(), part.data() + part.size(), d);
    if (r.ec != std::errc() || r.ptr != part.data() + part.size() || d < 2)
      throw FormatError("PGRID: bad dimension entry", offset_of(part));
    g.dims.push_back(d);
  }
  for (auto part : split(field(4, "extent="), ',')) {
    double v = 0;
    if (!parse_double(part, v) || !std::isfinite(v)) throw FormatError("PGRID: bad extent entry", offset_of(part));
    g.extent.push_back(v);
  }
  if (g.dims.size() != static_cast<std::size_t>(g.dimension))
    throw FormatError("PGRID: dims count does not match n", offset_of(tokens[3]));
  if (g.extent.size() != 2 * g.dims.size())
    throw FormatError("PGRID: extent needs two entries per axis", offset_of(tokens[4]));
  for (std::size_t a = 0; a < g.dims.size(); ++a)
    if (!(g.extent[2 * a + 1] > g.extent[2 * a])) throw FormatError("PGRID: extent must be increasing", offset_of(tokens[4]));
  if (expected_extent && *expected_extent != g.extent)
    throw FormatError("PGRID: extent does not match the configuration", offset_of(tokens[4]));
  const std::size_t payload = bytes.size() - nl - 1;
  const std::size_t want = 8 * g.size();
  if (payload != want) {
    std::ostringstream os;
    os << "PGRID: payload has " << payload << " bytes, expected " << want;
    throw FormatError(os.str(), nl + 1 + std::min(payload, want));
  }
  g.values.resize(g.size());
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, bytes.data() + nl + 1 + 8 * i, 8);
    g.values[i] = std::bit_cast<double>(to_le(bits));
    if (!std::isfinite(g.values[i])) throw FormatError("PGRID: non-finite sample", nl + 1 + 8 * i);
  }
  return g;
}

void write_pgrid(const std::string& path, const GridData& grid) { write_file(path, encode_pgrid(grid)); }

GridData read_pgrid(const std::string& path, const std::optional<std::vector<double>>& expected_extent) {
  return decode_pgrid(read_file(path), expected_extent);
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ArgumentError("CSV: no column named " + name);
}

std::string encode_csv(const CsvTable& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
  out += '\n';
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw ArgumentError("CSV: row length does not match the header");
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + number(row[i]);
    out += '\n';
  }
  return out;
}

CsvTable decode_csv(std::string_view text) {
  CsvTable t;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::size_t start = pos;
    pos = nl + 1;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (first) {
      for (auto c : cells) t.header.emplace_back(c);
      first = false;
      continue;
    }
    if (cells.size() != t.header.size()) throw FormatError("CSV: ragged row", start);
    std::vector<double> row;
    for (auto c : cells) {
      double v = 0;
      if (!parse_double(c, v)) throw FormatError("CSV: cannot parse '" + std::string(c) + "'", start + (c.data() - line.data()));
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (first) throw FormatError("CSV: empty file", 0);
  return t;
}

void write_csv(const std::string& path, const CsvTable& table) { write_file(path, encode_csv(table)); }
CsvTable read_csv(const std::string& path) { return decode_csv(read_file(path)); }

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArgumentError("write failed for " + path);
}

}  // namespace qpat::io
