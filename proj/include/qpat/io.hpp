#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qpat/field.hpp"

namespace qpat::io {

/// PGRID v1: one text header line
///   PGRID v1 n=<2|3> dims=<nx,ny[,nz]> extent=<xmin,xmax,...>
/// followed by the row-major little-endian float64 payload.
void write_pgrid(const std::string& path, const GridData& grid);
std::string encode_pgrid(const GridData& grid);

/// Throws FormatError (with the byte offset) for a malformed header, a
/// payload of the wrong length, non-finite samples, or an extent that differs
/// from `expected_extent` when one is given.
GridData read_pgrid(const std::string& path, const std::optional<std::vector<double>>& expected_extent = {});
GridData decode_pgrid(std::string_view bytes, const std::optional<std::vector<double>>& expected_extent = {});

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;  ///< ArgumentError if absent
};

/// Numbers are written with 17 significant digits so read(write(t)) == t.
void write_csv(const std::string& path, const CsvTable& table);
std::string encode_csv(const CsvTable& table);
/// Throws FormatError on ragged rows or unparsable numbers.
CsvTable read_csv(const std::string& path);
CsvTable decode_csv(std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace qpat::io
