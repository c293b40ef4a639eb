#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cqpairs/errors.hpp"

namespace cqpairs {

enum class TableFormat { Csv, BinaryMatrix, IndexOnly };

inline std::optional<TableFormat> parse_table_format(std::string_view s) {
  if (s == "csv") return TableFormat::Csv;
  if (s == "bin") return TableFormat::BinaryMatrix;
  if (s == "count") return TableFormat::IndexOnly;
  return std::nullopt;
}

// N elements, each a row of dim finite doubles. dim == 0 means index-only
// mode: the table carries a count and no values (enough for counting
// kernels).
struct ElementTable {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> values;  // row-major n*dim; empty in index-only mode

  bool has_values() const { return dim > 0; }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
};

// Contiguous near-equal split of n elements into p blocks: the first
// n mod p blocks get ceil(n/p) elements, the rest floor(n/p).
struct Partition {
  int p = 0;
  std::vector<std::size_t> boundaries;  // p+1 entries, [0] = 0, [p] = n

  std::size_t n() const { return boundaries.back(); }
  std::size_t block_begin(int b) const { return boundaries[static_cast<std::size_t>(b)]; }
  std::size_t block_end(int b) const { return boundaries[static_cast<std::size_t>(b) + 1]; }
  std::size_t block_size(int b) const { return block_end(b) - block_begin(b); }
  int block_of(std::size_t x) const {
    auto it = std::upper_bound(boundaries.begin(), boundaries.end(), x);
    return static_cast<int>(it - boundaries.begin()) - 1;
  }
};

// Empty blocks are rejected (p > n) because an empty block has no
// self-pair work and breaks the equal-responsibility accounting.
inline Partition split(std::size_t n, int p) {
  if (n < 1) throw InvalidInputError("split: n must be >= 1");
  if (p < 1) throw InvalidInputError("split: p must be >= 1");
  if (static_cast<std::size_t>(p) > n)
    throw InvalidInputError("split: p=" + std::to_string(p) + " exceeds n=" +
                            std::to_string(n) + "; choose p <= n");
  const std::size_t q = n / static_cast<std::size_t>(p);
  const std::size_t r = n % static_cast<std::size_t>(p);
  Partition part{p, {}};
  part.boundaries.resize(static_cast<std::size_t>(p) + 1);
  part.boundaries[0] = 0;
  for (int b = 0; b < p; ++b)
    part.boundaries[static_cast<std::size_t>(b) + 1] =
        part.boundaries[static_cast<std::size_t>(b)] + q +
        (static_cast<std::size_t>(b) < r ? 1 : 0);
  return part;
}

namespace detail {

inline void put_u64_le(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

inline std::uint64_t get_u64_le(const unsigned char* b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double parse_cell(std::string_view cell, std::size_t line_no, std::size_t col) {
  const auto fail = [&](const std::string& why) -> IngestError {
    return IngestError("line " + std::to_string(line_no) + ", column " +
                       std::to_string(col) + ": " + why);
  };
  const std::size_t b = cell.find_first_not_of(" \t");
  if (b == std::string_view::npos) throw fail("empty cell");
  const std::size_t e = cell.find_last_not_of(" \t");
  cell = cell.substr(b, e - b + 1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw fail("not a number: '" + std::string(cell) + "'");
  if (!std::isfinite(value)) throw fail("non-finite value");
  return value;
}

}  // namespace detail

// One element per row, comma-separated decimal features. All rows must have
// the same column count; NaN/Inf and non-numeric cells are rejected with
// their location. Blank lines are skipped.
inline ElementTable ingest_csv(std::istream& in) {
  ElementTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t cols = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      table.values.push_back(
          detail::parse_cell({line.data() + pos, comma - pos}, line_no, cols + 1));
      ++cols;
      pos = comma + 1;
    }
    if (table.n == 0) {
      table.dim = cols;
    } else if (cols != table.dim) {
      throw IngestError("line " + std::to_string(line_no) + ": ragged row (" +
                        std::to_string(cols) + " columns, expected " +
                        std::to_string(table.dim) + ")");
    }
    ++table.n;
  }
  if (table.n == 0) throw IngestError("csv input has no data rows");
  return table;
}

// Header: two 64-bit little-endian unsigned integers (n, dim), then n*dim
// 64-bit little-endian IEEE-754 values, row-major. The payload must match
// the header exactly; truncation and trailing bytes are errors.
inline ElementTable ingest_binary(std::istream& in) {
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()};
  if (bytes.size() < 16) throw IngestError("binary input truncated in header");
  const std::uint64_t n = detail::get_u64_le(bytes.data());
  const std::uint64_t dim = detail::get_u64_le(bytes.data() + 8);
  if (n < 1 || dim < 1) throw IngestError("binary header: n and dim must be >= 1");
  const std::uint64_t want = n * dim * 8;
  const std::uint64_t have = bytes.size() - 16;
  if (have < want)
    throw IngestError("binary payload truncated: header promises " +
                      std::to_string(n * dim) + " values, found " +
                      std::to_string(have / 8));
  if (have > want)
    throw IngestError("binary payload has " + std::to_string(have - want) +
                      " trailing bytes");
  ElementTable table{static_cast<std::size_t>(n), static_cast<std::size_t>(dim), {}};
  table.values.resize(static_cast<std::size_t>(n * dim));
  for (std::size_t i = 0; i < table.values.size(); ++i) {
    table.values[i] = std::bit_cast<double>(detail::get_u64_le(bytes.data() + 16 + 8 * i));
    if (!std::isfinite(table.values[i]))
      throw IngestError("non-finite value at row " + std::to_string(i / dim + 1));
  }
  return table;
}

// A single decimal integer n; the table has no values.
inline ElementTable ingest_count(std::istream& in) {
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::size_t b = text.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) throw IngestError("count input is empty");
  const std::size_t e = text.find_last_not_of(" \t\r\n");
  const std::string_view token{text.data() + b, e - b + 1};
  std::uint64_t n = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), n);
  if (ec != std::errc() || ptr != token.data() + token.size() || n < 1)
    throw IngestError("count input must be a single positive integer, got '" +
                      std::string(token) + "'");
  return {static_cast<std::size_t>(n), 0, {}};
}

inline ElementTable ingest(const std::filesystem::path& source, TableFormat format) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw IngestError("cannot open " + source.string());
  try {
    switch (format) {
      case TableFormat::Csv:
        return ingest_csv(in);
      case TableFormat::BinaryMatrix:
        return ingest_binary(in);
      case TableFormat::IndexOnly:
        return ingest_count(in);
    }
  } catch (const IngestError& e) {
    throw IngestError(source.string() + ": " + e.what());
  }
  throw IngestError("unknown table format");
}

// Writes the binary-matrix layout ingest_binary reads. Also used for
// exporting dense kernel results.
inline void write_binary_matrix(std::ostream& out, std::size_t n, std::size_t dim,
                                std::span<const double> values) {
  detail::put_u64_le(out, n);
  detail::put_u64_le(out, dim);
  for (double v : values) detail::put_u64_le(out, std::bit_cast<std::uint64_t>(v));
}

inline void write_binary_matrix(const std::filesystem::path& path, std::size_t n,
                                std::size_t dim, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot write " + path.string());
  write_binary_matrix(out, n, dim, values);
}

}  // namespace cqpairs
