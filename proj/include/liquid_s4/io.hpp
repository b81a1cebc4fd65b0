#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "liquid_s4/conv_engine.hpp"

namespace liquid_s4::io {

// Binary sequence file: 24-byte header then batch*length*features
// little-endian float64 values in (batch, time, feature) order.
//   bytes 0-3   magic "LSQ4"
//   bytes 4-7   version (u32 LE, currently 1)
//   bytes 8-11  batch, 12-15 length, 16-19 features, 20-23 reserved (u32 LE)
inline constexpr char kMagic[4] = {'L', 'S', 'Q', '4'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 24;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return v;
}

inline void put_f64(std::string& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFU));
}

inline double get_f64(const std::string& in, std::size_t offset) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

[[noreturn]] inline void parse_fail(std::size_t offset, const std::string& what) {
  std::ostringstream os;
  os << what << " at byte offset " << offset;
  throw Error(ErrorKind::Parse, os.str());
}

}  // namespace detail

inline std::string encode_binary(const SequenceBatch& batch) {
  std::string out;
  out.reserve(kHeaderBytes + 8 * batch.values.size());
  out.append(kMagic, 4);
  detail::put_u32(out, kVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(batch.batch));
  detail::put_u32(out, static_cast<std::uint32_t>(batch.length));
  detail::put_u32(out, static_cast<std::uint32_t>(batch.features));
  detail::put_u32(out, 0);
  for (double v : batch.values) detail::put_f64(out, v);
  return out;
}

inline SequenceBatch decode_binary(const std::string& bytes) {
  if (bytes.size() < kHeaderBytes) detail::parse_fail(bytes.size(), "truncated LSQ4 header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) detail::parse_fail(0, "bad magic");
  if (detail::get_u32(bytes, 4) != kVersion) detail::parse_fail(4, "unsupported version");
  const std::size_t b = detail::get_u32(bytes, 8), l = detail::get_u32(bytes, 12), f = detail::get_u32(bytes, 16);
  if (b == 0 || l == 0 || f == 0) detail::parse_fail(8, "empty dimension in header");
  const std::size_t expected = kHeaderBytes + 8 * b * l * f;
  if (bytes.size() != expected) detail::parse_fail(std::min(bytes.size(), expected), "payload size disagrees with header");
  SequenceBatch batch(b, l, f);
  for (std::size_t i = 0; i < batch.values.size(); ++i) {
    const std::size_t offset = kHeaderBytes + 8 * i;
    batch.values[i] = detail::get_f64(bytes, offset);
    if (!std::isfinite(batch.values[i])) detail::parse_fail(offset, "non-finite value");
  }
  return batch;
}

/// One sequence per line, comma separated; every line must have the same
/// length. Produces a (lines, length, 1) batch.
inline SequenceBatch decode_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) {
      std::vector<double> row;
      std::size_t cell = 0;
      while (cell <= line.size()) {
        std::size_t comma = line.find(',', cell);
        if (comma == std::string::npos) comma = line.size();
        const std::string token = line.substr(cell, comma - cell);
        const char* first = token.c_str();
        char* last = nullptr;
        const double v = std::strtod(first, &last);
        const bool blank_tail = token.find_first_not_of(" \t", static_cast<std::size_t>(last - first)) == std::string::npos;
        if (last == first || !blank_tail || !std::isfinite(v)) detail::parse_fail(pos + cell, "malformed number");
        row.push_back(v);
        cell = comma + 1;
      }
      if (!rows.empty() && row.size() != rows.front().size()) detail::parse_fail(pos, "row length differs from first row");
      rows.push_back(std::move(row));
    }
    pos = end + 1;
  }
  if (rows.empty()) detail::parse_fail(0, "no sequences in file");
  SequenceBatch batch(rows.size(), rows.front().size(), 1);
  for (std::size_t b = 0; b < rows.size(); ++b) batch.set_sequence(b, 0, rows[b]);
  return batch;
}

inline std::string encode_csv(const SequenceBatch& batch) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t b = 0; b < batch.batch; ++b) {
    for (std::size_t f = 0; f < batch.features; ++f) {
      for (std::size_t t = 0; t < batch.length; ++t) os << (t ? "," : "") << batch.at(b, t, f);
      os << '\n';
    }
  }
  return os.str();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::Io, "short write to '" + path + "'");
}

/// Binary when the file starts with the LSQ4 magic, CSV otherwise.
inline SequenceBatch decode_sequences(const std::string& bytes) {
  if (bytes.empty()) detail::parse_fail(0, "empty file");
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) return decode_binary(bytes);
  return decode_csv(bytes);
}

inline SequenceBatch read_sequences(const std::string& path) { return decode_sequences(read_file(path)); }

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline void write_sequences(const std::string& path, const SequenceBatch& batch) {
  write_file(path, ends_with(path, ".csv") ? encode_csv(batch) : encode_binary(batch));
}

}  // namespace liquid_s4::io
