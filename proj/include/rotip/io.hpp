#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "rotip/contact_oracle.hpp"
#include "rotip/errors.hpp"

namespace rotip {

// Shortest decimal form that round-trips to the same double, locale-free,
// so output bytes never depend on the host environment.
inline std::string format_number(double x) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) throw IoError("format_number: conversion failed");
  return std::string(buf, p);
}

inline std::string format_number(int x) { return std::to_string(x); }
inline std::string format_number(long x) { return std::to_string(x); }
inline std::string format_number(long long x) { return std::to_string(x); }
inline std::string format_number(unsigned long x) { return std::to_string(x); }
inline std::string format_number(unsigned long long x) {
  return std::to_string(x);
}

inline std::string hex16(std::uint64_t x) {
  char buf[17] = "0000000000000000";
  char tmp[17];
  auto [p, ec] = std::to_chars(tmp, tmp + sizeof tmp, x, 16);
  (void)ec;
  std::size_t n = static_cast<std::size_t>(p - tmp);
  for (std::size_t i = 0; i < n; ++i) buf[16 - n + i] = tmp[i];
  return std::string(buf, 16);
}

// RFC-4180-style rows with LF line endings: fields holding a comma, quote,
// or line break are quoted and embedded quotes doubled. Comment lines start
// with '#' so readers that strip comments see a plain CSV; every table
// leads with #config-hash and #seed provenance followed by the header row.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void comment(std::string_view text) {
    if (text.find('\n') != std::string_view::npos)
      throw IoError("CsvWriter: comment must be a single line");
    out_ << '#' << text << '\n';
  }

  void provenance(std::uint64_t config_hash,
                  std::span<const std::uint64_t> seeds) {
    out_ << "#config-hash=" << hex16(config_hash) << '\n';
    out_ << "#seed=";
    for (std::size_t i = 0; i < seeds.size(); ++i)
      out_ << (i ? "," : "") << seeds[i];
    out_ << '\n';
  }

  void row(std::span<const std::string> fields) {
    if (fields.empty()) throw IoError("CsvWriter: empty row");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      write_field(fields[i]);
    }
    out_ << '\n';
  }

  void row(std::initializer_list<std::string> fields) {
    row(std::span<const std::string>(fields.begin(), fields.size()));
  }

 private:
  void write_field(const std::string& f) {
    if (f.find_first_of(",\"\r\n") == std::string::npos) {
      out_ << f;
      return;
    }
    out_ << '"';
    for (char c : f) {
      if (c == '"') out_ << '"';
      out_ << c;
    }
    out_ << '"';
  }

  std::ostream& out_;
};

// One JSON object per line; nlohmann keeps object keys sorted, so the bytes
// are a pure function of the values.
class JsonlWriter {
 public:
  explicit JsonlWriter(std::ostream& out) : out_(out) {}

  void write(const nlohmann::json& j) { out_ << j.dump() << '\n'; }

 private:
  std::ostream& out_;
};

// Binary PGM (P5) debug dump of a contact mask, contact pixels white.
inline void write_pgm(std::ostream& out, const ContactMask& m) {
  if (m.width <= 0 || m.height <= 0)
    throw IoError("write_pgm: empty mask");
  out << "P5\n" << m.width << ' ' << m.height << "\n255\n";
  for (std::uint8_t b : m.bits)
    out.put(b ? static_cast<char>(255) : static_cast<char>(0));
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file: " + path.string());
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace rotip
