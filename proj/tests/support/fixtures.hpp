#pragma once

// Shared test data: the cross_rate example database and small helpers.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tdump/dump_format.hpp"
#include "tdump/plan.hpp"
#include "tdump/value.hpp"

namespace tdump::testing {

// Firebird example DDL and data, verbatim.
inline constexpr const char* kCrossRateScript = R"sql(
set sql dialect 1;
create database "employe2.fdb";
CREATE TABLE cross_rate(
    from_currency VARCHAR(10) NOT NULL,
    to_currency VARCHAR(10) NOT NULL,
    conv_rate FLOAT NOT NULL,
    update_date DATE,
    PRIMARY KEY (from_currency, to_currency));

INSERT INTO cross_rate VALUES ('Dollar', 'CdnDlr', 1.3273, '11/22/93');
INSERT INTO cross_rate VALUES ('Dollar', 'FFranc', 5.9193, '11/22/93');
INSERT INTO cross_rate VALUES ('Dollar', 'D-Mark', 1.7038, '11/22/93');
INSERT INTO cross_rate VALUES ('Dollar', 'Lira', 1680.0, '11/22/93');
INSERT INTO cross_rate VALUES ('Dollar', 'Yen', 108.43, '11/22/93');
INSERT INTO cross_rate VALUES ('Dollar', 'Guilder', 1.9115, '11/22/93');
INSERT INTO cross_rate VALUES ('Dollar', 'SFranc', 1.4945, '11/22/93');
INSERT INTO cross_rate VALUES ('Dollar', 'Pound', 0.67774, '11/22/93');
INSERT INTO cross_rate VALUES ('Pound', 'FFranc', 8.734, '11/22/93');
INSERT INTO cross_rate VALUES ('Pound', 'Yen', 159.99, '11/22/93');
INSERT INTO cross_rate VALUES ('Yen', 'Pound', 0.00625, '11/22/93');
INSERT INTO cross_rate VALUES ('CdnDlr', 'Dollar', 0.75341, '11/22/93');
INSERT INTO cross_rate VALUES ('CdnDlr', 'FFranc', 4.4597, '11/22/93');
)sql";

// Same schema, no rows.
inline constexpr const char* kCrossRateSchema = R"sql(
set sql dialect 1;
CREATE TABLE cross_rate(
    from_currency VARCHAR(10) NOT NULL,
    to_currency VARCHAR(10) NOT NULL,
    conv_rate FLOAT NOT NULL,
    update_date DATE,
    PRIMARY KEY (from_currency, to_currency));
)sql";

inline TableSpec cross_rate_spec() {
  return {"cross_rate",
          "select from_currency, to_currency, conv_rate, cast(update_date as char(24)) from cross_rate",
          "insert into cross_rate (from_currency, to_currency, conv_rate, update_date) values (?, ?, ?, ?)"};
}

/// The de-serialized dump as printed by the original Python tool: 32-bit
/// FLOAT values widened to binary64, dates cast to 24-character text.
inline std::vector<Row> cross_rate_rows() {
  const std::string date = "1993-11-22 00:00:00.0000";
  auto row = [&](const char* from, const char* to, double rate) {
    return Row{Value::text(from), Value::text(to), Value::real(rate), Value::text(date)};
  };
  return {
      row("Dollar", "CdnDlr", 1.327299952507019),  row("Dollar", "FFranc", 5.9193000793457031),
      row("Dollar", "D-Mark", 1.7037999629974365), row("Dollar", "Lira", 1680.0),
      row("Dollar", "Yen", 108.43000030517578),    row("Dollar", "Guilder", 1.9114999771118164),
      row("Dollar", "SFranc", 1.4945000410079956), row("Dollar", "Pound", 0.67773997783660889),
      row("Pound", "FFranc", 8.7340002059936523),  row("Pound", "Yen", 159.99000549316406),
      row("Yen", "Pound", 0.0062500000931322575),  // 21 chars, per the marshal length byte
      row("CdnDlr", "Dollar", 0.7534099817276001), row("CdnDlr", "FFranc", 4.4597001075744629),
  };
}

inline DumpFileHeader cross_rate_header(std::uint32_t chunk = 1) {
  return {1, "cross_rate", cross_rate_spec().insert_sql, chunk, 4};
}

inline std::vector<std::uint8_t> to_bytes(const std::string& s) { return {s.begin(), s.end()}; }

inline std::vector<std::uint8_t> write_to_bytes(const DumpFileHeader& header, std::span<const Row> rows) {
  std::ostringstream sink;
  write_dump_file(sink, header, rows);
  return to_bytes(sink.str());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Sorted copy, for multiset comparisons.
inline std::vector<Row> sorted(std::vector<Row> rows) {
  std::sort(rows.begin(), rows.end());
  return rows;
}

/// True when `sub` is a sub-multiset of `super`.
inline bool is_sub_multiset(std::vector<Row> sub, std::vector<Row> super) {
  std::sort(sub.begin(), sub.end());
  std::sort(super.begin(), super.end());
  return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

/// Bitwise CRC-32 (reflected, polynomial 0xEDB88320). Independent of the
/// table-driven implementation the library links against.
inline std::uint32_t crc32_oracle(std::span<const std::uint8_t> data) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (auto byte : data) {
    crc ^= byte;
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

/// Frame extents of a well-formed file: (offset, size) per frame, in order.
/// Computed by walking the length fields, independent of the reader.
inline std::vector<std::pair<std::size_t, std::size_t>> frame_extents(std::span<const std::uint8_t> bytes) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t pos = format::kMagic.size();
  while (pos + format::kFramePrefixSize <= bytes.size()) {
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(bytes[pos + 5 + i]) << (8 * i);
    const std::size_t size = format::kFrameOverhead + len;
    out.emplace_back(pos, size);
    pos += size;
  }
  return out;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("tdump-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Random rows over every Value kind, for property tests.
class RowGenerator {
 public:
  explicit RowGenerator(std::uint64_t seed) : rng_(seed) {}

  Value value() {
    switch (rng_() % 5) {
      case 0:
        return Value::null();
      case 1:
        return Value::integer(static_cast<std::int64_t>(rng_()));
      case 2: {
        // Raw bit patterns include NaNs, infinities, subnormals and -0.0.
        const auto bits = rng_();
        double d;
        std::memcpy(&d, &bits, sizeof d);
        return Value::real(rng_() % 4 == 0 ? -0.0 : d);
      }
      case 3:
        return Value::text(text());
      default: {
        Bytes b(rng_() % 24);
        for (auto& x : b) x = static_cast<std::uint8_t>(rng_());
        // Occasionally embed the sync marker in payload bytes.
        if (b.size() >= 4 && rng_() % 3 == 0)
          std::copy(format::kSync.begin(), format::kSync.end(), b.begin());
        return Value::bytes(std::move(b));
      }
    }
  }

  std::string text() {
    static const std::array<std::string, 8> kPieces = {"a", "Z", " ", "é", "€", "𝄞", "'", "0"};
    std::string s;
    const auto n = rng_() % 12;
    for (std::uint64_t i = 0; i < n; ++i) s += kPieces[rng_() % kPieces.size()];
    return s;
  }

  Row row(std::size_t arity) {
    Row r;
    for (std::size_t i = 0; i < arity; ++i) r.push_back(value());
    return r;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace tdump::testing
