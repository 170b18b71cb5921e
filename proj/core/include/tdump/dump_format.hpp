#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdump/value.hpp"

namespace tdump {

// Dump file layout (all integers little-endian):
//
//   "TDMP0001"
//   frame*:  SYNC(D7 41 9A 5C) | type u8 | payload_len u32 | payload | crc32 u32
//
// The CRC covers type, payload_len and payload. A well-formed file holds one
// Header frame first, Record frames, and one End frame last.
namespace format {

inline constexpr std::array<std::uint8_t, 8> kMagic = {'T', 'D', 'M', 'P', '0', '0', '0', '1'};
inline constexpr std::array<std::uint8_t, 4> kSync = {0xD7, 0x41, 0x9A, 0x5C};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kFramePrefixSize = 4 + 1 + 4;  // sync, type, length
inline constexpr std::size_t kFrameOverhead = kFramePrefixSize + 4;
inline constexpr std::uint32_t kDefaultMaxFrameSize = 64u << 20;

enum class FrameType : std::uint8_t { kHeader = 0x48, kRecord = 0x52, kEnd = 0x45 };

enum class Tag : std::uint8_t { kNull = 0x00, kInt = 0x01, kFloat = 0x02, kText = 0x03, kBytes = 0x04 };

/// CRC-32 (IEEE 802.3, reflected) of frame type ++ payload_len ++ payload.
std::uint32_t frame_crc(FrameType type, std::span<const std::uint8_t> payload);

/// Full frame bytes: sync, type, length, payload, crc.
std::vector<std::uint8_t> encode_frame(FrameType type, std::span<const std::uint8_t> payload);

}  // namespace format

struct DumpFileHeader {
  std::uint16_t format_version = format::kVersion;
  std::string table_name;
  std::string insert_sql;
  std::uint32_t chunk_index = 1;  // 1-based
  std::uint16_t column_count = 1;

  friend bool operator==(const DumpFileHeader&, const DumpFileHeader&) = default;
};

struct SalvageReport {
  std::uint64_t records_recovered = 0;
  std::uint64_t bytes_skipped = 0;
  bool magic_found = false;
  bool header_found = false;
  bool end_frame_found = false;
  std::optional<std::uint64_t> expected_records;
  std::uint64_t crc_rejections = 0;
};

struct DumpContents {
  DumpFileHeader header;
  std::vector<Row> rows;
};

struct SalvageResult {
  std::optional<DumpFileHeader> header;
  std::vector<Row> rows;
  SalvageReport report;
};

struct ReadOptions {
  std::uint32_t max_frame_size = format::kDefaultMaxFrameSize;
};

/// Record-frame payload. Deterministic; throws Error(kTooManyFields) past 65535 fields.
std::vector<std::uint8_t> encode_record(const Row& row);

/// Inverse of encode_record. Throws Error(kMalformedRecord) on any malformed input.
Row decode_record(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_header(const DumpFileHeader& header);
/// Throws Error(kMalformedRecord) when the payload is not a valid version-1 header.
DumpFileHeader decode_header(std::span<const std::uint8_t> payload);

/// Streaming writer: preamble and Header frame on construction, one Record
/// frame per append(), End frame on finish(). The sink must outlive the writer.
class DumpWriter {
 public:
  DumpWriter(std::ostream& sink, DumpFileHeader header);

  DumpWriter(const DumpWriter&) = delete;
  DumpWriter& operator=(const DumpWriter&) = delete;

  /// Throws Error(kColumnCountMismatch) naming the 1-based row ordinal.
  void append(const Row& row);

  /// Writes the End frame and flushes. Returns the record count.
  std::uint64_t finish();

  std::uint64_t records_written() const noexcept { return count_; }
  const DumpFileHeader& header() const noexcept { return header_; }

 private:
  void write_frame(format::FrameType type, std::span<const std::uint8_t> payload);

  std::ostream& sink_;
  DumpFileHeader header_;
  std::uint64_t count_ = 0;
  bool finished_ = false;
};

std::uint64_t write_dump_file(std::ostream& sink, const DumpFileHeader& header, std::span<const Row> rows);

/// All-or-nothing read. Throws FormatError (BadMagic, CorruptFrame,
/// MissingEndFrame, CountMismatch) carrying the byte offset of the problem.
DumpContents read_strict(std::istream& source, const ReadOptions& options = {});
DumpContents read_strict(std::span<const std::uint8_t> bytes, const ReadOptions& options = {});

/// Best-effort read that resynchronizes on sync markers and keeps every frame
/// whose bounds, CRC and payload all check out. Never throws on bad content.
SalvageResult read_salvage(std::istream& source, const ReadOptions& options = {});
SalvageResult read_salvage(std::span<const std::uint8_t> bytes, const ReadOptions& options = {});

/// Whole-file helpers. Throw Error(kIo) when the file cannot be opened or read.
std::vector<std::uint8_t> read_file_bytes(const std::string& path);

}  // namespace tdump
