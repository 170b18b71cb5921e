#include "tdump/dump_format.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>

#include "tdump/error.hpp"

namespace tdump {

namespace {

using format::FrameType;
using format::Tag;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

void put_blob(std::vector<std::uint8_t>& out, const void* data, std::size_t size) {
  if (size > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument,
                "field of " + std::to_string(size) + " bytes exceeds the 4 GiB field limit");
  }
  put_le(out, static_cast<std::uint32_t>(size));
  const auto* p = static_cast<const std::uint8_t*>(data);
  out.insert(out.end(), p, p + size);
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(p[i]) << (8 * i);
  return value;
}

/// Bounds-checked cursor over a payload. Every failure is a MalformedRecord.
class PayloadReader {
 public:
  explicit PayloadReader(std::span<const std::uint8_t> data) : data_(data) {}

  template <typename T>
  T read(const char* what) {
    need(sizeof(T), what);
    T v = get_le<T>(data_.data() + pos_);
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::string read_text(const char* what) {
    auto len = read<std::uint32_t>(what);
    auto bytes = take(len, what);
    std::string s(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    if (!is_valid_utf8(s)) fail(std::string("invalid UTF-8 in ") + what);
    return s;
  }

  void expect_end() const {
    if (pos_ != data_.size()) {
      fail(std::to_string(data_.size() - pos_) + " trailing bytes after last field");
    }
  }

  std::size_t position() const noexcept { return pos_; }

  [[noreturn]] static void fail(const std::string& why) { throw Error(ErrorCode::kMalformedRecord, why); }

 private:
  void need(std::size_t n, const char* what) const {
    if (data_.size() - pos_ < n) fail(std::string("truncated ") + what);
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace

namespace format {

std::uint32_t frame_crc(FrameType type, std::span<const std::uint8_t> payload) {
  std::uint8_t prefix[5];
  prefix[0] = static_cast<std::uint8_t>(type);
  const auto len = static_cast<std::uint32_t>(payload.size());
  for (int i = 0; i < 4; ++i) prefix[1 + i] = static_cast<std::uint8_t>(len >> (8 * i));
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, prefix, sizeof prefix);
  if (!payload.empty()) crc = crc32_z(crc, payload.data(), payload.size());
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_frame(FrameType type, std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> out;
  out.reserve(kFrameOverhead + payload.size());
  out.insert(out.end(), kSync.begin(), kSync.end());
  out.push_back(static_cast<std::uint8_t>(type));
  put_le(out, static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  put_le(out, frame_crc(type, payload));
  return out;
}

}  // namespace format

std::vector<std::uint8_t> encode_record(const Row& row) {
  if (row.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(ErrorCode::kTooManyFields,
                "row has " + std::to_string(row.size()) + " fields, at most 65535 are allowed");
  }
  std::vector<std::uint8_t> out;
  out.reserve(2 + row.size() * 9);
  put_le(out, static_cast<std::uint16_t>(row.size()));
  for (const auto& v : row) {
    switch (v.kind()) {
      case Value::Kind::kNull:
        out.push_back(static_cast<std::uint8_t>(Tag::kNull));
        break;
      case Value::Kind::kInt:
        out.push_back(static_cast<std::uint8_t>(Tag::kInt));
        put_le(out, static_cast<std::uint64_t>(v.as_int()));
        break;
      case Value::Kind::kFloat:
        out.push_back(static_cast<std::uint8_t>(Tag::kFloat));
        put_le(out, std::bit_cast<std::uint64_t>(v.as_float()));
        break;
      case Value::Kind::kText:
        out.push_back(static_cast<std::uint8_t>(Tag::kText));
        put_blob(out, v.as_text().data(), v.as_text().size());
        break;
      case Value::Kind::kBytes:
        out.push_back(static_cast<std::uint8_t>(Tag::kBytes));
        put_blob(out, v.as_bytes().data(), v.as_bytes().size());
        break;
    }
  }
  return out;
}

Row decode_record(std::span<const std::uint8_t> payload) {
  PayloadReader in(payload);
  const auto count = in.read<std::uint16_t>("field count");
  Row row;
  // Each field takes at least one byte, so a lying count cannot force a huge reservation.
  row.reserve(std::min<std::size_t>(count, payload.size()));
  for (std::uint16_t i = 0; i < count; ++i) {
    const auto tag = in.read<std::uint8_t>("field tag");
    switch (static_cast<Tag>(tag)) {
      case Tag::kNull:
        row.push_back(Value::null());
        break;
      case Tag::kInt:
        row.push_back(Value::integer(static_cast<std::int64_t>(in.read<std::uint64_t>("int field"))));
        break;
      case Tag::kFloat:
        row.push_back(Value::real(std::bit_cast<double>(in.read<std::uint64_t>("float field"))));
        break;
      case Tag::kText:
        row.push_back(Value::text(in.read_text("text field")));
        break;
      case Tag::kBytes: {
        auto len = in.read<std::uint32_t>("bytes field");
        auto body = in.take(len, "bytes field");
        row.push_back(Value::bytes(Bytes(body.begin(), body.end())));
        break;
      }
      default:
        PayloadReader::fail("unknown field tag 0x" + std::string(1, "0123456789abcdef"[tag >> 4]) +
                            std::string(1, "0123456789abcdef"[tag & 0xF]) + " at field " +
                            std::to_string(i + 1));
    }
  }
  in.expect_end();
  return row;
}

std::vector<std::uint8_t> encode_header(const DumpFileHeader& header) {
  std::vector<std::uint8_t> out;
  put_le(out, header.format_version);
  put_le(out, header.chunk_index);
  put_le(out, header.column_count);
  put_blob(out, header.table_name.data(), header.table_name.size());
  put_blob(out, header.insert_sql.data(), header.insert_sql.size());
  return out;
}

DumpFileHeader decode_header(std::span<const std::uint8_t> payload) {
  PayloadReader in(payload);
  DumpFileHeader h;
  h.format_version = in.read<std::uint16_t>("format version");
  if (h.format_version != format::kVersion) {
    PayloadReader::fail("unsupported format version " + std::to_string(h.format_version));
  }
  h.chunk_index = in.read<std::uint32_t>("chunk index");
  if (h.chunk_index == 0) PayloadReader::fail("chunk index must be >= 1");
  h.column_count = in.read<std::uint16_t>("column count");
  if (h.column_count == 0) PayloadReader::fail("column count must be >= 1");
  h.table_name = in.read_text("table name");
  h.insert_sql = in.read_text("insert sql");
  in.expect_end();
  return h;
}

// ---------------------------------------------------------------------------
// Writer

DumpWriter::DumpWriter(std::ostream& sink, DumpFileHeader header) : sink_(sink), header_(std::move(header)) {
  if (header_.chunk_index == 0 || header_.column_count == 0) {
    throw Error(ErrorCode::kInvalidArgument, "chunk_index and column_count must be >= 1");
  }
  sink_.write(reinterpret_cast<const char*>(format::kMagic.data()), format::kMagic.size());
  write_frame(FrameType::kHeader, encode_header(header_));
}

void DumpWriter::append(const Row& row) {
  if (row.size() != header_.column_count) {
    throw Error(ErrorCode::kColumnCountMismatch,
                "row " + std::to_string(count_ + 1) + " has " + std::to_string(row.size()) +
                    " fields, header declares " + std::to_string(header_.column_count));
  }
  write_frame(FrameType::kRecord, encode_record(row));
  ++count_;
}

std::uint64_t DumpWriter::finish() {
  if (!finished_) {
    std::vector<std::uint8_t> payload;
    put_le(payload, count_);
    write_frame(FrameType::kEnd, payload);
    sink_.flush();
    if (!sink_) throw Error(ErrorCode::kIo, "failed to flush dump file");
    finished_ = true;
  }
  return count_;
}

void DumpWriter::write_frame(FrameType type, std::span<const std::uint8_t> payload) {
  std::uint8_t prefix[format::kFramePrefixSize];
  std::memcpy(prefix, format::kSync.data(), 4);
  prefix[4] = static_cast<std::uint8_t>(type);
  const auto len = static_cast<std::uint32_t>(payload.size());
  for (int i = 0; i < 4; ++i) prefix[5 + i] = static_cast<std::uint8_t>(len >> (8 * i));
  const auto crc = format::frame_crc(type, payload);
  std::uint8_t trailer[4];
  for (int i = 0; i < 4; ++i) trailer[i] = static_cast<std::uint8_t>(crc >> (8 * i));

  sink_.write(reinterpret_cast<const char*>(prefix), sizeof prefix);
  sink_.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  sink_.write(reinterpret_cast<const char*>(trailer), sizeof trailer);
  if (!sink_) throw Error(ErrorCode::kIo, "write to dump file failed");
}

std::uint64_t write_dump_file(std::ostream& sink, const DumpFileHeader& header, std::span<const Row> rows) {
  DumpWriter writer(sink, header);
  for (const auto& row : rows) writer.append(row);
  return writer.finish();
}

// ---------------------------------------------------------------------------
// Readers

namespace {

std::vector<std::uint8_t> slurp(std::istream& source) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(source)), std::istreambuf_iterator<char>());
  if (source.bad()) throw Error(ErrorCode::kIo, "read from dump source failed");
  return bytes;
}

struct RawFrame {
  FrameType type;
  std::span<const std::uint8_t> payload;
  std::size_t size;  // total bytes, sync through crc
};

enum class ProbeResult { kOk, kNoSync, kTruncated, kBadType, kTooLarge, kBadCrc };

/// Inspects a frame candidate at `pos` without interpreting its payload.
ProbeResult probe_frame(std::span<const std::uint8_t> bytes, std::size_t pos, std::uint32_t max_frame_size,
                        RawFrame& frame) {
  const std::size_t avail = bytes.size() - pos;
  if (avail < 4) return ProbeResult::kTruncated;
  if (!std::equal(format::kSync.begin(), format::kSync.end(), bytes.begin() + pos)) {
    return ProbeResult::kNoSync;
  }
  if (avail < format::kFramePrefixSize) return ProbeResult::kTruncated;
  const auto type = bytes[pos + 4];
  if (type != static_cast<std::uint8_t>(FrameType::kHeader) &&
      type != static_cast<std::uint8_t>(FrameType::kRecord) &&
      type != static_cast<std::uint8_t>(FrameType::kEnd)) {
    return ProbeResult::kBadType;
  }
  const auto len = get_le<std::uint32_t>(bytes.data() + pos + 5);
  if (len > max_frame_size) return ProbeResult::kTooLarge;
  if (avail < format::kFrameOverhead + static_cast<std::size_t>(len)) return ProbeResult::kTruncated;
  frame.type = static_cast<FrameType>(type);
  frame.payload = bytes.subspan(pos + format::kFramePrefixSize, len);
  frame.size = format::kFrameOverhead + len;
  const auto stored = get_le<std::uint32_t>(bytes.data() + pos + format::kFramePrefixSize + len);
  if (stored != format::frame_crc(frame.type, frame.payload)) return ProbeResult::kBadCrc;
  return ProbeResult::kOk;
}

}  // namespace

DumpContents read_strict(std::istream& source, const ReadOptions& options) {
  const auto bytes = slurp(source);
  return read_strict(std::span<const std::uint8_t>(bytes), options);
}

DumpContents read_strict(std::span<const std::uint8_t> bytes, const ReadOptions& options) {
  if (bytes.size() < format::kMagic.size() ||
      !std::equal(format::kMagic.begin(), format::kMagic.end(), bytes.begin())) {
    throw FormatError(ErrorCode::kBadMagic, "not a dump file (missing TDMP0001 preamble)", 0);
  }

  DumpContents out;
  bool have_header = false;
  std::size_t pos = format::kMagic.size();
  while (true) {
    if (pos == bytes.size()) {
      throw FormatError(ErrorCode::kMissingEndFrame,
                        have_header ? "file ends without an End frame" : "file has no frames", pos);
    }
    RawFrame frame{};
    switch (probe_frame(bytes, pos, options.max_frame_size, frame)) {
      case ProbeResult::kOk:
        break;
      case ProbeResult::kTruncated:
        throw FormatError(ErrorCode::kMissingEndFrame, "file truncated inside a frame", pos);
      case ProbeResult::kNoSync:
        throw FormatError(ErrorCode::kCorruptFrame, "sync marker not found", pos);
      case ProbeResult::kBadType:
        throw FormatError(ErrorCode::kCorruptFrame, "unknown frame type", pos);
      case ProbeResult::kTooLarge:
        throw FormatError(ErrorCode::kCorruptFrame, "frame length exceeds the maximum frame size", pos);
      case ProbeResult::kBadCrc:
        throw FormatError(ErrorCode::kCorruptFrame, "CRC mismatch", pos);
    }

    try {
      if (!have_header) {
        if (frame.type != FrameType::kHeader) {
          throw FormatError(ErrorCode::kCorruptFrame, "first frame is not a Header frame", pos);
        }
        out.header = decode_header(frame.payload);
        have_header = true;
      } else if (frame.type == FrameType::kRecord) {
        Row row = decode_record(frame.payload);
        if (row.size() != out.header.column_count) {
          throw FormatError(ErrorCode::kCorruptFrame,
                            "record has " + std::to_string(row.size()) + " fields, header declares " +
                                std::to_string(out.header.column_count),
                            pos);
        }
        out.rows.push_back(std::move(row));
      } else if (frame.type == FrameType::kEnd) {
        if (frame.payload.size() != 8) {
          throw FormatError(ErrorCode::kCorruptFrame, "End frame payload must be 8 bytes", pos);
        }
        const auto expected = get_le<std::uint64_t>(frame.payload.data());
        if (pos + frame.size != bytes.size()) {
          throw FormatError(ErrorCode::kCorruptFrame, "trailing data after End frame", pos + frame.size);
        }
        if (expected != out.rows.size()) {
          throw FormatError(ErrorCode::kCountMismatch,
                            "End frame declares " + std::to_string(expected) + " records, file holds " +
                                std::to_string(out.rows.size()),
                            pos);
        }
        return out;
      } else {
        throw FormatError(ErrorCode::kCorruptFrame, "duplicate Header frame", pos);
      }
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      throw FormatError(ErrorCode::kCorruptFrame, "malformed payload: " + e.message(), pos);
    }
    pos += frame.size;
  }
}

SalvageResult read_salvage(std::istream& source, const ReadOptions& options) {
  const auto bytes = slurp(source);
  return read_salvage(std::span<const std::uint8_t>(bytes), options);
}

SalvageResult read_salvage(std::span<const std::uint8_t> bytes, const ReadOptions& options) {
  SalvageResult out;
  auto& report = out.report;

  std::size_t pos = 0;
  if (bytes.size() >= format::kMagic.size() &&
      std::equal(format::kMagic.begin(), format::kMagic.end(), bytes.begin())) {
    report.magic_found = true;
    pos = format::kMagic.size();
  }

  // `pos` is the end of the last accepted region; `scan` is where the next
  // sync search starts.
  std::size_t scan = pos;
  const auto sync_begin = format::kSync.begin();
  const auto sync_end = format::kSync.end();
  while (true) {
    auto it = std::search(bytes.begin() + scan, bytes.end(), sync_begin, sync_end);
    if (it == bytes.end()) break;
    const auto candidate = static_cast<std::size_t>(it - bytes.begin());

    RawFrame frame{};
    const auto probe = probe_frame(bytes, candidate, options.max_frame_size, frame);
    bool accepted = false;
    if (probe == ProbeResult::kOk) {
      try {
        switch (frame.type) {
          case FrameType::kHeader: {
            auto header = decode_header(frame.payload);
            if (!out.header) out.header = std::move(header);
            accepted = true;
            break;
          }
          case FrameType::kRecord: {
            Row row = decode_record(frame.payload);
            if (!out.header || row.size() == out.header->column_count) {
              out.rows.push_back(std::move(row));
              accepted = true;
            }
            break;
          }
          case FrameType::kEnd:
            if (frame.payload.size() == 8) {
              if (!report.end_frame_found) {
                report.expected_records = get_le<std::uint64_t>(frame.payload.data());
              }
              report.end_frame_found = true;
              accepted = true;
            }
            break;
        }
      } catch (const Error&) {
        accepted = false;
      }
    } else if (probe == ProbeResult::kBadCrc) {
      ++report.crc_rejections;
    }

    if (accepted) {
      report.bytes_skipped += candidate - pos;
      pos = candidate + frame.size;
      scan = pos;
    } else {
      scan = candidate + 1;
    }
  }
  report.bytes_skipped += bytes.size() - pos;
  report.header_found = out.header.has_value();
  report.records_recovered = out.rows.size();
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  return slurp(in);
}

}  // namespace tdump
