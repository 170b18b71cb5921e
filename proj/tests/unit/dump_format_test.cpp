#include "tdump/dump_format.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "tdump/error.hpp"

namespace tdump {
namespace {

using testing::cross_rate_header;
using testing::cross_rate_rows;
using testing::write_to_bytes;

using ByteVec = std::vector<std::uint8_t>;

// Little-endian builders for hand-assembled expected bytes.
void put_u16(ByteVec& out, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u32(ByteVec& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(ByteVec& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_str(ByteVec& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}
void put_frame(ByteVec& out, std::uint8_t type, const ByteVec& payload) {
  out.insert(out.end(), {0xD7, 0x41, 0x9A, 0x5C});
  ByteVec covered{type};
  put_u32(covered, static_cast<std::uint32_t>(payload.size()));
  covered.insert(covered.end(), payload.begin(), payload.end());
  out.insert(out.end(), covered.begin(), covered.end());
  put_u32(out, testing::crc32_oracle(covered));
}

template <typename Fn>
ErrorCode format_error_code(Fn&& fn, std::optional<std::uint64_t>* offset = nullptr) {
  try {
    fn();
  } catch (const FormatError& e) {
    if (offset) *offset = e.offset();
    return e.code();
  }
  ADD_FAILURE() << "expected FormatError";
  return ErrorCode::kIo;
}

ErrorCode decode_error(const ByteVec& payload) {
  try {
    decode_record(payload);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected decode error";
  return ErrorCode::kIo;
}

// ---------------------------------------------------------------------------
// CRC

TEST(FrameCrc, CheckValue) {
  const std::string check = "123456789";
  EXPECT_EQ(testing::crc32_oracle(testing::to_bytes(check)), 0xCBF43926u);
}

TEST(FrameCrc, MatchesBitwiseOracle) {
  testing::RowGenerator gen(3);
  for (int i = 0; i < 200; ++i) {
    ByteVec payload(gen.rng()() % 300);
    for (auto& b : payload) b = static_cast<std::uint8_t>(gen.rng()());
    for (auto type : {format::FrameType::kHeader, format::FrameType::kRecord, format::FrameType::kEnd}) {
      ByteVec covered{static_cast<std::uint8_t>(type)};
      put_u32(covered, static_cast<std::uint32_t>(payload.size()));
      covered.insert(covered.end(), payload.begin(), payload.end());
      EXPECT_EQ(format::frame_crc(type, payload), testing::crc32_oracle(covered));
    }
  }
}

// ---------------------------------------------------------------------------
// Record codec

TEST(EncodeRecord, NullRow) { EXPECT_EQ(encode_record({Value::null()}), (ByteVec{0x01, 0x00, 0x00})); }

TEST(EncodeRecord, TextRow) {
  EXPECT_EQ(encode_record({Value::text("Dollar")}),
            (ByteVec{0x01, 0x00, 0x03, 0x06, 0x00, 0x00, 0x00, 0x44, 0x6F, 0x6C, 0x6C, 0x61, 0x72}));
}

TEST(EncodeRecord, IntFloatBytesLayout) {
  ByteVec expected;
  put_u16(expected, 3);
  expected.push_back(0x01);
  put_u64(expected, static_cast<std::uint64_t>(std::int64_t{-2}));
  expected.push_back(0x02);
  put_u64(expected, std::bit_cast<std::uint64_t>(-0.0));
  expected.push_back(0x04);
  put_u32(expected, 2);
  expected.insert(expected.end(), {0xD7, 0x41});
  EXPECT_EQ(encode_record({Value::integer(-2), Value::real(-0.0), Value::bytes({0xD7, 0x41})}), expected);
}

TEST(EncodeRecord, CrossRateRowSizeAndRoundtrip) {
  const auto row = cross_rate_rows().front();
  const auto payload = encode_record(row);
  // u16 count + Text(6) + Text(6) + Float + Text(24).
  const std::size_t expected = 2 + (1 + 4 + 6) + (1 + 4 + 6) + (1 + 8) + (1 + 4 + 24);
  EXPECT_EQ(payload.size(), expected);
  EXPECT_EQ(decode_record(payload), row);
}

TEST(EncodeRecord, EmptyRowAndTooManyFields) {
  EXPECT_EQ(encode_record({}), (ByteVec{0x00, 0x00}));
  Row wide(65536);
  try {
    encode_record(wide);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooManyFields);
  }
  EXPECT_EQ(decode_record(encode_record(Row(65535))).size(), 65535u);
}

TEST(DecodeRecord, RejectsMalformedPayloads) {
  EXPECT_EQ(decode_error({0x01, 0x00, 0x07}), ErrorCode::kMalformedRecord);  // unknown tag
  EXPECT_EQ(decode_error({0x02, 0x00, 0x00}), ErrorCode::kMalformedRecord);  // one field of two
  EXPECT_EQ(decode_error({0x01}), ErrorCode::kMalformedRecord);
  EXPECT_EQ(decode_error({0x01, 0x00, 0x00, 0x00}), ErrorCode::kMalformedRecord);  // trailing byte
  EXPECT_EQ(decode_error({0x01, 0x00, 0x01, 0x00}), ErrorCode::kMalformedRecord);  // short int
  EXPECT_EQ(decode_error({0x01, 0x00, 0x03, 0x05, 0x00, 0x00, 0x00, 'a'}), ErrorCode::kMalformedRecord);
  EXPECT_EQ(decode_error({0x01, 0x00, 0x03, 0x01, 0x00, 0x00, 0x00, 0xFF}), ErrorCode::kMalformedRecord);
  EXPECT_EQ(decode_error({0x01, 0x00, 0x04, 0xFF, 0xFF, 0xFF, 0xFF}), ErrorCode::kMalformedRecord);
}

TEST(DecodeRecord, RoundtripProperty) {
  testing::RowGenerator gen(42);
  for (int i = 0; i < 2000; ++i) {
    const auto row = gen.row(gen.rng()() % 8);
    const auto payload = encode_record(row);
    EXPECT_EQ(decode_record(payload), row);
    EXPECT_EQ(encode_record(row), payload);  // deterministic
  }
}

TEST(DecodeRecord, NeverCrashesOnGarbage) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 20000; ++i) {
    ByteVec junk(rng() % 40);
    for (auto& b : junk) b = static_cast<std::uint8_t>(rng());
    if (junk.size() >= 2 && rng() % 2) junk[1] = 0;  // plausible field counts
    try {
      decode_record(junk);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kMalformedRecord);
    }
  }
}

// ---------------------------------------------------------------------------
// Header codec

TEST(Header, Layout) {
  DumpFileHeader h{1, "t", "insert into t values (?)", 3, 1};
  ByteVec expected;
  put_u16(expected, 1);
  put_u32(expected, 3);
  put_u16(expected, 1);
  put_str(expected, "t");
  put_str(expected, "insert into t values (?)");
  EXPECT_EQ(encode_header(h), expected);
  EXPECT_EQ(decode_header(expected), h);
}

TEST(Header, RejectsInvalid) {
  auto payload = encode_header(cross_rate_header());
  auto bad_version = payload;
  bad_version[0] = 2;
  EXPECT_THROW(decode_header(bad_version), Error);
  auto zero_chunk = payload;
  std::fill(zero_chunk.begin() + 2, zero_chunk.begin() + 6, 0);
  EXPECT_THROW(decode_header(zero_chunk), Error);
  auto zero_cols = payload;
  zero_cols[6] = zero_cols[7] = 0;
  EXPECT_THROW(decode_header(zero_cols), Error);
  payload.push_back(0);
  EXPECT_THROW(decode_header(payload), Error);
}

// ---------------------------------------------------------------------------
// Writer and strict reader

TEST(WriteDumpFile, MatchesHandAssembledBytes) {
  DumpFileHeader h{1, "t", "insert into t values (?)", 1, 1};
  const std::vector<Row> rows{{Value::integer(7)}, {Value::null()}};
  ByteVec expected(format::kMagic.begin(), format::kMagic.end());
  put_frame(expected, 0x48, encode_header(h));
  for (const auto& r : rows) put_frame(expected, 0x52, encode_record(r));
  ByteVec end;
  put_u64(end, 2);
  put_frame(expected, 0x45, end);
  EXPECT_EQ(write_to_bytes(h, rows), expected);
}

TEST(WriteDumpFile, CrossRateRoundtrip) {
  const auto rows = cross_rate_rows();
  const auto bytes = write_to_bytes(cross_rate_header(), rows);
  const auto contents = read_strict(std::span<const std::uint8_t>(bytes));
  EXPECT_EQ(contents.header, cross_rate_header());
  EXPECT_EQ(contents.rows, rows);
}

TEST(WriteDumpFile, ZeroRows) {
  const auto bytes = write_to_bytes(cross_rate_header(), {});
  EXPECT_EQ(bytes.size(), 8 + format::kFrameOverhead + encode_header(cross_rate_header()).size() +
                              format::kFrameOverhead + 8);
  const auto contents = read_strict(std::span<const std::uint8_t>(bytes));
  EXPECT_TRUE(contents.rows.empty());
}

TEST(WriteDumpFile, ColumnCountMismatchNamesOrdinal) {
  auto rows = cross_rate_rows();
  rows[4].pop_back();
  std::ostringstream sink;
  try {
    write_dump_file(sink, cross_rate_header(), rows);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kColumnCountMismatch);
    EXPECT_NE(std::string(e.what()).find("5"), std::string::npos) << e.what();
  }
}

TEST(WriteDumpFile, RoundtripProperty) {
  testing::RowGenerator gen(77);
  for (int iter = 0; iter < 300; ++iter) {
    const auto arity = 1 + gen.rng()() % 6;
    DumpFileHeader h{1, "t" + std::to_string(iter), "insert", static_cast<std::uint32_t>(1 + iter),
                     static_cast<std::uint16_t>(arity)};
    std::vector<Row> rows;
    for (std::uint64_t i = gen.rng()() % 30; i > 0; --i) rows.push_back(gen.row(arity));
    const auto bytes = write_to_bytes(h, rows);
    const auto contents = read_strict(std::span<const std::uint8_t>(bytes));
    EXPECT_EQ(contents.header, h);
    EXPECT_EQ(contents.rows, rows);
    EXPECT_EQ(write_to_bytes(h, rows), bytes);

    // Salvage agrees with strict on clean input.
    const auto salvage = read_salvage(std::span<const std::uint8_t>(bytes));
    EXPECT_EQ(salvage.rows, rows);
    EXPECT_EQ(salvage.report.bytes_skipped, 0u);
  }
}

TEST(ReadStrict, BadMagic) {
  auto bytes = write_to_bytes(cross_rate_header(), cross_rate_rows());
  bytes[0] = 'X';
  EXPECT_EQ(format_error_code([&] { read_strict(std::span<const std::uint8_t>(bytes)); }),
            ErrorCode::kBadMagic);
  EXPECT_EQ(format_error_code([&] { read_strict(std::span<const std::uint8_t>()); }), ErrorCode::kBadMagic);
}

TEST(ReadStrict, FlippedPayloadByteReportsFrameOffset) {
  auto bytes = write_to_bytes(cross_rate_header(), cross_rate_rows());
  const auto frames = testing::frame_extents(bytes);
  ASSERT_EQ(frames.size(), 15u);
  const auto [offset, size] = frames[7];  // record 7
  bytes[offset + format::kFramePrefixSize + 3] ^= 0x01;
  std::optional<std::uint64_t> where;
  EXPECT_EQ(format_error_code([&] { read_strict(std::span<const std::uint8_t>(bytes)); }, &where),
            ErrorCode::kCorruptFrame);
  EXPECT_EQ(where, offset);
}

TEST(ReadStrict, TruncationIsMissingEnd) {
  const auto bytes = write_to_bytes(cross_rate_header(), cross_rate_rows());
  const auto frames = testing::frame_extents(bytes);
  // Cut at a frame boundary before End, and in the middle of a frame.
  for (std::size_t cut : {frames.back().first, frames[5].first + 6, bytes.size() - 1}) {
    const std::span<const std::uint8_t> part(bytes.data(), cut);
    EXPECT_EQ(format_error_code([&] { read_strict(part); }), ErrorCode::kMissingEndFrame) << cut;
  }
}

TEST(ReadStrict, CountMismatch) {
  DumpFileHeader h{1, "t", "i", 1, 1};
  ByteVec bytes(format::kMagic.begin(), format::kMagic.end());
  put_frame(bytes, 0x48, encode_header(h));
  put_frame(bytes, 0x52, encode_record({Value::integer(1)}));
  ByteVec end;
  put_u64(end, 2);
  put_frame(bytes, 0x45, end);
  EXPECT_EQ(format_error_code([&] { read_strict(std::span<const std::uint8_t>(bytes)); }),
            ErrorCode::kCountMismatch);
}

TEST(ReadStrict, StructuralViolations) {
  DumpFileHeader h{1, "t", "i", 1, 1};
  ByteVec end0;
  put_u64(end0, 0);
  const ByteVec magic(format::kMagic.begin(), format::kMagic.end());

  auto no_header = magic;
  put_frame(no_header, 0x45, end0);
  auto two_headers = magic;
  put_frame(two_headers, 0x48, encode_header(h));
  put_frame(two_headers, 0x48, encode_header(h));
  put_frame(two_headers, 0x45, end0);
  auto wrong_arity = magic;
  put_frame(wrong_arity, 0x48, encode_header(h));
  put_frame(wrong_arity, 0x52, encode_record({Value::integer(1), Value::integer(2)}));
  ByteVec end1;
  put_u64(end1, 1);
  put_frame(wrong_arity, 0x45, end1);
  auto trailing = magic;
  put_frame(trailing, 0x48, encode_header(h));
  put_frame(trailing, 0x45, end0);
  trailing.push_back(0);
  auto bad_type = magic;
  put_frame(bad_type, 0x48, encode_header(h));
  put_frame(bad_type, 0x51, {});
  put_frame(bad_type, 0x45, end0);

  for (const auto* file : {&no_header, &two_headers, &wrong_arity, &trailing, &bad_type}) {
    EXPECT_EQ(format_error_code([&] { read_strict(std::span<const std::uint8_t>(*file)); }),
              ErrorCode::kCorruptFrame);
  }
}

TEST(ReadStrict, OversizedFrameRejected) {
  const auto bytes = write_to_bytes(cross_rate_header(), cross_rate_rows());
  ReadOptions tiny;
  tiny.max_frame_size = 16;
  EXPECT_EQ(format_error_code([&] { read_strict(std::span<const std::uint8_t>(bytes), tiny); }),
            ErrorCode::kCorruptFrame);
}

TEST(ReadStrict, StreamOverloadMatchesSpan) {
  const auto bytes = write_to_bytes(cross_rate_header(), cross_rate_rows());
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  EXPECT_EQ(read_strict(in).rows, cross_rate_rows());
}

// ---------------------------------------------------------------------------
// Salvage reader

TEST(ReadSalvage, CleanFile) {
  const auto bytes = write_to_bytes(cross_rate_header(), cross_rate_rows());
  const auto r = read_salvage(std::span<const std::uint8_t>(bytes));
  EXPECT_EQ(r.header, cross_rate_header());
  EXPECT_EQ(r.rows, cross_rate_rows());
  EXPECT_EQ(r.report.records_recovered, 13u);
  EXPECT_EQ(r.report.bytes_skipped, 0u);
  EXPECT_EQ(r.report.expected_records, 13u);
  EXPECT_TRUE(r.report.magic_found && r.report.header_found && r.report.end_frame_found);
  EXPECT_EQ(r.report.crc_rejections, 0u);
}

TEST(ReadSalvage, CorruptedRecordSevenIsTheOnlyLoss) {
  auto bytes = write_to_bytes(cross_rate_header(), cross_rate_rows());
  const auto frames = testing::frame_extents(bytes);
  const auto [offset, size] = frames[7];
  bytes[offset + format::kFramePrefixSize + 10] = 0x00;
  const auto r = read_salvage(std::span<const std::uint8_t>(bytes));
  auto expected = cross_rate_rows();
  expected.erase(expected.begin() + 6);
  EXPECT_EQ(r.rows, expected);
  EXPECT_EQ(r.report.records_recovered, 12u);
  EXPECT_EQ(r.report.expected_records, 13u);
  EXPECT_EQ(r.report.crc_rejections, 1u);
  EXPECT_EQ(r.report.bytes_skipped, size);
}

TEST(ReadSalvage, ZeroedRecordSyncsLoseAllRecordsOnly) {
  auto bytes = write_to_bytes(cross_rate_header(), cross_rate_rows());
  const auto frames = testing::frame_extents(bytes);
  for (std::size_t i = 1; i + 1 < frames.size(); ++i) {
    std::fill_n(bytes.begin() + static_cast<std::ptrdiff_t>(frames[i].first), 4, 0);
  }
  const auto r = read_salvage(std::span<const std::uint8_t>(bytes));
  EXPECT_TRUE(r.rows.empty());
  EXPECT_TRUE(r.report.header_found);
  EXPECT_TRUE(r.report.end_frame_found);
  EXPECT_EQ(r.report.expected_records, 13u);
}

TEST(ReadSalvage, RandomBytesYieldNothing) {
  std::mt19937_64 rng(1);
  ByteVec junk(100000);
  for (auto& b : junk) b = static_cast<std::uint8_t>(rng());
  const auto r = read_salvage(std::span<const std::uint8_t>(junk));
  EXPECT_TRUE(r.rows.empty());
  EXPECT_FALSE(r.header);
  EXPECT_EQ(r.report.bytes_skipped, junk.size());
  EXPECT_TRUE(read_salvage(std::span<const std::uint8_t>()).rows.empty());
}

TEST(ReadSalvage, CorruptedLengthFieldDoesNotSwallowFollowingFrames) {
  auto bytes = write_to_bytes(cross_rate_header(), cross_rate_rows());
  const auto frames = testing::frame_extents(bytes);
  bytes[frames[3].first + 8] = 0x7F;  // high byte of record 3's length
  const auto r = read_salvage(std::span<const std::uint8_t>(bytes));
  EXPECT_EQ(r.rows.size(), 12u);
}

// Every value at every byte position, with the reader's result compared to an
// oracle that knows which frame the byte belongs to.
TEST(ReadSalvage, SingleByteSweepLosesAtMostTheTouchedFrame) {
  const auto rows = cross_rate_rows();
  const auto clean = write_to_bytes(cross_rate_header(), rows);
  const auto frames = testing::frame_extents(clean);
  for (std::size_t pos = 0; pos < clean.size(); ++pos) {
    // Record ordinal (1-based) of the frame holding `pos`, 0 for magic/header/end.
    std::size_t touched = 0;
    for (std::size_t f = 1; f + 1 < frames.size(); ++f) {
      if (pos >= frames[f].first && pos < frames[f].first + frames[f].second) touched = f;
    }
    for (int v = 0; v < 256; ++v) {
      if (v == clean[pos]) continue;
      auto bytes = clean;
      bytes[pos] = static_cast<std::uint8_t>(v);
      const auto r = read_salvage(std::span<const std::uint8_t>(bytes));
      ASSERT_GE(r.rows.size(), rows.size() - 1) << "pos=" << pos << " v=" << v;
      ASSERT_TRUE(testing::is_sub_multiset(r.rows, rows)) << "pos=" << pos << " v=" << v;
      if (touched != 0 && r.rows.size() == rows.size() - 1) {
        auto expected = rows;
        expected.erase(expected.begin() + static_cast<std::ptrdiff_t>(touched - 1));
        ASSERT_EQ(r.rows, expected) << "pos=" << pos << " v=" << v;
      }
      if (touched == 0) ASSERT_EQ(r.rows, rows) << "pos=" << pos << " v=" << v;
    }
  }
}

TEST(ReadSalvage, KRandomCorruptionsLoseAtMostTwoKRecords) {
  testing::RowGenerator gen(2024);
  auto& rng = gen.rng();
  for (int iter = 0; iter < 400; ++iter) {
    const std::size_t arity = 1 + rng() % 4;
    std::vector<Row> rows;
    for (int i = 0; i < 40; ++i) rows.push_back(gen.row(arity));
    DumpFileHeader h{1, "t", "i", 1, static_cast<std::uint16_t>(arity)};
    auto bytes = write_to_bytes(h, rows);
    const std::size_t k = 1 + rng() % 5;
    for (std::size_t j = 0; j < k; ++j) {
      bytes[rng() % bytes.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    }
    const auto r = read_salvage(std::span<const std::uint8_t>(bytes));
    ASSERT_GE(r.rows.size() + 2 * k, rows.size()) << "iter=" << iter;
    ASSERT_TRUE(testing::is_sub_multiset(r.rows, rows)) << "iter=" << iter;
    if (r.report.end_frame_found) {
      EXPECT_LE(r.report.records_recovered, *r.report.expected_records);
    }
  }
}

TEST(ReadSalvage, EmbeddedSyncMarkersInPayloadAreHarmless) {
  std::vector<Row> rows;
  for (int i = 0; i < 20; ++i) {
    Bytes b;
    for (int j = 0; j < 3; ++j) b.insert(b.end(), format::kSync.begin(), format::kSync.end());
    b.push_back(static_cast<std::uint8_t>(i));
    rows.push_back({Value::bytes(b)});
  }
  const auto bytes = write_to_bytes({1, "t", "i", 1, 1}, rows);
  const auto r = read_salvage(std::span<const std::uint8_t>(bytes));
  EXPECT_EQ(r.rows, rows);
  EXPECT_EQ(r.report.bytes_skipped, 0u);
}

}  // namespace
}  // namespace tdump
