#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdump/backend.hpp"
#include "tdump/plan.hpp"

namespace tdump {

enum class ReadMode { kStrict, kSalvage };

ReadMode parse_read_mode(std::string_view text);
std::string_view to_string(ReadMode mode);

struct RecordFailure {
  std::uint64_t ordinal = 0;  // 1-based position in the file
  std::string error;
};

struct LoadReport {
  std::filesystem::path file;
  std::uint64_t attempted = 0;
  std::uint64_t inserted = 0;
  std::uint64_t failed = 0;
  std::vector<RecordFailure> failures;  // first `failure_cap` failures only
  /// False when the load stopped early (connection loss, unreadable file).
  bool complete = true;
  /// File-level problem, if any: read error, arity mismatch, lost connection.
  std::optional<std::string> error;

  bool ok() const noexcept { return complete && !error && failed == 0; }
};

struct LoadOptions {
  CommitPolicy commit = PerRecord{};
  ReadMode mode = ReadMode::kStrict;
  std::size_t failure_cap = 1000;
  /// `<file> file loaded successful.` / `Unable to load record: <n>` lines.
  std::ostream* progress = nullptr;
};

/// Loads one dump file. Each record is inserted with the header's insert SQL;
/// a record the backend rejects is counted and skipped. Under batched commit
/// policies a failure rolls the open batch back and replays it one record per
/// transaction, so only records that fail on their own are lost.
///
/// Throws FormatError (strict mode) and Error(kArityMismatch) before touching
/// the database. A lost connection returns a report with complete == false.
LoadReport load_file(Connector& backend, const std::filesystem::path& file, const LoadOptions& options = {});

/// Loads files with `workers` threads, each owning one connection from
/// `factory`. Files are dealt round-robin; reports come back in input order.
/// Per-file errors land in that file's report; a worker whose connection
/// dies fails its remaining files.
std::vector<LoadReport> load_many(const ConnectorFactory& factory,
                                  std::span<const std::filesystem::path> files,
                                  const LoadOptions& options = {}, std::size_t workers = 1);

}  // namespace tdump
