#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tdump/backend.hpp"
#include "tdump/plan.hpp"

namespace tdump {

struct DumpedFile {
  std::filesystem::path path;
  std::uint64_t record_count = 0;
};

struct DumpReport {
  std::string table_name;
  std::uint64_t total_rows = 0;
  std::vector<DumpedFile> files;
};

struct DumpOptions {
  ChunkPolicy chunk;
  bool overwrite = false;
  /// Human-readable progress lines go here when set.
  std::ostream* progress = nullptr;
};

/// `<table>.<chunk>.dump`
std::string dump_file_name(std::string_view table, std::uint32_t chunk_index);

/// Streams `spec.select_sql` into `<table>.<i>.dump` files under `out_dir`,
/// rotating every `records_per_file` rows. An empty result writes no file.
///
/// Throws Error(kQueryFailed), UnsupportedTypeError (with table, row and
/// column), Error(kFileExists) and Error(kArityMismatch) when the insert SQL
/// placeholder count differs from the selected column count. A file left
/// incomplete by an error is removed.
DumpReport dump_table(Connector& backend, const TableSpec& spec, const std::filesystem::path& out_dir,
                      const DumpOptions& options = {});

struct TableFailure {
  std::string table_name;
  std::string error;
};

struct DumpRun {
  std::vector<DumpReport> reports;  // completed tables, plan order
  std::vector<TableFailure> failures;
  bool ok() const noexcept { return failures.empty(); }
};

/// Dumps tables in plan order. Stops at the first failure unless `keep_going`.
DumpRun dump_all(Connector& backend, const DumpPlan& plan, const std::filesystem::path& out_dir,
                 const DumpOptions& options = {}, bool keep_going = false);

}  // namespace tdump
