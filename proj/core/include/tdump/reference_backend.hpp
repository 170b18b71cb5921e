#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "tdump/backend.hpp"

namespace tdump {

enum class ColumnKind {
  kSmallInt,
  kInteger,
  kBigInt,
  kFloat,  // 32-bit
  kDouble,
  kVarchar,
  kChar,  // blank-padded to length
  kVarbinary,
  kBlob,  // queried as a blob handle
  kDate,
  kTimestamp,
  kDecimal,
};

struct ColumnDef {
  std::string name;
  ColumnKind kind = ColumnKind::kInteger;
  std::size_t length = 0;  // varchar/char/varbinary; 0 = unbounded
  int precision = 18;      // decimal
  int scale = 0;           // decimal
  bool not_null = false;
};

struct TableDef {
  std::string name;
  std::vector<ColumnDef> columns;
  std::vector<std::size_t> primary_key;  // column indices
};

/// In-memory database implementing the SQL fragment the engines need:
///
///   select <col | cast(<col> as char(N)) | cast(<col> as varchar(N)) | *>, ... from <table>
///   insert into <table> [(<col>, ...)] values (<? | literal>, ...)
///
/// plus, through execute_script(), `create table` with a primary key clause,
/// literal inserts and `set sql dialect N`. Any number of connectors can share
/// one database; each holds a private pending transaction and commits under a
/// global write lock. Scans return rows in insertion order.
///
/// Unquoted identifiers are case-insensitive. Two-digit years in date
/// literals map 00-49 to 20xx and 50-99 to 19xx.
class ReferenceDatabase : public std::enable_shared_from_this<ReferenceDatabase> {
 public:
  static std::shared_ptr<ReferenceDatabase> create();

  /// Loads a database previously written by save() (or any script in the
  /// supported DDL subset), replays `<path>.journal` when present and keeps
  /// journaling commits there. Throws Error(kIo) when the file is missing.
  static std::shared_ptr<ReferenceDatabase> open(const std::filesystem::path& path);
  static std::filesystem::path journal_path(const std::filesystem::path& path);

  /// Writes the schema and committed rows as a replayable script, then
  /// empties the journal.
  void save(const std::filesystem::path& path);
  std::string to_script() const;

  /// Executes `;`-separated statements, each one autocommitted.
  void execute_script(std::string_view script);

  void create_table(TableDef def);
  std::vector<std::string> table_names() const;
  const TableDef& table_def(std::string_view name) const;
  std::size_t row_count(std::string_view table) const;

  int dialect() const noexcept { return dialect_; }

  std::unique_ptr<Connector> connect();
  ConnectorFactory factory();

  /// Fault injection: after `inserts` more successful inserts across all
  /// connectors, the next insert reports ConnectionLost and that connector
  /// stays dead. Pass 0 to disarm.
  void inject_connection_loss_after(std::uint64_t inserts);

  std::uint64_t commit_count() const noexcept { return commits_.load(); }

  /// Appends every subsequent commit to `path` as replayable statements, one
  /// flushed write per commit. The file is created on the first commit.
  void attach_journal(const std::filesystem::path& path);

  ~ReferenceDatabase();

  struct Table;

 private:
  friend class ReferenceConnector;
  friend class ReferenceCursor;

  ReferenceDatabase() = default;

  Table& table(std::string_view name);
  void append_journal(const std::string& entry);  // caller holds the unique lock
  const Table& table(std::string_view name) const;

  mutable std::shared_mutex mutex_;
  std::map<std::string, std::unique_ptr<Table>, std::less<>> tables_;
  int dialect_ = 3;
  std::atomic<std::int64_t> loss_countdown_{-1};
  std::atomic<std::uint64_t> commits_{0};
  std::filesystem::path journal_path_;
  std::FILE* journal_ = nullptr;  // guarded by the unique lock on mutex_
};

}  // namespace tdump
