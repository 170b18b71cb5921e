#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tdump {

/// What to dump for one table and how to put it back.
struct TableSpec {
  std::string table_name;
  std::string select_sql;
  std::string insert_sql;  // positional `?` placeholders, one per selected column

  friend bool operator==(const TableSpec&, const TableSpec&) = default;
};

/// Ordered list of tables; names are unique.
struct DumpPlan {
  std::vector<TableSpec> tables;

  friend bool operator==(const DumpPlan&, const DumpPlan&) = default;
};

struct ChunkPolicy {
  static constexpr std::size_t kDefaultRecordsPerFile = 500000;
  std::size_t records_per_file = kDefaultRecordsPerFile;
};

struct PerRecord {
  friend bool operator==(PerRecord, PerRecord) = default;
};
struct PerBatch {
  std::size_t size = 1;
  friend bool operator==(PerBatch, PerBatch) = default;
};
struct PerFile {
  friend bool operator==(PerFile, PerFile) = default;
};

using CommitPolicy = std::variant<PerRecord, PerBatch, PerFile>;

/// Records per transaction for a policy; 0 means "the whole file".
std::size_t batch_size(const CommitPolicy& policy);

/// Parses `record`, `batch:N` or `file`. Throws Error(kInvalidArgument).
CommitPolicy parse_commit_policy(std::string_view text);
std::string to_string(const CommitPolicy& policy);

/// Reads the plan-file format:
///
///   # comment
///   table: cross_rate
///   select: select from_currency, ... from cross_rate
///   insert: insert into cross_rate (...) values (?, ?, ?, ?)
///
/// Entries are separated by blank lines. Throws PlanError with the line number.
DumpPlan parse_plan(std::string_view text);

/// Inverse of parse_plan.
std::string render_plan(const DumpPlan& plan);

/// Checks the table-name invariant (non-empty, no path separators, not `.`/`..`).
bool is_valid_table_name(std::string_view name) noexcept;

/// Number of `?` placeholders outside quoted literals and identifiers.
std::size_t count_placeholders(std::string_view sql) noexcept;

}  // namespace tdump
