#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tdump/value.hpp"

namespace tdump {

struct ConnectionConfig {
  std::string dsn;
  std::string user;
  std::string password;
};

// Driver-level cell types. A real adapter converts whatever its driver hands
// back into one of these; map_cell then decides what can be dumped.
namespace native {

struct Null {};
struct Integer {
  std::int64_t value;
};
/// Exact integer wider than 64 bits, as sign + magnitude limbs (low limb first).
struct WideInteger {
  bool negative = false;
  std::uint64_t low = 0;
  std::uint64_t high = 0;
};
struct Float32 {
  float value;
};
struct Float64 {
  double value;
};
struct Text {
  std::string value;
};
struct Octets {
  Bytes value;
};
struct Date {
  int year;
  int month;
  int day;
};
struct Timestamp {
  int year, month, day, hour, minute, second, ten_thousandths;
};
/// Scaled decimal: unscaled * 10^-scale.
struct Decimal {
  std::int64_t unscaled;
  int scale;
};
struct BlobHandle {
  std::uint64_t id;
};

}  // namespace native

using NativeCell = std::variant<native::Null, native::Integer, native::WideInteger, native::Float32,
                                native::Float64, native::Text, native::Octets, native::Date,
                                native::Timestamp, native::Decimal, native::BlobHandle>;

/// Type name used in UnsupportedType diagnostics ("date", "timestamp", ...).
std::string native_type_name(const NativeCell& cell);

/// Maps a driver cell to a Value. 32-bit floats widen to binary64 (1.3273f
/// becomes 1.327299952507019). Dates, timestamps, decimals, blob handles,
/// integers past 64 bits and non-UTF-8 character data throw UnsupportedTypeError.
Value map_cell(const NativeCell& cell);

/// Forward-only result stream. Cells are already mapped to Values.
class RowCursor {
 public:
  virtual ~RowCursor() = default;
  virtual const std::vector<std::string>& column_names() const = 0;
  /// Fills `row` and returns true, or returns false at end of results.
  /// Throws UnsupportedTypeError with the column filled in.
  virtual bool next(Row& row) = 0;
};

/// A database connection. Confined to one worker at a time.
///
/// Writes go into an implicit transaction that starts with the first insert
/// after construction, commit() or rollback().
class Connector {
 public:
  virtual ~Connector() = default;

  /// Throws Error(kQueryFailed / kUnknownTable / kUnknownColumn).
  virtual std::unique_ptr<RowCursor> query(const std::string& select_sql) = 0;

  /// Binds `row` positionally to the placeholders of `insert_sql`.
  /// Throws Error(kDuplicateKey / kConstraintViolation / kQueryFailed / kConnectionLost ...).
  virtual void insert(const std::string& insert_sql, const Row& row) = 0;

  virtual void begin() = 0;
  virtual void commit() = 0;
  virtual void rollback() = 0;
  virtual void close() = 0;
};

using ConnectorFactory = std::function<std::unique_ptr<Connector>()>;

}  // namespace tdump
