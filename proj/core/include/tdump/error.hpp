#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tdump {

enum class ErrorCode {
  kMalformedPlan,
  kTooManyFields,
  kMalformedRecord,
  kColumnCountMismatch,
  kBadMagic,
  kCorruptFrame,
  kMissingEndFrame,
  kCountMismatch,
  kQueryFailed,
  kUnsupportedType,
  kFileExists,
  kConnectionLost,
  kArityMismatch,
  kUnknownTable,
  kUnknownColumn,
  kDuplicateKey,
  kConstraintViolation,
  kIo,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Base of every error raised by the toolkit. `what()` carries the code name
/// followed by a human readable description.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

/// Plan-file syntax errors, with the 1-based line they were detected on
/// (0 when the error concerns the whole file).
class PlanError : public Error {
 public:
  PlanError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Dump-file format errors. `offset` is the byte offset of the offending
/// frame (or of the preamble) when one is known.
class FormatError : public Error {
 public:
  FormatError(ErrorCode code, const std::string& message, std::optional<std::uint64_t> offset = std::nullopt);
  std::optional<std::uint64_t> offset() const noexcept { return offset_; }

 private:
  std::optional<std::uint64_t> offset_;
};

/// A database cell that has no Value representation (date, timestamp,
/// decimal, blob handle, oversized integer).
struct CellLocation {
  std::string table;
  std::uint64_t row = 0;   // 1-based, 0 when unknown
  std::size_t column = 0;  // 1-based, 0 when unknown
  std::string column_name;
};

class UnsupportedTypeError : public Error {
 public:
  using Location = CellLocation;

  explicit UnsupportedTypeError(std::string type_name, Location where = Location{});

  const std::string& type_name() const noexcept { return type_name_; }
  const Location& where() const noexcept { return where_; }

  /// Same error with more location detail filled in.
  UnsupportedTypeError located(Location where) const;

 private:
  static std::string describe(const std::string& type_name, const Location& where);

  std::string type_name_;
  Location where_;
};

}  // namespace tdump
