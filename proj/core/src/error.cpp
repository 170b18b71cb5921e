#include "tdump/error.hpp"

namespace tdump {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedPlan:
      return "MalformedPlan";
    case ErrorCode::kTooManyFields:
      return "TooManyFields";
    case ErrorCode::kMalformedRecord:
      return "MalformedRecord";
    case ErrorCode::kColumnCountMismatch:
      return "ColumnCountMismatch";
    case ErrorCode::kBadMagic:
      return "BadMagic";
    case ErrorCode::kCorruptFrame:
      return "CorruptFrame";
    case ErrorCode::kMissingEndFrame:
      return "MissingEndFrame";
    case ErrorCode::kCountMismatch:
      return "CountMismatch";
    case ErrorCode::kQueryFailed:
      return "QueryFailed";
    case ErrorCode::kUnsupportedType:
      return "UnsupportedType";
    case ErrorCode::kFileExists:
      return "FileExists";
    case ErrorCode::kConnectionLost:
      return "ConnectionLost";
    case ErrorCode::kArityMismatch:
      return "ArityMismatch";
    case ErrorCode::kUnknownTable:
      return "UnknownTable";
    case ErrorCode::kUnknownColumn:
      return "UnknownColumn";
    case ErrorCode::kDuplicateKey:
      return "DuplicateKey";
    case ErrorCode::kConstraintViolation:
      return "ConstraintViolation";
    case ErrorCode::kIo:
      return "IoError";
    case ErrorCode::kInvalidArgument:
      return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

PlanError::PlanError(std::size_t line, const std::string& message)
    : Error(ErrorCode::kMalformedPlan, line == 0 ? message : "line " + std::to_string(line) + ": " + message),
      line_(line) {}

FormatError::FormatError(ErrorCode code, const std::string& message, std::optional<std::uint64_t> offset)
    : Error(code, offset ? message + " (at byte offset " + std::to_string(*offset) + ")" : message),
      offset_(offset) {}

UnsupportedTypeError::UnsupportedTypeError(std::string type_name, Location where)
    : Error(ErrorCode::kUnsupportedType, describe(type_name, where)),
      type_name_(std::move(type_name)),
      where_(std::move(where)) {}

UnsupportedTypeError UnsupportedTypeError::located(Location where) const {
  if (where.table.empty()) where.table = where_.table;
  if (where.row == 0) where.row = where_.row;
  if (where.column == 0) where.column = where_.column;
  if (where.column_name.empty()) where.column_name = where_.column_name;
  return UnsupportedTypeError(type_name_, std::move(where));
}

std::string UnsupportedTypeError::describe(const std::string& type_name, const Location& where) {
  std::string msg = "cannot dump a value of type '" + type_name + "'";
  if (!where.table.empty()) msg += " in table " + where.table;
  if (where.row != 0) msg += ", row " + std::to_string(where.row);
  if (where.column != 0) {
    msg += ", column " + std::to_string(where.column);
    if (!where.column_name.empty()) msg += " (" + where.column_name + ")";
  } else if (!where.column_name.empty()) {
    msg += ", column " + where.column_name;
  }
  msg += "; cast this column to text in select_sql";
  return msg;
}

}  // namespace tdump
