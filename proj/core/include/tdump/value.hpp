#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tdump {

using Bytes = std::vector<std::uint8_t>;

/// One dynamically typed field crossing the database/file boundary.
///
/// Floats compare by bit pattern, so -0.0 != 0.0 and a NaN equals itself when
/// the payloads match. This keeps equality an equivalence relation and makes
/// codec roundtrips exactly checkable.
class Value {
 public:
  enum class Kind : std::uint8_t { kNull = 0, kInt = 1, kFloat = 2, kText = 3, kBytes = 4 };

  Value() = default;

  static Value null() { return Value(); }
  static Value integer(std::int64_t v) { return Value(Storage(std::in_place_index<1>, v)); }
  static Value real(double v) { return Value(Storage(std::in_place_index<2>, v)); }
  static Value text(std::string v) { return Value(Storage(std::in_place_index<3>, std::move(v))); }
  static Value bytes(Bytes v) { return Value(Storage(std::in_place_index<4>, std::move(v))); }

  Kind kind() const noexcept { return static_cast<Kind>(storage_.index()); }
  bool is_null() const noexcept { return kind() == Kind::kNull; }

  // Accessors throw std::bad_variant_access on kind mismatch.
  std::int64_t as_int() const { return std::get<1>(storage_); }
  double as_float() const { return std::get<2>(storage_); }
  const std::string& as_text() const { return std::get<3>(storage_); }
  const Bytes& as_bytes() const { return std::get<4>(storage_); }

  friend bool operator==(const Value& a, const Value& b) noexcept;
  friend std::strong_ordering operator<=>(const Value& a, const Value& b) noexcept;

 private:
  struct Null {};
  using Storage = std::variant<Null, std::int64_t, double, std::string, Bytes>;
  explicit Value(Storage s) : storage_(std::move(s)) {}

  Storage storage_;
};

using Row = std::vector<Value>;

std::string_view to_string(Value::Kind kind);

/// Python-repr-like rendering, used for logs and test diagnostics.
std::string to_string(const Value& value);
std::string to_string(const Row& row);
std::ostream& operator<<(std::ostream& os, const Value& value);

/// Strict UTF-8 check: rejects overlongs, surrogates and code points past U+10FFFF.
bool is_valid_utf8(std::string_view text) noexcept;

}  // namespace tdump
