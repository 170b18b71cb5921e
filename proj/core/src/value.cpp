#include "tdump/value.hpp"

#include <bit>
#include <charconv>
#include <ostream>

namespace tdump {

bool operator==(const Value& a, const Value& b) noexcept { return (a <=> b) == std::strong_ordering::equal; }

std::strong_ordering operator<=>(const Value& a, const Value& b) noexcept {
  if (auto c = a.storage_.index() <=> b.storage_.index(); c != 0) return c;
  switch (a.kind()) {
    case Value::Kind::kNull:
      return std::strong_ordering::equal;
    case Value::Kind::kInt:
      return a.as_int() <=> b.as_int();
    case Value::Kind::kFloat:
      return std::bit_cast<std::uint64_t>(a.as_float()) <=> std::bit_cast<std::uint64_t>(b.as_float());
    case Value::Kind::kText:
      return a.as_text().compare(b.as_text()) <=> 0;
    case Value::Kind::kBytes:
      return a.as_bytes() <=> b.as_bytes();
  }
  return std::strong_ordering::equal;
}

std::string_view to_string(Value::Kind kind) {
  switch (kind) {
    case Value::Kind::kNull:
      return "null";
    case Value::Kind::kInt:
      return "int";
    case Value::Kind::kFloat:
      return "float";
    case Value::Kind::kText:
      return "text";
    case Value::Kind::kBytes:
      return "bytes";
  }
  return "?";
}

std::string to_string(const Value& value) {
  switch (value.kind()) {
    case Value::Kind::kNull:
      return "None";
    case Value::Kind::kInt:
      return std::to_string(value.as_int());
    case Value::Kind::kFloat: {
      char buf[64];
      auto res = std::to_chars(buf, buf + sizeof buf, value.as_float());
      std::string out(buf, res.ptr);
      if (out.find_first_of(".eni") == std::string::npos) out += ".0";
      return out;
    }
    case Value::Kind::kText: {
      std::string out = "'";
      for (char c : value.as_text()) {
        if (c == '\'' || c == '\\') out += '\\';
        out += c;
      }
      return out + "'";
    }
    case Value::Kind::kBytes: {
      static constexpr char kHex[] = "0123456789abcdef";
      std::string out = "b'";
      for (std::uint8_t b : value.as_bytes()) {
        out += "\\x";
        out += kHex[b >> 4];
        out += kHex[b & 0xF];
      }
      return out + "'";
    }
  }
  return "?";
}

std::string to_string(const Row& row) {
  std::string out = "(";
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ", ";
    out += to_string(row[i]);
  }
  return out + ")";
}

std::ostream& operator<<(std::ostream& os, const Value& value) { return os << to_string(value); }

bool is_valid_utf8(std::string_view text) noexcept {
  const auto* p = reinterpret_cast<const unsigned char*>(text.data());
  const auto* end = p + text.size();
  while (p < end) {
    unsigned char c = *p;
    if (c < 0x80) {
      ++p;
      continue;
    }
    int extra;
    std::uint32_t cp;
    if (c >= 0xC2 && c <= 0xDF) {
      extra = 1;
      cp = c & 0x1F;
    } else if (c >= 0xE0 && c <= 0xEF) {
      extra = 2;
      cp = c & 0x0F;
    } else if (c >= 0xF0 && c <= 0xF4) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (end - p <= extra) return false;
    for (int i = 1; i <= extra; ++i) {
      if ((p[i] & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (p[i] & 0x3F);
    }
    if (extra == 2 && (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF))) return false;
    if (extra == 3 && (cp < 0x10000 || cp > 0x10FFFF)) return false;
    p += extra + 1;
  }
  return true;
}

}  // namespace tdump
