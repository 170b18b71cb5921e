#include "tdump/reference_backend.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "sql_lexer.hpp"
#include "tdump/error.hpp"

namespace tdump {

struct ReferenceDatabase::Table {
  TableDef def;
  std::vector<std::vector<NativeCell>> rows;
  std::unordered_set<std::string> keys;
};

namespace {

using sql::Parser;
using sql::TokenKind;

[[noreturn]] void conversion_error(const ColumnDef& col, const std::string& why) {
  throw Error(ErrorCode::kQueryFailed, "conversion error for column " + col.name + ": " + why);
}

// ---------------------------------------------------------------------------
// Dates

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

/// Accepts `YYYY-MM-DD[ HH:MM[:SS[.ffff]]]`, `MM/DD/YY` and `MM/DD/YYYY`.
bool parse_timestamp(std::string_view text, native::Timestamp& ts) {
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  ts = {};
  std::string_view date = text, time;
  if (auto sp = text.find_first_of(" T"); sp != std::string_view::npos) {
    date = text.substr(0, sp);
    time = text.substr(sp + 1);
  }
  if (date.find('-') != std::string_view::npos) {
    auto a = date.find('-'), b = date.find('-', a + 1);
    if (b == std::string_view::npos || !parse_int(date.substr(0, a), ts.year) ||
        !parse_int(date.substr(a + 1, b - a - 1), ts.month) || !parse_int(date.substr(b + 1), ts.day)) {
      return false;
    }
  } else if (date.find('/') != std::string_view::npos) {
    auto a = date.find('/'), b = date.find('/', a + 1);
    if (b == std::string_view::npos || !parse_int(date.substr(0, a), ts.month) ||
        !parse_int(date.substr(a + 1, b - a - 1), ts.day) || !parse_int(date.substr(b + 1), ts.year)) {
      return false;
    }
    if (date.size() - b - 1 <= 2) ts.year += ts.year < 50 ? 2000 : 1900;
  } else {
    return false;
  }
  if (ts.year < 1 || ts.year > 9999 || ts.month < 1 || ts.month > 12 || ts.day < 1 ||
      ts.day > days_in_month(ts.year, ts.month)) {
    return false;
  }
  if (!time.empty()) {
    auto frac_pos = time.find('.');
    auto hms = time.substr(0, frac_pos);
    auto c1 = hms.find(':');
    if (c1 == std::string_view::npos || !parse_int(hms.substr(0, c1), ts.hour)) return false;
    auto rest = hms.substr(c1 + 1);
    auto c2 = rest.find(':');
    if (!parse_int(rest.substr(0, c2), ts.minute)) return false;
    if (c2 != std::string_view::npos && !parse_int(rest.substr(c2 + 1), ts.second)) return false;
    if (frac_pos != std::string_view::npos) {
      auto frac = time.substr(frac_pos + 1);
      if (frac.empty() || frac.size() > 4 || frac.find_first_not_of("0123456789") != std::string_view::npos) {
        return false;
      }
      std::string padded(frac);
      padded.resize(4, '0');
      parse_int(padded, ts.ten_thousandths);
    }
    if (ts.hour > 23 || ts.minute > 59 || ts.second > 59) return false;
  }
  return true;
}

std::string render_timestamp(const native::Timestamp& ts, bool with_time) {
  char buf[40];
  if (with_time) {
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d:%02d.%04d", ts.year, ts.month, ts.day, ts.hour,
                  ts.minute, ts.second, ts.ten_thousandths);
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", ts.year, ts.month, ts.day);
  }
  return buf;
}

// ---------------------------------------------------------------------------
// Numbers

std::string render_decimal(const native::Decimal& d) {
  const bool negative = d.unscaled < 0;
  std::string digits = std::to_string(negative ? -(d.unscaled + 1) + 1ull : d.unscaled + 0ull);
  if (d.scale > 0) {
    if (digits.size() <= static_cast<std::size_t>(d.scale)) {
      digits.insert(0, static_cast<std::size_t>(d.scale) - digits.size() + 1, '0');
    }
    digits.insert(digits.size() - static_cast<std::size_t>(d.scale), ".");
  }
  return negative ? "-" + digits : digits;
}

/// Exact text -> scaled integer, rounding half away from zero past `scale` digits.
bool parse_decimal(std::string_view text, int scale, std::int64_t& out) {
  bool negative = false;
  if (!text.empty() && (text[0] == '-' || text[0] == '+')) {
    negative = text[0] == '-';
    text.remove_prefix(1);
  }
  auto dot = text.find('.');
  auto whole = text.substr(0, dot);
  auto frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (whole.empty() && frac.empty()) return false;
  if (whole.find_first_not_of("0123456789") != std::string_view::npos ||
      frac.find_first_not_of("0123456789") != std::string_view::npos) {
    return false;
  }
  __int128 value = 0;
  for (char c : whole) {
    value = value * 10 + (c - '0');
    if (value > std::numeric_limits<std::int64_t>::max()) return false;
  }
  for (int i = 0; i < scale; ++i) {
    value = value * 10 + (static_cast<std::size_t>(i) < frac.size() ? frac[i] - '0' : 0);
    if (value > std::numeric_limits<std::int64_t>::max()) return false;
  }
  if (frac.size() > static_cast<std::size_t>(scale) && frac[scale] >= '5') ++value;
  if (value > std::numeric_limits<std::int64_t>::max()) return false;
  out = static_cast<std::int64_t>(negative ? -value : value);
  return true;
}

bool parse_double(std::string_view text, double& out) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && p == text.data() + text.size() && !text.empty();
}

template <typename F>
std::string shortest(F v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

// ---------------------------------------------------------------------------
// Value -> stored cell

std::int64_t to_integer(const Value& v, const ColumnDef& col) {
  switch (v.kind()) {
    case Value::Kind::kInt:
      return v.as_int();
    case Value::Kind::kFloat: {
      const double d = std::round(v.as_float());
      if (!std::isfinite(d) || d < -9.2233720368547758e18 || d >= 9.2233720368547758e18) {
        conversion_error(col, "value out of range");
      }
      return static_cast<std::int64_t>(d);
    }
    case Value::Kind::kText: {
      std::int64_t out = 0;
      if (!parse_decimal(v.as_text(), 0, out))
        conversion_error(col, "'" + v.as_text() + "' is not an integer");
      return out;
    }
    default:
      conversion_error(col, "cannot store " + std::string(to_string(v.kind())) + " in an integer column");
  }
}

double to_real(const Value& v, const ColumnDef& col) {
  switch (v.kind()) {
    case Value::Kind::kInt:
      return static_cast<double>(v.as_int());
    case Value::Kind::kFloat:
      return v.as_float();
    case Value::Kind::kText: {
      double out = 0;
      if (!parse_double(v.as_text(), out)) conversion_error(col, "'" + v.as_text() + "' is not a number");
      return out;
    }
    default:
      conversion_error(col, "cannot store " + std::string(to_string(v.kind())) + " in a float column");
  }
}

NativeCell coerce(const Value& v, const ColumnDef& col) {
  if (v.is_null()) {
    if (col.not_null) {
      throw Error(ErrorCode::kConstraintViolation,
                  "validation error for column " + col.name + ", value \"*** null ***\"");
    }
    return native::Null{};
  }
  switch (col.kind) {
    case ColumnKind::kSmallInt:
    case ColumnKind::kInteger:
    case ColumnKind::kBigInt: {
      const auto n = to_integer(v, col);
      if ((col.kind == ColumnKind::kSmallInt && (n < INT16_MIN || n > INT16_MAX)) ||
          (col.kind == ColumnKind::kInteger && (n < INT32_MIN || n > INT32_MAX))) {
        conversion_error(col, "arithmetic overflow");
      }
      return native::Integer{n};
    }
    case ColumnKind::kFloat:
      return native::Float32{static_cast<float>(to_real(v, col))};
    case ColumnKind::kDouble:
      return native::Float64{to_real(v, col)};
    case ColumnKind::kVarchar:
    case ColumnKind::kChar: {
      if (v.kind() != Value::Kind::kText) {
        conversion_error(col, "cannot store " + std::string(to_string(v.kind())) + " in a text column");
      }
      std::string text = v.as_text();
      const auto len = utf8_length(text);
      if (col.length != 0 && len > col.length) {
        throw Error(ErrorCode::kQueryFailed, "string right truncation for column " + col.name);
      }
      if (col.kind == ColumnKind::kChar && col.length > len) text.append(col.length - len, ' ');
      return native::Text{std::move(text)};
    }
    case ColumnKind::kVarbinary:
    case ColumnKind::kBlob: {
      Bytes bytes;
      if (v.kind() == Value::Kind::kBytes) {
        bytes = v.as_bytes();
      } else if (v.kind() == Value::Kind::kText) {
        bytes.assign(v.as_text().begin(), v.as_text().end());
      } else {
        conversion_error(col, "cannot store " + std::string(to_string(v.kind())) + " in a binary column");
      }
      if (col.length != 0 && bytes.size() > col.length) {
        throw Error(ErrorCode::kQueryFailed, "string right truncation for column " + col.name);
      }
      return native::Octets{std::move(bytes)};
    }
    case ColumnKind::kDate:
    case ColumnKind::kTimestamp: {
      native::Timestamp ts{};
      if (v.kind() != Value::Kind::kText || !parse_timestamp(v.as_text(), ts)) {
        conversion_error(col, "value is not a date/time string");
      }
      return ts;
    }
    case ColumnKind::kDecimal: {
      std::int64_t unscaled = 0;
      if (v.kind() == Value::Kind::kInt) {
        if (!parse_decimal(std::to_string(v.as_int()), col.scale, unscaled))
          conversion_error(col, "overflow");
      } else if (v.kind() == Value::Kind::kFloat) {
        if (!parse_decimal(shortest(v.as_float()), col.scale, unscaled)) conversion_error(col, "overflow");
      } else if (v.kind() == Value::Kind::kText) {
        if (!parse_decimal(v.as_text(), col.scale, unscaled)) {
          conversion_error(col, "'" + v.as_text() + "' is not a decimal number");
        }
      } else {
        conversion_error(col, "cannot store bytes in a decimal column");
      }
      return native::Decimal{unscaled, col.scale};
    }
  }
  conversion_error(col, "unknown column kind");
}

/// What a plain `select col` hands the driver for a stored cell.
NativeCell as_selected(const NativeCell& stored, const ColumnDef& col, std::uint64_t row_id) {
  if (std::holds_alternative<native::Null>(stored)) return stored;
  if (col.kind == ColumnKind::kDate) {
    const auto& ts = std::get<native::Timestamp>(stored);
    return native::Date{ts.year, ts.month, ts.day};
  }
  if (col.kind == ColumnKind::kBlob) return native::BlobHandle{row_id};
  return stored;
}

/// Text produced by cast(col as char/varchar).
std::string cast_to_text(const NativeCell& stored, const ColumnDef& col, int dialect) {
  switch (col.kind) {
    case ColumnKind::kSmallInt:
    case ColumnKind::kInteger:
    case ColumnKind::kBigInt:
      return std::to_string(std::get<native::Integer>(stored).value);
    case ColumnKind::kFloat:
      return shortest(std::get<native::Float32>(stored).value);
    case ColumnKind::kDouble:
      return shortest(std::get<native::Float64>(stored).value);
    case ColumnKind::kVarchar:
    case ColumnKind::kChar:
      return std::get<native::Text>(stored).value;
    case ColumnKind::kVarbinary:
    case ColumnKind::kBlob: {
      const auto& b = std::get<native::Octets>(stored).value;
      return std::string(b.begin(), b.end());
    }
    case ColumnKind::kDate:
      // Dialect 1 DATE carries a time of day.
      return render_timestamp(std::get<native::Timestamp>(stored), dialect == 1);
    case ColumnKind::kTimestamp:
      return render_timestamp(std::get<native::Timestamp>(stored), true);
    case ColumnKind::kDecimal:
      return render_decimal(std::get<native::Decimal>(stored));
  }
  return {};
}

void append_key_part(std::string& key, const NativeCell& cell) {
  key += static_cast<char>(cell.index());
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, native::Text>) {
          key += std::to_string(v.value.size()) + ':' + v.value;
        } else if constexpr (std::is_same_v<T, native::Octets>) {
          key += std::to_string(v.value.size()) + ':';
          key.append(v.value.begin(), v.value.end());
        } else if constexpr (std::is_same_v<T, native::Null>) {
        } else {
          key.append(reinterpret_cast<const char*>(&v), sizeof v);
        }
      },
      cell);
}

std::string key_of(const std::vector<NativeCell>& row, const std::vector<std::size_t>& pk) {
  std::string key;
  for (auto i : pk) append_key_part(key, row[i]);
  return key;
}

std::string describe_key(const std::vector<NativeCell>& row, const TableDef& def) {
  std::string out = "(";
  for (std::size_t k = 0; k < def.primary_key.size(); ++k) {
    if (k) out += ", ";
    const auto i = def.primary_key[k];
    out += std::holds_alternative<native::Null>(row[i]) ? "NULL" : cast_to_text(row[i], def.columns[i], 3);
  }
  return out + ")";
}

[[noreturn]] void duplicate_key(const ReferenceDatabase::Table& t, const std::vector<NativeCell>& row) {
  throw Error(ErrorCode::kDuplicateKey, "violation of PRIMARY KEY constraint on table " + t.def.name +
                                            ": key " + describe_key(row, t.def) + " already exists");
}

std::size_t column_index(const TableDef& def, std::string_view name) {
  for (std::size_t i = 0; i < def.columns.size(); ++i) {
    if (def.columns[i].name == name) return i;
  }
  throw Error(ErrorCode::kUnknownColumn, "column '" + std::string(name) + "' not found in table " + def.name);
}

// ---------------------------------------------------------------------------
// Statement parsing

struct SelectItem {
  std::size_t column;
  enum class Cast { kNone, kChar, kVarchar } cast = Cast::kNone;
  std::size_t length = 0;
};

struct SelectPlan {
  std::string table;
  std::vector<std::string> column_refs;  // resolved against the table later
  std::vector<SelectItem> items;
  bool star = false;
};

SelectPlan parse_select(std::string_view text) {
  Parser p(sql::tokenize(text));
  p.expect_keyword("select");
  SelectPlan plan;
  struct Raw {
    std::string column;
    SelectItem::Cast cast;
    std::size_t length;
  };
  std::vector<Raw> raw;
  do {
    if (p.accept_punct('*')) {
      plan.star = true;
      continue;
    }
    if (p.at_keyword("cast") && p.peek(1).kind == TokenKind::kPunct && p.peek(1).text == "(") {
      p.take();
      p.take();
      Raw r{p.identifier(), SelectItem::Cast::kChar, 0};
      p.expect_keyword("as");
      if (p.accept_keyword("varchar")) {
        r.cast = SelectItem::Cast::kVarchar;
      } else if (!p.accept_keyword("char") && !p.accept_keyword("character")) {
        p.fail("only casts to char(N) or varchar(N) are supported");
      }
      p.expect_punct('(');
      r.length = p.unsigned_number();
      if (r.length == 0) p.fail("cast length must be positive");
      p.expect_punct(')');
      p.expect_punct(')');
      raw.push_back(std::move(r));
      continue;
    }
    raw.push_back({p.identifier(), SelectItem::Cast::kNone, 0});
  } while (p.accept_punct(','));
  if (plan.star && !raw.empty()) p.fail("'*' cannot be combined with other columns");
  p.expect_keyword("from");
  plan.table = p.identifier();
  p.expect_end();
  for (auto& r : raw) {
    plan.column_refs.push_back(r.column);
    plan.items.push_back({0, r.cast, r.length});
  }
  return plan;
}

/// One element of a VALUES list: a placeholder or a literal.
struct ValueItem {
  bool placeholder = false;
  Value literal;
};

Value literal_value(const sql::Token& t) {
  switch (t.kind) {
    case TokenKind::kString:
    case TokenKind::kNumber:
      return Value::text(t.text);
    case TokenKind::kHexString: {
      if (t.text.size() % 2 != 0) throw Error(ErrorCode::kQueryFailed, "odd-length hex literal");
      Bytes b;
      for (std::size_t i = 0; i < t.text.size(); i += 2) {
        unsigned v = 0;
        auto [p, ec] = std::from_chars(t.text.data() + i, t.text.data() + i + 2, v, 16);
        if (ec != std::errc() || p != t.text.data() + i + 2) {
          throw Error(ErrorCode::kQueryFailed, "bad hex literal");
        }
        b.push_back(static_cast<std::uint8_t>(v));
      }
      return Value::bytes(std::move(b));
    }
    case TokenKind::kIdent:
      if (t.text == "null") return Value::null();
      [[fallthrough]];
    default:
      throw Error(ErrorCode::kQueryFailed, "unsupported literal '" + t.text + "'");
  }
}

struct InsertStatement {
  std::string table;
  std::vector<std::string> columns;  // empty = all, in table order
  std::vector<ValueItem> values;
  std::size_t placeholders = 0;
};

InsertStatement parse_insert(std::string_view text) {
  Parser p(sql::tokenize(text));
  p.expect_keyword("insert");
  p.expect_keyword("into");
  InsertStatement st;
  st.table = p.identifier();
  if (p.accept_punct('(')) {
    do {
      st.columns.push_back(p.identifier());
    } while (p.accept_punct(','));
    p.expect_punct(')');
  }
  p.expect_keyword("values");
  p.expect_punct('(');
  do {
    if (p.accept_punct('?')) {
      st.values.push_back({true, {}});
      ++st.placeholders;
    } else {
      st.values.push_back({false, literal_value(p.take())});
    }
  } while (p.accept_punct(','));
  p.expect_punct(')');
  p.expect_end();
  return st;
}

ColumnDef parse_column_type(Parser& p, std::string name) {
  ColumnDef col;
  col.name = std::move(name);
  const auto type = p.identifier();
  auto length = [&] {
    p.expect_punct('(');
    auto n = p.unsigned_number();
    p.expect_punct(')');
    return n;
  };
  if (type == "smallint") {
    col.kind = ColumnKind::kSmallInt;
  } else if (type == "integer" || type == "int") {
    col.kind = ColumnKind::kInteger;
  } else if (type == "bigint") {
    col.kind = ColumnKind::kBigInt;
  } else if (type == "float" || type == "real") {
    col.kind = ColumnKind::kFloat;
  } else if (type == "double") {
    p.expect_keyword("precision");
    col.kind = ColumnKind::kDouble;
  } else if (type == "varchar") {
    col.kind = ColumnKind::kVarchar;
    col.length = length();
  } else if (type == "char" || type == "character") {
    if (p.accept_keyword("varying")) {
      col.kind = ColumnKind::kVarchar;
      col.length = length();
    } else {
      col.kind = ColumnKind::kChar;
      col.length = p.at_punct('(') ? length() : 1;
    }
  } else if (type == "varbinary") {
    col.kind = ColumnKind::kVarbinary;
    col.length = p.at_punct('(') ? length() : 0;
  } else if (type == "blob") {
    col.kind = ColumnKind::kBlob;
  } else if (type == "date") {
    col.kind = ColumnKind::kDate;
  } else if (type == "timestamp") {
    col.kind = ColumnKind::kTimestamp;
  } else if (type == "decimal" || type == "numeric") {
    col.kind = ColumnKind::kDecimal;
    if (p.accept_punct('(')) {
      col.precision = static_cast<int>(p.unsigned_number());
      if (p.accept_punct(',')) col.scale = static_cast<int>(p.unsigned_number());
      p.expect_punct(')');
    }
    if (col.precision < 1 || col.precision > 18 || col.scale > col.precision) {
      p.fail("decimal precision must be 1..18 and scale <= precision");
    }
  } else {
    p.fail("unsupported column type '" + type + "'");
  }
  return col;
}

TableDef parse_create_table(Parser& p) {
  TableDef def;
  def.name = p.identifier();
  p.expect_punct('(');
  std::vector<std::string> pk_names;
  do {
    if (p.accept_keyword("primary")) {
      p.expect_keyword("key");
      p.expect_punct('(');
      do {
        pk_names.push_back(p.identifier());
      } while (p.accept_punct(','));
      p.expect_punct(')');
      continue;
    }
    auto col = parse_column_type(p, p.identifier());
    while (true) {
      if (p.accept_keyword("not")) {
        p.expect_keyword("null");
        col.not_null = true;
      } else if (p.accept_keyword("primary")) {
        p.expect_keyword("key");
        col.not_null = true;
        pk_names.push_back(col.name);
      } else {
        break;
      }
    }
    def.columns.push_back(std::move(col));
  } while (p.accept_punct(','));
  p.expect_punct(')');
  p.expect_end();
  for (const auto& n : pk_names) def.primary_key.push_back(column_index(def, n));
  return def;
}

std::string render_type(const ColumnDef& c) {
  switch (c.kind) {
    case ColumnKind::kSmallInt:
      return "smallint";
    case ColumnKind::kInteger:
      return "integer";
    case ColumnKind::kBigInt:
      return "bigint";
    case ColumnKind::kFloat:
      return "float";
    case ColumnKind::kDouble:
      return "double precision";
    case ColumnKind::kVarchar:
      return "varchar(" + std::to_string(c.length) + ")";
    case ColumnKind::kChar:
      return "char(" + std::to_string(c.length) + ")";
    case ColumnKind::kVarbinary:
      return c.length ? "varbinary(" + std::to_string(c.length) + ")" : "varbinary";
    case ColumnKind::kBlob:
      return "blob";
    case ColumnKind::kDate:
      return "date";
    case ColumnKind::kTimestamp:
      return "timestamp";
    case ColumnKind::kDecimal:
      return "decimal(" + std::to_string(c.precision) + ", " + std::to_string(c.scale) + ")";
  }
  return "?";
}

std::string quote_ident(const std::string& name) {
  bool plain = !name.empty() && (std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_');
  for (char c : name) {
    plain = plain && (std::islower(static_cast<unsigned char>(c)) ||
                      std::isdigit(static_cast<unsigned char>(c)) || c == '_' || c == '$');
  }
  if (plain) return name;
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render_literal(const NativeCell& cell, const ColumnDef& col) {
  if (std::holds_alternative<native::Null>(cell)) return "NULL";
  switch (col.kind) {
    case ColumnKind::kVarbinary:
    case ColumnKind::kBlob: {
      static constexpr char kHex[] = "0123456789abcdef";
      std::string out = "x'";
      for (auto b : std::get<native::Octets>(cell).value) {
        out += kHex[b >> 4];
        out += kHex[b & 0xF];
      }
      return out + "'";
    }
    case ColumnKind::kSmallInt:
    case ColumnKind::kInteger:
    case ColumnKind::kBigInt:
    case ColumnKind::kFloat:
    case ColumnKind::kDouble:
    case ColumnKind::kDecimal: {
      auto text = cast_to_text(cell, col, 1);
      // inf/nan have no numeric literal form; quoted text parses back the same.
      if (text.find_first_of("in") != std::string::npos) return "'" + text + "'";
      return text;
    }
    default: {
      std::string out = "'";
      for (char c : cast_to_text(cell, col, 1)) {
        if (c == '\'') out += '\'';
        out += c;
      }
      return out + "'";
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Cursor and connector

class ReferenceCursor final : public RowCursor {
 public:
  ReferenceCursor(std::shared_ptr<const ReferenceDatabase> db, const ReferenceDatabase::Table& table,
                  std::vector<SelectItem> items)
      : db_(std::move(db)), lock_(db_->mutex_), table_(table), items_(std::move(items)) {
    for (const auto& item : items_) names_.push_back(table_.def.columns[item.column].name);
  }

  const std::vector<std::string>& column_names() const override { return names_; }

  bool next(Row& row) override {
    if (index_ >= table_.rows.size()) return false;
    const auto& stored = table_.rows[index_];
    row.clear();
    row.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) {
      const auto& item = items_[i];
      const auto& col = table_.def.columns[item.column];
      const auto& cell = stored[item.column];
      try {
        if (item.cast == SelectItem::Cast::kNone) {
          row.push_back(map_cell(as_selected(cell, col, index_ + 1)));
        } else if (std::holds_alternative<native::Null>(cell)) {
          row.push_back(Value::null());
        } else {
          auto text = cast_to_text(cell, col, db_->dialect_);
          const auto len = utf8_length(text);
          if (len > item.length) {
            throw Error(ErrorCode::kQueryFailed, "string right truncation casting column " + col.name +
                                                     " to length " + std::to_string(item.length));
          }
          if (item.cast == SelectItem::Cast::kChar) text.append(item.length - len, ' ');
          row.push_back(map_cell(native::Text{std::move(text)}));
        }
      } catch (const UnsupportedTypeError& e) {
        throw e.located({.table = table_.def.name, .row = 0, .column = i + 1, .column_name = col.name});
      }
    }
    ++index_;
    return true;
  }

 private:
  std::shared_ptr<const ReferenceDatabase> db_;
  std::shared_lock<std::shared_mutex> lock_;
  const ReferenceDatabase::Table& table_;
  std::vector<SelectItem> items_;
  std::vector<std::string> names_;
  std::size_t index_ = 0;
};

class ReferenceConnector final : public Connector {
 public:
  explicit ReferenceConnector(std::shared_ptr<ReferenceDatabase> db) : db_(std::move(db)) {}
  ~ReferenceConnector() override { pending_.clear(); }

  std::unique_ptr<RowCursor> query(const std::string& select_sql) override {
    check_usable();
    auto plan = parse_select(select_sql);
    std::shared_lock lock(db_->mutex_);
    const auto& t = db_->table(plan.table);
    if (plan.star) {
      for (std::size_t i = 0; i < t.def.columns.size(); ++i) plan.items.push_back({i});
    } else {
      for (std::size_t i = 0; i < plan.items.size(); ++i) {
        plan.items[i].column = column_index(t.def, plan.column_refs[i]);
      }
    }
    lock.unlock();
    return std::make_unique<ReferenceCursor>(db_, t, std::move(plan.items));
  }

  void insert(const std::string& insert_sql, const Row& row) override {
    check_usable();
    const auto& st = prepared(insert_sql);
    if (row.size() != st.placeholders) {
      throw Error(ErrorCode::kQueryFailed, "statement expects " + std::to_string(st.placeholders) +
                                               " parameters, got " + std::to_string(row.size()));
    }
    consume_insert_budget();

    auto& t = *st.table;
    std::vector<NativeCell> stored(t.def.columns.size(), native::Null{});
    std::vector<bool> assigned(t.def.columns.size(), false);
    std::size_t param = 0;
    for (std::size_t i = 0; i < st.targets.size(); ++i) {
      const auto& col = t.def.columns[st.targets[i]];
      const Value& v = st.values[i].placeholder ? row[param++] : st.values[i].literal;
      stored[st.targets[i]] = coerce(v, col);
      assigned[st.targets[i]] = true;
    }
    for (std::size_t c = 0; c < t.def.columns.size(); ++c) {
      if (!assigned[c]) stored[c] = coerce(Value::null(), t.def.columns[c]);
    }

    std::string key;
    if (!t.def.primary_key.empty()) {
      key = key_of(stored, t.def.primary_key);
      {
        std::shared_lock lock(db_->mutex_);
        if (t.keys.contains(key)) duplicate_key(t, stored);
      }
      auto& mine = pending_keys_[&t];
      if (!mine.insert(key).second) duplicate_key(t, stored);
    }
    pending_.push_back({&t, std::move(stored), std::move(key)});
  }

  void begin() override { check_usable(); }

  void commit() override {
    check_usable();
    std::string entry;
    if (!db_->journal_path_.empty() && !pending_.empty()) {
      for (const auto& p : pending_) {
        entry += "insert into " + quote_ident(p.table->def.name) + " values (";
        for (std::size_t i = 0; i < p.row.size(); ++i) {
          if (i) entry += ", ";
          entry += render_literal(p.row[i], p.table->def.columns[i]);
        }
        entry += ");\n";
      }
      entry += "commit;\n";
    }
    std::unique_lock lock(db_->mutex_);
    for (const auto& p : pending_) {
      if (!p.key.empty() && p.table->keys.contains(p.key)) {
        auto row = p.row;
        auto* table = p.table;
        lock.unlock();
        discard();
        duplicate_key(*table, row);
      }
    }
    if (!entry.empty()) db_->append_journal(entry);
    for (auto& p : pending_) {
      if (!p.key.empty()) p.table->keys.insert(std::move(p.key));
      p.table->rows.push_back(std::move(p.row));
    }
    db_->commits_.fetch_add(1, std::memory_order_relaxed);
    lock.unlock();
    discard();
  }

  void rollback() override {
    if (closed_) return;
    discard();
  }

  void close() override {
    discard();
    closed_ = true;
  }

 private:
  struct Prepared {
    ReferenceDatabase::Table* table = nullptr;
    std::vector<std::size_t> targets;
    std::vector<ValueItem> values;
    std::size_t placeholders = 0;
  };

  struct Pending {
    ReferenceDatabase::Table* table;
    std::vector<NativeCell> row;
    std::string key;
  };

  const Prepared& prepared(const std::string& insert_sql) {
    if (auto it = cache_.find(insert_sql); it != cache_.end()) return it->second;
    auto st = parse_insert(insert_sql);
    Prepared p;
    {
      std::shared_lock lock(db_->mutex_);
      p.table = &db_->table(st.table);
    }
    const auto& def = p.table->def;
    if (st.columns.empty()) {
      for (std::size_t i = 0; i < def.columns.size(); ++i) p.targets.push_back(i);
    } else {
      for (const auto& c : st.columns) {
        auto idx = column_index(def, c);
        if (std::find(p.targets.begin(), p.targets.end(), idx) != p.targets.end()) {
          throw Error(ErrorCode::kQueryFailed, "column " + c + " listed twice");
        }
        p.targets.push_back(idx);
      }
    }
    if (p.targets.size() != st.values.size()) {
      throw Error(ErrorCode::kQueryFailed, "insert lists " + std::to_string(p.targets.size()) +
                                               " columns but " + std::to_string(st.values.size()) +
                                               " values");
    }
    p.values = std::move(st.values);
    p.placeholders = st.placeholders;
    return cache_.emplace(insert_sql, std::move(p)).first->second;
  }

  void consume_insert_budget() {
    auto& countdown = db_->loss_countdown_;
    auto cur = countdown.load();
    while (cur >= 0) {
      if (cur == 0) {
        lost_ = true;
        discard();
        throw Error(ErrorCode::kConnectionLost, "connection to reference database lost");
      }
      if (countdown.compare_exchange_weak(cur, cur - 1)) break;
    }
  }

  void check_usable() const {
    if (lost_) throw Error(ErrorCode::kConnectionLost, "connection to reference database lost");
    if (closed_) throw Error(ErrorCode::kInvalidArgument, "connection is closed");
  }

  void discard() {
    pending_.clear();
    pending_keys_.clear();
  }

  std::shared_ptr<ReferenceDatabase> db_;
  std::unordered_map<std::string, Prepared> cache_;
  std::vector<Pending> pending_;
  std::unordered_map<const ReferenceDatabase::Table*, std::unordered_set<std::string>> pending_keys_;
  bool lost_ = false;
  bool closed_ = false;
};

// ---------------------------------------------------------------------------
// ReferenceDatabase

std::shared_ptr<ReferenceDatabase> ReferenceDatabase::create() {
  return std::shared_ptr<ReferenceDatabase>(new ReferenceDatabase());
}

std::shared_ptr<ReferenceDatabase> ReferenceDatabase::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open database '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  auto db = create();
  db->execute_script(buf.str());

  const auto journal = journal_path(path);
  if (std::filesystem::exists(journal)) {
    std::ifstream jin(journal, std::ios::binary);
    std::stringstream jbuf;
    jbuf << jin.rdbuf();
    auto text = jbuf.str();
    // A crash can leave a torn final entry; only whole transactions count.
    const auto end = text.rfind("commit;\n");
    text.resize(end == std::string::npos ? 0 : end + 8);
    db->execute_script(text);
  }
  db->attach_journal(journal);
  return db;
}

std::filesystem::path ReferenceDatabase::journal_path(const std::filesystem::path& path) {
  auto j = path;
  j += ".journal";
  return j;
}

ReferenceDatabase::~ReferenceDatabase() {
  if (journal_) std::fclose(journal_);
}

void ReferenceDatabase::attach_journal(const std::filesystem::path& path) {
  std::unique_lock lock(mutex_);
  if (journal_) std::fclose(journal_);
  journal_ = nullptr;
  journal_path_ = path;
}

void ReferenceDatabase::append_journal(const std::string& entry) {
  if (!journal_) {
    journal_ = std::fopen(journal_path_.c_str(), "ab");
    if (!journal_) throw Error(ErrorCode::kIo, "cannot open journal '" + journal_path_.string() + "'");
  }
  if (std::fwrite(entry.data(), 1, entry.size(), journal_) != entry.size() || std::fflush(journal_) != 0) {
    throw Error(ErrorCode::kIo, "cannot write journal '" + journal_path_.string() + "'");
  }
}

void ReferenceDatabase::save(const std::filesystem::path& path) {
  const auto script = to_script();
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << script;
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "cannot write database '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot replace database '" + path.string() + "': " + ec.message());

  std::unique_lock lock(mutex_);
  if (journal_) {
    std::fclose(journal_);
    journal_ = nullptr;
  }
  std::filesystem::remove(journal_path(path), ec);
}

std::string ReferenceDatabase::to_script() const {
  std::shared_lock lock(mutex_);
  std::string out = "set sql dialect " + std::to_string(dialect_) + ";\n";
  for (const auto& [name, t] : tables_) {
    out += "\ncreate table " + quote_ident(name) + " (";
    for (std::size_t i = 0; i < t->def.columns.size(); ++i) {
      const auto& c = t->def.columns[i];
      out += (i ? ",\n    " : "\n    ") + quote_ident(c.name) + " " + render_type(c);
      if (c.not_null) out += " not null";
    }
    if (!t->def.primary_key.empty()) {
      out += ",\n    primary key (";
      for (std::size_t k = 0; k < t->def.primary_key.size(); ++k) {
        if (k) out += ", ";
        out += quote_ident(t->def.columns[t->def.primary_key[k]].name);
      }
      out += ")";
    }
    out += ");\n";
    for (const auto& row : t->rows) {
      out += "insert into " + quote_ident(name) + " values (";
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ", ";
        out += render_literal(row[i], t->def.columns[i]);
      }
      out += ");\n";
    }
  }
  return out;
}

void ReferenceDatabase::execute_script(std::string_view script) {
  for (const auto& statement : sql::split_statements(script)) {
    Parser p(sql::tokenize(statement));
    if (p.accept_keyword("set")) {
      p.expect_keyword("sql");
      p.expect_keyword("dialect");
      auto d = p.unsigned_number();
      if (d != 1 && d != 3) p.fail("dialect must be 1 or 3");
      p.expect_end();
      dialect_ = static_cast<int>(d);
    } else if (p.accept_keyword("create")) {
      if (p.accept_keyword("database")) continue;  // the database is this object
      p.expect_keyword("table");
      create_table(parse_create_table(p));
    } else if (p.at_keyword("insert")) {
      auto c = connect();
      c->insert(statement, {});
      c->commit();
    } else if (p.accept_keyword("commit")) {
      p.expect_end();
    } else {
      p.fail("unsupported statement");
    }
  }
}

void ReferenceDatabase::create_table(TableDef def) {
  if (def.name.empty() || def.columns.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "a table needs a name and at least one column");
  }
  std::unique_lock lock(mutex_);
  if (tables_.contains(def.name)) {
    throw Error(ErrorCode::kQueryFailed, "table " + def.name + " already exists");
  }
  auto t = std::make_unique<Table>();
  auto name = def.name;
  t->def = std::move(def);
  tables_.emplace(std::move(name), std::move(t));
}

std::vector<std::string> ReferenceDatabase::table_names() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, _] : tables_) out.push_back(name);
  return out;
}

const TableDef& ReferenceDatabase::table_def(std::string_view name) const {
  std::shared_lock lock(mutex_);
  return table(name).def;
}

std::size_t ReferenceDatabase::row_count(std::string_view name) const {
  std::shared_lock lock(mutex_);
  return table(name).rows.size();
}

std::unique_ptr<Connector> ReferenceDatabase::connect() {
  return std::make_unique<ReferenceConnector>(shared_from_this());
}

ConnectorFactory ReferenceDatabase::factory() {
  return [self = shared_from_this()] { return self->connect(); };
}

void ReferenceDatabase::inject_connection_loss_after(std::uint64_t inserts) {
  loss_countdown_.store(inserts == 0 ? -1 : static_cast<std::int64_t>(inserts));
}

ReferenceDatabase::Table& ReferenceDatabase::table(std::string_view name) {
  auto it = tables_.find(sql::lower(name));
  if (it == tables_.end()) it = tables_.find(name);
  if (it == tables_.end())
    throw Error(ErrorCode::kUnknownTable, "table '" + std::string(name) + "' not found");
  return *it->second;
}

const ReferenceDatabase::Table& ReferenceDatabase::table(std::string_view name) const {
  return const_cast<ReferenceDatabase*>(this)->table(name);
}

}  // namespace tdump
