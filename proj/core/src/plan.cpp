#include "tdump/plan.hpp"

#include <charconv>
#include <unordered_set>

#include "tdump/error.hpp"

namespace tdump {

std::size_t batch_size(const CommitPolicy& policy) {
  if (std::holds_alternative<PerRecord>(policy)) return 1;
  if (const auto* b = std::get_if<PerBatch>(&policy)) return b->size;
  return 0;
}

CommitPolicy parse_commit_policy(std::string_view text) {
  if (text == "record") return PerRecord{};
  if (text == "file") return PerFile{};
  if (text.starts_with("batch:")) {
    auto digits = text.substr(6);
    std::size_t n = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec == std::errc() && ptr == digits.data() + digits.size() && n >= 1) {
      return PerBatch{n};
    }
  }
  throw Error(
      ErrorCode::kInvalidArgument,
      "commit policy must be 'record', 'batch:N' (N >= 1) or 'file', got '" + std::string(text) + "'");
}

std::string to_string(const CommitPolicy& policy) {
  if (std::holds_alternative<PerRecord>(policy)) return "record";
  if (const auto* b = std::get_if<PerBatch>(&policy)) return "batch:" + std::to_string(b->size);
  return "file";
}

bool is_valid_table_name(std::string_view name) noexcept {
  if (name.empty() || name == "." || name == "..") return false;
  for (char c : name) {
    if (c == '/' || c == '\\' || c == '\0') return false;
  }
  return true;
}

std::size_t count_placeholders(std::string_view sql) noexcept {
  std::size_t count = 0;
  char quote = 0;
  for (char c : sql) {
    if (quote) {
      // A doubled quote toggles out and straight back in, which is harmless here.
      if (c == quote) quote = 0;
    } else if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '?') {
      ++count;
    }
  }
  return count;
}

namespace {

bool is_blank(std::string_view line) { return line.find_first_not_of(" \t") == std::string_view::npos; }

}  // namespace

DumpPlan parse_plan(std::string_view text) {
  static constexpr std::string_view kKeys[] = {"table: ", "select: ", "insert: "};

  DumpPlan plan;
  std::unordered_set<std::string> seen;
  TableSpec current;
  std::size_t expected = 0;  // index into kKeys of the next line of the entry
  std::size_t entry_line = 0;
  std::size_t line_no = 0;

  auto finish_entry = [&] {
    if (!seen.insert(current.table_name).second) {
      throw PlanError(entry_line, "duplicate table name '" + current.table_name + "'");
    }
    plan.tables.push_back(std::move(current));
    current = {};
  };

  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (!line.empty() && line.front() == '#') continue;
    if (is_blank(line)) {
      if (expected != 0) {
        throw PlanError(line_no, "blank line inside entry; expected '" +
                                     std::string(kKeys[expected].substr(0, kKeys[expected].size() - 2)) +
                                     ":'");
      }
      continue;
    }

    const auto key = kKeys[expected];
    if (!line.starts_with(key)) {
      throw PlanError(line_no, "expected line starting with '" + std::string(key) + "'");
    }
    std::string value(line.substr(key.size()));
    if (is_blank(value)) {
      throw PlanError(line_no, "empty value for '" + std::string(key.substr(0, key.size() - 1)) + "'");
    }
    switch (expected) {
      case 0:
        if (!is_valid_table_name(value)) {
          throw PlanError(line_no, "table name '" + value + "' is not usable as a file name");
        }
        entry_line = line_no;
        current.table_name = std::move(value);
        break;
      case 1:
        current.select_sql = std::move(value);
        break;
      case 2:
        current.insert_sql = std::move(value);
        finish_entry();
        break;
    }
    expected = (expected + 1) % 3;
  }

  if (expected != 0) {
    throw PlanError(line_no, "incomplete entry for table '" + current.table_name + "'");
  }
  if (plan.tables.empty()) throw PlanError(0, "plan contains no entries");
  return plan;
}

std::string render_plan(const DumpPlan& plan) {
  std::string out;
  for (std::size_t i = 0; i < plan.tables.size(); ++i) {
    const auto& t = plan.tables[i];
    if (i) out += '\n';
    out += "table: " + t.table_name + '\n';
    out += "select: " + t.select_sql + '\n';
    out += "insert: " + t.insert_sql + '\n';
  }
  return out;
}

}  // namespace tdump
