#include "tdump/load_engine.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <mutex>
#include <ostream>
#include <thread>

#include "tdump/dump_format.hpp"
#include "tdump/error.hpp"

namespace tdump {

ReadMode parse_read_mode(std::string_view text) {
  if (text == "strict") return ReadMode::kStrict;
  if (text == "salvage") return ReadMode::kSalvage;
  throw Error(ErrorCode::kInvalidArgument,
              "read mode must be 'strict' or 'salvage', got '" + std::string(text) + "'");
}

std::string_view to_string(ReadMode mode) { return mode == ReadMode::kStrict ? "strict" : "salvage"; }

namespace {

std::mutex g_progress_mutex;

void emit(std::ostream* out, const std::string& line) {
  if (!out) return;
  std::lock_guard lock(g_progress_mutex);
  *out << line << '\n';
}

struct LoadState {
  Connector& backend;
  const std::string& insert_sql;
  const std::vector<Row>& rows;
  const LoadOptions& options;
  LoadReport& report;
};

class ConnectionLost : public std::exception {};

void record_failure(LoadState& s, std::size_t index, const Error& e) {
  const std::uint64_t ordinal = index + 1;
  ++s.report.failed;
  if (s.report.failures.size() < s.options.failure_cap) s.report.failures.push_back({ordinal, e.what()});
  emit(s.options.progress, "Unable to load record: " + std::to_string(ordinal));
  spdlog::debug("{}: record {} {} rejected: {}", s.report.file.string(), ordinal, to_string(s.rows[index]),
                e.what());
}

/// Insert and commit a single record; failures are recorded, not thrown.
void load_one(LoadState& s, std::size_t index) {
  try {
    s.backend.insert(s.insert_sql, s.rows[index]);
    s.backend.commit();
    ++s.report.inserted;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConnectionLost) throw ConnectionLost();
    try {
      s.backend.rollback();
    } catch (const Error& re) {
      if (re.code() == ErrorCode::kConnectionLost) throw ConnectionLost();
      throw;
    }
    record_failure(s, index, e);
  }
  ++s.report.attempted;
}

void load_batch(LoadState& s, std::size_t begin, std::size_t end) {
  try {
    s.backend.begin();
    for (std::size_t i = begin; i < end; ++i) s.backend.insert(s.insert_sql, s.rows[i]);
    s.backend.commit();
    s.report.inserted += end - begin;
    s.report.attempted += end - begin;
    return;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConnectionLost) throw ConnectionLost();
    spdlog::debug("{}: batch {}..{} failed ({}), replaying record by record", s.report.file.string(),
                  begin + 1, end, e.what());
  }
  try {
    s.backend.rollback();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConnectionLost) throw ConnectionLost();
    throw;
  }
  for (std::size_t i = begin; i < end; ++i) load_one(s, i);
}

LoadReport load_file_impl(Connector& backend, const std::filesystem::path& file, const LoadOptions& options,
                          bool& connection_lost) {
  connection_lost = false;
  LoadReport report;
  report.file = file;

  const auto bytes = read_file_bytes(file.string());
  DumpFileHeader header;
  std::vector<Row> rows;
  if (options.mode == ReadMode::kStrict) {
    auto contents = read_strict(std::span<const std::uint8_t>(bytes));
    header = std::move(contents.header);
    rows = std::move(contents.rows);
  } else {
    auto salvaged = read_salvage(std::span<const std::uint8_t>(bytes));
    if (!salvaged.header) {
      report.complete = false;
      report.error = "no header frame recovered; insert SQL unknown (" +
                     std::to_string(salvaged.report.records_recovered) + " records not loaded)";
      return report;
    }
    header = std::move(*salvaged.header);
    rows = std::move(salvaged.rows);
  }

  const auto placeholders = count_placeholders(header.insert_sql);
  if (placeholders != header.column_count) {
    throw Error(ErrorCode::kArityMismatch, "insert SQL has " + std::to_string(placeholders) +
                                               " placeholders, file has " +
                                               std::to_string(header.column_count) + " columns");
  }

  LoadState state{backend, header.insert_sql, rows, options, report};
  std::size_t step = batch_size(options.commit);
  if (step == 0) step = std::max<std::size_t>(rows.size(), 1);
  try {
    for (std::size_t begin = 0; begin < rows.size(); begin += step) {
      const auto end = std::min(rows.size(), begin + step);
      if (step == 1) {
        load_one(state, begin);
      } else {
        load_batch(state, begin, end);
      }
    }
  } catch (const ConnectionLost&) {
    connection_lost = true;
    report.complete = false;
    report.error = "ConnectionLost: load aborted after " + std::to_string(report.attempted) + " of " +
                   std::to_string(rows.size()) + " records";
    emit(options.progress, file.string() + " file load aborted: connection lost");
    return report;
  }
  emit(options.progress, file.string() + " file loaded successful.");
  return report;
}

}  // namespace

LoadReport load_file(Connector& backend, const std::filesystem::path& file, const LoadOptions& options) {
  bool lost = false;
  return load_file_impl(backend, file, options, lost);
}

std::vector<LoadReport> load_many(const ConnectorFactory& factory,
                                  std::span<const std::filesystem::path> files, const LoadOptions& options,
                                  std::size_t workers) {
  if (workers == 0) throw Error(ErrorCode::kInvalidArgument, "workers must be >= 1");
  std::vector<LoadReport> reports(files.size());
  if (files.empty()) return reports;
  workers = std::min(workers, files.size());

  auto fail_file = [&](std::size_t i, const std::string& why) {
    reports[i].file = files[i];
    reports[i].complete = false;
    reports[i].error = why;
  };

  auto run_worker = [&](std::size_t w) {
    std::unique_ptr<Connector> conn;
    try {
      conn = factory();
    } catch (const std::exception& e) {
      for (auto i = w; i < files.size(); i += workers)
        fail_file(i, std::string("cannot connect: ") + e.what());
      return;
    }
    bool dead = false;
    for (auto i = w; i < files.size(); i += workers) {
      if (dead) {
        fail_file(i, "not loaded: worker connection was lost");
        continue;
      }
      try {
        reports[i] = load_file_impl(*conn, files[i], options, dead);
      } catch (const std::exception& e) {
        fail_file(i, e.what());
        emit(options.progress, files[i].string() + " file not loaded: " + e.what());
      }
    }
    try {
      conn->close();
    } catch (const std::exception&) {
    }
  };

  if (workers == 1) {
    run_worker(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_worker, w);
  }
  return reports;
}

}  // namespace tdump
