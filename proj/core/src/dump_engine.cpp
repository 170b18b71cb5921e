#include "tdump/dump_engine.hpp"

#include <fstream>
#include <optional>
#include <ostream>

#include "tdump/dump_format.hpp"
#include "tdump/error.hpp"

namespace tdump {

std::string dump_file_name(std::string_view table, std::uint32_t chunk_index) {
  return std::string(table) + "." + std::to_string(chunk_index) + ".dump";
}

namespace {

/// One open chunk file. Removes the file on destruction unless finished.
class ChunkFile {
 public:
  ChunkFile(std::filesystem::path path, const DumpFileHeader& header, bool overwrite)
      : path_(std::move(path)) {
    if (!overwrite && std::filesystem::exists(path_)) {
      throw Error(ErrorCode::kFileExists, "'" + path_.string() + "' already exists; refusing to overwrite");
    }
    stream_.open(path_, std::ios::binary | std::ios::trunc);
    if (!stream_) throw Error(ErrorCode::kIo, "cannot create '" + path_.string() + "'");
    opened_ = true;
    writer_.emplace(stream_, header);
  }

  ChunkFile(const ChunkFile&) = delete;
  ChunkFile& operator=(const ChunkFile&) = delete;

  ~ChunkFile() {
    if (opened_ && !finished_) {
      writer_.reset();
      stream_.close();
      std::error_code ec;
      std::filesystem::remove(path_, ec);
    }
  }

  void append(const Row& row) { writer_->append(row); }

  std::uint64_t finish() {
    auto n = writer_->finish();
    stream_.close();
    if (stream_.fail()) throw Error(ErrorCode::kIo, "cannot close '" + path_.string() + "'");
    finished_ = true;
    return n;
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream stream_;
  std::optional<DumpWriter> writer_;
  bool opened_ = false;
  bool finished_ = false;
};

}  // namespace

DumpReport dump_table(Connector& backend, const TableSpec& spec, const std::filesystem::path& out_dir,
                      const DumpOptions& options) {
  if (!is_valid_table_name(spec.table_name)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid table name '" + spec.table_name + "'");
  }
  if (options.chunk.records_per_file == 0) {
    throw Error(ErrorCode::kInvalidArgument, "records_per_file must be >= 1");
  }
  auto* progress = options.progress;
  if (progress) *progress << "Dumping table: " << spec.table_name << '\n';

  auto cursor = backend.query(spec.select_sql);

  DumpReport report;
  report.table_name = spec.table_name;
  std::optional<ChunkFile> chunk;
  std::uint32_t chunk_index = 0;
  std::uint16_t column_count = 0;

  auto close_chunk = [&] {
    const auto n = chunk->finish();
    report.files.push_back({chunk->path(), n});
    if (progress) *progress << n << " records dumped into " << chunk->path().string() << " file\n";
    chunk.reset();
  };

  Row row;
  try {
    while (true) {
      try {
        if (!cursor->next(row)) break;
      } catch (const UnsupportedTypeError& e) {
        throw e.located(
            {.table = spec.table_name, .row = report.total_rows + 1, .column = 0, .column_name = {}});
      }
      if (report.total_rows == 0) {
        if (row.empty() || row.size() > 0xFFFF) {
          throw Error(ErrorCode::kInvalidArgument, "select for " + spec.table_name + " returned " +
                                                       std::to_string(row.size()) + " columns");
        }
        column_count = static_cast<std::uint16_t>(row.size());
        const auto placeholders = count_placeholders(spec.insert_sql);
        if (placeholders != column_count) {
          throw Error(ErrorCode::kArityMismatch, "insert SQL for " + spec.table_name + " has " +
                                                     std::to_string(placeholders) +
                                                     " placeholders but the select returns " +
                                                     std::to_string(column_count) + " columns");
        }
      }
      if (!chunk) {
        DumpFileHeader header;
        header.table_name = spec.table_name;
        header.insert_sql = spec.insert_sql;
        header.chunk_index = ++chunk_index;
        header.column_count = column_count;
        chunk.emplace(out_dir / dump_file_name(spec.table_name, chunk_index), header, options.overwrite);
      }
      chunk->append(row);
      ++report.total_rows;
      if (report.total_rows % options.chunk.records_per_file == 0) close_chunk();
    }
    if (chunk) close_chunk();
  } catch (...) {
    // Finished chunks of a table that did not complete are not a usable backup.
    chunk.reset();
    for (const auto& f : report.files) {
      std::error_code ec;
      std::filesystem::remove(f.path, ec);
    }
    throw;
  }

  if (progress) {
    *progress << "Total number of records in " << spec.table_name << " table: " << report.total_rows << '\n';
    *progress << "Dumping " << spec.table_name << " table successful.\n";
  }
  return report;
}

DumpRun dump_all(Connector& backend, const DumpPlan& plan, const std::filesystem::path& out_dir,
                 const DumpOptions& options, bool keep_going) {
  DumpRun run;
  for (const auto& spec : plan.tables) {
    try {
      run.reports.push_back(dump_table(backend, spec, out_dir, options));
    } catch (const std::exception& e) {
      run.failures.push_back({spec.table_name, e.what()});
      if (!keep_going) break;
    }
  }
  return run;
}

}  // namespace tdump
