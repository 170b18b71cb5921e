#include "bench.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>
#include <random>

#include "tdump/dump_engine.hpp"
#include "tdump/error.hpp"
#include "tdump/load_engine.hpp"
#include "tdump/reference_backend.hpp"

namespace tdump::bench {

namespace {

constexpr const char* kSchema =
    "create table cross_rate (\n"
    "  from_currency varchar(10) not null,\n"
    "  to_currency varchar(10) not null,\n"
    "  conv_rate float not null,\n"
    "  update_date date,\n"
    "  primary key (from_currency, to_currency));";

const TableSpec kSpec{
    "cross_rate",
    "select from_currency, to_currency, conv_rate, cast(update_date as char(24)) from cross_rate",
    "insert into cross_rate (from_currency, to_currency, conv_rate, update_date) values (?, ?, ?, ?)"};

std::shared_ptr<ReferenceDatabase> empty_database() {
  auto db = ReferenceDatabase::create();
  db->execute_script("set sql dialect 1;");
  db->execute_script(kSchema);
  return db;
}

void populate(ReferenceDatabase& db, std::uint64_t rows) {
  auto conn = db.connect();
  const std::string insert = "insert into cross_rate values (?, ?, ?, ?)";
  std::mt19937_64 rng(20061018);
  char date[16];
  Row row(4);
  for (std::uint64_t i = 0; i < rows; ++i) {
    // Unique (from, to) pairs: 1000 targets per source.
    row[0] = Value::text("F" + std::to_string(i / 1000));
    row[1] = Value::text("T" + std::to_string(i % 1000));
    row[2] = Value::real(static_cast<double>(static_cast<float>((rng() % 1000000) / 1000.0)));
    std::snprintf(date, sizeof date, "%04d-%02d-%02d", 1990 + static_cast<int>(rng() % 30),
                  1 + static_cast<int>(rng() % 12), 1 + static_cast<int>(rng() % 28));
    row[3] = Value::text(date);
    conn->insert(insert, row);
    if ((i + 1) % 10000 == 0) conn->commit();
  }
  conn->commit();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string throughput(std::uint64_t records, double seconds) {
  if (records == 0 || seconds <= 0) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.0f records/min", records / seconds * 60.0);
  return buf;
}

BenchResult run(const BenchOptions& options, std::ostream* progress) {
  if (options.chunk_size == 0) throw Error(ErrorCode::kInvalidArgument, "chunk size must be >= 1");

  auto work_dir = options.work_dir;
  const bool own_dir = work_dir.empty();
  if (own_dir) {
    std::random_device rd;
    work_dir = std::filesystem::temp_directory_path() / ("tdump-bench-" + std::to_string(rd()));
  }
  std::filesystem::create_directories(work_dir);

  BenchResult result;
  result.rows = options.rows;
  try {
    auto source = empty_database();
    if (progress) *progress << "generating " << options.rows << " synthetic rows\n";
    populate(*source, options.rows);

    auto conn = source->connect();
    DumpOptions dump_options;
    dump_options.chunk.records_per_file = options.chunk_size;
    dump_options.overwrite = true;
    const auto t0 = std::chrono::steady_clock::now();
    auto report = dump_table(*conn, kSpec, work_dir, dump_options);
    result.dump_seconds = seconds_since(t0);
    conn.reset();
    source.reset();

    std::vector<std::filesystem::path> files;
    for (const auto& f : report.files) files.push_back(f.path);
    result.files = files.size();

    for (std::size_t i = 0; i < options.loads.size(); ++i) {
      const auto& config = options.loads[i];
      // Load targets journal their commits, as a file-backed database does.
      auto target = empty_database();
      target->attach_journal(work_dir / ("load-" + std::to_string(i) + ".journal"));
      LoadOptions load_options;
      load_options.commit = config.commit;
      const auto t1 = std::chrono::steady_clock::now();
      auto reports = load_many(target->factory(), files, load_options, config.jobs);
      LoadTiming timing{config, seconds_since(t1), 0, 0};
      for (const auto& r : reports) {
        if (r.error) throw Error(ErrorCode::kIo, "bench load failed: " + *r.error);
        timing.inserted += r.inserted;
        timing.failed += r.failed;
      }
      if (progress) {
        *progress << "loaded with jobs=" << config.jobs << " commit=" << to_string(config.commit) << '\n';
      }
      result.loads.push_back(timing);
    }
  } catch (...) {
    if (own_dir) std::filesystem::remove_all(work_dir);
    throw;
  }
  if (own_dir) std::filesystem::remove_all(work_dir);
  return result;
}

void print(const BenchResult& r, std::ostream& out) {
  char line[256];
  std::snprintf(line, sizeof line, "dump  %12llu records %4zu files %9.3f s  %s\n",
                static_cast<unsigned long long>(r.rows), r.files, r.dump_seconds,
                throughput(r.rows, r.dump_seconds).c_str());
  out << line;
  for (const auto& l : r.loads) {
    const auto label = "jobs=" + std::to_string(l.config.jobs) + " commit=" + to_string(l.config.commit);
    std::snprintf(line, sizeof line, "load  %-24s %12llu inserted %9.3f s  %s\n", label.c_str(),
                  static_cast<unsigned long long>(l.inserted), l.seconds,
                  throughput(l.inserted, l.seconds).c_str());
    out << line;
  }
}

}  // namespace tdump::bench
