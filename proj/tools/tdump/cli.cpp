#include "cli.hpp"

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "bench.hpp"
#include "tdump/dump_engine.hpp"
#include "tdump/dump_format.hpp"
#include "tdump/error.hpp"
#include "tdump/load_engine.hpp"
#include "tdump/reference_backend.hpp"

namespace tdump::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kLoadUsage =
    "Usage: tdump load [--dsn <path_to_database>] [--user U] [--password P] <dump_file>+\n"
    "       tdump load <path_to_database> <dump_file>+\n"
    "       tdump load --compat <path_to_database> <database_user> <database_password> <dump_file>+\n";

struct Connection {
  ConnectionConfig config;
};

struct Settings {
  Connection conn;
  std::string plan_path;
  std::string out_dir = ".";
  std::size_t chunk_size = ChunkPolicy::kDefaultRecordsPerFile;
  std::size_t jobs = 1;
  std::string commit = "record";
  std::string mode = "strict";
  bool overwrite = false;
  bool keep_going = false;
  bool compat = false;
  std::size_t failure_cap = 1000;
  std::vector<std::string> positional;

  // corrupt
  std::vector<std::uint64_t> offsets;
  std::vector<std::string> values;
  std::size_t random_count = 0;
  std::uint64_t seed = 0;
  bool acknowledged = false;

  // salvage
  std::string table_override;
  std::string insert_override;

  // bench
  std::uint64_t rows = 1000000;
  bool compare = true;
};

/// The reference backend is the only built-in adapter: the DSN names a
/// database script file (optionally prefixed with `ref:`).
fs::path database_path(const ConnectionConfig& config) {
  std::string_view dsn = config.dsn;
  if (dsn.starts_with("ref:")) dsn.remove_prefix(4);
  return fs::path(std::string(dsn));
}

void add_connection_options(CLI::App& cmd, Connection& conn) {
  cmd.add_option("--dsn", conn.config.dsn, "Database locator (reference database file)")->envname("TD_DSN");
  cmd.add_option("--user,-u", conn.config.user, "Database user")->envname("TD_USER");
  cmd.add_option("--password,-p", conn.config.password, "Database password")->envname("TD_PASSWORD");
}

// ---------------------------------------------------------------------------

int cmd_dump(const Settings& s, std::ostream& out, std::ostream& err) {
  if (s.conn.config.dsn.empty()) {
    err << "error: --dsn (or TD_DSN) is required\n";
    return kExitUsage;
  }
  DumpPlan plan;
  try {
    std::ifstream in(s.plan_path, std::ios::binary);
    if (!in) {
      err << "error: MalformedPlan: cannot read plan file '" << s.plan_path << "'\n";
      return kExitUsage;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    plan = parse_plan(buf.str());
  } catch (const PlanError& e) {
    err << "error: " << s.plan_path << ": " << e.what() << '\n';
    return kExitUsage;
  }

  std::shared_ptr<ReferenceDatabase> db;
  try {
    db = ReferenceDatabase::open(database_path(s.conn.config));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  if (!fs::is_directory(s.out_dir)) {
    err << "error: output directory '" << s.out_dir << "' does not exist\n";
    return kExitFailure;
  }

  auto conn = db->connect();
  DumpOptions options;
  options.chunk.records_per_file = s.chunk_size;
  options.overwrite = s.overwrite;
  options.progress = &out;
  const auto run = dump_all(*conn, plan, s.out_dir, options, s.keep_going);

  for (const auto& report : run.reports) {
    if (report.files.empty()) out << "EMPTY " << report.table_name << " (0 rows, no dump file written)\n";
    for (const auto& f : report.files) out << "FILE " << f.path.string() << ' ' << f.record_count << '\n';
  }
  for (const auto& f : run.failures) err << "error: table " << f.table_name << ": " << f.error << '\n';
  return run.ok() ? kExitOk : kExitFailure;
}

int cmd_load(Settings s, std::ostream& out, std::ostream& err) {
  auto args = s.positional;
  if (s.compat) {
    if (args.size() < 4) {
      err << kLoadUsage;
      return kExitUsage;
    }
    s.conn.config = {args[0], args[1], args[2]};
    args.erase(args.begin(), args.begin() + 3);
  } else if (s.conn.config.dsn.empty() && !args.empty()) {
    s.conn.config.dsn = args.front();
    args.erase(args.begin());
  }
  if (s.conn.config.dsn.empty() || args.empty()) {
    err << kLoadUsage;
    return kExitUsage;
  }

  LoadOptions options;
  try {
    options.commit = parse_commit_policy(s.commit);
    options.mode = parse_read_mode(s.mode);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  options.failure_cap = s.failure_cap;
  options.progress = &out;

  std::shared_ptr<ReferenceDatabase> db;
  try {
    db = ReferenceDatabase::open(database_path(s.conn.config));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }

  std::vector<fs::path> files(args.begin(), args.end());
  const auto reports = load_many(db->factory(), files, options, s.jobs);

  bool ok = true;
  for (const auto& r : reports) {
    out << "REPORT " << r.file.string() << " attempted=" << r.attempted << " inserted=" << r.inserted
        << " failed=" << r.failed << (r.complete ? "" : " incomplete") << '\n';
    if (r.error) err << "error: " << r.file.string() << ": " << *r.error << '\n';
    ok = ok && r.ok();
  }
  try {
    db->save(database_path(s.conn.config));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return ok ? kExitOk : kExitFailure;
}

int cmd_inspect(const Settings& s, std::ostream& out, std::ostream& err) {
  const auto& file = s.positional.front();
  try {
    const auto contents = read_strict(std::span<const std::uint8_t>(read_file_bytes(file)));
    const auto& h = contents.header;
    out << "table=" << h.table_name << " chunk=" << h.chunk_index << " columns=" << h.column_count
        << " records=" << contents.rows.size() << '\n';
    out << "insert_sql=" << h.insert_sql << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << file << ": " << e.what() << '\n';
    return kExitFailure;
  }
}

int cmd_verify(const Settings& s, std::ostream& out, std::ostream&) {
  bool ok = true;
  for (const auto& file : s.positional) {
    try {
      const auto contents = read_strict(std::span<const std::uint8_t>(read_file_bytes(file)));
      out << "OK " << file << " records=" << contents.rows.size() << '\n';
    } catch (const std::exception& e) {
      out << "FAIL " << file << ": " << e.what() << '\n';
      ok = false;
    }
  }
  return ok ? kExitOk : kExitFailure;
}

/// Guesses (table, chunk) from a `<table>.<chunk>.dump` file name.
std::pair<std::string, std::uint32_t> name_parts(const fs::path& file) {
  auto stem = file.filename().string();
  if (stem.ends_with(".dump")) stem.resize(stem.size() - 5);
  std::uint32_t chunk = 1;
  if (auto dot = stem.rfind('.'); dot != std::string::npos) {
    std::uint32_t n = 0;
    auto [p, ec] = std::from_chars(stem.data() + dot + 1, stem.data() + stem.size(), n);
    if (ec == std::errc() && p == stem.data() + stem.size() && n > 0) {
      chunk = n;
      stem.resize(dot);
    }
  }
  return {stem, chunk};
}

int cmd_salvage(const Settings& s, std::ostream& out, std::ostream& err) {
  const fs::path in_path = s.positional.at(0);
  const fs::path out_path = s.positional.at(1);
  if (fs::exists(out_path) && fs::equivalent(in_path, out_path)) {
    err << "error: output must differ from input\n";
    return kExitUsage;
  }
  if (fs::exists(out_path) && !s.overwrite) {
    err << "error: FileExists: '" << out_path.string() << "' already exists (use --overwrite)\n";
    return kExitFailure;
  }

  SalvageResult result;
  try {
    result = read_salvage(std::span<const std::uint8_t>(read_file_bytes(in_path.string())));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  const auto& rep = result.report;
  out << "records_recovered=" << rep.records_recovered << '\n';
  out << "expected_records="
      << (rep.expected_records ? std::to_string(*rep.expected_records) : std::string("unknown")) << '\n';
  out << "bytes_skipped=" << rep.bytes_skipped << '\n';
  out << "crc_rejections=" << rep.crc_rejections << '\n';
  out << "magic_found=" << (rep.magic_found ? "true" : "false") << '\n';
  out << "header_found=" << (rep.header_found ? "true" : "false") << '\n';
  out << "end_frame_found=" << (rep.end_frame_found ? "true" : "false") << '\n';

  std::optional<DumpFileHeader> header = result.header;
  if (!header && !result.rows.empty()) {
    auto [table, chunk] = name_parts(in_path);
    header = DumpFileHeader{};
    header->table_name = s.table_override.empty() ? table : s.table_override;
    header->insert_sql = s.insert_override;
    header->chunk_index = chunk;
    header->column_count = static_cast<std::uint16_t>(result.rows.front().size());
    err << "warning: header frame lost; using table=" << header->table_name << " chunk=" << chunk
        << (s.insert_override.empty() ? " and an empty insert SQL (pass --insert-sql)" : "") << '\n';
  } else if (header) {
    if (!s.table_override.empty()) header->table_name = s.table_override;
    if (!s.insert_override.empty()) header->insert_sql = s.insert_override;
  }
  if (result.rows.empty()) err << "warning: no records recovered\n";
  if (!header) {
    err << "warning: nothing recoverable; " << out_path.string() << " not written\n";
    return kExitOk;
  }

  std::size_t dropped = 0;
  try {
    std::ofstream sink(out_path, std::ios::binary | std::ios::trunc);
    if (!sink) throw Error(ErrorCode::kIo, "cannot create '" + out_path.string() + "'");
    DumpWriter writer(sink, *header);
    for (const auto& row : result.rows) {
      if (row.size() != header->column_count) {
        ++dropped;
        continue;
      }
      writer.append(row);
    }
    out << "wrote " << out_path.string() << " (" << writer.finish() << " records)\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  if (dropped)
    err << "warning: dropped " << dropped << " records whose field count disagrees with the header\n";
  return kExitOk;
}

bool parse_byte(const std::string& text, std::uint8_t& out) {
  unsigned v = 0;
  std::string_view sv = text;
  int base = 10;
  if (sv.starts_with("0x") || sv.starts_with("0X")) {
    sv.remove_prefix(2);
    base = 16;
  }
  auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v, base);
  if (ec != std::errc() || p != sv.data() + sv.size() || v > 0xFF || sv.empty()) return false;
  out = static_cast<std::uint8_t>(v);
  return true;
}

int cmd_corrupt(const Settings& s, std::ostream& out, std::ostream& err) {
  if (!s.acknowledged) {
    err << "error: corrupt writes damaged data; pass --i-know-this-destroys-data to proceed\n";
    return kExitUsage;
  }
  const fs::path in_path = s.positional.at(0);
  const fs::path out_path = s.positional.at(1);
  if (s.offsets.empty() && s.random_count == 0) {
    err << "error: give --offset and/or --random\n";
    return kExitUsage;
  }
  if (!s.values.empty() && s.values.size() != 1 && s.values.size() != s.offsets.size()) {
    err << "error: give one --value, or one per --offset\n";
    return kExitUsage;
  }
  std::error_code ec;
  if (fs::exists(out_path) && fs::equivalent(in_path, out_path, ec)) {
    err << "error: corrupt never modifies its input; choose a different output file\n";
    return kExitUsage;
  }
  if (fs::exists(out_path) && !s.overwrite) {
    err << "error: FileExists: '" << out_path.string() << "' already exists (use --overwrite)\n";
    return kExitFailure;
  }

  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(in_path.string());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }

  struct Change {
    std::uint64_t offset;
    std::uint8_t value;
  };
  std::vector<Change> changes;
  for (std::size_t i = 0; i < s.offsets.size(); ++i) {
    const auto off = s.offsets[i];
    if (off >= bytes.size()) {
      err << "error: offset " << off << " is beyond the end of the file (" << bytes.size() << " bytes)\n";
      return kExitUsage;
    }
    std::uint8_t v = bytes[off] ^ 0xFF;
    if (!s.values.empty()) {
      const auto& text = s.values.size() == 1 ? s.values.front() : s.values[i];
      if (!parse_byte(text, v)) {
        err << "error: --value '" << text << "' is not a byte (0-255 or 0x00-0xff)\n";
        return kExitUsage;
      }
    }
    changes.push_back({off, v});
  }
  if (s.random_count > 0) {
    if (s.random_count > bytes.size()) {
      err << "error: cannot pick " << s.random_count << " offsets in a " << bytes.size() << "-byte file\n";
      return kExitUsage;
    }
    // Raw engine output keeps the choice identical across standard libraries.
    std::mt19937_64 rng(s.seed);
    std::vector<bool> used(bytes.size(), false);
    for (std::size_t k = 0; k < s.random_count;) {
      const auto off = rng() % bytes.size();
      const auto flip = static_cast<std::uint8_t>(1 + rng() % 255);
      if (used[off]) continue;
      used[off] = true;
      changes.push_back({off, static_cast<std::uint8_t>(bytes[off] ^ flip)});
      ++k;
    }
  }

  for (const auto& c : changes) {
    char line[96];
    std::snprintf(line, sizeof line, "offset %llu: 0x%02x -> 0x%02x\n",
                  static_cast<unsigned long long>(c.offset), bytes[c.offset], c.value);
    out << line;
    bytes[c.offset] = c.value;
  }
  std::ofstream sink(out_path, std::ios::binary | std::ios::trunc);
  sink.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  sink.flush();
  if (!sink) {
    err << "error: cannot write '" << out_path.string() << "'\n";
    return kExitFailure;
  }
  out << "wrote " << out_path.string() << " (" << changes.size() << " bytes changed)\n";
  return kExitOk;
}

int cmd_bench(const Settings& s, std::ostream& out, std::ostream& err) {
  bench::BenchOptions options;
  options.rows = s.rows;
  options.chunk_size = s.chunk_size;
  try {
    const auto commit = parse_commit_policy(s.commit);
    options.loads = {{s.jobs, commit}};
    if (s.compare) {
      // Side-by-side levers: worker count and commit granularity.
      const std::size_t other_jobs = s.jobs == 1 ? 4 : 1;
      const CommitPolicy other_commit = std::holds_alternative<PerRecord>(commit)
                                            ? CommitPolicy(PerBatch{1000})
                                            : CommitPolicy(PerRecord{});
      options.loads.push_back({other_jobs, commit});
      options.loads.push_back({s.jobs, other_commit});
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  out << "bench: " << s.rows << " synthetic cross_rate rows, chunk size " << s.chunk_size << '\n';
  try {
    const auto result = bench::run(options);
    bench::print(result, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"tdump - table-level logical backup and restore"};
  app.name("tdump");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Settings s;
  bool verbose = false;
  app.add_flag("--verbose,-v", verbose, "Debug logging (includes rejected record contents)");

  auto chunk_check = CLI::Range(std::size_t{1}, std::numeric_limits<std::size_t>::max());

  auto* dump = app.add_subcommand("dump", "Dump the tables of a plan into <table>.<chunk>.dump files");
  add_connection_options(*dump, s.conn);
  dump->add_option("--plan", s.plan_path, "Plan file")->required();
  dump->add_option("--out", s.out_dir, "Output directory")->capture_default_str();
  dump->add_option("--chunk-size", s.chunk_size, "Records per dump file")
      ->check(chunk_check)
      ->capture_default_str();
  dump->add_flag("--overwrite", s.overwrite, "Replace existing dump files");
  dump->add_flag("--keep-going", s.keep_going, "Continue with the next table after a failure");

  auto* load = app.add_subcommand("load", "Restore dump files into a database");
  add_connection_options(*load, s.conn);
  load->add_option("args", s.positional, "[database] dump files");
  load->add_option("--jobs,-j", s.jobs, "Parallel workers")->check(chunk_check)->capture_default_str();
  load->add_option("--commit", s.commit, "record | batch:N | file")->capture_default_str();
  load->add_option("--mode", s.mode, "strict | salvage")->capture_default_str();
  load->add_option("--failure-cap", s.failure_cap, "Detailed failures kept per file")->capture_default_str();
  load->add_flag("--compat", s.compat, "Positional <database> <user> <password> <dump_file>+");

  auto* inspect = app.add_subcommand("inspect", "Print the header and record count of a dump file");
  inspect->add_option("file", s.positional, "Dump file")->required()->expected(1);

  auto* verify = app.add_subcommand("verify", "Strict-read dump files and report OK/FAIL");
  verify->add_option("files", s.positional, "Dump files")->required();

  auto* salvage = app.add_subcommand("salvage", "Recover readable records into a fresh dump file");
  salvage->add_option("files", s.positional, "<input> <output>")->required()->expected(2);
  salvage->add_flag("--overwrite", s.overwrite, "Replace an existing output file");
  salvage->add_option("--table", s.table_override, "Table name for the rewritten header");
  salvage->add_option("--insert-sql", s.insert_override, "Insert SQL for the rewritten header");

  auto* corrupt = app.add_subcommand("corrupt", "Write a damaged copy of a file (testing only)");
  corrupt->add_option("files", s.positional, "<input> <output>")->required()->expected(2);
  corrupt->add_option("--offset", s.offsets, "Byte offset to overwrite (repeatable)");
  corrupt->add_option("--value", s.values,
                      "Replacement byte (one, or one per offset); default flips all bits");
  corrupt->add_option("--random", s.random_count, "Number of random byte corruptions");
  corrupt->add_option("--seed", s.seed, "Seed for --random")->capture_default_str();
  corrupt->add_flag("--i-know-this-destroys-data", s.acknowledged, "Acknowledge the output is damaged");
  corrupt->add_flag("--overwrite", s.overwrite, "Replace an existing output file");

  auto* bench = app.add_subcommand("bench", "Time dump and load of synthetic rows in the reference backend");
  bench->add_option("--rows", s.rows, "Synthetic row count")->capture_default_str();
  bench->add_option("--chunk-size", s.chunk_size, "Records per dump file")
      ->check(chunk_check)
      ->capture_default_str();
  bench->add_option("--jobs,-j", s.jobs, "Parallel load workers")->check(chunk_check)->capture_default_str();
  bench->add_option("--commit", s.commit, "record | batch:N | file")->capture_default_str();
  bench->add_flag("--compare,!--no-compare", s.compare, "Also time other worker counts and commit policies");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (*load) {
      err << kLoadUsage;
    }
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  if (*dump) return cmd_dump(s, out, err);
  if (*load) return cmd_load(s, out, err);
  if (*inspect) return cmd_inspect(s, out, err);
  if (*verify) return cmd_verify(s, out, err);
  if (*salvage) return cmd_salvage(s, out, err);
  if (*corrupt) return cmd_corrupt(s, out, err);
  if (*bench) return cmd_bench(s, out, err);
  return kExitUsage;
}

}  // namespace tdump::cli
