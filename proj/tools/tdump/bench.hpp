#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tdump/plan.hpp"

namespace tdump::bench {

struct LoadConfig {
  std::size_t jobs = 1;
  CommitPolicy commit = PerRecord{};
};

struct BenchOptions {
  std::uint64_t rows = 1000000;
  std::size_t chunk_size = ChunkPolicy::kDefaultRecordsPerFile;
  std::vector<LoadConfig> loads{LoadConfig{}};
  /// Scratch directory for dump files; a fresh temp directory when empty.
  std::filesystem::path work_dir;
};

struct LoadTiming {
  LoadConfig config;
  double seconds = 0;
  std::uint64_t inserted = 0;
  std::uint64_t failed = 0;
};

struct BenchResult {
  std::uint64_t rows = 0;
  std::size_t files = 0;
  double dump_seconds = 0;
  std::vector<LoadTiming> loads;
};

/// Records per minute, or "n/a" for an empty or unmeasurably short run.
std::string throughput(std::uint64_t records, double seconds);

/// Generates `rows` cross_rate-shaped records in a reference database, dumps
/// them, then times each configured load into a fresh empty database.
BenchResult run(const BenchOptions& options, std::ostream* progress = nullptr);

void print(const BenchResult& result, std::ostream& out);

}  // namespace tdump::bench
