#include <benchmark/benchmark.h>

#include <random>
#include <sstream>
#include <vector>

#include "tdump/dump_format.hpp"

namespace {

tdump::Row cross_rate_row(std::size_t i) {
  return {tdump::Value::text("F" + std::to_string(i / 1000)),
          tdump::Value::text("T" + std::to_string(i % 1000)),
          tdump::Value::real(static_cast<double>(static_cast<float>(i) * 0.001f)),
          tdump::Value::text("1993-11-22 00:00:00.0000")};
}

std::vector<std::uint8_t> make_file(std::size_t rows) {
  std::vector<tdump::Row> data;
  for (std::size_t i = 0; i < rows; ++i) data.push_back(cross_rate_row(i));
  tdump::DumpFileHeader header{1, "cross_rate", "insert into cross_rate values (?, ?, ?, ?)", 1, 4};
  std::ostringstream sink;
  tdump::write_dump_file(sink, header, data);
  const auto s = sink.str();
  return {s.begin(), s.end()};
}

void BM_EncodeRecord(benchmark::State& state) {
  const auto row = cross_rate_row(12345);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tdump::encode_record(row));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EncodeRecord);

void BM_DecodeRecord(benchmark::State& state) {
  const auto payload = tdump::encode_record(cross_rate_row(12345));
  for (auto _ : state) {
    benchmark::DoNotOptimize(tdump::decode_record(payload));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DecodeRecord);

void BM_ReadStrict(benchmark::State& state) {
  const auto bytes = make_file(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(tdump::read_strict(std::span<const std::uint8_t>(bytes)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_ReadStrict)->Arg(1000)->Arg(100000);

// Salvage over a file with one corrupted byte per 100 records.
void BM_ReadSalvageDamaged(benchmark::State& state) {
  auto bytes = make_file(static_cast<std::size_t>(state.range(0)));
  std::mt19937_64 rng(7);
  for (std::int64_t k = 0; k < state.range(0) / 100; ++k) bytes[8 + rng() % (bytes.size() - 8)] ^= 0x5A;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tdump::read_salvage(std::span<const std::uint8_t>(bytes)));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_ReadSalvageDamaged)->Arg(1000)->Arg(100000);

void BM_WriteDumpFile(benchmark::State& state) {
  std::vector<tdump::Row> data;
  for (std::int64_t i = 0; i < state.range(0); ++i)
    data.push_back(cross_rate_row(static_cast<std::size_t>(i)));
  tdump::DumpFileHeader header{1, "cross_rate", "insert into cross_rate values (?, ?, ?, ?)", 1, 4};
  for (auto _ : state) {
    std::ostringstream sink;
    benchmark::DoNotOptimize(tdump::write_dump_file(sink, header, data));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WriteDumpFile)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
