// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <omp.h>

#include "logsieve/engine.hpp"
#include "logsieve/generator.hpp"
#include "logsieve/indexer.hpp"
#include "logsieve/query.hpp"

using namespace logsieve;

namespace {

const std::vector<Trace>& corpus() {
  static const auto traces = [] {
    GenParams p;
    p.seed = 5;
    p.traces = 2000;
    p.mean_length = 60;
    p.alphabet = 20;
    return to_traces(generate_log(p));
  }();
  return traces;
}

std::vector<ExtractionJob> jobs() {
  static const LastCheckedMap empty;
  std::vector<ExtractionJob> out;
  for (const auto& t : corpus()) out.push_back({&t, &empty, nullptr});
  return out;
}

std::vector<CandidateStream> streams() {
  std::vector<CandidateStream> out;
  for (const auto& t : corpus()) out.push_back({t.trace_id, false, {}, t.events, true, true});
  return out;
}

constexpr Timestamp kLookback = 30 * kMsPerDay;

void BM_ExtractSerial(benchmark::State& state) {
  const auto js = jobs();
  for (auto _ : state) benchmark::DoNotOptimize(extract_jobs_serial(js, kLookback));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(js.size()));
}

void BM_ExtractParallel(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const auto js = jobs();
  for (auto _ : state) benchmark::DoNotOptimize(extract_jobs_parallel(js, kLookback));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(js.size()));
}

const CompiledPattern& pattern() {
  static const auto q = parse_query("PATTERN A;!B;C+;D*;E WHERE time within 20000000 1 5");
  static const auto cp = compile(q.pattern, q.constraints);
  return cp;
}

void BM_MatchSerial(benchmark::State& state) {
  const auto ss = streams();
  MatchPolicy p;
  p.return_all = true;
  for (auto _ : state) benchmark::DoNotOptimize(match_streams_serial(pattern(), ss, p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ss.size()));
}

void BM_MatchParallel(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const auto ss = streams();
  MatchPolicy p;
  p.return_all = true;
  for (auto _ : state) benchmark::DoNotOptimize(match_streams_parallel(pattern(), ss, p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ss.size()));
}

void thread_counts(benchmark::internal::Benchmark* b) {
  const int max = omp_get_num_procs();
  for (int t = 1; t < max; t *= 2) b->Arg(t);
  b->Arg(max);
}

}  // namespace

BENCHMARK(BM_ExtractSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExtractParallel)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MatchSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MatchParallel)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
