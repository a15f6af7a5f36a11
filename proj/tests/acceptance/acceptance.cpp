// One line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <unistd.h>

#include "logsieve/audit.hpp"
#include "logsieve/executor.hpp"
#include "logsieve/generator.hpp"
#include "logsieve/indexer.hpp"
#include "logsieve/planner.hpp"
#include "oracle.hpp"
#include "random_queries.hpp"

using namespace logsieve;
namespace fs = std::filesystem;

namespace {

constexpr Timestamp kMin = 60'000;
constexpr Timestamp kHour = 60 * kMin;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Scratch {
 public:
  Scratch() : root_(fs::temp_directory_path() / ("logsieve_acceptance_" + std::to_string(::getpid()))) {
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(root_, ec);
  }
  fs::path fresh(const std::string& name) {
    auto p = root_ / name;
    fs::remove_all(p);
    return p;
  }

 private:
  fs::path root_;
};

Scratch* scratch = nullptr;

// Audits gathered from every corpus; criterion 7 reports on them.
struct AuditTally {
  std::size_t stores = 0;
  std::vector<std::string> problems;
} audits;

void audit(const Store& store, const std::string& label) {
  ++audits.stores;
  for (const auto& p : audit_store(store).problems) audits.problems.push_back(label + ": " + p);
}

template <class T>
T uniform(std::mt19937_64& rng, T lo, T hi) {
  return std::uniform_int_distribution<T>(lo, hi)(rng);
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Criterion 1 and 2 share one corpus.
struct CorpusStats {
  std::size_t queries = 0;
  std::size_t matching_traces = 0;
  std::size_t mismatches = 0;
  std::size_t bad_occurrences = 0;
  std::size_t pruned_matches = 0;
  std::size_t gated_matches = 0;
  double seconds = 0;
  std::string first_failure;
};

CorpusStats run_corpus() {
  CorpusStats st;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  for (int log = 0; log < 200; ++log) {
    GenParams gp;
    gp.seed = rng();
    gp.traces = uniform<std::uint64_t>(rng, 1, 50);
    gp.mean_length = uniform<std::uint64_t>(rng, 2, 13);
    gp.alphabet = uniform<std::uint64_t>(rng, 2, 6);
    gp.days = uniform<std::int64_t>(rng, 1, 3);
    gp.carry_over = 0.1;
    const auto events = generate_log(gp);
    const auto traces = to_traces(events);

    StoreConfig cfg;
    cfg.mode = log % 2 ? StoreMode::kPos : StoreMode::kTs;
    cfg.split_every_days = uniform<std::int64_t>(rng, 1, 3);
    cfg.trace_split = uniform<std::uint64_t>(rng, 4, 64);
    auto store = Store::open_or_create(scratch->fresh("c1_" + std::to_string(log)), cfg);
    for (const auto& batch : split_by_day(events, gp.base_ts)) ingest(store, batch);
    audit(store, "criterion-1 log " + std::to_string(log));

    oracle::QueryShape shape;
    for (std::uint64_t k = 0; k <= gp.alphabet; ++k) shape.types.push_back(type_name(k, 26));
    shape.max_len = 5;
    shape.ts_lo = events.front().ts - kHour;
    shape.ts_hi = events.back().ts + kHour;
    for (const auto& t : traces) shape.trace_ids.push_back(t.trace_id);
    std::map<TraceId, const Trace*> by_id;
    for (const auto& t : traces) by_id[t.trace_id] = &t;

    for (int n = 0; n < 100; ++n) {
      shape.max_time = n % 2 ? kHour : 8 * kHour;
      const auto q = oracle::random_query(rng, shape);
      const auto ref = oracle::brute_force_detect(traces, q);
      const auto res = execute(store, q);
      const auto ids = res.matching_ids();
      ++st.queries;
      st.matching_traces += ref.matching_trace_ids.size();
      auto note = [&](const std::string& what) {
        if (st.first_failure.empty()) st.first_failure = what + " log " + std::to_string(log) + " " + to_json(q).dump();
      };
      if (std::set<TraceId>(ids.begin(), ids.end()) != ref.matching_trace_ids) {
        ++st.mismatches;
        note("matching set differs");
      }
      const auto merged = q.groups.empty() ? std::vector<std::vector<Event>>{} : oracle::group_streams(traces, q);
      for (const auto& tr : res.matches) {
        const auto& evs = q.groups.empty() ? by_id.at(tr.trace_id)->events : merged.at(tr.trace_id);
        const auto key = tr.has_timestamps ? oracle::KeyBy::kTs : oracle::KeyBy::kPos;
        for (const auto& occ : tr.occurrences) {
          if (auto why = oracle::verify_occurrence(evs, q, occ, key)) {
            ++st.bad_occurrences;
            note("occurrence invalid (" + *why + ")");
          }
        }
      }
      // No trace the oracle accepts may be lost by the gate or by pruning.
      if (res.rejected && !ref.matching_trace_ids.empty()) {
        st.gated_matches += ref.matching_trace_ids.size();
        note("gate rejected a matching query");
      }
      if (q.groups.empty() && !ref.matching_trace_ids.empty()) {
        const auto sets = compute_pair_sets(q.pattern, q.constraints);
        const auto cands = q.mandatory_positions() < 2 ? candidates_by_types(store, q.pattern, q.window)
                                                       : prune(store, sets, q.window);
        for (auto id : ref.matching_trace_ids) {
          if (!cands.count(id)) {
            ++st.pruned_matches;
            note("pruned a matching trace");
          }
        }
      }
    }
  }
  st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return st;
}

const CorpusStats& corpus() {
  static const CorpusStats st = run_corpus();
  return st;
}

Outcome criterion1() {
  const auto& st = corpus();
  Outcome o;
  o.pass = st.mismatches == 0 && st.bad_occurrences == 0;
  o.detail = fmt("%zu queries over 200 logs, %zu matching traces, %zu set mismatches, %zu invalid occurrences, %.1fs",
                 st.queries, st.matching_traces, st.mismatches, st.bad_occurrences, st.seconds);
  if (st.seconds > 120) o.detail += " (slower than the 2 min target)";
  if (!st.first_failure.empty()) o.detail += "; first: " + st.first_failure;
  return o;
}

Outcome criterion2() {
  const auto& st = corpus();
  Outcome o;
  o.pass = st.pruned_matches == 0 && st.gated_matches == 0;
  o.detail = fmt("%zu matching traces pruned, %zu lost to the gate", st.pruned_matches, st.gated_matches);

  auto store = Store::open_or_create(scratch->fresh("c2"), StoreConfig{});
  const Timestamp t0 = 1'700'006'400'000;
  ingest(store, {{1, "A", t0, 0}, {1, "A", t0 + 270 * kMin, 0}, {1, "B", t0 + 300 * kMin, 0}, {1, "C", t0 + 310 * kMin, 0}});
  audit(store, "criterion-2 scenario");
  const auto res = execute(store, parse_query("PATTERN A;B;C WHERE time within 3600000 1 2"));
  std::vector<Timestamp> got;
  if (res.matches.size() == 1 && res.matches[0].occurrences.size() == 1) {
    for (const auto& pm : res.matches[0].occurrences[0].matches)
      for (const auto& e : pm.events) got.push_back(e.ts - t0);
  }
  const bool scenario = got == std::vector<Timestamp>{270 * kMin, 300 * kMin, 310 * kMin};
  o.pass = o.pass && scenario;
  o.detail += scenario ? "; constraint scenario returns A@270 B@300 C@310 (minutes)" : "; constraint scenario FAILED";
  return o;
}

Outcome criterion3() {
  GenParams gp;
  gp.seed = 33;
  gp.traces = 1000;
  gp.mean_length = 20;
  gp.alphabet = 6;
  gp.days = 3;
  gp.carry_over = 0.1;
  const auto events = generate_log(gp);
  auto store = Store::open_or_create(scratch->fresh("c3"), StoreConfig{});
  ingest(store, events);
  audit(store, "criterion-3");
  const auto snap = snapshot(store);
  // trace -> type -> timestamps covered by that type's (a,a) pairs
  std::map<TraceId, std::map<std::string, std::set<Timestamp>>> covered;
  for (const auto& row : snap.pairs) {
    if (row.et.first != row.et.second) continue;
    auto& s = covered[row.trace_id][row.et.first];
    s.insert(row.first);
    s.insert(row.second);
  }
  std::size_t checked = 0;
  std::size_t misses = 0;
  for (const auto& t : to_traces(events)) {
    std::map<std::string, std::vector<Timestamp>> by_type;
    for (const auto& e : t.events) by_type[e.event_type].push_back(e.ts);
    for (const auto& [type, stamps] : by_type) {
      if (stamps.size() < 2) continue;
      const auto& cov = covered[t.trace_id][type];
      for (auto ts : stamps) {
        ++checked;
        if (!cov.count(ts)) ++misses;
      }
    }
  }
  return {misses == 0, fmt("%zu repeated-type events in 1000 traces, %zu not covered by (a,a) pairs", checked, misses)};
}

Outcome criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(44);
  std::size_t differing = 0;
  std::size_t duplicates = 0;
  std::size_t batches = 0;
  for (int log = 0; log < 50; ++log) {
    GenParams gp;
    gp.seed = rng();
    gp.traces = uniform<std::uint64_t>(rng, 20, 120);
    gp.mean_length = uniform<std::uint64_t>(rng, 3, 20);
    gp.alphabet = uniform<std::uint64_t>(rng, 2, 8);
    gp.days = uniform<std::int64_t>(rng, 1, 10);
    gp.carry_over = 0.1;
    const auto events = generate_log(gp);
    StoreConfig cfg;
    cfg.mode = log % 2 ? StoreMode::kPos : StoreMode::kTs;
    cfg.split_every_days = uniform<std::int64_t>(rng, 1, 4);
    cfg.trace_split = uniform<std::uint64_t>(rng, 8, 64);
    auto whole = Store::open_or_create(scratch->fresh("c4_whole_" + std::to_string(log)), cfg);
    auto daily = Store::open_or_create(scratch->fresh("c4_daily_" + std::to_string(log)), cfg);
    ingest(whole, events);
    for (const auto& batch : split_by_day(events, gp.base_ts)) {
      ingest(daily, batch);
      ++batches;
    }
    audit(whole, "criterion-4 batch " + std::to_string(log));
    audit(daily, "criterion-4 incremental " + std::to_string(log));
    const auto a = snapshot(whole);
    const auto b = snapshot(daily);
    if (a.pairs != b.pairs || a.last_checked != b.last_checked || a.counts != b.counts || a.sequences != b.sequences)
      ++differing;
    for (std::size_t k = 1; k < b.pairs.size(); ++k) {
      const auto& x = b.pairs[k - 1];
      const auto& y = b.pairs[k];
      if (x.et == y.et && x.trace_id == y.trace_id && x.first == y.first && x.second == y.second) ++duplicates;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Outcome o{differing == 0 && duplicates == 0,
            fmt("50 logs in %zu daily batches: %zu differ from single-batch ingest, %zu duplicate pairs, %.1fs", batches,
                differing, duplicates, secs)};
  if (secs > 60) o.detail += " (slower than the 1 min target)";
  return o;
}

Outcome criterion5() {
  // Seconds in the example become milliseconds here.
  const Trace worked{1, {{1, "A", 2000, 1}, {1, "B", 3000, 2}, {1, "C", 6000, 3}}};
  const auto wq = parse_query("PATTERN B;A;C WHERE time within 2000 2 3 EXPLAIN-NON-ANSWERS 4000 1000 1000");
  const auto wcp = compile(wq.pattern, wq.constraints);
  const auto we = explain({1, false, {}, worked.events, true, true}, wcp, 4000, 1000, 1000);
  const bool example = we && we->cost == 3000;

  std::mt19937_64 rng(55);
  static const char* kTypes[] = {"A", "B", "C"};
  std::size_t agree = 0;
  std::size_t found = 0;
  for (int round = 0; round < 100; ++round) {
    const int n = uniform(rng, 2, 4);
    std::string text = "PATTERN ";
    for (int k = 0; k < n; ++k) text += (k ? ";" : "") + std::string(kTypes[uniform(rng, 0, 2)]);
    if (uniform(rng, 0, 1)) {
      const int i = uniform(rng, 1, n - 1);
      text += fmt(" WHERE time %s %d %d %d", uniform(rng, 0, 1) ? "within" : "atleast", uniform(rng, 1, 4), i,
                  uniform(rng, i + 1, n));
    }
    const int step = uniform(rng, 1, 2);
    text += fmt(" EXPLAIN-NON-ANSWERS %d %d %d", uniform(rng, 0, 16), step * uniform(rng, 1, 3), step);
    const auto q = parse_query(text);
    Trace t{1, {}};
    Timestamp ts = 0;
    // Mostly the pattern's own types, shuffled, so that near misses are common.
    std::vector<std::string> types;
    for (const auto& qe : q.pattern) types.push_back(qe.event_type);
    if (uniform(rng, 0, 1)) types.push_back(kTypes[uniform(rng, 0, 2)]);
    std::shuffle(types.begin(), types.end(), rng);
    for (std::size_t k = 0; k < types.size(); ++k) {
      ts += uniform(rng, 1, 3);
      t.events.push_back({1, types[k], ts, static_cast<Position>(k + 1)});
    }
    const auto got = explain({1, false, {}, t.events, true, true}, compile(q.pattern, q.constraints), q.explain->k,
                             q.explain->uncertainty, q.explain->step);
    const auto ref = oracle::brute_force_explain(t, q);
    const bool same = got.has_value() == ref.has_value() && (!got || got->cost == *ref);
    agree += same;
    found += got.has_value();
  }
  return {example && agree == 100,
          fmt("worked example cost %lld (expected 3000); %zu/100 random instances agree with brute force, %zu explained",
              we ? static_cast<long long>(we->cost) : -1LL, agree, found)};
}

Outcome criterion6() {
  GenParams gp;
  gp.seed = 66;
  gp.traces = 1000;
  gp.mean_length = 100;
  gp.alphabet = 150;
  const auto events = generate_log(gp);
  const auto traces = to_traces(events);
  StoreConfig cfg;
  cfg.compression = Compression::kDeflate;
  auto store = Store::open_or_create(scratch->fresh("c6"), cfg);
  const auto t0 = std::chrono::steady_clock::now();
  ingest(store, events);
  const double ingest_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  audit(store, "criterion-6");

  std::mt19937_64 rng(67);
  std::vector<double> shares;
  std::vector<double> totals;
  std::size_t empty = 0;
  for (int n = 0; n < 50; ++n) {
    // Ten events of one trace, in order, so the query has at least one answer.
    const auto& t = traces[uniform<std::size_t>(rng, 0, traces.size() - 1)];
    std::vector<std::size_t> idx(t.events.size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(10, idx.size()));
    std::sort(idx.begin(), idx.end());
    Query q;
    for (auto k : idx) q.pattern.push_back({t.events[k].event_type, Operator::kSimple, {}});
    const auto res = execute(store, q);
    if (res.matches.empty()) ++empty;
    shares.push_back(res.timing.total_ms > 0 ? res.timing.validation_ms / res.timing.total_ms : 0.0);
    totals.push_back(res.timing.total_ms);
  }
  std::sort(shares.begin(), shares.end());
  std::sort(totals.begin(), totals.end());
  const double median = (shares[24] + shares[25]) / 2;
  Outcome o{median < 0.2 && empty == 0,
            fmt("%zu events, 150 types, ingest %.1fs; 50 length-10 queries: median validation share %.1f%%, "
                "median total %.1f ms, max %.1f ms, %zu without answer",
                events.size(), ingest_s, 100 * median, (totals[24] + totals[25]) / 2, totals.back(), empty)};
  if (totals.back() > 5000) o.detail += " (warning: a query exceeded 5 s)";
  return o;
}

Outcome criterion7() {
  Outcome o{audits.problems.empty(), fmt("%zu stores audited, %zu problems", audits.stores, audits.problems.size())};
  if (!audits.problems.empty()) o.detail += "; first: " + audits.problems.front();
  return o;
}

Outcome criterion8() {
  auto store = Store::open_or_create(scratch->fresh("c8"), StoreConfig{});
  const Timestamp t0 = 1'700'006'400'000;
  ingest(store, {{1, "A", t0, 0}, {1, "B", t0 + 10, 0}, {2, "A", t0 + 20, 0}, {2, "B", t0 + 50, 0}});
  audit(store, "criterion-8");
  struct Case {
    const char* name;
    const char* query;
    int category;  // 0 unknown type, 1 missing pair, 2 unsatisfiable constraint
  };
  const Case cases[] = {
      {"unknown type", "PATTERN A;Q", 0},
      {"unseen pair", "PATTERN B;A", 1},
      {"within below min", "PATTERN A;B WHERE time within 5 1 2", 2},
      {"atleast above max", "PATTERN A;B WHERE time atleast 31 1 2", 2},
  };
  std::string detail;
  bool pass = true;
  for (const auto& c : cases) {
    const auto r = check_consistency(store, parse_query(c.query));
    const std::size_t sizes[] = {r.unknown_types.size(), r.missing_pairs.size(), r.unsatisfiable_constraints.size()};
    bool ok = !r.consistent();
    for (int k = 0; k < 3; ++k) ok = ok && ((sizes[k] > 0) == (k == c.category));
    pass = pass && ok;
    detail += std::string(detail.empty() ? "" : ", ") + c.name + (ok ? " ok" : " WRONG");
  }
  const bool clean = check_consistency(store, parse_query("PATTERN A;B WHERE time within 30 1 2")).consistent();
  pass = pass && clean;
  detail += clean ? ", consistent query passes" : ", consistent query FLAGGED";
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int k = 1; k < argc; ++k) only.insert(std::atoi(argv[k]));
  Scratch dir;
  scratch = &dir;
  const std::function<Outcome()> criteria[] = {criterion1, criterion2, criterion3, criterion4,
                                               criterion5, criterion6, criterion7, criterion8};
  bool all = true;
  for (int n = 1; n <= 8; ++n) {
    if (!only.empty() && !only.count(n)) continue;
    Outcome o;
    try {
      o = criteria[n - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
