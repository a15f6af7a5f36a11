#include "logsieve/indexer.hpp"

#include <algorithm>
#include <chrono>
#include <unordered_map>

namespace logsieve {

namespace {

void require_increasing(std::span<const Timestamp> ts, const char* which) {
  for (std::size_t k = 1; k < ts.size(); ++k) {
    if (ts[k] <= ts[k - 1]) throw ContractError(std::string("extract_pairs: ") + which + " is not strictly increasing");
  }
}

}  // namespace

Timestamp day_floor(Timestamp ts) {
  Timestamp q = ts / kMsPerDay;
  if (ts % kMsPerDay != 0 && ts < 0) --q;
  return q * kMsPerDay;
}

std::vector<IndexPair> extract_pair_indices(std::span<const Timestamp> ts_i, std::span<const Timestamp> ts_j,
                                            std::optional<Timestamp> ts_last, Timestamp lookback_ms, bool same_type) {
  require_increasing(ts_i, "first list");
  require_increasing(ts_j, "second list");

  std::size_t i = 0;
  std::size_t j = 0;
  if (ts_last) {
    i = static_cast<std::size_t>(std::lower_bound(ts_i.begin(), ts_i.end(), *ts_last) - ts_i.begin());
    j = static_cast<std::size_t>(std::lower_bound(ts_j.begin(), ts_j.end(), *ts_last) - ts_j.begin());
  }

  std::vector<IndexPair> out;
  std::optional<Timestamp> prev_second;
  for (; i < ts_i.size(); ++i) {
    const Timestamp t = ts_i[i];
    if (prev_second && (same_type ? t < *prev_second : t <= *prev_second)) continue;
    while (j < ts_j.size() && ts_j[j] <= t) ++j;
    if (j == ts_j.size()) break;
    if (ts_j[j] - t > lookback_ms) continue;
    out.emplace_back(i, j);
    prev_second = ts_j[j];
    ++j;
  }
  return out;
}

std::vector<TsPair> extract_pairs(std::span<const Timestamp> ts_i, std::span<const Timestamp> ts_j,
                                  std::optional<Timestamp> ts_last, Timestamp lookback_ms, bool same_type) {
  std::vector<TsPair> out;
  for (auto [a, b] : extract_pair_indices(ts_i, ts_j, ts_last, lookback_ms, same_type)) out.emplace_back(ts_i[a], ts_j[b]);
  return out;
}

std::vector<TypedPair> extract_pairs_for_trace(const Trace& trace, const LastCheckedMap& last_checked,
                                               Timestamp lookback_ms, const std::set<std::string>* only_types) {
  struct Occurrences {
    std::vector<Timestamp> ts;
    std::vector<Position> pos;
  };
  std::map<std::string, Occurrences> by_type;
  for (const auto& ev : trace.events) {
    auto& occ = by_type[ev.event_type];
    occ.ts.push_back(ev.ts);
    occ.pos.push_back(ev.pos);
  }

  std::vector<TypedPair> out;
  for (const auto& [a, occ_a] : by_type) {
    const bool a_new = !only_types || only_types->contains(a);
    for (const auto& [b, occ_b] : by_type) {
      if (!a_new && !only_types->contains(b)) continue;
      EtPair et{a, b};
      std::optional<Timestamp> ts_last;
      if (auto it = last_checked.find(et); it != last_checked.end()) ts_last = it->second;
      const auto idx = extract_pair_indices(occ_a.ts, occ_b.ts, ts_last, lookback_ms, a == b);
      for (auto [x, y] : idx) {
        out.emplace_back(et, EventPair{trace.trace_id, occ_a.ts[x], occ_b.ts[y], occ_a.pos[x], occ_b.pos[y]});
      }
    }
  }
  return out;
}

std::vector<std::vector<TypedPair>> extract_jobs_serial(std::span<const ExtractionJob> jobs, Timestamp lookback_ms) {
  std::vector<std::vector<TypedPair>> out(jobs.size());
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    out[k] = extract_pairs_for_trace(*jobs[k].trace, *jobs[k].last_checked, lookback_ms, jobs[k].only_types);
  }
  return out;
}

std::vector<std::vector<TypedPair>> extract_jobs_parallel(std::span<const ExtractionJob> jobs, Timestamp lookback_ms) {
  std::vector<std::vector<TypedPair>> out(jobs.size());
  const auto n = static_cast<std::int64_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t k = 0; k < n; ++k) {
    const auto& job = jobs[static_cast<std::size_t>(k)];
    out[static_cast<std::size_t>(k)] = extract_pairs_for_trace(*job.trace, *job.last_checked, lookback_ms, job.only_types);
  }
  return out;
}

std::vector<Interval> assign_intervals(std::span<const EventPair> pairs, std::int64_t split_every_days,
                                       Timestamp origin_ts) {
  const Timestamp width = split_every_days * kMsPerDay;
  std::vector<Interval> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    const Timestamp off = p.second_ts - origin_ts;
    Timestamp k = off / width;
    if (off % width != 0 && off < 0) --k;
    const Timestamp start = origin_ts + k * width;
    out.push_back({start, start + width});
  }
  return out;
}

void update_counts(CountTable& counts, std::span<const TypedPair> new_pairs) {
  for (const auto& [et, p] : new_pairs) {
    const std::int64_t d = p.second_ts - p.first_ts;
    auto [it, inserted] = counts.try_emplace(et);
    auto& rec = it->second;
    if (inserted) {
      rec.pair = et;
      rec.min_duration = d;
      rec.max_duration = d;
    } else {
      rec.min_duration = std::min(rec.min_duration, d);
      rec.max_duration = std::max(rec.max_duration, d);
    }
    rec.total_completions += 1;
    rec.sum_durations += d;
  }
}

namespace {

struct PreparedTrace {
  Trace full;                 // stored events followed by the new ones
  std::size_t first_new = 0;  // index of the first new event in full.events
};

// Groups, sorts and validates a batch against the stored traces. Throws on rejection.
std::map<TraceId, PreparedTrace> prepare(const Store& store, const IngestBatch& batch) {
  std::map<TraceId, std::vector<Event>> grouped;
  for (const auto& ev : batch) {
    if (ev.event_type.empty()) throw InputError("event with empty type in trace " + std::to_string(ev.trace_id));
    grouped[ev.trace_id].push_back(ev);
  }
  std::vector<TraceId> ids;
  ids.reserve(grouped.size());
  for (const auto& [id, evs] : grouped) ids.push_back(id);
  auto stored = store.read_sequences(ids);

  std::map<TraceId, PreparedTrace> out;
  for (auto& [id, evs] : grouped) {
    std::stable_sort(evs.begin(), evs.end(), [](const Event& a, const Event& b) { return a.ts < b.ts; });
    for (std::size_t k = 1; k < evs.size(); ++k) {
      if (evs[k].ts == evs[k - 1].ts)
        throw InputError("trace " + std::to_string(id) + " has two events at timestamp " + std::to_string(evs[k].ts));
    }
    PreparedTrace prepared;
    prepared.full.trace_id = id;
    if (auto it = stored.find(id); it != stored.end()) {
      prepared.full = std::move(it->second);
      const auto& old = prepared.full.events;
      if (!old.empty() && evs.front().ts <= old.back().ts) {
        const auto& probe = evs.front();
        const bool seen = std::any_of(old.begin(), old.end(), [&](const Event& e) {
          return e.ts == probe.ts && e.event_type == probe.event_type;
        });
        if (seen) throw AlreadyIndexedError("batch already indexed (trace " + std::to_string(id) + ")");
        throw InputError("out-of-order event for trace " + std::to_string(id) + " at timestamp " +
                         std::to_string(probe.ts) + " (stored trace ends at " + std::to_string(old.back().ts) + ")");
      }
    }
    prepared.first_new = prepared.full.events.size();
    for (auto& ev : evs) {
      ev.pos = static_cast<Position>(prepared.full.events.size() + 1);
      prepared.full.events.push_back(std::move(ev));
    }
    out.emplace(id, std::move(prepared));
  }
  return out;
}

bool pair_less(const EventPair& a, const EventPair& b, StoreMode mode) {
  if (a.trace_id != b.trace_id) return a.trace_id < b.trace_id;
  if (mode == StoreMode::kTs) {
    if (a.second_ts != b.second_ts) return a.second_ts < b.second_ts;
    return a.first_ts < b.first_ts;
  }
  if (a.second_pos != b.second_pos) return a.second_pos < b.second_pos;
  return a.first_pos < b.first_pos;
}

bool pair_equal(const EventPair& a, const EventPair& b, StoreMode mode) {
  if (a.trace_id != b.trace_id) return false;
  if (mode == StoreMode::kTs) return a.first_ts == b.first_ts && a.second_ts == b.second_ts;
  return a.first_pos == b.first_pos && a.second_pos == b.second_pos;
}

}  // namespace

IngestReport ingest(Store& store, const IngestBatch& batch, const IngestOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  IngestReport report;
  if (batch.empty()) return report;

  WriterLock lock(store.dir());
  auto prepared = prepare(store, batch);
  const StoreMode mode = store.config().mode;

  if (!store.origin()) {
    Timestamp min_ts = batch.front().ts;
    for (const auto& ev : batch) min_ts = std::min(min_ts, ev.ts);
    store.set_origin(day_floor(min_ts));
  }

  report.traces_touched = prepared.size();
  report.events_ingested = batch.size();

  // SingleTable: each new event lands in the interval of its own timestamp.
  std::map<std::pair<Interval, std::string>, std::vector<SingleEntry>> single_updates;
  for (const auto& [id, p] : prepared) {
    for (std::size_t k = p.first_new; k < p.full.events.size(); ++k) {
      const auto& ev = p.full.events[k];
      single_updates[{store.interval_for(ev.ts), ev.event_type}].push_back({id, ev.ts, ev.pos});
    }
  }

  // LastChecked watermarks of the touched traces, grouped by trace range.
  std::map<TraceRange, LastCheckedSegment> last_segments;
  for (const auto& [id, p] : prepared) {
    const auto range = store.range_for(id);
    if (!last_segments.contains(range)) {
      auto seg = store.load_last_checked_segment(range);
      last_segments.emplace(range, seg ? std::move(*seg) : LastCheckedSegment{range, {}});
    }
  }

  std::vector<LastCheckedMap> per_trace_last(prepared.size());
  std::vector<std::set<std::string>> new_types(prepared.size());
  std::vector<ExtractionJob> jobs;
  jobs.reserve(prepared.size());
  {
    std::size_t k = 0;
    for (const auto& [id, p] : prepared) {
      const auto& seg = last_segments.at(store.range_for(id));
      for (const auto& [key, ts] : seg.entries) {
        if (key.trace_id == id) per_trace_last[k].emplace(key.pair, ts);
      }
      for (std::size_t e = p.first_new; e < p.full.events.size(); ++e) new_types[k].insert(p.full.events[e].event_type);
      jobs.push_back({&p.full, &per_trace_last[k], &new_types[k]});
      ++k;
    }
  }
  const Timestamp lookback = store.config().lookback_ms();
  auto extracted = options.parallel ? extract_jobs_parallel(jobs, lookback) : extract_jobs_serial(jobs, lookback);

  std::vector<TypedPair> all_pairs;
  for (auto& v : extracted) {
    all_pairs.insert(all_pairs.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  }
  report.pairs_created = all_pairs.size();

  // -- writes: single, index, last-checked, counts, then sequences ----------
  for (auto& [key, entries] : single_updates) {
    auto seg = store.load_single_segment(key.first, key.second);
    SingleSegment out = seg ? std::move(*seg) : SingleSegment{key.first, key.second, {}};
    out.entries.insert(out.entries.end(), entries.begin(), entries.end());
    std::sort(out.entries.begin(), out.entries.end());
    out.entries.erase(std::unique(out.entries.begin(), out.entries.end()), out.entries.end());
    store.rewrite_segment(out);
    ++report.segments_rewritten;
  }

  std::map<std::pair<Interval, std::string>, std::map<std::string, std::vector<EventPair>>> index_updates;
  for (const auto& [et, p] : all_pairs) {
    index_updates[{store.interval_for(p.second_ts), et.first}][et.second].push_back(p);
  }
  for (auto& [key, by_second] : index_updates) {
    auto seg = store.load_index_segment(key.first, key.second);
    IndexSegment out = seg ? std::move(*seg) : IndexSegment{key.first, key.second, {}};
    for (auto& [second, pairs] : by_second) {
      auto& list = out.entries[second];
      list.insert(list.end(), pairs.begin(), pairs.end());
      std::sort(list.begin(), list.end(), [mode](const EventPair& a, const EventPair& b) { return pair_less(a, b, mode); });
      list.erase(std::unique(list.begin(), list.end(),
                             [mode](const EventPair& a, const EventPair& b) { return pair_equal(a, b, mode); }),
                 list.end());
    }
    store.rewrite_segment(out);
    ++report.segments_rewritten;
  }

  std::set<TraceRange> dirty_last;
  for (const auto& [et, p] : all_pairs) {
    const auto range = store.range_for(p.trace_id);
    auto& entries = last_segments.at(range).entries;
    auto [it, inserted] = entries.try_emplace(LastCheckedKey{et, p.trace_id}, p.second_ts);
    if (!inserted) it->second = std::max(it->second, p.second_ts);
    dirty_last.insert(range);
  }
  for (const auto& range : dirty_last) {
    store.rewrite_segment(last_segments.at(range));
    ++report.segments_rewritten;
  }

  if (!all_pairs.empty()) {
    auto counts = store.read_counts();
    update_counts(counts, all_pairs);
    store.rewrite_counts(counts);
    ++report.segments_rewritten;
  }

  std::map<TraceRange, std::vector<const PreparedTrace*>> seq_updates;
  for (const auto& [id, p] : prepared) seq_updates[store.range_for(id)].push_back(&p);
  for (auto& [range, traces] : seq_updates) {
    auto seg = store.load_sequence_segment(range);
    SequenceSegment out = seg ? std::move(*seg) : SequenceSegment{range, {}};
    for (const auto* p : traces) out.traces[p->full.trace_id] = p->full;
    store.rewrite_segment(out);
    ++report.segments_rewritten;
  }

  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace logsieve
