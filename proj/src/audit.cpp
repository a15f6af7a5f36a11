#include "logsieve/audit.hpp"

#include <algorithm>
#include <set>

namespace logsieve {
namespace {

std::string et_name(const EtPair& et) { return "(" + et.first + "," + et.second + ")"; }

std::map<TraceId, Trace> all_sequences(const Store& store) {
  std::map<TraceId, Trace> out;
  for (const auto& r : store.sequence_ranges()) {
    if (auto seg = store.load_sequence_segment(r)) {
      for (auto& [id, t] : seg->traces) out.emplace(id, std::move(t));
    }
  }
  return out;
}

}  // namespace

StoreSnapshot snapshot(const Store& store) {
  StoreSnapshot s;
  const bool pos_mode = store.config().mode == StoreMode::kPos;
  for (const auto& iv : store.index_intervals()) {
    for (const auto& first : store.index_first_types(iv)) {
      auto seg = store.load_index_segment(iv, first);
      if (!seg) continue;
      for (const auto& [second, pairs] : seg->entries) {
        for (const auto& p : pairs) {
          s.pairs.push_back({{first, second},
                             p.trace_id,
                             pos_mode ? p.first_pos : p.first_ts,
                             pos_mode ? p.second_pos : p.second_ts,
                             iv});
        }
      }
    }
  }
  std::sort(s.pairs.begin(), s.pairs.end());
  for (const auto& r : store.last_checked_ranges()) {
    if (auto seg = store.load_last_checked_segment(r)) s.last_checked.insert(seg->entries.begin(), seg->entries.end());
  }
  s.counts = store.read_counts();
  s.sequences = all_sequences(store);
  return s;
}

AuditReport audit_store(const Store& store) {
  AuditReport rep;
  auto problem = [&rep](std::string msg) {
    if (rep.problems.size() < 100) rep.problems.push_back(std::move(msg));
  };
  const bool pos_mode = store.config().mode == StoreMode::kPos;
  const auto seqs = all_sequences(store);
  // Position -> timestamp lookup, needed when the index keeps positions only.
  auto ts_of = [&](TraceId id, std::int64_t coord) -> std::optional<Timestamp> {
    if (!pos_mode) return coord;
    auto it = seqs.find(id);
    if (it == seqs.end() || coord < 1 || coord > static_cast<std::int64_t>(it->second.events.size())) return std::nullopt;
    return it->second.events[static_cast<std::size_t>(coord - 1)].ts;
  };

  std::set<std::tuple<EtPair, TraceId, std::int64_t, std::int64_t>> seen;
  std::map<LastCheckedKey, Timestamp> max_second;
  std::map<EtPair, CountRecord> recount;
  const Timestamp lookback = store.config().lookback_ms();
  for (const auto& iv : store.index_intervals()) {
    for (const auto& first : store.index_first_types(iv)) {
      std::optional<IndexSegment> seg;
      try {
        seg = store.load_index_segment(iv, first);
      } catch (const std::exception& e) {
        problem("index segment " + first + " unreadable: " + e.what());
        continue;
      }
      if (!seg) continue;
      if (seg->first_type != first) problem("index segment keyed " + first + " holds first type " + seg->first_type);
      for (const auto& [second, pairs] : seg->entries) {
        const EtPair et{first, second};
        for (const auto& p : pairs) {
          ++rep.pairs_checked;
          const auto a = pos_mode ? p.first_pos : p.first_ts;
          const auto b = pos_mode ? p.second_pos : p.second_ts;
          if (!seen.insert({et, p.trace_id, a, b}).second)
            problem("duplicate pair " + et_name(et) + " in trace " + std::to_string(p.trace_id));
          if (a >= b) problem("pair " + et_name(et) + " in trace " + std::to_string(p.trace_id) + " is not ordered");
          const auto ta = ts_of(p.trace_id, a);
          const auto tb = ts_of(p.trace_id, b);
          if (!ta || !tb) {
            problem("pair " + et_name(et) + " references a position missing from trace " + std::to_string(p.trace_id));
            continue;
          }
          if (!iv.contains(*tb))
            problem("pair " + et_name(et) + " ending at " + std::to_string(*tb) + " stored outside its interval");
          if (*tb - *ta > lookback) problem("pair " + et_name(et) + " exceeds the lookback");
          auto& m = max_second[{et, p.trace_id}];
          m = std::max(m, *tb);
          auto& rc = recount[et];
          const auto d = *tb - *ta;
          if (rc.total_completions == 0) {
            rc.pair = et;
            rc.min_duration = rc.max_duration = d;
          }
          ++rc.total_completions;
          rc.sum_durations += d;
          rc.min_duration = std::min(rc.min_duration, d);
          rc.max_duration = std::max(rc.max_duration, d);
        }
      }
    }
  }

  for (const auto& iv : store.single_intervals()) {
    for (const auto& type : store.single_types(iv)) {
      auto seg = store.load_single_segment(iv, type);
      if (!seg) continue;
      for (const auto& e : seg->entries) {
        ++rep.single_entries_checked;
        if (!iv.contains(e.ts)) problem("single entry of " + type + " at " + std::to_string(e.ts) + " outside its interval");
      }
    }
  }

  std::map<LastCheckedKey, Timestamp> stored;
  for (const auto& r : store.last_checked_ranges()) {
    if (auto seg = store.load_last_checked_segment(r)) {
      for (const auto& [key, ts] : seg->entries) {
        if (!r.contains(key.trace_id)) problem("LastChecked entry for trace " + std::to_string(key.trace_id) + " in wrong range");
        stored[key] = ts;
      }
    }
  }
  rep.last_checked_entries = stored.size();
  for (const auto& [key, ts] : max_second) {
    auto it = stored.find(key);
    if (it == stored.end()) {
      problem("LastChecked lacks " + et_name(key.pair) + " for trace " + std::to_string(key.trace_id));
    } else if (it->second != ts) {
      problem("LastChecked " + et_name(key.pair) + " trace " + std::to_string(key.trace_id) + " holds " +
              std::to_string(it->second) + ", pairs end at " + std::to_string(ts));
    }
  }
  for (const auto& [key, _] : stored) {
    if (!max_second.count(key))
      problem("LastChecked " + et_name(key.pair) + " trace " + std::to_string(key.trace_id) + " has no pairs");
  }

  const auto counts = store.read_counts();
  rep.count_records = counts.size();
  if (counts != recount) {
    for (const auto& [et, rec] : recount) {
      auto it = counts.find(et);
      if (it == counts.end()) problem("CountTable lacks " + et_name(et));
      else if (!(it->second == rec)) problem("CountTable record " + et_name(et) + " disagrees with the index");
    }
    for (const auto& [et, _] : counts) {
      if (!recount.count(et)) problem("CountTable holds " + et_name(et) + " with no pairs");
    }
  }
  return rep;
}

}  // namespace logsieve
