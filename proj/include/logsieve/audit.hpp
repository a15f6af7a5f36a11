#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "logsieve/store.hpp"

namespace logsieve {

struct AuditReport {
  std::vector<std::string> problems;
  std::uint64_t pairs_checked = 0;
  std::uint64_t single_entries_checked = 0;
  std::uint64_t last_checked_entries = 0;
  std::uint64_t count_records = 0;

  bool ok() const { return problems.empty(); }
};

/// Full-scan consistency audit: every pair and single entry lies in its
/// segment's interval, every pair sits under its first type and appears once,
/// LastChecked holds the max second timestamp per (et-pair, trace), and each
/// CountRecord matches a recomputation from the inverted lists.
AuditReport audit_store(const Store& store);

struct PairRow {
  EtPair et;
  TraceId trace_id = 0;
  std::int64_t first = 0;   // ts or pos, per store mode
  std::int64_t second = 0;
  Interval interval;

  friend auto operator<=>(const PairRow&, const PairRow&) = default;
  friend bool operator==(const PairRow&, const PairRow&) = default;
};

/// Logical contents of a store, independent of file layout.
struct StoreSnapshot {
  std::vector<PairRow> pairs;  // sorted
  std::map<LastCheckedKey, Timestamp> last_checked;
  CountTable counts;
  std::map<TraceId, Trace> sequences;

  friend bool operator==(const StoreSnapshot&, const StoreSnapshot&) = default;
};

StoreSnapshot snapshot(const Store& store);

}  // namespace logsieve
