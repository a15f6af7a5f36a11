#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "logsieve/engine.hpp"
#include "logsieve/query.hpp"
#include "logsieve/store.hpp"
#include "logsieve/stream.hpp"

namespace logsieve {

struct UnsatisfiableConstraint {
  Constraint constraint;
  EtPair pair;
  std::int64_t min_duration = 0;
  std::int64_t max_duration = 0;
};

/// Findings of the three metadata checks; empty lists mean consistent.
struct ConsistencyReport {
  std::vector<std::string> unknown_types;
  std::vector<EtPair> missing_pairs;
  std::vector<UnsatisfiableConstraint> unsatisfiable_constraints;
  /// Set when no trace can match: every or-alternative has an unknown
  /// mandatory type or a consecutive pair the store never recorded.
  bool answer_empty = false;
  /// Narrower: every alternative has an unknown mandatory type. Still holds
  /// for merged group streams, whose pairs may cross trace boundaries.
  bool types_rule_out = false;

  bool consistent() const {
    return unknown_types.empty() && missing_pairs.empty() && unsatisfiable_constraints.empty();
  }
};

/// Type check against SingleTable, pair check of the prune set against
/// CountTable, and a duration check of time constraints against the recorded
/// min/max of their pair.
ConsistencyReport check_consistency(const Store& store, const Query& q);

struct ModifiedEvent {
  Event original;
  Timestamp modified_ts = 0;
  std::int64_t delta = 0;
  std::size_t origin = 0;  // index of `original` in the input stream

  friend bool operator==(const ModifiedEvent&, const ModifiedEvent&) = default;
};

/// Every event shifted by each multiple of `step` within +-`uncertainty`,
/// sorted by (modified_ts, origin, delta).
std::vector<ModifiedEvent> generate_modified_stream(const std::vector<Event>& stream, std::int64_t uncertainty,
                                                    std::int64_t step);

struct Explanation {
  TraceId trace_id = 0;
  std::vector<ModifiedEvent> events;  // one per pattern position
  std::int64_t cost = 0;

  friend bool operator==(const Explanation&, const Explanation&) = default;
};

/// Cheapest shift of the stream's timestamps (total cost <= k) under which the
/// pattern matches, ties going to the lexicographically smallest modified
/// timestamps. Skip-till-any-match over the modified stream; a match uses each
/// original event at most once and needs strictly increasing modified
/// timestamps; time constraints see modified timestamps.
std::optional<Explanation> explain(const CandidateStream& stream, const CompiledPattern& cp, std::int64_t k,
                                   std::int64_t uncertainty, std::int64_t step);

nlohmann::json to_json(const ConsistencyReport& r);
nlohmann::json to_json(const Explanation& e);

}  // namespace logsieve
