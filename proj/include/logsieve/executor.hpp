#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "logsieve/engine.hpp"
#include "logsieve/explainer.hpp"
#include "logsieve/query.hpp"
#include "logsieve/store.hpp"

namespace logsieve {

struct ExecuteOptions {
  bool parallel = true;
};

struct TraceResult {
  TraceId trace_id = 0;  // group index for groups
  bool is_group = false;
  std::vector<TraceId> members;
  std::vector<Occurrence> occurrences;
  bool has_timestamps = true;
  bool has_positions = true;
};

/// Wall-clock split between the index phase (consistency, prune, fetch) and
/// the validation phase (matching and explanation).
struct QueryTiming {
  double fetch_prune_ms = 0.0;
  double validation_ms = 0.0;
  double total_ms = 0.0;
};

struct QueryResult {
  ConsistencyReport consistency;
  /// The metadata proves the answer empty; nothing was fetched.
  bool rejected = false;
  std::vector<TraceResult> matches;  // ascending trace id (or group index)
  std::vector<Explanation> explanations;
  std::size_t candidates = 0;
  std::uint64_t pairs_read = 0;
  QueryTiming timing;

  std::vector<TraceId> matching_ids() const;
};

/// Runs a query end to end: consistency gate, candidate pruning, stream
/// assembly, validation and, when requested, explanation of non-matching
/// candidates.
QueryResult execute(const Store& store, const Query& q, const ExecuteOptions& options = {});

nlohmann::json to_json(const QueryResult& r);

}  // namespace logsieve
