#pragma once

#include <vector>

#include "logsieve/model.hpp"

namespace logsieve {

/// Events handed to validation for one trace, or for one group merged into a
/// pseudo-trace. Events built from index pairs carry only the coordinate the
/// store keeps: positions in pos mode, timestamps in ts mode. The missing one
/// reads as zero and the matching flag is cleared.
struct CandidateStream {
  TraceId trace_id = 0;  // group index when is_group
  bool is_group = false;
  std::vector<TraceId> members;
  std::vector<Event> events;  // strictly increasing in order_key()
  bool has_timestamps = true;
  bool has_positions = true;

  /// Ordering coordinate: ts when available, else pos.
  std::int64_t order_key(const Event& ev) const { return has_timestamps ? ev.ts : ev.pos; }

  friend bool operator==(const CandidateStream&, const CandidateStream&) = default;
};

}  // namespace logsieve
