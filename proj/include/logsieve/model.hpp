#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace logsieve {

using TraceId = std::uint64_t;
/// Milliseconds since the Unix epoch.
using Timestamp = std::int64_t;
/// 1-based position of an event within its trace.
using Position = std::int64_t;

inline constexpr Timestamp kMsPerDay = 86'400'000;

struct Event {
  TraceId trace_id = 0;
  std::string event_type;
  Timestamp ts = 0;
  Position pos = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

struct Trace {
  TraceId trace_id = 0;
  std::vector<Event> events;

  friend bool operator==(const Trace&, const Trace&) = default;
};

struct EtPair {
  std::string first;
  std::string second;

  friend auto operator<=>(const EtPair&, const EtPair&) = default;
  friend bool operator==(const EtPair&, const EtPair&) = default;
};

/// A concrete occurrence of an et-pair inside one trace. Both the timestamp and
/// the position of each side are carried in memory; on disk only one of the two
/// survives depending on the store mode (the other reads back as zero).
struct EventPair {
  TraceId trace_id = 0;
  Timestamp first_ts = 0;
  Timestamp second_ts = 0;
  Position first_pos = 0;
  Position second_pos = 0;

  friend bool operator==(const EventPair&, const EventPair&) = default;
};

enum class Operator { kSimple, kKleenePlus, kKleeneStar, kNegation, kOr };

struct QueryEvent {
  std::string event_type;
  Operator op = Operator::kSimple;
  /// Additional accepted types; nonempty only for Operator::kOr.
  std::vector<std::string> alternatives;

  /// Every type this position accepts (event_type first, then alternatives).
  std::vector<std::string> accepted_types() const;
  bool mandatory() const {
    return op == Operator::kSimple || op == Operator::kKleenePlus || op == Operator::kOr;
  }
  bool positive() const { return op != Operator::kNegation; }

  friend bool operator==(const QueryEvent&, const QueryEvent&) = default;
};

enum class ConstraintKind { kGap, kTime };
enum class ConstraintMode { kWithin, kAtLeast };

/// Time constraints are in milliseconds, gap constraints in positions.
/// `i` and `j` are 1-based positions in the query pattern.
struct Constraint {
  ConstraintKind kind = ConstraintKind::kTime;
  ConstraintMode mode = ConstraintMode::kWithin;
  std::int64_t value = 0;
  int i = 0;
  int j = 0;

  friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// Events matched by one positive pattern position. Simple and or positions
/// hold exactly one event, Kleene+ at least one, Kleene* possibly none.
struct PositionMatch {
  int pattern_pos = 0;  // 1-based
  std::vector<Event> events;

  friend bool operator==(const PositionMatch&, const PositionMatch&) = default;
};

struct Occurrence {
  TraceId trace_id = 0;
  std::vector<PositionMatch> matches;
  std::optional<std::int64_t> modification_cost;

  const Event* first_event() const;
  const Event* last_event() const;

  friend bool operator==(const Occurrence&, const Occurrence&) = default;
};

/// Result of trace validation: empty when the trace is well formed.
struct TraceViolation {
  Position pos = 0;
  std::string reason;
};

std::optional<TraceViolation> validate_trace(const Trace& trace);

/// True when the two pairs overlap by position. Both pairs must come from the same trace.
bool pairs_overlap(const EventPair& p1, const EventPair& p2);

std::string to_string(Operator op);
std::string to_string(ConstraintKind kind);
std::string to_string(ConstraintMode mode);

}  // namespace logsieve
