#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "logsieve/model.hpp"
#include "logsieve/store.hpp"

namespace logsieve {

/// EXPLAIN-NON-ANSWERS parameters, all in milliseconds.
struct ExplainParams {
  std::int64_t k = 0;
  std::int64_t uncertainty = 0;
  std::int64_t step = 1;

  friend bool operator==(const ExplainParams&, const ExplainParams&) = default;
};

/// A pattern-detection query:
///   FROM <log> PATTERN <pattern> [WHERE ...] [BETWEEN a AND b] [GROUPS ...]
///   [EXPLAIN-NON-ANSWERS k uncertainty step] [RETURN-ALL true|false]
struct Query {
  std::string log_name = "main";
  std::vector<QueryEvent> pattern;
  std::vector<Constraint> constraints;
  std::optional<TimeWindow> window;
  /// Each group is evaluated as one pseudo-trace; empty means no grouping.
  std::vector<std::vector<TraceId>> groups;
  std::optional<ExplainParams> explain;
  bool return_all = false;

  /// Throws QueryError when an invariant is violated.
  void validate() const;

  bool has_time_constraints() const;
  bool has_gap_constraints() const;
  /// Every event type mentioned anywhere in the pattern, sorted and unique.
  std::vector<std::string> pattern_types() const;
  int mandatory_positions() const;

  friend bool operator==(const Query&, const Query&) = default;
};

inline constexpr std::size_t kMaxOrAlternatives = 4096;

/// "A;!B;C+;D*;E|F" -> pattern events.
std::vector<QueryEvent> parse_pattern(std::string_view text);
/// "(1-3,8),(5-7)" -> {{1,2,3,8},{5,6,7}}.
std::vector<std::vector<TraceId>> parse_groups(std::string_view text);

/// Compact text form; keywords are case-insensitive.
Query parse_query_text(std::string_view text);
Query parse_query_json(const nlohmann::json& j);
/// Dispatches on the first non-space character: '{' means JSON.
Query parse_query(std::string_view text);

nlohmann::json to_json(const Query& q);
std::string pattern_to_string(const std::vector<QueryEvent>& pattern);

}  // namespace logsieve
