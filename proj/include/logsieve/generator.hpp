#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "logsieve/model.hpp"

namespace logsieve {

enum class TypeDistribution { kUniform, kPowerLaw };

TypeDistribution parse_distribution(const std::string& s);

struct GenParams {
  std::uint64_t seed = 1;
  std::uint64_t traces = 100;
  std::uint64_t mean_length = 20;
  std::uint64_t alphabet = 10;
  TypeDistribution distribution = TypeDistribution::kUniform;
  /// Traces start on one of this many consecutive days.
  std::int64_t days = 1;
  /// Fraction of traces that run past midnight into the next day.
  double carry_over = 0.0;
  /// Midnight UTC of the first day.
  Timestamp base_ts = 1'700'006'400'000;
};

/// Name of the k-th type: "A".."Z" for small alphabets, else "E0".."En".
std::string type_name(std::uint64_t k, std::uint64_t alphabet);

/// Deterministic synthetic log: trace lengths uniform in [mean/2, 3*mean/2],
/// types uniform or Zipf(1.5), events ordered by (ts, trace_id).
std::vector<Event> generate_log(const GenParams& p);

/// Splits a log into daily batches counted from `base_ts`, dropping empty days.
std::vector<std::vector<Event>> split_by_day(const std::vector<Event>& events, Timestamp base_ts);

/// Groups events by trace, sorted and numbered.
std::vector<Trace> to_traces(const std::vector<Event>& events);

}  // namespace logsieve
