#include "logsieve/generator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "logsieve/errors.hpp"

namespace logsieve {

TypeDistribution parse_distribution(const std::string& s) {
  if (s == "uniform") return TypeDistribution::kUniform;
  if (s == "powerlaw" || s == "zipf") return TypeDistribution::kPowerLaw;
  throw InputError("unknown distribution '" + s + "' (expected uniform or powerlaw)");
}

std::string type_name(std::uint64_t k, std::uint64_t alphabet) {
  if (alphabet <= 26) return std::string(1, static_cast<char>('A' + k));
  return "E" + std::to_string(k);
}

std::vector<Event> generate_log(const GenParams& p) {
  if (p.alphabet == 0 || p.mean_length == 0 || p.days < 1 || p.carry_over < 0.0 || p.carry_over > 1.0)
    throw InputError("generator: alphabet, mean length and days must be positive, carry-over in [0,1]");
  std::mt19937_64 rng(p.seed);
  std::vector<double> weights(p.alphabet, 1.0);
  if (p.distribution == TypeDistribution::kPowerLaw) {
    for (std::size_t k = 0; k < weights.size(); ++k) weights[k] = 1.0 / std::pow(static_cast<double>(k + 1), 1.5);
  }
  std::discrete_distribution<std::uint64_t> pick_type(weights.begin(), weights.end());
  std::uniform_int_distribution<std::uint64_t> pick_len(std::max<std::uint64_t>(1, p.mean_length / 2),
                                                        std::max<std::uint64_t>(1, 3 * p.mean_length / 2));
  std::uniform_int_distribution<std::int64_t> pick_day(0, p.days - 1);
  std::bernoulli_distribution carries(p.carry_over);
  constexpr std::int64_t kQuarter = kMsPerDay / 4;

  std::vector<Event> events;
  for (std::uint64_t id = 1; id <= p.traces; ++id) {
    const auto len = static_cast<std::int64_t>(pick_len(rng));
    const std::int64_t day = pick_day(rng);
    const Timestamp midnight = p.base_ts + day * kMsPerDay;
    Timestamp start = 0;
    std::int64_t span = 0;
    if (carries(rng) && day + 1 < p.days) {
      // Starts in the last quarter of its day and ends in the next one.
      start = midnight + 3 * kQuarter + std::uniform_int_distribution<std::int64_t>(0, kQuarter - 1)(rng);
      const std::int64_t to_midnight = midnight + kMsPerDay - start;
      span = std::uniform_int_distribution<std::int64_t>(to_midnight + 1, to_midnight + kQuarter)(rng);
      span = std::max(span, len);
    } else {
      start = midnight + std::uniform_int_distribution<std::int64_t>(0, 2 * kQuarter)(rng);
      span = std::max(std::uniform_int_distribution<std::int64_t>(len, kQuarter)(rng), len);
    }
    // The last event lands exactly at start + span; the others at distinct offsets before it.
    std::set<std::int64_t> offsets{span};
    std::uniform_int_distribution<std::int64_t> pick_offset(0, span - 1);
    while (static_cast<std::int64_t>(offsets.size()) < len) offsets.insert(pick_offset(rng));
    Position pos = 0;
    for (auto off : offsets) {
      events.push_back({id, type_name(pick_type(rng), p.alphabet), start + off, ++pos});
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.ts != b.ts ? a.ts < b.ts : a.trace_id < b.trace_id;
  });
  return events;
}

std::vector<std::vector<Event>> split_by_day(const std::vector<Event>& events, Timestamp base_ts) {
  std::map<std::int64_t, std::vector<Event>> days;
  for (const auto& ev : events) {
    const auto rel = ev.ts - base_ts;
    const auto d = rel >= 0 ? rel / kMsPerDay : -((-rel + kMsPerDay - 1) / kMsPerDay);
    days[d].push_back(ev);
  }
  std::vector<std::vector<Event>> out;
  for (auto& [_, evs] : days) out.push_back(std::move(evs));
  return out;
}

std::vector<Trace> to_traces(const std::vector<Event>& events) {
  std::map<TraceId, Trace> by_id;
  for (const auto& ev : events) {
    auto& t = by_id[ev.trace_id];
    t.trace_id = ev.trace_id;
    t.events.push_back(ev);
  }
  std::vector<Trace> out;
  for (auto& [_, t] : by_id) {
    std::sort(t.events.begin(), t.events.end(), [](const Event& a, const Event& b) { return a.ts < b.ts; });
    Position pos = 0;
    for (auto& ev : t.events) ev.pos = ++pos;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace logsieve
