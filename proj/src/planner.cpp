#include "logsieve/planner.hpp"

#include <algorithm>

#include "logsieve/errors.hpp"

namespace logsieve {

std::vector<std::vector<QueryEvent>> expand_or(const std::vector<QueryEvent>& pattern) {
  std::vector<std::vector<QueryEvent>> out{{}};
  for (const auto& e : pattern) {
    if (e.op != Operator::kOr) {
      for (auto& alt : out) alt.push_back(e);
      continue;
    }
    std::vector<std::vector<QueryEvent>> next;
    for (const auto& alt : out) {
      for (const auto& t : e.accepted_types()) {
        auto copy = alt;
        copy.push_back(QueryEvent{t, Operator::kSimple, {}});
        next.push_back(std::move(copy));
      }
    }
    out = std::move(next);
  }
  return out;
}

PairSets compute_pair_sets(const std::vector<QueryEvent>& pattern, const std::vector<Constraint>& constraints) {
  PairSets sets;
  const auto alternatives = expand_or(pattern);
  for (const auto& alt : alternatives) {
    std::set<EtPair> ex;
    std::vector<const QueryEvent*> kept;
    for (const auto& e : alt) {
      if (e.op == Operator::kNegation || e.op == Operator::kKleeneStar) {
        sets.all_pairs.insert({e.event_type, e.event_type});
      } else {
        kept.push_back(&e);
      }
    }
    for (std::size_t k = 0; k + 1 < kept.size(); ++k) ex.insert({kept[k]->event_type, kept[k + 1]->event_type});
    for (const auto* e : kept) {
      if (e->op == Operator::kKleenePlus) sets.all_pairs.insert({e->event_type, e->event_type});
    }
    for (const auto& c : constraints) {
      const auto& t = alt[static_cast<std::size_t>((c.mode == ConstraintMode::kWithin ? c.i : c.j) - 1)].event_type;
      sets.all_pairs.insert({t, t});
    }
    sets.per_alternative.push_back(std::move(ex));
  }
  if (!sets.per_alternative.empty()) {
    sets.true_pairs = sets.per_alternative.front();
    for (std::size_t k = 1; k < sets.per_alternative.size(); ++k) {
      std::set<EtPair> both;
      std::set_intersection(sets.true_pairs.begin(), sets.true_pairs.end(), sets.per_alternative[k].begin(),
                            sets.per_alternative[k].end(), std::inserter(both, both.end()));
      sets.true_pairs = std::move(both);
    }
  }
  for (const auto& ex : sets.per_alternative) sets.all_pairs.insert(ex.begin(), ex.end());
  sets.all_pairs.insert(sets.true_pairs.begin(), sets.true_pairs.end());
  return sets;
}

const std::vector<EventPair>& PairListCache::get(const EtPair& et) {
  auto it = lists_.find(et);
  if (it != lists_.end()) return it->second;
  auto list = store_.read_inverted_list(et, window_);
  pairs_read_ += list.size();
  return lists_.emplace(et, std::move(list)).first->second;
}

namespace {

std::set<TraceId> traces_with_all(const Store& store, const std::set<EtPair>& pairs, PairListCache& cache) {
  // Cheapest lists first, using CountTable sizes; a pair never counted means no trace.
  std::vector<std::pair<std::uint64_t, const EtPair*>> order;
  for (const auto& et : pairs) {
    const auto rec = store.read_count(et);
    if (!rec) return {};
    order.emplace_back(rec->total_completions, &et);
  }
  std::sort(order.begin(), order.end());
  std::set<TraceId> result;
  bool first = true;
  for (const auto& [_, et] : order) {
    std::set<TraceId> ids;
    for (const auto& p : cache.get(*et)) {
      if (first || result.count(p.trace_id)) ids.insert(p.trace_id);
    }
    result = std::move(ids);
    first = false;
    if (result.empty()) break;
  }
  return result;
}

std::set<TraceId> traces_with_type(const Store& store, const std::string& type, std::optional<TimeWindow> window) {
  std::set<TraceId> ids;
  for (const auto& e : store.read_single(type, window)) {
    if (!window || window->contains(e.ts)) ids.insert(e.trace_id);
  }
  return ids;
}

void filter_to_window(CandidateStream& s, const std::optional<TimeWindow>& window) {
  if (!window) return;
  std::erase_if(s.events, [&](const Event& ev) { return !window->contains(ev.ts); });
}

}  // namespace

std::set<TraceId> prune(const Store& store, const PairSets& sets, std::optional<TimeWindow> window,
                        PairListCache* cache) {
  PairListCache local(store, window);
  PairListCache& c = cache ? *cache : local;
  if (!sets.true_pairs.empty()) return traces_with_all(store, sets.true_pairs, c);
  std::set<TraceId> result;
  for (const auto& ex : sets.per_alternative) {
    if (ex.empty()) continue;
    auto ids = traces_with_all(store, ex, c);
    result.insert(ids.begin(), ids.end());
  }
  return result;
}

std::set<TraceId> candidates_by_types(const Store& store, const std::vector<QueryEvent>& pattern,
                                      std::optional<TimeWindow> window, bool require_all_types) {
  std::set<TraceId> result;
  bool first = true;
  for (const auto& e : pattern) {
    if (!require_all_types && !e.mandatory()) continue;
    std::set<TraceId> ids;
    for (const auto& t : e.accepted_types()) {
      auto part = traces_with_type(store, t, window);
      ids.insert(part.begin(), part.end());
    }
    if (first) {
      result = std::move(ids);
      first = false;
    } else {
      std::set<TraceId> both;
      std::set_intersection(result.begin(), result.end(), ids.begin(), ids.end(), std::inserter(both, both.end()));
      result = std::move(both);
    }
    if (result.empty()) break;
  }
  return result;
}

FetchPlan plan_fetch(const Store& store, const PairSets& sets, const Query& q) {
  FetchPlan plan;
  const bool pos_mode = store.config().mode == StoreMode::kPos;
  if (q.explain || q.mandatory_positions() < 2 || (pos_mode && (q.has_time_constraints() || q.window)) ||
      (!pos_mode && q.has_gap_constraints())) {
    plan.from_sequences = true;
    return plan;
  }
  plan.pairs = sets.all_pairs;
  const bool plain = q.constraints.empty() && !q.window &&
                     std::all_of(q.pattern.begin(), q.pattern.end(), [](const QueryEvent& e) {
                       return e.op != Operator::kNegation && e.op != Operator::kKleeneStar;
                     });
  if (!plain) {
    // Every ordered pair over the query's types: each such event of a trace is
    // the second event of some pair, or the first of one when it is the trace's
    // earliest, so nothing a guard or a constraint could depend on is missed.
    const auto types = q.pattern_types();
    for (const auto& a : types) {
      for (const auto& b : types) plan.pairs.insert({a, b});
    }
  }
  return plan;
}

std::vector<CandidateStream> assemble_streams(const Store& store, const std::set<TraceId>& candidates,
                                              const PairSets& sets, const Query& q, PairListCache* cache) {
  std::vector<CandidateStream> streams;
  if (candidates.empty()) return streams;
  const auto plan = plan_fetch(store, sets, q);
  const auto types_v = q.pattern_types();
  const std::set<std::string> types(types_v.begin(), types_v.end());

  if (plan.from_sequences) {
    const std::vector<TraceId> ids(candidates.begin(), candidates.end());
    const auto traces = store.read_sequences(ids);
    for (TraceId id : ids) {
      auto it = traces.find(id);
      if (it == traces.end())
        throw CorruptionError("candidate trace " + std::to_string(id) + " missing from the sequence table");
      CandidateStream s;
      s.trace_id = id;
      for (const auto& ev : it->second.events) {
        if (types.count(ev.event_type)) s.events.push_back(ev);
      }
      filter_to_window(s, q.window);
      streams.push_back(std::move(s));
    }
    return streams;
  }

  const bool pos_mode = store.config().mode == StoreMode::kPos;
  PairListCache local(store, q.window);
  PairListCache& c = cache ? *cache : local;
  // trace -> key -> event; the key is the coordinate the store keeps.
  std::map<TraceId, std::map<std::int64_t, Event>> gathered;
  for (const auto& et : plan.pairs) {
    for (const auto& p : c.get(et)) {
      if (!candidates.count(p.trace_id)) continue;
      auto& evs = gathered[p.trace_id];
      Event a{p.trace_id, et.first, pos_mode ? 0 : p.first_ts, pos_mode ? p.first_pos : 0};
      Event b{p.trace_id, et.second, pos_mode ? 0 : p.second_ts, pos_mode ? p.second_pos : 0};
      evs.emplace(pos_mode ? p.first_pos : p.first_ts, std::move(a));
      evs.emplace(pos_mode ? p.second_pos : p.second_ts, std::move(b));
    }
  }
  for (TraceId id : candidates) {
    CandidateStream s;
    s.trace_id = id;
    s.has_timestamps = !pos_mode;
    s.has_positions = pos_mode;
    auto it = gathered.find(id);
    if (it != gathered.end()) {
      for (auto& [_, ev] : it->second) s.events.push_back(std::move(ev));
    }
    if (!pos_mode) filter_to_window(s, q.window);
    streams.push_back(std::move(s));
  }
  return streams;
}

std::vector<CandidateStream> assemble_group_streams(const Store& store, const Query& q) {
  const auto types_v = q.pattern_types();
  const std::set<std::string> types(types_v.begin(), types_v.end());
  std::vector<CandidateStream> streams;
  for (std::size_t g = 0; g < q.groups.size(); ++g) {
    const auto traces = store.read_sequences(q.groups[g]);
    std::vector<Event> merged;
    for (const auto& [_, t] : traces) merged.insert(merged.end(), t.events.begin(), t.events.end());
    std::stable_sort(merged.begin(), merged.end(), [](const Event& a, const Event& b) {
      if (a.ts != b.ts) return a.ts < b.ts;
      if (a.trace_id != b.trace_id) return a.trace_id < b.trace_id;
      return a.pos < b.pos;
    });
    CandidateStream s;
    s.trace_id = g;
    s.is_group = true;
    s.members = q.groups[g];
    Position pos = 0;
    for (auto& ev : merged) {
      ev.pos = ++pos;
      if (types.count(ev.event_type)) s.events.push_back(std::move(ev));
    }
    filter_to_window(s, q.window);
    streams.push_back(std::move(s));
  }
  return streams;
}

std::vector<PairStats> stats_query(const Store& store, const std::vector<std::string>& pattern) {
  std::vector<PairStats> out;
  for (std::size_t k = 0; k + 1 < pattern.size(); ++k) {
    PairStats ps;
    ps.pair = {pattern[k], pattern[k + 1]};
    if (auto rec = store.read_count(ps.pair)) {
      ps.found = true;
      ps.total = rec->total_completions;
      ps.sum = rec->sum_durations;
      ps.min = rec->min_duration;
      ps.max = rec->max_duration;
      ps.mean = ps.total ? static_cast<double>(ps.sum) / static_cast<double>(ps.total) : 0.0;
    }
    out.push_back(ps);
  }
  return out;
}

}  // namespace logsieve
