#include "logsieve/executor.hpp"

#include <chrono>

#include "logsieve/errors.hpp"
#include "logsieve/planner.hpp"

namespace logsieve {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

nlohmann::json event_json(const Event& ev, const TraceResult& tr) {
  nlohmann::json j{{"type", ev.event_type}};
  j["ts"] = tr.has_timestamps ? nlohmann::json(ev.ts) : nlohmann::json(nullptr);
  j["pos"] = tr.has_positions ? nlohmann::json(ev.pos) : nlohmann::json(nullptr);
  if (tr.is_group) j["trace_id"] = ev.trace_id;
  return j;
}

}  // namespace

std::vector<TraceId> QueryResult::matching_ids() const {
  std::vector<TraceId> ids;
  for (const auto& m : matches) ids.push_back(m.trace_id);
  return ids;
}

QueryResult execute(const Store& store, const Query& q, const ExecuteOptions& options) {
  const auto start = Clock::now();
  q.validate();
  if (q.log_name != store.config().log_name)
    throw QueryError("query targets log '" + q.log_name + "' but the store holds '" + store.config().log_name + "'");
  QueryResult result;
  result.consistency = check_consistency(store, q);
  const bool explaining = q.explain.has_value();
  const auto& cr = result.consistency;
  const bool reject = explaining ? !cr.unknown_types.empty() : !q.groups.empty() ? cr.types_rule_out : cr.answer_empty;
  if (reject) {
    result.rejected = true;
    result.timing.fetch_prune_ms = result.timing.total_ms = ms_since(start);
    return result;
  }

  PairListCache cache(store, q.window);
  std::vector<CandidateStream> streams;
  if (!q.groups.empty()) {
    streams = assemble_group_streams(store, q);
  } else {
    const auto sets = compute_pair_sets(q.pattern, q.constraints);
    std::set<TraceId> candidates;
    if (explaining) {
      candidates = candidates_by_types(store, q.pattern, q.window, true);
    } else if (q.mandatory_positions() < 2) {
      candidates = candidates_by_types(store, q.pattern, q.window);
    } else {
      candidates = prune(store, sets, q.window, &cache);
    }
    streams = assemble_streams(store, candidates, sets, q, &cache);
  }
  result.candidates = streams.size();
  result.pairs_read = cache.pairs_read();
  const auto validate_start = Clock::now();
  result.timing.fetch_prune_ms = std::chrono::duration<double, std::milli>(validate_start - start).count();

  const auto cp = compile(q.pattern, q.constraints);
  MatchPolicy policy;
  policy.return_all = q.return_all;
  const auto occs = options.parallel ? match_streams_parallel(cp, streams, policy)
                                     : match_streams_serial(cp, streams, policy);
  for (std::size_t k = 0; k < streams.size(); ++k) {
    if (occs[k].empty()) {
      if (explaining) {
        if (auto e = explain(streams[k], cp, q.explain->k, q.explain->uncertainty, q.explain->step))
          result.explanations.push_back(std::move(*e));
      }
      continue;
    }
    TraceResult tr;
    tr.trace_id = streams[k].trace_id;
    tr.is_group = streams[k].is_group;
    tr.members = streams[k].members;
    tr.occurrences = occs[k];
    tr.has_timestamps = streams[k].has_timestamps;
    tr.has_positions = streams[k].has_positions;
    result.matches.push_back(std::move(tr));
  }
  result.timing.validation_ms = ms_since(validate_start);
  result.timing.total_ms = ms_since(start);
  return result;
}

nlohmann::json to_json(const QueryResult& r) {
  nlohmann::json j;
  j["rejected"] = r.rejected;
  j["consistency"] = to_json(r.consistency);
  j["matching"] = r.matching_ids();
  j["results"] = nlohmann::json::array();
  for (const auto& tr : r.matches) {
    nlohmann::json t;
    if (tr.is_group) {
      t["group"] = tr.trace_id;
      t["members"] = tr.members;
    } else {
      t["trace_id"] = tr.trace_id;
    }
    t["occurrences"] = nlohmann::json::array();
    for (const auto& occ : tr.occurrences) {
      nlohmann::json o = nlohmann::json::array();
      for (const auto& pm : occ.matches) {
        nlohmann::json evs = nlohmann::json::array();
        for (const auto& ev : pm.events) evs.push_back(event_json(ev, tr));
        o.push_back({{"position", pm.pattern_pos}, {"events", evs}});
      }
      t["occurrences"].push_back(o);
    }
    j["results"].push_back(t);
  }
  if (!r.explanations.empty()) {
    j["explanations"] = nlohmann::json::array();
    for (const auto& e : r.explanations) j["explanations"].push_back(to_json(e));
  }
  j["candidates"] = r.candidates;
  j["pairs_read"] = r.pairs_read;
  j["timing"] = {{"fetch_prune_ms", r.timing.fetch_prune_ms},
                 {"validation_ms", r.timing.validation_ms},
                 {"total_ms", r.timing.total_ms}};
  return j;
}

}  // namespace logsieve
