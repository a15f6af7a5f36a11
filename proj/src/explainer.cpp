#include "logsieve/explainer.hpp"

#include <algorithm>
#include <unordered_map>

#include "logsieve/errors.hpp"
#include "logsieve/planner.hpp"

namespace logsieve {

ConsistencyReport check_consistency(const Store& store, const Query& q) {
  ConsistencyReport r;
  const auto known = store.known_types();
  for (const auto& t : q.pattern_types()) {
    if (!known.count(t)) r.unknown_types.push_back(t);
  }
  const auto sets = compute_pair_sets(q.pattern, q.constraints);
  // A pair with an unknown type is missing for that reason alone; report the type only.
  for (const auto& et : sets.true_pairs) {
    if (known.count(et.first) && known.count(et.second) && !store.read_count(et)) r.missing_pairs.push_back(et);
  }

  const auto alternatives = expand_or(q.pattern);
  bool all_dead = true;
  bool all_typeless = true;
  for (std::size_t a = 0; a < alternatives.size(); ++a) {
    bool typeless = false;
    for (const auto& e : alternatives[a]) {
      if (e.mandatory() && !known.count(e.event_type)) typeless = true;
    }
    bool dead = typeless;
    for (const auto& et : sets.per_alternative[a]) {
      if (!dead && !store.read_count(et)) dead = true;
    }
    all_dead = all_dead && dead;
    all_typeless = all_typeless && typeless;
    if (!all_dead && !all_typeless) break;
  }
  r.answer_empty = all_dead;
  r.types_rule_out = all_typeless;

  for (const auto& c : q.constraints) {
    if (c.kind != ConstraintKind::kTime) continue;
    const auto& ei = q.pattern[static_cast<std::size_t>(c.i - 1)];
    const auto& ej = q.pattern[static_cast<std::size_t>(c.j - 1)];
    if (ei.op == Operator::kOr || ej.op == Operator::kOr) continue;
    const EtPair et{ei.event_type, ej.event_type};
    const auto rec = store.read_count(et);
    if (!rec) continue;
    const bool unsat = c.mode == ConstraintMode::kWithin ? c.value < rec->min_duration : c.value > rec->max_duration;
    if (unsat) r.unsatisfiable_constraints.push_back({c, et, rec->min_duration, rec->max_duration});
  }
  return r;
}

std::vector<ModifiedEvent> generate_modified_stream(const std::vector<Event>& stream, std::int64_t uncertainty,
                                                    std::int64_t step) {
  if (uncertainty < 0 || step < 1 || uncertainty % step != 0)
    throw ContractError("uncertainty must be a non-negative multiple of step");
  std::vector<ModifiedEvent> out;
  const std::int64_t m = uncertainty / step;
  out.reserve(stream.size() * static_cast<std::size_t>(2 * m + 1));
  for (std::size_t k = 0; k < stream.size(); ++k) {
    for (std::int64_t s = -m; s <= m; ++s) {
      const std::int64_t shift = s * step;
      out.push_back({stream[k], stream[k].ts + shift, shift < 0 ? -shift : shift, k});
    }
  }
  std::sort(out.begin(), out.end(), [](const ModifiedEvent& a, const ModifiedEvent& b) {
    if (a.modified_ts != b.modified_ts) return a.modified_ts < b.modified_ts;
    if (a.origin != b.origin) return a.origin < b.origin;
    return a.delta < b.delta;
  });
  return out;
}

namespace {

struct Run {
  int state = 0;  // number of positions matched
  std::int64_t cost = 0;
  std::vector<std::uint32_t> chosen;  // indices into the modified stream
  bool dead = false;
};

}  // namespace

std::optional<Explanation> explain(const CandidateStream& stream, const CompiledPattern& cp, std::int64_t k,
                                   std::int64_t uncertainty, std::int64_t step) {
  for (const auto& st : cp.states) {
    if (st.kleene || !st.guards_before.empty() || st.types.size() != 1)
      throw QueryError("explanations are only available for simple patterns");
  }
  if (k < 0) throw QueryError("explain budget k must be >= 0");
  const auto ms = generate_modified_stream(stream.events, uncertainty, step);
  const int n_states = static_cast<int>(cp.states.size());

  auto value = [&](const CompiledConstraint& cc, std::uint32_t v) {
    return cc.source.kind == ConstraintKind::kTime ? ms[v].modified_ts : ms[v].original.pos;
  };
  auto lex_less = [&](const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
    for (std::size_t x = 0; x < a.size() && x < b.size(); ++x) {
      if (ms[a[x]].modified_ts != ms[b[x]].modified_ts) return ms[a[x]].modified_ts < ms[b[x]].modified_ts;
    }
    return a.size() < b.size();
  };
  // Only origins that may still reappear later in the stream affect the future.
  auto dominance_key = [&](const Run& r) {
    std::string key;
    auto put = [&key](std::int64_t v) { key.append(reinterpret_cast<const char*>(&v), sizeof v); };
    const std::int64_t last_mts = ms[r.chosen.back()].modified_ts;
    put(r.state);
    put(last_mts);
    std::vector<std::int64_t> live;
    for (auto c : r.chosen) {
      if (ms[c].original.ts + uncertainty > last_mts) live.push_back(static_cast<std::int64_t>(ms[c].origin));
    }
    std::sort(live.begin(), live.end());
    put(static_cast<std::int64_t>(live.size()));
    for (auto o : live) put(o);
    for (const auto& cc : cp.constraints) {
      if (cc.state_i < r.state && cc.state_j >= r.state) put(value(cc, r.chosen[static_cast<std::size_t>(cc.state_i)]));
    }
    return key;
  };

  std::vector<Run> runs;
  std::vector<std::vector<std::size_t>> by_state(static_cast<std::size_t>(n_states));
  std::unordered_map<std::string, std::size_t> index;
  std::optional<Run> best;

  auto offer = [&](Run r) {
    if (r.cost > k || (best && r.cost > best->cost)) return;
    if (r.state == n_states) {
      if (!best || r.cost < best->cost || (r.cost == best->cost && lex_less(r.chosen, best->chosen))) best = std::move(r);
      return;
    }
    auto key = dominance_key(r);
    auto it = index.find(key);
    if (it != index.end()) {
      Run& old = runs[it->second];
      if (old.cost < r.cost || (old.cost == r.cost && !lex_less(r.chosen, old.chosen))) return;
      old.dead = true;
    }
    index[key] = runs.size();
    by_state[static_cast<std::size_t>(r.state)].push_back(runs.size());
    runs.push_back(std::move(r));
  };

  for (std::uint32_t v = 0; v < ms.size(); ++v) {
    const int t = cp.type_id(ms[v].original.event_type);
    if (t < 0) continue;
    std::vector<Run> fresh;
    for (int s = n_states - 1; s >= 1; --s) {
      if (!cp.accepts(s, t)) continue;
      for (std::size_t ri : by_state[static_cast<std::size_t>(s)]) {
        const Run& r = runs[ri];
        if (r.dead) continue;
        const std::int64_t cost = r.cost + ms[v].delta;
        if (cost > k || (best && cost > best->cost)) continue;
        if (ms[r.chosen.back()].modified_ts >= ms[v].modified_ts) continue;
        const bool reused =
            std::any_of(r.chosen.begin(), r.chosen.end(), [&](std::uint32_t c) { return ms[c].origin == ms[v].origin; });
        if (reused) continue;
        bool ok = true;
        for (const auto& cc : cp.constraints) {
          if (cc.state_j != s) continue;
          const auto d = value(cc, v) - value(cc, r.chosen[static_cast<std::size_t>(cc.state_i)]);
          ok = ok && (cc.source.mode == ConstraintMode::kWithin ? d <= cc.source.value : d >= cc.source.value);
        }
        if (!ok) continue;
        Run next{s + 1, cost, r.chosen, false};
        next.chosen.push_back(v);
        fresh.push_back(std::move(next));
      }
    }
    if (cp.accepts(0, t)) fresh.push_back(Run{1, ms[v].delta, {v}, false});
    for (auto& r : fresh) offer(std::move(r));
  }

  if (!best) return std::nullopt;
  Explanation e;
  e.trace_id = stream.trace_id;
  e.cost = best->cost;
  for (auto c : best->chosen) e.events.push_back(ms[c]);
  return e;
}

nlohmann::json to_json(const ConsistencyReport& r) {
  nlohmann::json j;
  j["consistent"] = r.consistent();
  j["unknown_types"] = r.unknown_types;
  j["missing_pairs"] = nlohmann::json::array();
  for (const auto& p : r.missing_pairs) j["missing_pairs"].push_back({p.first, p.second});
  j["unsatisfiable_constraints"] = nlohmann::json::array();
  for (const auto& u : r.unsatisfiable_constraints) {
    j["unsatisfiable_constraints"].push_back({{"kind", to_string(u.constraint.kind)},
                                              {"mode", to_string(u.constraint.mode)},
                                              {"value", u.constraint.value},
                                              {"i", u.constraint.i},
                                              {"j", u.constraint.j},
                                              {"pair", {u.pair.first, u.pair.second}},
                                              {"min_duration", u.min_duration},
                                              {"max_duration", u.max_duration}});
  }
  return j;
}

nlohmann::json to_json(const Explanation& e) {
  nlohmann::json j;
  j["trace_id"] = e.trace_id;
  j["cost"] = e.cost;
  j["events"] = nlohmann::json::array();
  for (const auto& m : e.events) {
    j["events"].push_back({{"type", m.original.event_type},
                           {"pos", m.original.pos},
                           {"original_ts", m.original.ts},
                           {"modified_ts", m.modified_ts}});
  }
  return j;
}

}  // namespace logsieve
