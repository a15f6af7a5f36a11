#include "oracle.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace logsieve::oracle {
namespace {

struct Slot {
  std::vector<std::string> types;  // several for an or-position
  Operator op;
  // Types accepted by the next non-negated position; a Kleene extent stops
  // growing greedily at the first such event.
  std::vector<std::string> next_types;

  bool accepts(const std::string& t) const { return std::find(types.begin(), types.end(), t) != types.end(); }
};

std::vector<std::string> accepted(const QueryEvent& e) {
  std::vector<std::string> out{e.event_type};
  if (e.op == Operator::kOr) out.insert(out.end(), e.alternatives.begin(), e.alternatives.end());
  return out;
}

// One slot per pattern position; an or-position becomes a simple slot with several types.
std::vector<Slot> slots_of(const std::vector<QueryEvent>& pattern) {
  std::vector<Slot> out;
  for (std::size_t s = 0; s < pattern.size(); ++s) {
    Slot slot{accepted(pattern[s]), pattern[s].op == Operator::kOr ? Operator::kSimple : pattern[s].op, {}};
    for (std::size_t n = s + 1; n < pattern.size(); ++n) {
      if (pattern[n].op == Operator::kNegation) continue;
      slot.next_types = accepted(pattern[n]);
      break;
    }
    out.push_back(std::move(slot));
  }
  return out;
}

// (first, last) event index of one pattern slot; -1 when a Kleene* slot is empty
// and for negated slots.
struct Pick {
  int first = -1;
  int last = -1;
};

class Search {
 public:
  Search(const std::vector<Event>& ev, const Query& q, const std::vector<Slot>& alt, int floor)
      : ev_(ev), q_(q), alt_(alt), floor_(floor), picks_(alt.size()) {}

  // The match whose first event comes earliest; ties go to the first found.
  std::optional<std::vector<Pick>> run() {
    for (start_ = floor_; start_ < static_cast<int>(ev_.size()); ++start_) {
      if (go(0, floor_ - 1)) return picks_;
    }
    return std::nullopt;
  }

 private:
  bool in_window(int idx) const { return !q_.window || q_.window->contains(ev_[static_cast<std::size_t>(idx)].ts); }

  // Remaining mandatory slots must fit, in order, after `after` (ignores everything else).
  bool feasible(std::size_t slot, int after) const {
    int at = after + 1;
    for (std::size_t s = slot; s < alt_.size(); ++s) {
      if (alt_[s].op != Operator::kSimple && alt_[s].op != Operator::kKleenePlus) continue;
      while (at < static_cast<int>(ev_.size()) && !alt_[s].accepts(ev_[static_cast<std::size_t>(at)].event_type)) ++at;
      if (at >= static_cast<int>(ev_.size())) return false;
      ++at;
    }
    return true;
  }

  bool guards_ok(std::size_t slot) const {
    // Negations between the nearest nonempty slot before `slot` and `slot` itself.
    int left = -1;
    for (int s = static_cast<int>(slot) - 1; s >= 0; --s) {
      const auto& a = alt_[static_cast<std::size_t>(s)];
      if (a.op == Operator::kNegation) continue;
      if (picks_[static_cast<std::size_t>(s)].first >= 0) {
        left = s;
        break;
      }
    }
    if (left < 0) return true;
    const Timestamp lo = ev_[static_cast<std::size_t>(picks_[static_cast<std::size_t>(left)].last)].ts;
    const Timestamp hi = ev_[static_cast<std::size_t>(picks_[slot].first)].ts;
    for (std::size_t s = static_cast<std::size_t>(left) + 1; s < slot; ++s) {
      if (alt_[s].op != Operator::kNegation) continue;
      for (const auto& e : ev_) {
        if (alt_[s].accepts(e.event_type) && e.ts > lo && e.ts < hi) return false;
      }
    }
    return true;
  }

  bool constraints_ok(std::size_t slot) const {
    for (const auto& c : q_.constraints) {
      if (static_cast<std::size_t>(c.j - 1) != slot) continue;
      const auto& a = ev_[static_cast<std::size_t>(picks_[static_cast<std::size_t>(c.i - 1)].first)];
      const auto& b = ev_[static_cast<std::size_t>(picks_[slot].first)];
      const std::int64_t d = c.kind == ConstraintKind::kTime ? b.ts - a.ts : b.pos - a.pos;
      if (c.mode == ConstraintMode::kWithin ? d > c.value : d < c.value) return false;
    }
    return true;
  }

  // Candidate last events for a slot starting at f: f alone for simple slots;
  // for Kleene slots the greedy extent first, then every other chain end.
  std::vector<int> extents(const Slot& s, int f) const {
    if (s.op != Operator::kKleenePlus && s.op != Operator::kKleeneStar) return {f};
    const int n = static_cast<int>(ev_.size());
    std::vector<int> chain{f};
    for (int x = f + 1; x < n; ++x) {
      const auto& e = ev_[static_cast<std::size_t>(x)];
      if (s.accepts(e.event_type) && in_window(x) && e.ts > ev_[static_cast<std::size_t>(chain.back())].ts)
        chain.push_back(x);
    }
    int stop = n;
    for (int x = f + 1; x < n && stop == n; ++x) {
      const auto& t = ev_[static_cast<std::size_t>(x)].event_type;
      if (in_window(x) && std::find(s.next_types.begin(), s.next_types.end(), t) != s.next_types.end()) stop = x;
    }
    int greedy = f;
    for (int c : chain) {
      if (c < stop) greedy = c;
    }
    std::vector<int> out{greedy};
    for (int c : chain) {
      if (c != greedy) out.push_back(c);
    }
    return out;
  }

  bool go(std::size_t slot, int last) {
    if (slot == alt_.size()) return true;
    const auto& s = alt_[slot];
    if (s.op == Operator::kNegation) {
      picks_[slot] = {};
      return go(slot + 1, last);
    }
    if (!feasible(slot, last)) return false;
    const Timestamp last_ts = last >= 0 ? ev_[static_cast<std::size_t>(last)].ts : 0;
    const int n = static_cast<int>(ev_.size());
    const bool opening = last < floor_;
    for (int f = opening ? start_ : last + 1; f < (opening ? start_ + 1 : n); ++f) {
      const auto& e = ev_[static_cast<std::size_t>(f)];
      if (!s.accepts(e.event_type) || !in_window(f)) continue;
      if (!opening && e.ts <= last_ts) continue;
      for (int l : extents(s, f)) {
        picks_[slot] = {f, l};
        if (guards_ok(slot) && constraints_ok(slot) && go(slot + 1, l)) return true;
      }
    }
    if (s.op == Operator::kKleeneStar) {
      picks_[slot] = {};
      if (go(slot + 1, last)) return true;
    }
    return false;
  }

  const std::vector<Event>& ev_;
  const Query& q_;
  const std::vector<Slot>& alt_;
  int floor_;
  int start_ = 0;
  std::vector<Pick> picks_;
};

struct Found {
  Occurrence occ;
  int last_index = -1;
};

// The match starting earliest at or after `floor`, as an occurrence.
std::optional<Found> earliest(const std::vector<Event>& ev, const Query& q, int floor) {
  const auto slots = slots_of(q.pattern);
  auto picks = Search(ev, q, slots, floor).run();
  if (!picks) return std::nullopt;
  Found found;
  found.occ.trace_id = ev.empty() ? 0 : ev.front().trace_id;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s].op == Operator::kNegation) continue;
    PositionMatch pm;
    pm.pattern_pos = static_cast<int>(s + 1);
    const auto [f, l] = (*picks)[s];
    if (f >= 0) {
      pm.events.push_back(ev[static_cast<std::size_t>(f)]);
      for (int x = f + 1; x <= l; ++x) {
        const auto& e = ev[static_cast<std::size_t>(x)];
        if (slots[s].accepts(e.event_type) && e.ts > pm.events.back().ts) pm.events.push_back(e);
      }
      found.last_index = l;
    }
    found.occ.matches.push_back(std::move(pm));
  }
  return found;
}

void check_size(const std::vector<Event>& ev) {
  if (ev.size() > kMaxEvents) throw std::invalid_argument("oracle: trace too long for exhaustive search");
}

}  // namespace

bool any_match(const std::vector<Event>& events, const Query& q) {
  check_size(events);
  return Search(events, q, slots_of(q.pattern), 0).run().has_value();
}

std::vector<std::vector<Event>> group_streams(const std::vector<Trace>& traces, const Query& q) {
  std::vector<std::vector<Event>> out;
  for (std::size_t g = 0; g < q.groups.size(); ++g) {
    std::vector<Event> merged;
    for (const auto& t : traces) {
      if (std::binary_search(q.groups[g].begin(), q.groups[g].end(), t.trace_id))
        merged.insert(merged.end(), t.events.begin(), t.events.end());
    }
    std::sort(merged.begin(), merged.end(), [](const Event& a, const Event& b) {
      return std::tie(a.ts, a.trace_id, a.pos) < std::tie(b.ts, b.trace_id, b.pos);
    });
    Position pos = 0;
    for (auto& e : merged) e.pos = ++pos;
    out.push_back(std::move(merged));
  }
  return out;
}

OracleResult brute_force_detect(const std::vector<Trace>& traces, const Query& q) {
  OracleResult res;
  std::vector<std::pair<TraceId, std::vector<Event>>> units;
  if (q.groups.empty()) {
    for (const auto& t : traces) units.emplace_back(t.trace_id, t.events);
  } else {
    auto gs = group_streams(traces, q);
    for (std::size_t g = 0; g < gs.size(); ++g) units.emplace_back(g, std::move(gs[g]));
  }
  for (const auto& [id, ev] : units) {
    check_size(ev);
    if (!any_match(ev, q)) continue;
    res.matching_trace_ids.insert(id);
    auto& occs = res.occurrences[id];
    int floor = 0;
    while (auto found = earliest(ev, q, floor)) {
      found->occ.trace_id = id;
      occs.push_back(std::move(found->occ));
      if (!q.return_all) break;
      floor = found->last_index + 1;
    }
  }
  return res;
}

std::optional<std::string> verify_occurrence(const std::vector<Event>& events, const Query& q, const Occurrence& occ,
                                             KeyBy key) {
  auto locate = [&](const Event& e) -> int {
    for (std::size_t k = 0; k < events.size(); ++k) {
      const auto& x = events[k];
      if ((key == KeyBy::kTs ? x.ts == e.ts : x.pos == e.pos) && x.event_type == e.event_type) return static_cast<int>(k);
    }
    return -1;
  };
  std::vector<const PositionMatch*> by_pos(q.pattern.size() + 1, nullptr);
  for (const auto& pm : occ.matches) {
    if (pm.pattern_pos < 1 || pm.pattern_pos > static_cast<int>(q.pattern.size())) return "position out of range";
    by_pos[static_cast<std::size_t>(pm.pattern_pos)] = &pm;
  }
  std::vector<std::vector<int>> idx(q.pattern.size() + 1);
  int prev = -1;
  for (std::size_t p = 1; p <= q.pattern.size(); ++p) {
    const auto& qe = q.pattern[p - 1];
    const auto* pm = by_pos[p];
    if (qe.op == Operator::kNegation) {
      if (pm && !pm->events.empty()) return "negated position holds events";
      continue;
    }
    const std::size_t n = pm ? pm->events.size() : 0;
    if ((qe.op == Operator::kSimple || qe.op == Operator::kOr) && n != 1)
      return "position " + std::to_string(p) + " needs exactly one event";
    if (qe.op == Operator::kKleenePlus && n == 0) return "position " + std::to_string(p) + " needs an event";
    const auto accepted = qe.accepted_types();
    for (std::size_t k = 0; k < n; ++k) {
      const auto& e = pm->events[k];
      if (std::find(accepted.begin(), accepted.end(), e.event_type) == accepted.end())
        return "position " + std::to_string(p) + " holds type " + e.event_type;
      if (k > 0 && e.event_type != pm->events.front().event_type) return "kleene position mixes types";
      const int at = locate(e);
      if (at < 0) return "event not in trace";
      if (prev >= 0 && events[static_cast<std::size_t>(at)].ts <= events[static_cast<std::size_t>(prev)].ts)
        return "events not strictly increasing";
      prev = at;
      idx[p].push_back(at);
      if (q.window && !q.window->contains(events[static_cast<std::size_t>(at)].ts)) return "event outside window";
    }
  }
  // Guards between neighbouring nonempty positions.
  int left = -1;
  for (std::size_t p = 1; p <= q.pattern.size(); ++p) {
    if (q.pattern[p - 1].op == Operator::kNegation || idx[p].empty()) continue;
    if (left > 0) {
      const auto lo = events[static_cast<std::size_t>(idx[static_cast<std::size_t>(left)].back())].ts;
      const auto hi = events[static_cast<std::size_t>(idx[p].front())].ts;
      for (std::size_t n = static_cast<std::size_t>(left) + 1; n < p; ++n) {
        if (q.pattern[n - 1].op != Operator::kNegation) continue;
        for (const auto& e : events) {
          if (e.event_type == q.pattern[n - 1].event_type && e.ts > lo && e.ts < hi)
            return "negated " + e.event_type + " occurs between positions";
        }
      }
    }
    left = static_cast<int>(p);
  }
  for (const auto& c : q.constraints) {
    if (idx[static_cast<std::size_t>(c.i)].empty() || idx[static_cast<std::size_t>(c.j)].empty())
      return "constraint endpoint unmatched";
    const auto& a = events[static_cast<std::size_t>(idx[static_cast<std::size_t>(c.i)].front())];
    const auto& b = events[static_cast<std::size_t>(idx[static_cast<std::size_t>(c.j)].front())];
    const std::int64_t d = c.kind == ConstraintKind::kTime ? b.ts - a.ts : b.pos - a.pos;
    if (c.mode == ConstraintMode::kWithin ? d > c.value : d < c.value) return "constraint violated";
  }
  return std::nullopt;
}

std::optional<std::int64_t> brute_force_explain(const Trace& trace, const Query& q) {
  if (!q.explain) throw std::invalid_argument("oracle: query has no explain clause");
  const auto [k, u, step] = *q.explain;
  std::vector<const Event*> relevant;
  for (const auto& e : trace.events) {
    if (q.window && !q.window->contains(e.ts)) continue;
    for (const auto& qe : q.pattern) {
      if (qe.event_type == e.event_type) {
        relevant.push_back(&e);
        break;
      }
    }
  }
  const std::int64_t m = u / step;
  std::size_t assignments = 1;
  for (std::size_t x = 0; x < relevant.size(); ++x) {
    assignments *= static_cast<std::size_t>(2 * m + 1);
    if (assignments > 117'649) throw std::invalid_argument("oracle: explain instance too large");
  }
  // Every full assignment of shifts to the relevant events, and every injective
  // choice of events for the pattern positions under it. Cost and validity only
  // involve the chosen events, so the search walks positions and shifts of the
  // chosen events directly; unchosen events take any shift without effect.
  const std::size_t npos = q.pattern.size();
  std::optional<std::int64_t> best;
  std::vector<int> chosen(npos, -1);
  std::vector<std::int64_t> mts(npos, 0);
  std::vector<bool> used(relevant.size(), false);
  auto rec = [&](auto&& self, std::size_t p, std::int64_t cost) -> void {
    if (cost > k || (best && cost >= *best)) return;
    if (p == npos) {
      best = cost;
      return;
    }
    for (std::size_t e = 0; e < relevant.size(); ++e) {
      if (used[e] || relevant[e]->event_type != q.pattern[p].event_type) continue;
      for (std::int64_t s = -m; s <= m; ++s) {
        const std::int64_t t = relevant[e]->ts + s * step;
        if (p > 0 && t <= mts[p - 1]) continue;
        chosen[p] = static_cast<int>(e);
        mts[p] = t;
        bool ok = true;
        for (const auto& c : q.constraints) {
          if (static_cast<std::size_t>(c.j - 1) != p) continue;
          const auto i = static_cast<std::size_t>(c.i - 1);
          const std::int64_t d = c.kind == ConstraintKind::kTime
                                     ? t - mts[i]
                                     : relevant[e]->pos - relevant[static_cast<std::size_t>(chosen[i])]->pos;
          if (c.mode == ConstraintMode::kWithin ? d > c.value : d < c.value) ok = false;
        }
        if (!ok) continue;
        used[e] = true;
        self(self, p + 1, cost + (s < 0 ? -s : s) * step);
        used[e] = false;
      }
    }
  };
  rec(rec, 0, 0);
  return best;
}

}  // namespace logsieve::oracle
