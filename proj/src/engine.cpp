#include "logsieve/engine.hpp"

#include <algorithm>
#include <limits>
#include <string_view>
#include <unordered_set>

#include "logsieve/errors.hpp"

namespace logsieve {

bool CompiledPattern::accepts(int state, int type) const {
  if (state < 0 || state >= static_cast<int>(states.size()) || type < 0) return false;
  const auto& ts = states[static_cast<std::size_t>(state)].types;
  return std::find(ts.begin(), ts.end(), type) != ts.end();
}

CompiledPattern compile(const std::vector<QueryEvent>& pattern, const std::vector<Constraint>& constraints) {
  CompiledPattern cp;
  auto intern = [&cp](const std::string& t) {
    auto [it, inserted] = cp.type_ids.emplace(t, static_cast<int>(cp.type_names.size()));
    if (inserted) cp.type_names.push_back(t);
    return it->second;
  };
  std::vector<int> state_of(pattern.size() + 1, -1);
  std::vector<int> pending_guards;
  for (std::size_t k = 0; k < pattern.size(); ++k) {
    const auto& e = pattern[k];
    if (e.op == Operator::kNegation) {
      pending_guards.push_back(intern(e.event_type));
      continue;
    }
    CompiledState st;
    st.pattern_pos = static_cast<int>(k + 1);
    for (const auto& t : e.accepted_types()) {
      const int id = intern(t);
      if (std::find(st.types.begin(), st.types.end(), id) == st.types.end()) st.types.push_back(id);
    }
    st.kleene = e.op == Operator::kKleenePlus || e.op == Operator::kKleeneStar;
    st.optional = e.op == Operator::kKleeneStar;
    st.guards_before = std::move(pending_guards);
    pending_guards.clear();
    state_of[k + 1] = static_cast<int>(cp.states.size());
    cp.states.push_back(std::move(st));
  }
  if (cp.states.empty()) throw QueryError("pattern has no positive position");
  if (!pending_guards.empty()) throw QueryError("negation may not be the last pattern position");
  if (!cp.states.front().guards_before.empty()) throw QueryError("negation may not be the first pattern position");
  std::size_t guard_count = 0;
  for (const auto& st : cp.states) guard_count += st.guards_before.size();
  if (guard_count > 64) throw QueryError("at most 64 negated positions are supported");

  for (const auto& c : constraints) {
    if (c.i < 1 || c.j > static_cast<int>(pattern.size()) || c.i >= c.j)
      throw QueryError("constraint positions out of range");
    const int si = state_of[static_cast<std::size_t>(c.i)];
    const int sj = state_of[static_cast<std::size_t>(c.j)];
    if (si < 0 || sj < 0) throw QueryError("constraint references a negated position");
    if (cp.states[static_cast<std::size_t>(si)].optional || cp.states[static_cast<std::size_t>(sj)].optional)
      throw QueryError("constraint references a kleene_star position");
    cp.constraints.push_back({c, si, sj});
  }
  return cp;
}

namespace {

constexpr std::int64_t kNoKey = std::numeric_limits<std::int64_t>::min();

struct Item {
  int type = -1;
  std::int64_t key = 0;
  std::int64_t ts = 0;
  std::int64_t pos = 0;
  std::size_t src = 0;
};

struct Extent {
  int first = -1;
  int last = -1;
};

class Matcher {
 public:
  Matcher(const CompiledPattern& cp, const CandidateStream& stream) : cp_(cp), stream_(stream) {
    for (std::size_t k = 0; k < stream.events.size(); ++k) {
      const auto& ev = stream.events[k];
      const int t = cp.type_id(ev.event_type);
      if (t < 0) continue;
      items_.push_back({t, stream.order_key(ev), ev.ts, ev.pos, k});
    }
    guard_keys_.resize(cp.type_names.size());
    for (const auto& it : items_) guard_keys_[static_cast<std::size_t>(it.type)].push_back(it.key);
    state_mask_.resize(cp.states.size(), 0);
    int slot = 0;
    for (std::size_t s = 0; s < cp.states.size(); ++s) {
      for (int g : cp.states[s].guards_before) {
        state_mask_[s] |= std::uint64_t{1} << slot;
        slot_type_.push_back(g);
        ++slot;
      }
    }
    path_.resize(cp.states.size());
    anchors_.assign(cp.states.size(), -1);
  }

  // Earliest first event wins; a skippable leading Kleene* never delays the start.
  bool find_first(int floor) {
    floor_ = floor;
    memo_.clear();
    collect_ = false;
    for (start_ = floor; start_ < static_cast<int>(items_.size()); ++start_) {
      if (dfs(0, -1, 0)) return true;
    }
    return false;
  }

  std::vector<std::vector<Extent>> enumerate(std::size_t cap) {
    floor_ = 0;
    start_ = -1;
    memo_.clear();
    collect_ = true;
    cap_ = cap;
    found_.clear();
    dfs(0, -1, 0);
    return std::move(found_);
  }

  const std::vector<Extent>& path() const { return path_; }
  const std::vector<Item>& items() const { return items_; }

  Occurrence build(const std::vector<Extent>& path) const {
    Occurrence occ;
    occ.trace_id = stream_.trace_id;
    for (std::size_t s = 0; s < cp_.states.size(); ++s) {
      PositionMatch pm;
      pm.pattern_pos = cp_.states[s].pattern_pos;
      const auto [f, l] = path[s];
      if (f >= 0) {
        std::int64_t prev = kNoKey;
        for (int x = f; x <= l; ++x) {
          const Item& it = items_[static_cast<std::size_t>(x)];
          if (!cp_.accepts(static_cast<int>(s), it.type) || it.key <= prev) continue;
          prev = it.key;
          pm.events.push_back(stream_.events[it.src]);
        }
      }
      occ.matches.push_back(std::move(pm));
    }
    return occ;
  }

 private:
  std::int64_t value(const CompiledConstraint& cc, int item) const {
    const Item& it = items_[static_cast<std::size_t>(item)];
    return cc.source.kind == ConstraintKind::kTime ? it.ts : it.pos;
  }

  bool guard_violated(std::uint64_t mask, std::int64_t lo, std::int64_t hi) const {
    for (std::size_t g = 0; mask != 0; ++g, mask >>= 1) {
      if ((mask & 1) == 0) continue;
      const auto& keys = guard_keys_[static_cast<std::size_t>(slot_type_[g])];
      auto it = std::upper_bound(keys.begin(), keys.end(), lo);
      if (it != keys.end() && *it < hi) return true;
    }
    return false;
  }

  std::string memo_key(int k, int last, std::uint64_t pending) const {
    std::string key;
    auto put = [&key](std::int64_t v) { key.append(reinterpret_cast<const char*>(&v), sizeof v); };
    put(k);
    put(last);
    put(last < 0 ? start_ : -1);
    put(static_cast<std::int64_t>(pending));
    for (const auto& cc : cp_.constraints) {
      if (cc.state_i < k && cc.state_j >= k) put(anchors_[static_cast<std::size_t>(cc.state_i)]);
    }
    return key;
  }

  // Chain of accepted items for a Kleene state starting at f, strictly increasing in key.
  std::vector<int> kleene_chain(int k, int f) const {
    std::vector<int> chain{f};
    for (int x = f + 1; x < static_cast<int>(items_.size()); ++x) {
      const Item& it = items_[static_cast<std::size_t>(x)];
      if (cp_.accepts(k, it.type) && it.key > items_[static_cast<std::size_t>(chain.back())].key) chain.push_back(x);
    }
    return chain;
  }

  // Greedy extent first: absorb until the next state's predicate fires.
  std::vector<int> kleene_ends(int k, int f) const {
    auto chain = kleene_chain(k, f);
    int stop = static_cast<int>(items_.size());
    if (k + 1 < static_cast<int>(cp_.states.size())) {
      for (int x = f + 1; x < stop; ++x) {
        if (cp_.accepts(k + 1, items_[static_cast<std::size_t>(x)].type)) {
          stop = x;
          break;
        }
      }
    }
    int greedy = f;
    for (int c : chain) {
      if (c < stop) greedy = c;
    }
    std::vector<int> ends{greedy};
    for (int c : chain) {
      if (c != greedy) ends.push_back(c);
    }
    return ends;
  }

  bool done() const { return collect_ && found_.size() >= cap_; }

  bool dfs(int k, int last, std::uint64_t pending) {
    if (k == static_cast<int>(cp_.states.size())) {
      if (collect_) found_.push_back(path_);
      return true;
    }
    const std::string key = memo_key(k, last, pending);
    if (memo_.count(key)) return false;

    const auto& st = cp_.states[static_cast<std::size_t>(k)];
    const std::uint64_t gmask = pending | state_mask_[static_cast<std::size_t>(k)];
    const std::int64_t last_key = last >= 0 ? items_[static_cast<std::size_t>(last)].key : kNoKey;
    bool any = false;
    const int n = static_cast<int>(items_.size());
    const int hi = last < 0 && start_ >= 0 ? std::min(n, start_ + 1) : n;
    for (int f = last >= 0 ? last + 1 : std::max(floor_, start_); f < hi && !done(); ++f) {
      const Item& cand = items_[static_cast<std::size_t>(f)];
      if (cand.key <= last_key) continue;
      if (last >= 0 && gmask != 0 && guard_violated(gmask, last_key, cand.key)) break;
      if (!cp_.accepts(k, cand.type)) continue;
      bool stop = false;
      bool bad = false;
      for (const auto& cc : cp_.constraints) {
        const bool within = cc.source.mode == ConstraintMode::kWithin;
        if (cc.state_j == k) {
          const auto d = value(cc, f) - value(cc, anchors_[static_cast<std::size_t>(cc.state_i)]);
          if (within && d > cc.source.value) stop = true;
          if (!within && d < cc.source.value) bad = true;
        } else if (within && cc.state_i < k && cc.state_j > k) {
          if (value(cc, f) - value(cc, anchors_[static_cast<std::size_t>(cc.state_i)]) > cc.source.value) stop = true;
        }
      }
      if (stop) break;
      if (bad) continue;
      anchors_[static_cast<std::size_t>(k)] = f;
      if (st.kleene) {
        const auto ends = collect_ ? kleene_chain(k, f) : kleene_ends(k, f);
        for (int e : ends) {
          path_[static_cast<std::size_t>(k)] = {f, e};
          if (dfs(k + 1, e, 0)) {
            any = true;
            if (!collect_) return true;
          }
          if (done()) break;
        }
      } else {
        path_[static_cast<std::size_t>(k)] = {f, f};
        if (dfs(k + 1, f, 0)) {
          any = true;
          if (!collect_) return true;
        }
      }
      anchors_[static_cast<std::size_t>(k)] = -1;
    }
    if (st.optional && !done()) {
      path_[static_cast<std::size_t>(k)] = {-1, -1};
      if (dfs(k + 1, last, gmask)) {
        any = true;
        if (!collect_) return true;
      }
    }
    if (!any) memo_.insert(key);
    return any;
  }

  const CompiledPattern& cp_;
  const CandidateStream& stream_;
  std::vector<Item> items_;
  std::vector<std::vector<std::int64_t>> guard_keys_;
  std::vector<std::uint64_t> state_mask_;
  std::vector<int> slot_type_;
  std::vector<Extent> path_;
  std::vector<int> anchors_;
  std::unordered_set<std::string> memo_;
  int floor_ = 0;
  int start_ = -1;  // item the first matched event must be, or -1 for any
  bool collect_ = false;
  std::size_t cap_ = 0;
  std::vector<std::vector<Extent>> found_;
};

int last_item(const std::vector<Extent>& path) {
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    if (it->last >= 0) return it->last;
  }
  return -1;
}

const PositionMatch& find_position(const Occurrence& occ, int pos) {
  for (const auto& m : occ.matches) {
    if (m.pattern_pos == pos) {
      if (m.events.empty()) break;
      return m;
    }
  }
  throw ContractError("occurrence has no event at pattern position " + std::to_string(pos));
}

}  // namespace

std::vector<Occurrence> match_stream(const CompiledPattern& cp, const CandidateStream& stream,
                                     const MatchPolicy& policy) {
  Matcher m(cp, stream);
  std::vector<Occurrence> out;
  if (policy.strategy == Strategy::kSkipTillAnyMatch) {
    for (const auto& path : m.enumerate(policy.max_matches)) out.push_back(m.build(path));
    return out;
  }
  int floor = 0;
  while (floor < static_cast<int>(m.items().size()) && m.find_first(floor)) {
    out.push_back(m.build(m.path()));
    if (!policy.return_all) break;
    floor = last_item(m.path()) + 1;
  }
  if (policy.return_all) out = select_non_overlapping(std::move(out), !stream.has_timestamps);
  return out;
}

bool check_constraint(const Constraint& c, const Occurrence& occ) {
  const Event& a = find_position(occ, c.i).events.front();
  const Event& b = find_position(occ, c.j).events.front();
  const std::int64_t d = c.kind == ConstraintKind::kTime ? b.ts - a.ts : b.pos - a.pos;
  return c.mode == ConstraintMode::kWithin ? d <= c.value : d >= c.value;
}

std::vector<Occurrence> select_non_overlapping(std::vector<Occurrence> occs, bool by_position) {
  auto key = [by_position](const Event* e) { return by_position ? e->pos : e->ts; };
  std::vector<std::size_t> order(occs.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ea = key(occs[a].last_event());
    const auto eb = key(occs[b].last_event());
    if (ea != eb) return ea < eb;
    return key(occs[a].first_event()) > key(occs[b].first_event());
  });
  std::vector<Occurrence> kept;
  std::optional<std::int64_t> end;
  for (std::size_t k : order) {
    const auto begin = key(occs[k].first_event());
    if (end && begin <= *end) continue;
    end = key(occs[k].last_event());
    kept.push_back(std::move(occs[k]));
  }
  std::sort(kept.begin(), kept.end(),
            [&](const Occurrence& a, const Occurrence& b) { return key(a.first_event()) < key(b.first_event()); });
  return kept;
}

std::vector<std::vector<Occurrence>> match_streams_serial(const CompiledPattern& cp,
                                                          std::span<const CandidateStream> streams,
                                                          const MatchPolicy& policy) {
  std::vector<std::vector<Occurrence>> out(streams.size());
  for (std::size_t k = 0; k < streams.size(); ++k) out[k] = match_stream(cp, streams[k], policy);
  return out;
}

std::vector<std::vector<Occurrence>> match_streams_parallel(const CompiledPattern& cp,
                                                            std::span<const CandidateStream> streams,
                                                            const MatchPolicy& policy) {
  std::vector<std::vector<Occurrence>> out(streams.size());
  const auto n = static_cast<std::int64_t>(streams.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t k = 0; k < n; ++k) {
    out[static_cast<std::size_t>(k)] = match_stream(cp, streams[static_cast<std::size_t>(k)], policy);
  }
  return out;
}

}  // namespace logsieve
