#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "logsieve/model.hpp"
#include "logsieve/query.hpp"
#include "logsieve/store.hpp"
#include "logsieve/stream.hpp"

namespace logsieve {

/// Cartesian expansion of or-positions; the result holds no kOr events.
std::vector<std::vector<QueryEvent>> expand_or(const std::vector<QueryEvent>& pattern);

struct PairSets {
  std::set<EtPair> true_pairs;  // used to prune
  std::set<EtPair> all_pairs;   // used to fetch
  /// Consecutive-pair set of each or-alternative, in expand_or order.
  std::vector<std::set<EtPair>> per_alternative;
};

/// Per alternative: negated and Kleene* events are dropped (contributing
/// (a,a) to the fetch set), consecutive remaining events give the alternative's
/// pairs, every Kleene+ adds (a,a), and each constraint adds (a_i,a_i) for
/// within or (a_j,a_j) for atleast. The prune set is the intersection over
/// alternatives; the fetch set also holds every alternative's pairs.
PairSets compute_pair_sets(const std::vector<QueryEvent>& pattern, const std::vector<Constraint>& constraints);

/// Per-query cache of window-restricted inverted lists.
class PairListCache {
 public:
  PairListCache(const Store& store, std::optional<TimeWindow> window) : store_(store), window_(window) {}
  const std::vector<EventPair>& get(const EtPair& et);
  std::uint64_t pairs_read() const { return pairs_read_; }

 private:
  const Store& store_;
  std::optional<TimeWindow> window_;
  std::map<EtPair, std::vector<EventPair>> lists_;
  std::uint64_t pairs_read_ = 0;
};

/// Traces holding every prune pair. When the prune set is empty because
/// or-alternatives disagree, a trace qualifies if it holds every pair of at
/// least one alternative. Returns the empty set when no pair constrains the
/// query at all; callers route such patterns through SingleTable instead.
std::set<TraceId> prune(const Store& store, const PairSets& sets, std::optional<TimeWindow> window,
                        PairListCache* cache = nullptr);

/// Traces in which every mandatory position of some alternative has an event
/// (SingleTable lookup). Used for patterns without any et-pair and for
/// explanation candidates.
std::set<TraceId> candidates_by_types(const Store& store, const std::vector<QueryEvent>& pattern,
                                      std::optional<TimeWindow> window, bool require_all_types = false);

/// Which pairs to fetch, or whether to read whole traces, for a query.
struct FetchPlan {
  bool from_sequences = false;
  std::set<EtPair> pairs;
};

FetchPlan plan_fetch(const Store& store, const PairSets& sets, const Query& q);

/// Streams for the candidates, ordered by trace id, each restricted to the
/// query's event types and to the BETWEEN window.
std::vector<CandidateStream> assemble_streams(const Store& store, const std::set<TraceId>& candidates,
                                              const PairSets& sets, const Query& q, PairListCache* cache = nullptr);

/// One merged pseudo-trace per group, positions renumbered in merged order.
std::vector<CandidateStream> assemble_group_streams(const Store& store, const Query& q);

struct PairStats {
  EtPair pair;
  bool found = false;
  std::uint64_t total = 0;
  std::int64_t sum = 0;
  std::int64_t min = 0;
  std::int64_t max = 0;
  double mean = 0.0;
};

/// CountTable figures for each consecutive pair of a simple pattern.
std::vector<PairStats> stats_query(const Store& store, const std::vector<std::string>& pattern);

}  // namespace logsieve
