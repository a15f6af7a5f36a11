#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "logsieve/model.hpp"
#include "logsieve/stream.hpp"

namespace logsieve {

/// One positive pattern position.
struct CompiledState {
  int pattern_pos = 0;  // 1-based position in the original pattern
  std::vector<int> types;  // accepted type ids
  bool kleene = false;
  bool optional = false;  // Kleene*
  /// Negated type ids guarding the edge that enters this state.
  std::vector<int> guards_before;
};

/// A constraint rewritten against state indices.
struct CompiledConstraint {
  Constraint source;
  int state_i = 0;
  int state_j = 0;
};

/// NFA form of a pattern: positive states in order, negations as edge guards,
/// or-alternatives as multi-type predicates, event types interned to dense ids.
struct CompiledPattern {
  std::vector<CompiledState> states;
  std::vector<CompiledConstraint> constraints;
  std::map<std::string, int> type_ids;
  std::vector<std::string> type_names;

  int type_id(const std::string& type) const {
    auto it = type_ids.find(type);
    return it == type_ids.end() ? -1 : it->second;
  }
  bool accepts(int state, int type) const;
};

/// Throws QueryError on constraints that touch negated or Kleene* positions.
CompiledPattern compile(const std::vector<QueryEvent>& pattern, const std::vector<Constraint>& constraints);

enum class Strategy { kStnmConsume, kSkipTillAnyMatch };

struct MatchPolicy {
  Strategy strategy = Strategy::kStnmConsume;
  bool return_all = false;
  /// Upper bound on enumerated matches for skip-till-any-match.
  std::size_t max_matches = 10'000;
};

/// Occurrences of the pattern in one stream.
///
/// Skip-till-next-match with consume: the earliest-starting occurrence is
/// found first (ties go to the earliest candidate at each state, Kleene
/// positions prefer their greedy extent). With return_all, the search restarts
/// after that occurrence's last event and the final list is reduced to a
/// pairwise non-overlapping subset.
std::vector<Occurrence> match_stream(const CompiledPattern& cp, const CandidateStream& stream,
                                     const MatchPolicy& policy = {});

/// True when `occ` satisfies `c`; time uses ts, gap uses pos, Kleene
/// positions anchor on their first event. Throws ContractError when the
/// occurrence lacks either endpoint.
bool check_constraint(const Constraint& c, const Occurrence& occ);

/// Greedy interval scheduling by ascending last-event key; deterministic.
std::vector<Occurrence> select_non_overlapping(std::vector<Occurrence> occs, bool by_position = false);

/// Reference kernel: streams matched one after another.
std::vector<std::vector<Occurrence>> match_streams_serial(const CompiledPattern& cp,
                                                          std::span<const CandidateStream> streams,
                                                          const MatchPolicy& policy);
/// OpenMP kernel; output identical to match_streams_serial.
std::vector<std::vector<Occurrence>> match_streams_parallel(const CompiledPattern& cp,
                                                            std::span<const CandidateStream> streams,
                                                            const MatchPolicy& policy);

}  // namespace logsieve
