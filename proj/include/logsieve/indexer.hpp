#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "logsieve/errors.hpp"
#include "logsieve/model.hpp"
#include "logsieve/store.hpp"

namespace logsieve {

/// Raised when every event of a batch trace is already stored.
class AlreadyIndexedError : public InputError {
 public:
  using InputError::InputError;
};

struct IngestReport {
  std::uint64_t traces_touched = 0;
  std::uint64_t events_ingested = 0;
  std::uint64_t pairs_created = 0;
  std::uint64_t segments_rewritten = 0;
  double wall_time_ms = 0.0;
};

/// Events of one ingest run; may span many traces and continue traces stored earlier.
/// Positions are assigned by the indexer, so `Event::pos` is ignored.
using IngestBatch = std::vector<Event>;

using TsPair = std::pair<Timestamp, Timestamp>;
using IndexPair = std::pair<std::size_t, std::size_t>;

/// Greedy pair extraction over two strictly increasing timestamp lists, returning
/// indices into the input lists. Entries older than `ts_last` are dropped first.
/// Each first element pairs with the earliest later element of the second list
/// within `lookback_ms`; a new pair may only start after the previous pair's
/// second element, or at it when both lists are the same event type.
std::vector<IndexPair> extract_pair_indices(std::span<const Timestamp> ts_i, std::span<const Timestamp> ts_j,
                                            std::optional<Timestamp> ts_last, Timestamp lookback_ms, bool same_type);

std::vector<TsPair> extract_pairs(std::span<const Timestamp> ts_i, std::span<const Timestamp> ts_j,
                                  std::optional<Timestamp> ts_last, Timestamp lookback_ms, bool same_type);

using LastCheckedMap = std::map<EtPair, Timestamp>;
using TypedPair = std::pair<EtPair, EventPair>;

/// All new event-pairs of one trace. When `only_types` is given, et-pairs made of
/// two types outside it are skipped (they cannot yield anything new).
std::vector<TypedPair> extract_pairs_for_trace(const Trace& trace, const LastCheckedMap& last_checked,
                                               Timestamp lookback_ms,
                                               const std::set<std::string>* only_types = nullptr);

/// One trace's worth of extraction input for the batch kernels.
struct ExtractionJob {
  const Trace* trace = nullptr;
  const LastCheckedMap* last_checked = nullptr;
  const std::set<std::string>* only_types = nullptr;
};

/// Reference kernel: jobs processed in order on the calling thread.
std::vector<std::vector<TypedPair>> extract_jobs_serial(std::span<const ExtractionJob> jobs, Timestamp lookback_ms);
/// OpenMP kernel; output identical to extract_jobs_serial.
std::vector<std::vector<TypedPair>> extract_jobs_parallel(std::span<const ExtractionJob> jobs, Timestamp lookback_ms);

/// Partition interval of each pair, keyed on its second timestamp.
std::vector<Interval> assign_intervals(std::span<const EventPair> pairs, std::int64_t split_every_days,
                                       Timestamp origin_ts);

/// Folds the durations (second_ts - first_ts) of new pairs into the count table.
void update_counts(CountTable& counts, std::span<const TypedPair> new_pairs);

/// UTC midnight at or before `ts`.
Timestamp day_floor(Timestamp ts);

struct IngestOptions {
  bool parallel = true;
};

/// Appends a batch to the store: SequenceTable and SingleTable first, then the
/// new event-pairs of every touched trace into IndexTable, LastChecked and
/// CountTable. Acquires the store's writer lock for the duration.
/// Throws InputError (or AlreadyIndexedError) before writing anything if the batch is rejected.
IngestReport ingest(Store& store, const IngestBatch& batch, const IngestOptions& options = {});

}  // namespace logsieve
