#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "logsieve/model.hpp"

namespace logsieve {

enum class StoreMode { kPos, kTs };
enum class Compression { kNone, kDeflate };

std::string to_string(StoreMode mode);
std::string to_string(Compression c);
StoreMode parse_store_mode(const std::string& s);
Compression parse_compression(const std::string& s);

struct StoreConfig {
  std::string log_name = "main";
  StoreMode mode = StoreMode::kTs;
  std::int64_t split_every_days = 30;
  std::uint64_t trace_split = 10'000;
  /// Maximum separation of the two events of an event-pair, in days.
  std::int64_t lookback = 30;
  Compression compression = Compression::kNone;

  Timestamp lookback_ms() const { return lookback * kMsPerDay; }
  Timestamp split_ms() const { return split_every_days * kMsPerDay; }
  /// Throws ConfigError when a field is out of range.
  void validate() const;

  friend bool operator==(const StoreConfig&, const StoreConfig&) = default;
};

/// Half-open time interval [start, end).
struct Interval {
  Timestamp start = 0;
  Timestamp end = 0;

  bool contains(Timestamp ts) const { return start <= ts && ts < end; }
  friend auto operator<=>(const Interval&, const Interval&) = default;
};

/// Inclusive query window [from, to] (the BETWEEN clause).
struct TimeWindow {
  Timestamp from = 0;
  Timestamp to = 0;

  bool contains(Timestamp ts) const { return from <= ts && ts <= to; }
  bool intersects(const Interval& iv) const { return iv.start <= to && iv.end > from; }
  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

/// Half-open trace id range [lo, hi).
struct TraceRange {
  TraceId lo = 0;
  TraceId hi = 0;

  bool contains(TraceId id) const { return lo <= id && id < hi; }
  friend auto operator<=>(const TraceRange&, const TraceRange&) = default;
};

struct SingleEntry {
  TraceId trace_id = 0;
  Timestamp ts = 0;
  Position pos = 0;

  friend auto operator<=>(const SingleEntry&, const SingleEntry&) = default;
};

struct CountRecord {
  EtPair pair;
  std::uint64_t total_completions = 0;
  std::int64_t sum_durations = 0;
  std::int64_t min_duration = 0;
  std::int64_t max_duration = 0;

  friend bool operator==(const CountRecord&, const CountRecord&) = default;
};

struct LastCheckedKey {
  EtPair pair;
  TraceId trace_id = 0;

  friend auto operator<=>(const LastCheckedKey&, const LastCheckedKey&) = default;
  friend bool operator==(const LastCheckedKey&, const LastCheckedKey&) = default;
};

/// IndexTable partition: one time interval, one first event type.
struct IndexSegment {
  Interval interval;
  std::string first_type;
  /// second event type -> event-pairs sorted by (trace_id, second, first).
  std::map<std::string, std::vector<EventPair>> entries;

  friend bool operator==(const IndexSegment&, const IndexSegment&) = default;
};

/// SingleTable partition: one time interval, one event type.
struct SingleSegment {
  Interval interval;
  std::string event_type;
  std::vector<SingleEntry> entries;  // sorted by (trace_id, ts)

  friend bool operator==(const SingleSegment&, const SingleSegment&) = default;
};

struct SequenceSegment {
  TraceRange range;
  std::map<TraceId, Trace> traces;

  friend bool operator==(const SequenceSegment&, const SequenceSegment&) = default;
};

struct LastCheckedSegment {
  TraceRange range;
  std::map<LastCheckedKey, Timestamp> entries;

  friend bool operator==(const LastCheckedSegment&, const LastCheckedSegment&) = default;
};

using CountTable = std::map<EtPair, CountRecord>;

/// Exclusive writer lock on a log database, released on destruction or process exit.
class WriterLock {
 public:
  explicit WriterLock(const std::filesystem::path& log_dir);
  ~WriterLock();
  WriterLock(const WriterLock&) = delete;
  WriterLock& operator=(const WriterLock&) = delete;
  WriterLock(WriterLock&& other) noexcept;
  WriterLock& operator=(WriterLock&&) = delete;

 private:
  int fd_ = -1;
};

/// Handle on one log database: the five tables as immutable segment files under
/// `<root>/<log_name>/`. Every rewrite replaces a whole file by write-then-rename,
/// so concurrent readers only ever see complete segments.
class Store {
 public:
  /// Opens an existing log database. Throws CorruptionError if the manifest is missing.
  static Store open(const std::filesystem::path& root, const std::string& log_name);
  /// Opens the log database named by `config.log_name`, creating it when absent.
  /// Throws ConfigError if an existing manifest disagrees with `config`.
  static Store open_or_create(const std::filesystem::path& root, const StoreConfig& config);
  static bool exists(const std::filesystem::path& root, const std::string& log_name);

  const StoreConfig& config() const { return config_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::optional<Timestamp> origin() const { return origin_; }
  /// Records the interval alignment origin; only allowed once.
  void set_origin(Timestamp origin);

  /// Interval of the time partition containing `ts`. Requires an origin.
  Interval interval_for(Timestamp ts) const;
  TraceRange range_for(TraceId id) const;

  // -- readers -------------------------------------------------------------
  std::vector<EventPair> read_inverted_list(const EtPair& et, std::optional<TimeWindow> window = {}) const;
  std::map<TraceId, Trace> read_sequences(std::span<const TraceId> ids) const;
  /// SingleTable entries of `type` over all intervals intersecting `window`,
  /// sorted by (trace_id, ts).
  std::vector<SingleEntry> read_single(const std::string& type, std::optional<TimeWindow> window = {}) const;
  std::set<std::string> known_types() const;
  CountTable read_counts() const;
  std::optional<CountRecord> read_count(const EtPair& et) const;

  std::vector<Interval> index_intervals() const;
  std::vector<Interval> single_intervals() const;
  std::vector<TraceRange> sequence_ranges() const;
  std::vector<TraceRange> last_checked_ranges() const;
  std::vector<std::string> index_first_types(const Interval& iv) const;
  std::vector<std::string> single_types(const Interval& iv) const;

  std::optional<IndexSegment> load_index_segment(const Interval& iv, const std::string& first_type) const;
  std::optional<SingleSegment> load_single_segment(const Interval& iv, const std::string& type) const;
  std::optional<SequenceSegment> load_sequence_segment(const TraceRange& range) const;
  std::optional<LastCheckedSegment> load_last_checked_segment(const TraceRange& range) const;

  // -- writers (indexer only) ---------------------------------------------
  void rewrite_segment(const IndexSegment& seg);
  void rewrite_segment(const SingleSegment& seg);
  void rewrite_segment(const SequenceSegment& seg);
  void rewrite_segment(const LastCheckedSegment& seg);
  void rewrite_counts(const CountTable& counts);

  std::filesystem::path index_path(const Interval& iv, const std::string& first_type) const;
  std::filesystem::path single_path(const Interval& iv, const std::string& type) const;
  std::filesystem::path sequence_path(const TraceRange& range) const;
  std::filesystem::path last_checked_path(const TraceRange& range) const;
  std::filesystem::path count_path() const;

  /// Test hook invoked after the temporary file is complete and before the rename.
  /// Throwing from it simulates a crash at that point.
  void set_rewrite_hook(std::function<void(const std::filesystem::path& tmp)> hook) {
    rewrite_hook_ = std::move(hook);
  }

 private:
  Store(std::filesystem::path dir, StoreConfig config, std::optional<Timestamp> origin);
  void write_manifest() const;
  void replace_file(const std::filesystem::path& target, const std::string& bytes);

  std::filesystem::path dir_;
  StoreConfig config_;
  std::optional<Timestamp> origin_;
  std::function<void(const std::filesystem::path&)> rewrite_hook_;
};

/// Filesystem-safe encoding of an event type name (reversible).
std::string encode_name(const std::string& name);
std::string decode_name(const std::string& encoded);

}  // namespace logsieve
