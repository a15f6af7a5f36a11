#include "logsieve/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "logsieve/errors.hpp"
#include "segment_codec.hpp"

namespace logsieve {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";

Timestamp floor_div(Timestamp a, Timestamp b) {
  Timestamp q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::string interval_name(const Interval& iv) { return std::to_string(iv.start) + "_" + std::to_string(iv.end); }

std::string range_name(const TraceRange& r) { return std::to_string(r.lo) + "_" + std::to_string(r.hi); }

template <typename T>
std::optional<std::pair<T, T>> parse_span(const std::string& name) {
  const auto sep = name.find('_', 1);
  if (sep == std::string::npos) return std::nullopt;
  try {
    std::size_t used = 0;
    T a{}, b{};
    if constexpr (std::is_signed_v<T>) {
      a = std::stoll(name.substr(0, sep), &used);
      if (used != sep) return std::nullopt;
      const auto rest = name.substr(sep + 1);
      b = std::stoll(rest, &used);
      if (used != rest.size()) return std::nullopt;
    } else {
      a = std::stoull(name.substr(0, sep), &used);
      if (used != sep) return std::nullopt;
      const auto rest = name.substr(sep + 1);
      b = std::stoull(rest, &used);
      if (used != rest.size()) return std::nullopt;
    }
    return std::make_pair(a, b);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<Interval> list_intervals(const fs::path& dir) {
  std::vector<Interval> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    if (auto span = parse_span<Timestamp>(entry.path().filename().string())) out.push_back({span->first, span->second});
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<TraceRange> list_ranges(const fs::path& dir) {
  std::vector<TraceRange> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".seg") continue;
    if (auto span = parse_span<TraceId>(entry.path().stem().string())) out.push_back({span->first, span->second});
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> list_types(const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".seg") continue;
    out.push_back(decode_name(entry.path().stem().string()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<codec::SegmentView> load_view(const fs::path& path, codec::Table table) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return std::nullopt;
  return codec::parse_segment(codec::read_file(path.string()), table, path.string());
}

json config_to_json(const StoreConfig& c, std::optional<Timestamp> origin) {
  json j;
  j["log_name"] = c.log_name;
  j["mode"] = to_string(c.mode);
  j["split_every_days"] = c.split_every_days;
  j["trace_split"] = c.trace_split;
  j["lookback"] = c.lookback;
  j["compression"] = to_string(c.compression);
  j["origin_ts"] = origin ? json(*origin) : json(nullptr);
  j["format_version"] = codec::kFormatVersion;
  return j;
}

}  // namespace

std::string to_string(StoreMode mode) { return mode == StoreMode::kPos ? "pos" : "ts"; }
std::string to_string(Compression c) { return c == Compression::kDeflate ? "deflate" : "none"; }

StoreMode parse_store_mode(const std::string& s) {
  if (s == "pos") return StoreMode::kPos;
  if (s == "ts") return StoreMode::kTs;
  throw ConfigError("unknown store mode '" + s + "' (expected pos or ts)");
}

Compression parse_compression(const std::string& s) {
  if (s == "none") return Compression::kNone;
  if (s == "deflate") return Compression::kDeflate;
  throw ConfigError("unknown compression '" + s + "' (expected none or deflate)");
}

void StoreConfig::validate() const {
  if (log_name.empty() || log_name.find('/') != std::string::npos || log_name == "." || log_name == "..")
    throw ConfigError("invalid log name '" + log_name + "'");
  if (split_every_days < 1) throw ConfigError("split_every_days must be >= 1");
  if (trace_split < 1) throw ConfigError("trace_split must be >= 1");
  if (lookback < 1) throw ConfigError("lookback must be >= 1");
}

// -- WriterLock ---------------------------------------------------------------

WriterLock::WriterLock(const fs::path& log_dir) {
  const auto path = (log_dir / "LOCK").string();
  fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error("cannot open lock file " + path + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw LockError("another writer holds " + path);
  }
}

WriterLock::~WriterLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

WriterLock::WriterLock(WriterLock&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

// -- name encoding ---------------------------------------------------------------

std::string encode_name(const std::string& name) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char ch : name) {
    if (std::isalnum(ch) || ch == '_' || ch == '-') {
      out.push_back(static_cast<char>(ch));
    } else {
      out.push_back('%');
      out.push_back(kHex[ch >> 4]);
      out.push_back(kHex[ch & 0xf]);
    }
  }
  return out;
}

std::string decode_name(const std::string& encoded) {
  std::string out;
  for (std::size_t k = 0; k < encoded.size(); ++k) {
    if (encoded[k] == '%' && k + 2 < encoded.size()) {
      out.push_back(static_cast<char>(std::stoi(encoded.substr(k + 1, 2), nullptr, 16)));
      k += 2;
    } else {
      out.push_back(encoded[k]);
    }
  }
  return out;
}

// -- Store ---------------------------------------------------------------------------

Store::Store(fs::path dir, StoreConfig config, std::optional<Timestamp> origin)
    : dir_(std::move(dir)), config_(std::move(config)), origin_(origin) {}

bool Store::exists(const fs::path& root, const std::string& log_name) {
  return fs::is_regular_file(root / log_name / kManifest);
}

Store Store::open(const fs::path& root, const std::string& log_name) {
  const auto dir = root / log_name;
  const auto manifest = dir / kManifest;
  if (!fs::is_regular_file(manifest)) throw CorruptionError("no log database '" + log_name + "' under " + root.string());
  json j;
  try {
    j = json::parse(codec::read_file(manifest.string()));
    StoreConfig c;
    c.log_name = j.at("log_name").get<std::string>();
    c.mode = parse_store_mode(j.at("mode").get<std::string>());
    c.split_every_days = j.at("split_every_days").get<std::int64_t>();
    c.trace_split = j.at("trace_split").get<std::uint64_t>();
    c.lookback = j.at("lookback").get<std::int64_t>();
    c.compression = parse_compression(j.at("compression").get<std::string>());
    c.validate();
    std::optional<Timestamp> origin;
    if (j.contains("origin_ts") && !j["origin_ts"].is_null()) origin = j["origin_ts"].get<Timestamp>();
    return Store(dir, std::move(c), origin);
  } catch (const json::exception& e) {
    throw CorruptionError("manifest " + manifest.string() + " is malformed: " + e.what());
  } catch (const ConfigError& e) {
    throw CorruptionError("manifest " + manifest.string() + " is invalid: " + e.what());
  }
}

Store Store::open_or_create(const fs::path& root, const StoreConfig& config) {
  config.validate();
  if (exists(root, config.log_name)) {
    Store s = open(root, config.log_name);
    const auto& have = s.config();
    auto mismatch = [&](const char* field, const std::string& a, const std::string& b) {
      throw ConfigError(std::string("store '") + config.log_name + "' was created with " + field + "=" + a +
                        ", refusing " + field + "=" + b);
    };
    if (have.mode != config.mode) mismatch("mode", to_string(have.mode), to_string(config.mode));
    if (have.lookback != config.lookback)
      mismatch("lookback", std::to_string(have.lookback), std::to_string(config.lookback));
    if (have.split_every_days != config.split_every_days)
      mismatch("split_every_days", std::to_string(have.split_every_days), std::to_string(config.split_every_days));
    if (have.trace_split != config.trace_split)
      mismatch("trace_split", std::to_string(have.trace_split), std::to_string(config.trace_split));
    if (have.compression != config.compression)
      mismatch("compression", to_string(have.compression), to_string(config.compression));
    return s;
  }
  const auto dir = root / config.log_name;
  fs::create_directories(dir);
  Store s(dir, config, std::nullopt);
  s.write_manifest();
  return s;
}

void Store::write_manifest() const {
  const auto target = dir_ / kManifest;
  const auto tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << config_to_json(config_, origin_).dump(2) << '\n';
    if (!out) throw Error("cannot write " + tmp);
  }
  fs::rename(tmp, target);
}

void Store::set_origin(Timestamp origin) {
  if (origin_) throw ContractError("interval origin is already set");
  origin_ = origin;
  write_manifest();
}

Interval Store::interval_for(Timestamp ts) const {
  if (!origin_) throw ContractError("store has no interval origin yet");
  const Timestamp width = config_.split_ms();
  const Timestamp k = floor_div(ts - *origin_, width);
  const Timestamp start = *origin_ + k * width;
  return {start, start + width};
}

TraceRange Store::range_for(TraceId id) const {
  const TraceId lo = id / config_.trace_split * config_.trace_split;
  return {lo, lo + config_.trace_split};
}

fs::path Store::index_path(const Interval& iv, const std::string& first_type) const {
  return dir_ / "index" / interval_name(iv) / (encode_name(first_type) + ".seg");
}
fs::path Store::single_path(const Interval& iv, const std::string& type) const {
  return dir_ / "single" / interval_name(iv) / (encode_name(type) + ".seg");
}
fs::path Store::sequence_path(const TraceRange& r) const { return dir_ / "seq" / (range_name(r) + ".seg"); }
fs::path Store::last_checked_path(const TraceRange& r) const { return dir_ / "last" / (range_name(r) + ".seg"); }
fs::path Store::count_path() const { return dir_ / "count" / "all.seg"; }

std::vector<Interval> Store::index_intervals() const { return list_intervals(dir_ / "index"); }
std::vector<Interval> Store::single_intervals() const { return list_intervals(dir_ / "single"); }
std::vector<TraceRange> Store::sequence_ranges() const { return list_ranges(dir_ / "seq"); }
std::vector<TraceRange> Store::last_checked_ranges() const { return list_ranges(dir_ / "last"); }

std::vector<std::string> Store::index_first_types(const Interval& iv) const {
  return list_types(dir_ / "index" / interval_name(iv));
}
std::vector<std::string> Store::single_types(const Interval& iv) const {
  return list_types(dir_ / "single" / interval_name(iv));
}

std::optional<IndexSegment> Store::load_index_segment(const Interval& iv, const std::string& first_type) const {
  auto view = load_view(index_path(iv, first_type), codec::Table::kIndex);
  if (!view) return std::nullopt;
  return codec::decode_index(*view, config_.mode, iv, first_type);
}

std::optional<SingleSegment> Store::load_single_segment(const Interval& iv, const std::string& type) const {
  auto view = load_view(single_path(iv, type), codec::Table::kSingle);
  if (!view) return std::nullopt;
  return codec::decode_single(*view, iv, type);
}

std::optional<SequenceSegment> Store::load_sequence_segment(const TraceRange& range) const {
  auto view = load_view(sequence_path(range), codec::Table::kSequence);
  if (!view) return std::nullopt;
  return codec::decode_sequence(*view, range);
}

std::optional<LastCheckedSegment> Store::load_last_checked_segment(const TraceRange& range) const {
  auto view = load_view(last_checked_path(range), codec::Table::kLastChecked);
  if (!view) return std::nullopt;
  return codec::decode_last_checked(*view, range);
}

std::vector<EventPair> Store::read_inverted_list(const EtPair& et, std::optional<TimeWindow> window) const {
  std::vector<EventPair> out;
  for (const auto& iv : index_intervals()) {
    if (window && !window->intersects(iv)) continue;
    auto view = load_view(index_path(iv, et.first), codec::Table::kIndex);
    if (!view) continue;
    auto pairs = codec::decode_index_entry(*view, config_.mode, et.second);
    out.insert(out.end(), pairs.begin(), pairs.end());
  }
  const bool by_ts = config_.mode == StoreMode::kTs;
  std::stable_sort(out.begin(), out.end(), [by_ts](const EventPair& a, const EventPair& b) {
    if (a.trace_id != b.trace_id) return a.trace_id < b.trace_id;
    return by_ts ? a.second_ts < b.second_ts : a.second_pos < b.second_pos;
  });
  return out;
}

std::map<TraceId, Trace> Store::read_sequences(std::span<const TraceId> ids) const {
  std::map<TraceRange, std::vector<TraceId>> by_range;
  for (TraceId id : ids) by_range[range_for(id)].push_back(id);
  std::map<TraceId, Trace> out;
  for (auto& [range, members] : by_range) {
    auto seg = load_sequence_segment(range);
    if (!seg) continue;
    for (TraceId id : members) {
      auto it = seg->traces.find(id);
      if (it != seg->traces.end()) out.emplace(id, std::move(it->second));
    }
  }
  return out;
}

std::vector<SingleEntry> Store::read_single(const std::string& type, std::optional<TimeWindow> window) const {
  std::vector<SingleEntry> out;
  for (const auto& iv : single_intervals()) {
    if (window && !window->intersects(iv)) continue;
    auto seg = load_single_segment(iv, type);
    if (!seg) continue;
    out.insert(out.end(), seg->entries.begin(), seg->entries.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::set<std::string> Store::known_types() const {
  std::set<std::string> out;
  for (const auto& iv : single_intervals()) {
    for (auto& t : single_types(iv)) out.insert(std::move(t));
  }
  return out;
}

CountTable Store::read_counts() const {
  auto view = load_view(count_path(), codec::Table::kCount);
  if (!view) return {};
  return codec::decode_counts(*view);
}

std::optional<CountRecord> Store::read_count(const EtPair& et) const {
  auto counts = read_counts();
  auto it = counts.find(et);
  if (it == counts.end()) return std::nullopt;
  return it->second;
}

void Store::replace_file(const fs::path& target, const std::string& bytes) {
  fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("cannot write " + tmp.string());
  }
  if (rewrite_hook_) rewrite_hook_(tmp);
  fs::rename(tmp, target);
}

void Store::rewrite_segment(const IndexSegment& seg) {
  replace_file(index_path(seg.interval, seg.first_type), codec::encode(seg, config_.mode, config_.compression));
}

void Store::rewrite_segment(const SingleSegment& seg) {
  replace_file(single_path(seg.interval, seg.event_type), codec::encode(seg, config_.compression));
}

void Store::rewrite_segment(const SequenceSegment& seg) {
  replace_file(sequence_path(seg.range), codec::encode(seg, config_.compression));
}

void Store::rewrite_segment(const LastCheckedSegment& seg) {
  replace_file(last_checked_path(seg.range), codec::encode(seg, config_.compression));
}

void Store::rewrite_counts(const CountTable& counts) { replace_file(count_path(), codec::encode(counts, config_.compression)); }

}  // namespace logsieve
