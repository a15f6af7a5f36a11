#include "segment_codec.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "logsieve/errors.hpp"

namespace logsieve::codec {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'V', 'G'};

std::string deflate_bytes(std::string_view raw) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::string out(bound, '\0');
  const int rc = compress2(reinterpret_cast<Bytef*>(out.data()), &bound, reinterpret_cast<const Bytef*>(raw.data()),
                           static_cast<uLong>(raw.size()), Z_BEST_SPEED);
  if (rc != Z_OK) throw Error("zlib compress failed");
  out.resize(bound);
  return out;
}

std::string inflate_bytes(std::string_view packed, std::uint64_t raw_size, const std::string& what) {
  std::string out(raw_size, '\0');
  uLongf len = static_cast<uLongf>(raw_size);
  const int rc = uncompress(reinterpret_cast<Bytef*>(out.data()), &len, reinterpret_cast<const Bytef*>(packed.data()),
                            static_cast<uLong>(packed.size()));
  if (rc != Z_OK || len != raw_size) throw CorruptionError(what + ": deflate stream is damaged");
  return out;
}

// Sorted, de-duplicated dictionary of type names with index lookup.
struct Dictionary {
  std::vector<std::string> names;
  std::map<std::string, std::uint32_t, std::less<>> index;

  void add(const std::string& s) { index.emplace(s, 0); }
  void freeze() {
    names.clear();
    for (auto& [name, idx] : index) {
      idx = static_cast<std::uint32_t>(names.size());
      names.push_back(name);
    }
  }
  std::uint32_t at(const std::string& s) const { return index.at(s); }

  std::string encode() const {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(names.size()));
    for (const auto& n : names) w.str(n);
    return w.take();
  }
};

std::vector<std::string> decode_dictionary(std::string_view rec) {
  ByteReader r(rec);
  const auto n = r.u32();
  std::vector<std::string> out;
  out.reserve(n);
  for (std::uint32_t k = 0; k < n; ++k) out.emplace_back(r.str());
  return out;
}

const std::string& dict_at(const std::vector<std::string>& dict, std::uint32_t idx) {
  if (idx >= dict.size()) throw CorruptionError("segment references unknown dictionary entry");
  return dict[idx];
}

}  // namespace

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

std::string_view ByteReader::str() {
  const auto n = u32();
  return bytes(n);
}

std::string_view ByteReader::bytes(std::size_t n) {
  if (data_.size() - off_ < n) throw CorruptionError("segment record truncated");
  auto out = data_.substr(off_, n);
  off_ += n;
  return out;
}

std::uint64_t ByteReader::get(int n) {
  if (data_.size() - off_ < static_cast<std::size_t>(n)) throw CorruptionError("segment record truncated");
  std::uint64_t v = 0;
  for (int k = 0; k < n; ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[off_ + k])) << (8 * k);
  off_ += n;
  return v;
}

void SegmentBuilder::add(std::string_view record) {
  body_.u32(static_cast<std::uint32_t>(record.size()));
  body_.bytes(record);
  ++count_;
}

std::string SegmentBuilder::finish(Compression compression) {
  ByteWriter out;
  out.bytes(std::string_view(kMagic, 4));
  out.u16(kFormatVersion);
  out.u8(static_cast<std::uint8_t>(table_));
  out.u8(compression == Compression::kDeflate ? 1 : 0);
  out.u64(count_);
  const auto& body = body_.buffer();
  if (compression == Compression::kDeflate) {
    out.u64(body.size());
    out.bytes(deflate_bytes(body));
  } else {
    out.bytes(body);
  }
  return out.take();
}

SegmentView parse_segment(std::string bytes, Table expected, const std::string& what) {
  if (bytes.size() < kHeaderSize || !std::equal(kMagic, kMagic + 4, bytes.begin()))
    throw CorruptionError(what + ": not a segment file");
  ByteReader header(std::string_view(bytes).substr(4, kHeaderSize - 4));
  const auto version = header.u16();
  const auto table = header.u8();
  const auto comp = header.u8();
  const auto count = header.u64();
  if (version != kFormatVersion) throw CorruptionError(what + ": unsupported segment version");
  if (table != static_cast<std::uint8_t>(expected)) throw CorruptionError(what + ": wrong table kind");
  if (comp > 1) throw CorruptionError(what + ": unknown compression");

  SegmentView view;
  view.table = expected;
  view.compression = comp == 1 ? Compression::kDeflate : Compression::kNone;
  if (view.compression == Compression::kDeflate) {
    ByteReader r(std::string_view(bytes).substr(kHeaderSize));
    const auto raw = r.u64();
    view.body = std::make_unique<std::string>(inflate_bytes(std::string_view(bytes).substr(kHeaderSize + 8), raw, what));
  } else {
    bytes.erase(0, kHeaderSize);
    view.body = std::make_unique<std::string>(std::move(bytes));
  }
  ByteReader r(*view.body);
  view.records.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = r.u32();
    view.records.push_back(r.bytes(len));
  }
  if (!r.done()) throw CorruptionError(what + ": trailing bytes after last record");
  return view;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptionError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

// -- IndexTable ---------------------------------------------------------------

std::string encode(const IndexSegment& seg, StoreMode mode, Compression c) {
  SegmentBuilder b(Table::kIndex);
  for (const auto& [second, pairs] : seg.entries) {
    ByteWriter w;
    w.str(second);
    w.u32(static_cast<std::uint32_t>(pairs.size()));
    for (const auto& p : pairs) {
      w.u64(p.trace_id);
      if (mode == StoreMode::kTs) {
        w.i64(p.first_ts);
        w.i64(p.second_ts);
      } else {
        w.i64(p.first_pos);
        w.i64(p.second_pos);
      }
    }
    b.add(w.buffer());
  }
  return b.finish(c);
}

namespace {

std::vector<EventPair> decode_pairs(ByteReader& r, StoreMode mode) {
  const auto n = r.u32();
  std::vector<EventPair> out(n);
  for (auto& p : out) {
    p.trace_id = r.u64();
    const auto a = r.i64();
    const auto b = r.i64();
    if (mode == StoreMode::kTs) {
      p.first_ts = a;
      p.second_ts = b;
    } else {
      p.first_pos = a;
      p.second_pos = b;
    }
  }
  return out;
}

}  // namespace

IndexSegment decode_index(const SegmentView& view, StoreMode mode, Interval iv, std::string first_type) {
  IndexSegment seg{iv, std::move(first_type), {}};
  for (auto rec : view.records) {
    ByteReader r(rec);
    std::string second(r.str());
    seg.entries.emplace(std::move(second), decode_pairs(r, mode));
  }
  return seg;
}

std::vector<EventPair> decode_index_entry(const SegmentView& view, StoreMode mode, std::string_view second_type) {
  for (auto rec : view.records) {
    ByteReader r(rec);
    if (r.str() != second_type) continue;
    return decode_pairs(r, mode);
  }
  return {};
}

// -- SingleTable ----------------------------------------------------------------

std::string encode(const SingleSegment& seg, Compression c) {
  SegmentBuilder b(Table::kSingle);
  std::size_t k = 0;
  while (k < seg.entries.size()) {
    const TraceId trace = seg.entries[k].trace_id;
    std::size_t end = k;
    while (end < seg.entries.size() && seg.entries[end].trace_id == trace) ++end;
    ByteWriter w;
    w.u64(trace);
    w.u32(static_cast<std::uint32_t>(end - k));
    for (; k < end; ++k) {
      w.i64(seg.entries[k].ts);
      w.i64(seg.entries[k].pos);
    }
    b.add(w.buffer());
  }
  return b.finish(c);
}

SingleSegment decode_single(const SegmentView& view, Interval iv, std::string type) {
  SingleSegment seg{iv, std::move(type), {}};
  for (auto rec : view.records) {
    ByteReader r(rec);
    const auto trace = r.u64();
    const auto n = r.u32();
    for (std::uint32_t k = 0; k < n; ++k) {
      SingleEntry e;
      e.trace_id = trace;
      e.ts = r.i64();
      e.pos = r.i64();
      seg.entries.push_back(e);
    }
  }
  return seg;
}

// -- SequenceTable -----------------------------------------------------------------

std::string encode(const SequenceSegment& seg, Compression c) {
  Dictionary dict;
  for (const auto& [id, trace] : seg.traces)
    for (const auto& ev : trace.events) dict.add(ev.event_type);
  dict.freeze();
  SegmentBuilder b(Table::kSequence);
  b.add(dict.encode());
  for (const auto& [id, trace] : seg.traces) {
    ByteWriter w;
    w.u64(id);
    w.u32(static_cast<std::uint32_t>(trace.events.size()));
    for (const auto& ev : trace.events) {
      w.u32(dict.at(ev.event_type));
      w.i64(ev.ts);
    }
    b.add(w.buffer());
  }
  return b.finish(c);
}

SequenceSegment decode_sequence(const SegmentView& view, TraceRange range) {
  SequenceSegment seg{range, {}};
  if (view.records.empty()) return seg;
  const auto dict = decode_dictionary(view.records.front());
  for (std::size_t k = 1; k < view.records.size(); ++k) {
    ByteReader r(view.records[k]);
    Trace t;
    t.trace_id = r.u64();
    const auto n = r.u32();
    t.events.reserve(n);
    for (std::uint32_t e = 0; e < n; ++e) {
      Event ev;
      ev.trace_id = t.trace_id;
      ev.event_type = dict_at(dict, r.u32());
      ev.ts = r.i64();
      ev.pos = static_cast<Position>(e + 1);
      t.events.push_back(std::move(ev));
    }
    const auto id = t.trace_id;
    seg.traces.emplace(id, std::move(t));
  }
  return seg;
}

// -- LastChecked -----------------------------------------------------------------------

std::string encode(const LastCheckedSegment& seg, Compression c) {
  Dictionary dict;
  // Regroup by trace so each record carries one trace's watermarks.
  std::map<TraceId, std::vector<std::pair<const EtPair*, Timestamp>>> by_trace;
  for (const auto& [key, ts] : seg.entries) {
    dict.add(key.pair.first);
    dict.add(key.pair.second);
    by_trace[key.trace_id].emplace_back(&key.pair, ts);
  }
  dict.freeze();
  SegmentBuilder b(Table::kLastChecked);
  b.add(dict.encode());
  for (const auto& [trace, items] : by_trace) {
    ByteWriter w;
    w.u64(trace);
    w.u32(static_cast<std::uint32_t>(items.size()));
    for (const auto& [pair, ts] : items) {
      w.u32(dict.at(pair->first));
      w.u32(dict.at(pair->second));
      w.i64(ts);
    }
    b.add(w.buffer());
  }
  return b.finish(c);
}

LastCheckedSegment decode_last_checked(const SegmentView& view, TraceRange range) {
  LastCheckedSegment seg{range, {}};
  if (view.records.empty()) return seg;
  const auto dict = decode_dictionary(view.records.front());
  for (std::size_t k = 1; k < view.records.size(); ++k) {
    ByteReader r(view.records[k]);
    const auto trace = r.u64();
    const auto n = r.u32();
    for (std::uint32_t e = 0; e < n; ++e) {
      LastCheckedKey key;
      key.pair.first = dict_at(dict, r.u32());
      key.pair.second = dict_at(dict, r.u32());
      key.trace_id = trace;
      seg.entries.emplace(std::move(key), r.i64());
    }
  }
  return seg;
}

// -- CountTable --------------------------------------------------------------------------

std::string encode(const CountTable& counts, Compression c) {
  Dictionary dict;
  for (const auto& [pair, rec] : counts) {
    dict.add(pair.first);
    dict.add(pair.second);
  }
  dict.freeze();
  SegmentBuilder b(Table::kCount);
  b.add(dict.encode());
  for (const auto& [pair, rec] : counts) {
    ByteWriter w;
    w.u32(dict.at(pair.first));
    w.u32(dict.at(pair.second));
    w.u64(rec.total_completions);
    w.i64(rec.sum_durations);
    w.i64(rec.min_duration);
    w.i64(rec.max_duration);
    b.add(w.buffer());
  }
  return b.finish(c);
}

CountTable decode_counts(const SegmentView& view) {
  CountTable out;
  if (view.records.empty()) return out;
  const auto dict = decode_dictionary(view.records.front());
  for (std::size_t k = 1; k < view.records.size(); ++k) {
    ByteReader r(view.records[k]);
    CountRecord rec;
    rec.pair.first = dict_at(dict, r.u32());
    rec.pair.second = dict_at(dict, r.u32());
    rec.total_completions = r.u64();
    rec.sum_durations = r.i64();
    rec.min_duration = r.i64();
    rec.max_duration = r.i64();
    auto key = rec.pair;
    out.emplace(std::move(key), std::move(rec));
  }
  return out;
}

}  // namespace logsieve::codec
