#pragma once

// Binary segment file layout:
//   16-byte header: magic "LSVG" | u16 version | u8 table | u8 compression | u64 record count
//   body: records, each a u32 length followed by that many bytes. With deflate the
//   body is stored as u64 raw length + zlib stream of the uncompressed records.
// All integers are little-endian.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "logsieve/store.hpp"

namespace logsieve::codec {

enum class Table : std::uint8_t { kIndex = 1, kSingle = 2, kSequence = 3, kLastChecked = 4, kCount = 5 };

inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderSize = 16;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
  void str(std::string_view s);
  void bytes(std::string_view s) { buf_.append(s); }

  std::string& buffer() { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int k = 0; k < n; ++k) buf_.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
  }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(get(8)); }
  std::string_view str();
  std::string_view bytes(std::size_t n);
  bool done() const { return off_ == data_.size(); }

 private:
  std::uint64_t get(int n);
  std::string_view data_;
  std::size_t off_ = 0;
};

/// Accumulates length-prefixed records and produces the final file bytes.
class SegmentBuilder {
 public:
  explicit SegmentBuilder(Table table) : table_(table) {}
  void add(std::string_view record);
  std::string finish(Compression compression);

 private:
  Table table_;
  std::uint64_t count_ = 0;
  ByteWriter body_;
};

/// Parsed segment: header fields plus the raw (decompressed) records.
struct SegmentView {
  Table table{};
  Compression compression = Compression::kNone;
  std::unique_ptr<std::string> body;  // owns the record bytes; heap-held so views survive moves
  std::vector<std::string_view> records;
};

/// Throws CorruptionError on bad magic, version, table mismatch or truncation.
SegmentView parse_segment(std::string bytes, Table expected, const std::string& what);

std::string read_file(const std::string& path);

// Per-table record encodings.
std::string encode(const IndexSegment& seg, StoreMode mode, Compression c);
IndexSegment decode_index(const SegmentView& view, StoreMode mode, Interval iv, std::string first_type);
/// Pairs for a single second type without decoding the other records.
std::vector<EventPair> decode_index_entry(const SegmentView& view, StoreMode mode, std::string_view second_type);

std::string encode(const SingleSegment& seg, Compression c);
SingleSegment decode_single(const SegmentView& view, Interval iv, std::string type);

std::string encode(const SequenceSegment& seg, Compression c);
SequenceSegment decode_sequence(const SegmentView& view, TraceRange range);

std::string encode(const LastCheckedSegment& seg, Compression c);
LastCheckedSegment decode_last_checked(const SegmentView& view, TraceRange range);

std::string encode(const CountTable& counts, Compression c);
CountTable decode_counts(const SegmentView& view);

}  // namespace logsieve::codec
