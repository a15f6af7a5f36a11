#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "logsieve/model.hpp"

namespace logsieve {

enum class LogFormat { kCsv, kJsonl };

LogFormat parse_log_format(const std::string& s);

/// Integer milliseconds, or RFC 3339 ("2024-03-01T12:00:00Z", fractional
/// seconds and numeric offsets accepted). Throws InputError otherwise.
Timestamp parse_timestamp(std::string_view text);
/// RFC 3339 in UTC with millisecond precision.
std::string format_timestamp(Timestamp ts);

/// Reads rows of (trace_id, event_type, timestamp). CSV input needs a header
/// naming those three columns, in any order. Errors carry the 1-based line number.
std::vector<Event> read_log(std::istream& in, LogFormat format);
std::vector<Event> read_log_file(const std::string& path, LogFormat format);

void write_csv(std::ostream& out, const std::vector<Event>& events);

}  // namespace logsieve
