#include "logsieve/logio.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>

#include "logsieve/errors.hpp"

namespace logsieve {
namespace {

// Proleptic Gregorian calendar date to days since 1970-01-01.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2);
}

bool parse_int(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (*b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc{} && p == e;
}

std::int64_t digits(std::string_view s, std::size_t at, std::size_t n) {
  if (at + n > s.size()) throw InputError("bad timestamp");
  std::int64_t v = 0;
  for (std::size_t k = at; k < at + n; ++k) {
    if (s[k] < '0' || s[k] > '9') throw InputError("bad timestamp");
    v = v * 10 + (s[k] - '0');
  }
  return v;
}

Timestamp parse_rfc3339(std::string_view s) {
  // YYYY-MM-DD[T ]HH:MM:SS[.fff][Z|±HH:MM]
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':')
    throw InputError("bad timestamp");
  const auto year = digits(s, 0, 4);
  const auto month = digits(s, 5, 2);
  const auto day = digits(s, 8, 2);
  const auto hour = digits(s, 11, 2);
  const auto minute = digits(s, 14, 2);
  const auto second = digits(s, 17, 2);
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60)
    throw InputError("bad timestamp");
  std::size_t at = 19;
  std::int64_t millis = 0;
  if (at < s.size() && s[at] == '.') {
    ++at;
    std::size_t n = 0;
    std::int64_t scale = 100;
    while (at < s.size() && s[at] >= '0' && s[at] <= '9') {
      millis += (s[at] - '0') * scale;
      scale /= 10;
      ++at;
      ++n;
    }
    if (n == 0) throw InputError("bad timestamp");
  }
  std::int64_t offset_min = 0;
  if (at == s.size()) throw InputError("timestamp lacks a time zone");
  if (s[at] == 'Z' || s[at] == 'z') {
    ++at;
  } else if (s[at] == '+' || s[at] == '-') {
    const int sign = s[at] == '-' ? -1 : 1;
    if (at + 6 != s.size() || s[at + 3] != ':') throw InputError("bad timestamp");
    offset_min = sign * (digits(s, at + 1, 2) * 60 + digits(s, at + 4, 2));
    at += 6;
  }
  if (at != s.size()) throw InputError("bad timestamp");
  const auto days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  return ((days * 24 + hour) * 60 + minute - offset_min) * 60'000 + second * 1000 + millis;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Minimal RFC 4180 field splitter: quoted fields, doubled quotes, no embedded newlines.
std::vector<std::string> split_csv(std::string_view line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw InputError("line " + std::to_string(lineno) + ": unterminated quote");
  out.emplace_back(trim(cur));
  return out;
}

TraceId parse_trace_id(std::string_view s, std::size_t lineno) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
    throw InputError("line " + std::to_string(lineno) + ": trace_id must be a non-negative integer, got '" +
                     std::string(s) + "'");
  return v;
}

Event make_event(std::string_view trace, std::string_view type, std::string_view ts, std::size_t lineno) {
  Event ev;
  ev.trace_id = parse_trace_id(trace, lineno);
  if (type.empty()) throw InputError("line " + std::to_string(lineno) + ": empty event_type");
  ev.event_type = std::string(type);
  try {
    ev.ts = parse_timestamp(ts);
  } catch (const InputError& e) {
    throw InputError("line " + std::to_string(lineno) + ": " + e.what() + " '" + std::string(ts) + "'");
  }
  return ev;
}

}  // namespace

LogFormat parse_log_format(const std::string& s) {
  if (s == "csv") return LogFormat::kCsv;
  if (s == "jsonl" || s == "json") return LogFormat::kJsonl;
  throw InputError("unknown log format '" + s + "' (expected csv or jsonl)");
}

Timestamp parse_timestamp(std::string_view text) {
  text = trim(text);
  std::int64_t v = 0;
  if (parse_int(text, v)) return v;
  return parse_rfc3339(text);
}

std::string format_timestamp(Timestamp ts) {
  std::int64_t days = ts >= 0 ? ts / kMsPerDay : -((-ts + kMsPerDay - 1) / kMsPerDay);
  std::int64_t rem = ts - days * kMsPerDay;
  std::int64_t y = 0;
  unsigned m = 0;
  unsigned d = 0;
  civil_from_days(days, y, m, d);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ", static_cast<long long>(y), m, d,
                static_cast<long long>(rem / 3'600'000), static_cast<long long>(rem / 60'000 % 60),
                static_cast<long long>(rem / 1000 % 60), static_cast<long long>(rem % 1000));
  return buf;
}

std::vector<Event> read_log(std::istream& in, LogFormat format) {
  std::vector<Event> events;
  std::string line;
  std::size_t lineno = 0;
  if (format == LogFormat::kCsv) {
    int c_trace = -1;
    int c_type = -1;
    int c_ts = -1;
    std::size_t width = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      auto fields = split_csv(line, lineno);
      if (c_trace < 0) {
        for (std::size_t k = 0; k < fields.size(); ++k) {
          if (fields[k] == "trace_id") c_trace = static_cast<int>(k);
          if (fields[k] == "event_type") c_type = static_cast<int>(k);
          if (fields[k] == "timestamp") c_ts = static_cast<int>(k);
        }
        if (c_trace < 0 || c_type < 0 || c_ts < 0)
          throw InputError("line " + std::to_string(lineno) + ": header must name trace_id, event_type, timestamp");
        width = fields.size();
        continue;
      }
      if (fields.size() != width)
        throw InputError("line " + std::to_string(lineno) + ": expected " + std::to_string(width) + " fields, got " +
                         std::to_string(fields.size()));
      events.push_back(make_event(fields[c_trace], fields[c_type], fields[c_ts], lineno));
    }
    if (c_trace < 0 && lineno > 0) throw InputError("missing CSV header");
    return events;
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("line " + std::to_string(lineno) + ": invalid JSON");
    }
    if (!j.is_object() || !j.contains("trace_id") || !j.contains("event_type") || !j.contains("timestamp"))
      throw InputError("line " + std::to_string(lineno) + ": object needs trace_id, event_type, timestamp");
    auto as_text = [](const nlohmann::json& v) {
      return v.is_string() ? v.get<std::string>() : v.dump();
    };
    if (!j["event_type"].is_string())
      throw InputError("line " + std::to_string(lineno) + ": event_type must be a string");
    events.push_back(make_event(as_text(j["trace_id"]), j["event_type"].get<std::string>(),
                                as_text(j["timestamp"]), lineno));
  }
  return events;
}

std::vector<Event> read_log_file(const std::string& path, LogFormat format) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path);
  return read_log(in, format);
}

void write_csv(std::ostream& out, const std::vector<Event>& events) {
  out << "trace_id,event_type,timestamp\n";
  for (const auto& ev : events) {
    const bool quote = ev.event_type.find_first_of(",\"") != std::string::npos;
    out << ev.trace_id << ',';
    if (quote) {
      out << '"';
      for (char c : ev.event_type) out << (c == '"' ? "\"\"" : std::string(1, c));
      out << '"';
    } else {
      out << ev.event_type;
    }
    out << ',' << ev.ts << '\n';
  }
}

}  // namespace logsieve
