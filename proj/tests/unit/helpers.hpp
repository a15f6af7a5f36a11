#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "logsieve/model.hpp"

namespace logsieve::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("logsieve_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// "A@1 B@2" style shorthand for a trace's events.
inline std::vector<Event> events_of(TraceId id, std::vector<std::pair<std::string, Timestamp>> evs) {
  std::vector<Event> out;
  Position pos = 0;
  for (auto& [type, ts] : evs) out.push_back({id, type, ts, ++pos});
  return out;
}

inline Trace trace_of(TraceId id, std::vector<std::pair<std::string, Timestamp>> evs) {
  return Trace{id, events_of(id, std::move(evs))};
}

}  // namespace logsieve::testing
