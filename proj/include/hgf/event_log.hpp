#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "hgf/jsonl.hpp"

namespace hgf {

struct EventRecord {
  std::uint64_t seq = 0;
  std::string type;
  Json payload;
  std::int64_t timestamp_ms = 0;
};

Json event_to_json(const EventRecord& e);
EventRecord event_from_json(const Json& j);

// Append-only, totally ordered event log. With a path, every append is
// written and flushed before it is acknowledged; a torn final line left by a
// crash is discarded on open. Without a path the log is memory-only.
class EventLog {
 public:
  EventLog() = default;
  explicit EventLog(const std::string& path, bool sync_each_append = true);
  EventLog(EventLog&&) noexcept;
  EventLog& operator=(EventLog&&) noexcept;
  ~EventLog();

  const std::vector<EventRecord>& events() const { return events_; }
  std::uint64_t next_seq() const { return events_.empty() ? 1 : events_.back().seq + 1; }

  const EventRecord& append(std::string type, Json payload, std::int64_t timestamp_ms);

 private:
  std::optional<std::string> path_;
  int fd_ = -1;
  bool sync_ = true;
  std::vector<EventRecord> events_;
};

}  // namespace hgf
