#include "hgf/event_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>

#include "hgf/error.hpp"

namespace hgf {

Json event_to_json(const EventRecord& e) {
  return {{"seq", e.seq}, {"type", e.type}, {"payload", e.payload}, {"ts", e.timestamp_ms}};
}

EventRecord event_from_json(const Json& j) {
  try {
    return EventRecord{j.at("seq").get<std::uint64_t>(), j.at("type").get<std::string>(),
                       j.at("payload"), j.at("ts").get<std::int64_t>()};
  } catch (const Json::exception& e) {
    fail(ErrorKind::kValidation, std::string("malformed event: ") + e.what());
  }
}

EventLog::EventLog(const std::string& path, bool sync_each_append) : path_(path), sync_(sync_each_append) {
  std::string content;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    content.assign(std::istreambuf_iterator<char>(in), {});
  }
  // Keep only newline-terminated lines; anything after the last newline is a
  // partial write.
  const auto last_nl = content.rfind('\n');
  const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < keep) {
    const auto end = content.find('\n', start);
    ++line_no;
    const std::string line = content.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      fail(ErrorKind::kValidation, path + ": corrupt event at line " + std::to_string(line_no));
    }
    EventRecord e = event_from_json(j);
    if (e.seq != next_seq()) {
      fail(ErrorKind::kValidation, path + ": event sequence gap at line " + std::to_string(line_no));
    }
    events_.push_back(std::move(e));
  }
  if (keep < content.size()) std::filesystem::resize_file(path, keep);
  fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) fail(ErrorKind::kIo, "cannot open event log " + path + ": " + std::strerror(errno));
}

EventLog::EventLog(EventLog&& o) noexcept
    : path_(std::move(o.path_)), fd_(o.fd_), sync_(o.sync_), events_(std::move(o.events_)) {
  o.fd_ = -1;
}

EventLog& EventLog::operator=(EventLog&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    path_ = std::move(o.path_);
    fd_ = o.fd_;
    sync_ = o.sync_;
    events_ = std::move(o.events_);
    o.fd_ = -1;
  }
  return *this;
}

EventLog::~EventLog() {
  if (fd_ >= 0) ::close(fd_);
}

const EventRecord& EventLog::append(std::string type, Json payload, std::int64_t timestamp_ms) {
  EventRecord e{next_seq(), std::move(type), std::move(payload), timestamp_ms};
  if (fd_ >= 0) {
    const std::string line = event_to_json(e).dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
      const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(ErrorKind::kIo, std::string("event log write failed: ") + std::strerror(errno));
      }
      written += static_cast<std::size_t>(n);
    }
    if (sync_ && ::fdatasync(fd_) != 0) {
      fail(ErrorKind::kIo, std::string("event log sync failed: ") + std::strerror(errno));
    }
  }
  events_.push_back(std::move(e));
  return events_.back();
}

}  // namespace hgf
