#include "cdsplit/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace cdsplit {
namespace {

LogLevel initial_level() {
  const char* env = std::getenv("CDSPLIT_LOG");
  if (env == nullptr) return LogLevel::Warning;
  const std::string v(env);
  if (v == "debug") return LogLevel::Debug;
  if (v == "info") return LogLevel::Info;
  if (v == "silent") return LogLevel::Silent;
  return LogLevel::Warning;
}

std::atomic<LogLevel>& level_ref() {
  static std::atomic<LogLevel> level{initial_level()};
  return level;
}

std::mutex log_mutex;

}  // namespace

void set_log_level(LogLevel level) { level_ref().store(level); }
LogLevel log_level() { return level_ref().load(); }

void log_message(LogLevel level, std::string_view message) {
  if (static_cast<int>(level) < static_cast<int>(log_level())) return;
  static constexpr const char* names[] = {"debug", "info", "warning"};
  std::lock_guard<std::mutex> lock(log_mutex);
  std::clog << "[cdsplit " << names[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace cdsplit
