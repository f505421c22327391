#include "slr/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace slr {
namespace {

std::atomic<LogLevel> g_level{LogLevel::warn};
std::mutex g_mutex;

const char* level_name(LogLevel level) {
  switch (level) {
    case LogLevel::debug: return "debug";
    case LogLevel::info: return "info";
    case LogLevel::warn: return "warn";
    case LogLevel::error: return "error";
    case LogLevel::off: break;
  }
  return "";
}

}  // namespace

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void log(LogLevel level, const std::string& message) {
  if (level < g_level.load() || level == LogLevel::off) return;
  std::lock_guard lock(g_mutex);
  std::clog << "[slr " << level_name(level) << "] " << message << '\n';
}

}  // namespace slr
