#pragma once

#include <string>

namespace slr {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();

void log(LogLevel level, const std::string& message);

inline void log_info(const std::string& message) { log(LogLevel::info, message); }
inline void log_warn(const std::string& message) { log(LogLevel::warn, message); }

}  // namespace slr
