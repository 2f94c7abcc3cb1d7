#pragma once

#include <string_view>

namespace cdsplit {

enum class LogLevel { Debug = 0, Info = 1, Warning = 2, Silent = 3 };

// Process-wide threshold; messages below it are dropped. Defaults to Warning,
// or to the value of CDSPLIT_LOG (debug|info|warning|silent) when set.
void set_log_level(LogLevel level);
LogLevel log_level();

void log_message(LogLevel level, std::string_view message);

inline void log_warning(std::string_view message) { log_message(LogLevel::Warning, message); }
inline void log_info(std::string_view message) { log_message(LogLevel::Info, message); }

}  // namespace cdsplit
