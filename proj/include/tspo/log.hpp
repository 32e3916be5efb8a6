#pragma once

#include <string_view>

namespace tspo {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Current threshold. Initialized from TSPO_LOG (error|warn|info|debug),
/// defaulting to warn.
LogLevel log_level();
void set_log_level(LogLevel level);

/// Writes one line to stderr if `level` passes the threshold. Thread-safe.
void log(LogLevel level, std::string_view message);

inline void log_warn(std::string_view m) { log(LogLevel::Warn, m); }
inline void log_info(std::string_view m) { log(LogLevel::Info, m); }
inline void log_debug(std::string_view m) { log(LogLevel::Debug, m); }

}  // namespace tspo
