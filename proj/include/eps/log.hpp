#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace eps {

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

// Verbosity comes from EPS_LOG=info|debug; anything else (or unset) is quiet.
inline LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("EPS_LOG");
    if (env == nullptr) return LogLevel::kQuiet;
    if (std::strcmp(env, "debug") == 0) return LogLevel::kDebug;
    if (std::strcmp(env, "info") == 0) return LogLevel::kInfo;
    return LogLevel::kQuiet;
  }();
  return level;
}

inline void log_at(LogLevel lvl, const char* prefix, const char* fmt, std::va_list ap) {
  if (log_level() < lvl) return;
  std::fprintf(stderr, "[eps %s] ", prefix);
  std::vfprintf(stderr, fmt, ap);
  std::fputc('\n', stderr);
}

inline void log_info(const char* fmt, ...) {
  std::va_list ap;
  va_start(ap, fmt);
  log_at(LogLevel::kInfo, "info", fmt, ap);
  va_end(ap);
}

inline void log_debug(const char* fmt, ...) {
  std::va_list ap;
  va_start(ap, fmt);
  log_at(LogLevel::kDebug, "debug", fmt, ap);
  va_end(ap);
}

}  // namespace eps
