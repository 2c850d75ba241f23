#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#include "morphparse/common.hpp"

namespace morphparse {

enum class LogLevel : int { quiet = 0, info = 1, debug = 2 };

/// Verbosity comes from the MORPHPARSE_LOG environment variable:
/// "quiet"/"0", "info"/"1" (default), "debug"/"2".
inline LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("MORPHPARSE_LOG");
    if (!env) return LogLevel::info;
    if (!std::strcmp(env, "quiet") || !std::strcmp(env, "0")) return LogLevel::quiet;
    if (!std::strcmp(env, "debug") || !std::strcmp(env, "2")) return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

template <class... Args>
void log_info(Args&&... args) {
  if (log_level() >= LogLevel::info)
    std::fprintf(stderr, "[morphparse] %s\n", detail::str(std::forward<Args>(args)...).c_str());
}

template <class... Args>
void log_debug(Args&&... args) {
  if (log_level() >= LogLevel::debug)
    std::fprintf(stderr, "[morphparse:debug] %s\n",
                 detail::str(std::forward<Args>(args)...).c_str());
}

template <class... Args>
void log_warn(Args&&... args) {
  if (log_level() >= LogLevel::quiet)
    std::fprintf(stderr, "[morphparse:warn] %s\n",
                 detail::str(std::forward<Args>(args)...).c_str());
}

}  // namespace morphparse
