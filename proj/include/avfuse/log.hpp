#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace avfuse {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

std::string_view to_string(LogLevel l);
/// Throws kValidation for anything other than error, warn, info, debug.
LogLevel log_level_from_string(std::string_view s);
/// FUSION_LOG_LEVEL, defaulting to info; an unknown value also falls back to info.
LogLevel log_level_from_env();

/// Collects JSON log lines stamped with virtual time. Nothing here reads a wall clock,
/// so two runs of the same scenario produce the same log.
class Logger {
 public:
  explicit Logger(LogLevel threshold = LogLevel::kInfo) : threshold_(threshold) {}

  bool enabled(LogLevel l) const { return l <= threshold_; }
  void log(LogLevel l, double t, std::string_view module, std::string_view msg);
  void error(double t, std::string_view module, std::string_view msg) { log(LogLevel::kError, t, module, msg); }
  void warn(double t, std::string_view module, std::string_view msg) { log(LogLevel::kWarn, t, module, msg); }
  void info(double t, std::string_view module, std::string_view msg) { log(LogLevel::kInfo, t, module, msg); }
  void debug(double t, std::string_view module, std::string_view msg) { log(LogLevel::kDebug, t, module, msg); }

  const std::vector<std::string>& lines() const { return lines_; }

 private:
  LogLevel threshold_;
  std::vector<std::string> lines_;
};

}  // namespace avfuse
