#include "avfuse/log.hpp"

#include <cstdlib>

#include "avfuse/canonical_json.hpp"
#include "avfuse/errors.hpp"

namespace avfuse {

std::string_view to_string(LogLevel l) {
  switch (l) {
    case LogLevel::kError: return "error";
    case LogLevel::kWarn: return "warn";
    case LogLevel::kInfo: return "info";
    case LogLevel::kDebug: return "debug";
  }
  return "info";
}

LogLevel log_level_from_string(std::string_view s) {
  if (s == "error") return LogLevel::kError;
  if (s == "warn") return LogLevel::kWarn;
  if (s == "info") return LogLevel::kInfo;
  if (s == "debug") return LogLevel::kDebug;
  throw Error(ErrorCode::kValidation, "log level must be error, warn, info or debug");
}

LogLevel log_level_from_env() {
  const char* v = std::getenv("FUSION_LOG_LEVEL");
  if (v == nullptr) return LogLevel::kInfo;
  try {
    return log_level_from_string(v);
  } catch (const Error&) {
    return LogLevel::kInfo;
  }
}

void Logger::log(LogLevel l, double t, std::string_view module, std::string_view msg) {
  if (!enabled(l)) return;
  lines_.push_back(canonical_dump(Json{{"level", std::string(to_string(l))},
                                       {"t", t},
                                       {"module", std::string(module)},
                                       {"msg", std::string(msg)}}));
}

}  // namespace avfuse
