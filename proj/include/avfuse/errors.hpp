#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace avfuse {

enum class ErrorCode {
  kParse,
  kValidation,
  kOutOfRange,
  kNonPsd,
  kSingularInnovation,
  kNotConfirmed,
  kStaleMessage,
  kNonInvertible,
  kTopicTooLong,
  kPayloadTooLong,
  kBadMagic,
  kBadVersion,
  kUnknownType,
  kTruncated,
  kUnknownLink,
  kIo,
  kSchema,
  kPipeline,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` distinguishes the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace avfuse
