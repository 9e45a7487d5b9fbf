#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "avfuse/random.hpp"

namespace avfuse {

enum class MsgType : std::uint8_t {
  kDetections = 1,
  kTracks = 2,
  kTaskReq = 3,
  kTaskResp = 4,
  kHeartbeat = 5,
  kClock = 6,
};

std::string_view to_string(MsgType t);

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::array<std::uint8_t, 4> kFrameMagic = {0x46, 0x42, 0x55, 0x53};  // "FBUS"
inline constexpr std::size_t kFrameOverhead = 4 + 1 + 1 + 8 + 2 + 4;
inline constexpr std::size_t kMaxTopicBytes = 0xFFFF;
inline constexpr std::uint64_t kMaxPayloadBytes = 0xFFFFFFFFULL;

struct BusFrame {
  std::uint8_t version = kWireVersion;
  MsgType msg_type = MsgType::kHeartbeat;
  std::uint64_t timestamp_ns = 0;
  std::string topic;
  Bytes payload;

  bool operator==(const BusFrame&) const = default;
};

bool is_valid_utf8(std::string_view s);

/// Checks the length fields without building the frame.
void check_frame_sizes(std::size_t topic_bytes, std::uint64_t payload_bytes);

/// Little-endian layout:
/// magic[4] | version u8 | msg_type u8 | timestamp_ns u64 | topic_len u16 | topic | payload_len u32 | payload
Bytes encode(const BusFrame& frame);

struct DecodeResult {
  BusFrame frame;
  std::size_t consumed = 0;
};

/// Decodes one frame from the front of `bytes`; trailing bytes are left unconsumed.
/// Throws kBadMagic, kBadVersion, kUnknownType or kTruncated.
DecodeResult decode(std::span<const std::uint8_t> bytes);

/// Incremental decoder for a byte stream delivered in arbitrary chunks.
class FrameStreamParser {
 public:
  void feed(std::span<const std::uint8_t> chunk);
  /// Next complete frame, or nullopt when more bytes are needed. Corrupt input throws.
  std::optional<BusFrame> next();
  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  Bytes buffer_;
  std::size_t offset_ = 0;
};

/// Prefix subscription: "tracks/" matches "tracks/ego"; "" matches everything.
bool topic_matches(std::string_view subscription, std::string_view topic);

BusFrame make_clock_frame(double t);

std::uint64_t to_nanoseconds(double seconds);
double to_seconds(std::uint64_t ns);

struct LinkParams {
  double base_latency = 0.0;
  double jitter = 0.0;  // uniform half-width
  double drop_prob = 0.0;

  bool is_valid() const;
};

struct NetworkModel {
  std::optional<LinkParams> default_link;
  std::map<std::pair<std::int64_t, std::int64_t>, LinkParams> links;  // (from, to)

  /// Throws kUnknownLink when neither an explicit nor a default link exists.
  const LinkParams& link(std::int64_t from, std::int64_t to) const;
};

struct Delivery {
  bool dropped = false;
  double at = 0.0;
};

/// Samples one transmission. Always consumes two uniforms so outcomes for later
/// sends do not depend on earlier drop decisions.
Delivery deliver(const NetworkModel& net, std::int64_t from, std::int64_t to, double send_time,
                 Rng& rng);

std::string link_key(std::int64_t from, std::int64_t to);

}  // namespace avfuse
