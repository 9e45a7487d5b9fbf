#include "avfuse/bus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "avfuse/errors.hpp"

namespace avfuse {

std::string_view to_string(MsgType t) {
  switch (t) {
    case MsgType::kDetections: return "DETECTIONS";
    case MsgType::kTracks: return "TRACKS";
    case MsgType::kTaskReq: return "TASK_REQ";
    case MsgType::kTaskResp: return "TASK_RESP";
    case MsgType::kHeartbeat: return "HEARTBEAT";
    case MsgType::kClock: return "CLOCK";
  }
  return "UNKNOWN";
}

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (int k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates and out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += len;
  }
  return true;
}

void check_frame_sizes(std::size_t topic_bytes, std::uint64_t payload_bytes) {
  if (topic_bytes > kMaxTopicBytes)
    throw Error(ErrorCode::kTopicTooLong, "topic is " + std::to_string(topic_bytes) + " bytes");
  if (payload_bytes > kMaxPayloadBytes)
    throw Error(ErrorCode::kPayloadTooLong, "payload is " + std::to_string(payload_bytes) + " bytes");
}

namespace {

template <typename T>
void put_le(Bytes& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t at) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
  return static_cast<T>(v);
}

bool known_type(std::uint8_t t) { return t >= 1 && t <= 6; }

}  // namespace

Bytes encode(const BusFrame& frame) {
  check_frame_sizes(frame.topic.size(), frame.payload.size());
  if (frame.version != kWireVersion)
    throw Error(ErrorCode::kBadVersion, "version " + std::to_string(frame.version));
  if (!known_type(static_cast<std::uint8_t>(frame.msg_type)))
    throw Error(ErrorCode::kUnknownType,
                "msg_type " + std::to_string(static_cast<int>(frame.msg_type)));
  if (!is_valid_utf8(frame.topic)) throw Error(ErrorCode::kValidation, "topic is not valid UTF-8");

  Bytes out;
  out.reserve(kFrameOverhead + frame.topic.size() + frame.payload.size());
  out.insert(out.end(), kFrameMagic.begin(), kFrameMagic.end());
  out.push_back(frame.version);
  out.push_back(static_cast<std::uint8_t>(frame.msg_type));
  put_le<std::uint64_t>(out, frame.timestamp_ns);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(frame.topic.size()));
  out.insert(out.end(), frame.topic.begin(), frame.topic.end());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(frame.payload.size()));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

DecodeResult decode(std::span<const std::uint8_t> bytes) {
  auto need = [&](std::size_t n, const char* field) {
    if (bytes.size() < n)
      throw Error(ErrorCode::kTruncated, std::string("buffer ends inside ") + field);
  };
  need(4, "magic");
  if (!std::equal(kFrameMagic.begin(), kFrameMagic.end(), bytes.begin()))
    throw Error(ErrorCode::kBadMagic, "magic bytes do not read FBUS");
  need(5, "version");
  if (bytes[4] != kWireVersion)
    throw Error(ErrorCode::kBadVersion, "version " + std::to_string(bytes[4]));
  need(6, "msg_type");
  if (!known_type(bytes[5]))
    throw Error(ErrorCode::kUnknownType, "msg_type " + std::to_string(bytes[5]));
  need(14, "timestamp_ns");
  need(16, "topic_len");
  const std::size_t topic_len = get_le<std::uint16_t>(bytes, 14);
  need(16 + topic_len, "topic");
  const std::size_t payload_at = 16 + topic_len;
  need(payload_at + 4, "payload_len");
  const std::size_t payload_len = get_le<std::uint32_t>(bytes, payload_at);
  need(payload_at + 4 + payload_len, "payload");

  DecodeResult r;
  r.frame.version = bytes[4];
  r.frame.msg_type = static_cast<MsgType>(bytes[5]);
  r.frame.timestamp_ns = get_le<std::uint64_t>(bytes, 6);
  r.frame.topic.assign(reinterpret_cast<const char*>(bytes.data() + 16), topic_len);
  if (!is_valid_utf8(r.frame.topic)) throw Error(ErrorCode::kValidation, "topic is not valid UTF-8");
  r.frame.payload.assign(bytes.begin() + payload_at + 4, bytes.begin() + payload_at + 4 + payload_len);
  r.consumed = payload_at + 4 + payload_len;
  return r;
}

void FrameStreamParser::feed(std::span<const std::uint8_t> chunk) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), chunk.begin(), chunk.end());
}

std::optional<BusFrame> FrameStreamParser::next() {
  const std::span<const std::uint8_t> pending(buffer_.data() + offset_, buffer_.size() - offset_);
  if (pending.empty()) return std::nullopt;
  try {
    DecodeResult r = decode(pending);
    offset_ += r.consumed;
    return std::move(r.frame);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kTruncated) return std::nullopt;
    throw;
  }
}

bool topic_matches(std::string_view subscription, std::string_view topic) {
  return topic.substr(0, subscription.size()) == subscription;
}

std::uint64_t to_nanoseconds(double seconds) {
  return static_cast<std::uint64_t>(std::llround(seconds * 1e9));
}

double to_seconds(std::uint64_t ns) { return static_cast<double>(ns) * 1e-9; }

BusFrame make_clock_frame(double t) {
  BusFrame f;
  f.msg_type = MsgType::kClock;
  f.timestamp_ns = to_nanoseconds(t);
  f.topic = "clock";
  return f;
}

bool LinkParams::is_valid() const {
  return jitter >= 0 && base_latency >= jitter && drop_prob >= 0 && drop_prob <= 1;
}

const LinkParams& NetworkModel::link(std::int64_t from, std::int64_t to) const {
  if (auto it = links.find({from, to}); it != links.end()) return it->second;
  if (default_link) return *default_link;
  throw Error(ErrorCode::kUnknownLink, link_key(from, to) + " is not configured");
}

Delivery deliver(const NetworkModel& net, std::int64_t from, std::int64_t to, double send_time,
                 Rng& rng) {
  const LinkParams& p = net.link(from, to);
  const double drop_draw = rng.uniform();
  const double jitter_draw = rng.uniform(-1.0, 1.0);
  if (drop_draw < p.drop_prob) return {true, 0.0};
  return {false, send_time + p.base_latency + p.jitter * jitter_draw};
}

std::string link_key(std::int64_t from, std::int64_t to) {
  return "link:" + std::to_string(from) + "->" + std::to_string(to);
}

}  // namespace avfuse
