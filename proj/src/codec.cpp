#include "avfuse/codec.hpp"

#include <cmath>

#include "avfuse/errors.hpp"

namespace avfuse::codec {

namespace {

Eigen::VectorXd read_vector(const Json& j, int n, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw Error(ErrorCode::kSchema, std::string(what) + " must be an array of " + std::to_string(n));
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::kSchema, std::string(what) + " must be numeric");
    v(i) = j[i].get<double>();
  }
  return v;
}

}  // namespace

Json vec(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json mat(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

Vec3 vec3(const Json& j) { return read_vector(j, 3, "3-vector"); }
Vec6 vec6(const Json& j) { return read_vector(j, 6, "6-vector"); }

Mat3 mat3(const Json& j) {
  const Eigen::VectorXd v = read_vector(j, 9, "3x3 matrix");
  return Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(v.data());
}

Mat6 mat6(const Json& j) {
  const Eigen::VectorXd v = read_vector(j, 36, "6x6 matrix");
  return Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>>(v.data());
}

Json pose(const Pose& p) { return {{"rotation", mat(p.rotation)}, {"translation", vec(p.translation)}}; }

Pose pose(const Json& j) {
  return guarded("pose", [&] {
    Pose p{mat3(j.at("rotation")), vec3(j.at("translation"))};
    if (!p.is_valid()) throw Error(ErrorCode::kSchema, "pose rotation is not a proper rotation");
    return p;
  });
}

Json detection2d(const Detection2D& d) {
  return {{"bbox", {d.bbox.umin, d.bbox.vmin, d.bbox.umax, d.bbox.vmax}}, {"score", d.score}};
}

Detection2D detection2d(const Json& j, int sensor_id, double t) {
  return guarded("camera detection", [&] {
    const Eigen::VectorXd b = read_vector(j.at("bbox"), 4, "bbox");
    Detection2D d{{b(0), b(1), b(2), b(3)}, j.at("score").get<double>(), sensor_id, t};
    if (!(d.bbox.umin < d.bbox.umax && d.bbox.vmin < d.bbox.vmax))
      throw Error(ErrorCode::kSchema, "bbox must satisfy umin < umax and vmin < vmax");
    if (!(d.score >= 0 && d.score <= 1)) throw Error(ErrorCode::kSchema, "score outside [0, 1]");
    return d;
  });
}

Json radar_point(const RadarPoint& p) {
  return {{"position", vec(p.position)}, {"radial_speed", p.radial_speed}, {"snr", p.snr}};
}

RadarPoint radar_point(const Json& j, int sensor_id, double t) {
  return guarded("radar point", [&] {
    RadarPoint p;
    p.position = vec3(j.at("position"));
    p.radial_speed = j.at("radial_speed").get<double>();
    p.snr = j.at("snr").get<double>();
    p.sensor_id = sensor_id;
    p.timestamp = t;
    if (!(p.range() > 0)) throw Error(ErrorCode::kSchema, "radar point at zero range");
    return p;
  });
}

Json detection3d(const Detection3D& d) {
  return {{"position", vec(d.position)},
          {"radial_speed", d.radial_speed},
          {"cov", mat(d.cov)},
          {"source", std::string(to_string(d.source))},
          {"score", d.score},
          {"t", d.timestamp}};
}

Detection3D detection3d(const Json& j) {
  return guarded("3D detection", [&] {
    Detection3D d;
    d.position = vec3(j.at("position"));
    d.radial_speed = j.at("radial_speed").get<double>();
    d.cov = mat3(j.at("cov"));
    d.source = detection_source_from_string(j.at("source").get<std::string>());
    d.score = j.at("score").get<double>();
    d.timestamp = j.at("t").get<double>();
    if (!is_psd(d.cov)) throw Error(ErrorCode::kSchema, "detection covariance is not PSD");
    return d;
  });
}

Json truth_object(const GroundTruthObject& o) {
  return {{"id", o.id}, {"position", vec(o.position)}, {"velocity", vec(o.velocity)},
          {"extent", vec(o.extent)}};
}

GroundTruthObject truth_object(const Json& j) {
  return guarded("truth object", [&] {
    GroundTruthObject o;
    o.id = j.at("id").get<std::int64_t>();
    o.position = vec3(j.at("position"));
    o.velocity = vec3(j.at("velocity"));
    o.extent = vec3(j.at("extent"));
    if ((o.extent.array() <= 0).any()) throw Error(ErrorCode::kSchema, "extent must be positive");
    return o;
  });
}

Json track_summary(const Track& t) {
  return {{"id", t.id},
          {"status", std::string(to_string(t.status))},
          {"mean", vec(t.mean)},
          {"cov_diag", vec(t.cov.diagonal())}};
}

Json track_full(const Track& t) {
  Json recent = Json::array();
  for (char c : t.recent) recent.push_back(static_cast<int>(c));
  Json history = Json::array();
  for (const auto& s : t.history) history.push_back({{"t", s.t}, {"mean", vec(s.mean)}, {"cov", mat(s.cov)}});
  return {{"id", t.id},         {"status", std::string(to_string(t.status))},
          {"mean", vec(t.mean)}, {"cov", mat(t.cov)},
          {"hits", t.hits},     {"misses", t.misses},
          {"last_update", t.last_update}, {"recent", recent},
          {"history", history}};
}

Json tracker_state(const TrackerState& s) {
  Json tracks = Json::array();
  for (const auto& t : s.tracks) tracks.push_back(track_full(t));
  return {{"tracks", tracks}, {"next_id", s.next_id}, {"time", s.time}, {"started", s.started}};
}

Json sensor_frame(const SensorFrame& f) {
  Json dets = Json::array();
  if (f.type == SensorType::kCamera) {
    for (const auto& b : f.boxes) dets.push_back(detection2d(b));
  } else {
    for (const auto& p : f.points) dets.push_back(radar_point(p));
  }
  return {{"t", f.t},
          {"agent", f.agent},
          {"sensor", f.sensor},
          {"type", f.type == SensorType::kCamera ? "camera" : "radar"},
          {"detections", dets}};
}

SensorFrame sensor_frame(const Json& j) {
  return guarded("sensor frame", [&] {
    static const std::vector<std::string> keys = {"agent", "detections", "sensor", "t", "type"};
    for (const auto& [k, _] : j.items())
      if (std::find(keys.begin(), keys.end(), k) == keys.end())
        throw Error(ErrorCode::kSchema, "unknown field '" + k + "'");
    SensorFrame f;
    f.t = j.at("t").get<double>();
    f.agent = j.at("agent").get<std::int64_t>();
    f.sensor = j.at("sensor").get<int>();
    const std::string type = j.at("type").get<std::string>();
    if (type == "camera") {
      f.type = SensorType::kCamera;
      for (const auto& d : j.at("detections")) f.boxes.push_back(detection2d(d, f.sensor, f.t));
    } else if (type == "radar") {
      f.type = SensorType::kRadar;
      for (const auto& d : j.at("detections")) f.points.push_back(radar_point(d, f.sensor, f.t));
    } else {
      throw Error(ErrorCode::kSchema, "type must be camera or radar");
    }
    return f;
  });
}

Json remote_track_msg(const RemoteTrackMsg& m) {
  Json tracks = Json::array();
  for (const auto& t : m.tracks)
    tracks.push_back({{"id", t.remote_id}, {"mean", vec(t.mean)}, {"cov", mat(t.cov)}});
  return {{"sender_id", m.sender_id},
          {"sender_pose", pose(m.sender_pose)},
          {"timestamp", m.timestamp},
          {"tracks", tracks}};
}

RemoteTrackMsg remote_track_msg(const Json& j) {
  return guarded("remote track message", [&] {
    RemoteTrackMsg m;
    m.sender_id = j.at("sender_id").get<std::int64_t>();
    m.sender_pose = pose(j.at("sender_pose"));
    m.timestamp = j.at("timestamp").get<double>();
    for (const auto& t : j.at("tracks")) {
      RemoteTrack rt{t.at("id").get<std::uint64_t>(), vec6(t.at("mean")), mat6(t.at("cov"))};
      if (!is_psd(rt.cov)) throw Error(ErrorCode::kSchema, "remote track covariance is not PSD");
      m.tracks.push_back(rt);
    }
    return m;
  });
}

Json task_request(const TaskRequest& r) {
  return {{"task_id", r.task_id}, {"kind", r.kind}, {"frame_time", r.frame_time},
          {"payload", to_hex(r.payload)}};
}

TaskRequest task_request(const Json& j) {
  return guarded("task request", [&] {
    return TaskRequest{j.at("task_id").get<std::uint64_t>(), j.at("kind").get<std::string>(),
                       j.at("frame_time").get<double>(),
                       from_hex(j.at("payload").get<std::string>())};
  });
}

Json task_result(const TaskResult& r) {
  Json dets = Json::array();
  for (const auto& d : r.detections) dets.push_back(detection3d(d));
  return {{"task_id", r.task_id},
          {"status", std::string(to_string(r.status))},
          {"frame_time", r.frame_time},
          {"detections", dets},
          {"compute_latency", r.compute_latency}};
}

TaskResult task_result(const Json& j) {
  return guarded("task result", [&] {
    TaskResult r;
    r.task_id = j.at("task_id").get<std::uint64_t>();
    r.status = task_status_from_string(j.at("status").get<std::string>());
    r.frame_time = j.at("frame_time").get<double>();
    for (const auto& d : j.at("detections")) r.detections.push_back(detection3d(d));
    r.compute_latency = j.at("compute_latency").get<double>();
    return r;
  });
}

Json heartbeat(std::int64_t agent, double t) { return {{"agent", agent}, {"t", t}}; }

std::string to_hex(const Bytes& b) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(b.size() * 2);
  for (std::uint8_t x : b) {
    s.push_back(digits[x >> 4]);
    s.push_back(digits[x & 0xF]);
  }
  return s;
}

Bytes from_hex(const std::string& s) {
  if (s.size() % 2 != 0) throw Error(ErrorCode::kSchema, "hex string has odd length");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw Error(ErrorCode::kSchema, "invalid hex digit");
  };
  Bytes out(s.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(nibble(s[2 * i]) << 4 | nibble(s[2 * i + 1]));
  return out;
}

}  // namespace avfuse::codec
