#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avfuse/canonical_json.hpp"
#include "avfuse/collab.hpp"
#include "avfuse/errors.hpp"
#include "avfuse/fusion.hpp"
#include "avfuse/geometry.hpp"
#include "avfuse/offload.hpp"
#include "avfuse/sensing.hpp"
#include "avfuse/tracker.hpp"

// JSON encodings of the domain types carried in bus payloads, replay files and
// reports. Matrices are flattened row-major. Decoders throw kSchema.
namespace avfuse::codec {

Json vec(const Eigen::VectorXd& v);
Json mat(const Eigen::MatrixXd& m);
Vec3 vec3(const Json& j);
Vec6 vec6(const Json& j);
Mat3 mat3(const Json& j);
Mat6 mat6(const Json& j);

Json pose(const Pose& p);
Pose pose(const Json& j);

Json detection2d(const Detection2D& d);
Detection2D detection2d(const Json& j, int sensor_id, double t);
Json radar_point(const RadarPoint& p);
RadarPoint radar_point(const Json& j, int sensor_id, double t);
Json detection3d(const Detection3D& d);
Detection3D detection3d(const Json& j);
Json truth_object(const GroundTruthObject& o);
GroundTruthObject truth_object(const Json& j);

/// Track as written to the per-frame dump: id, status, mean, covariance diagonal.
Json track_summary(const Track& t);
/// Full track state, exact enough to compare runs bit-for-bit.
Json track_full(const Track& t);
Json tracker_state(const TrackerState& s);

/// Sensor output for one tick; also the replay-file line format.
struct SensorFrame {
  double t = 0.0;
  std::int64_t agent = 0;
  int sensor = 0;
  SensorType type = SensorType::kCamera;
  std::vector<Detection2D> boxes;
  std::vector<RadarPoint> points;
};
Json sensor_frame(const SensorFrame& f);
SensorFrame sensor_frame(const Json& j);

Json remote_track_msg(const RemoteTrackMsg& m);
RemoteTrackMsg remote_track_msg(const Json& j);

Json task_request(const TaskRequest& r);
TaskRequest task_request(const Json& j);
Json task_result(const TaskResult& r);
TaskResult task_result(const Json& j);

Json heartbeat(std::int64_t agent, double t);

std::string to_hex(const Bytes& b);
Bytes from_hex(const std::string& s);

/// Wraps nlohmann exceptions into kSchema with `context`.
template <typename F>
auto guarded(const std::string& context, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kSchema, context + ": " + e.what());
  }
}

}  // namespace avfuse::codec
