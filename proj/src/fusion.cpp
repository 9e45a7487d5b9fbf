#include "avfuse/fusion.hpp"

#include <cmath>
#include <limits>

#include "avfuse/assignment.hpp"
#include "avfuse/errors.hpp"

namespace avfuse {

std::string_view to_string(DetectionSource s) {
  switch (s) {
    case DetectionSource::kCameraRadar: return "camera+radar";
    case DetectionSource::kRadarOnly: return "radar-only";
    case DetectionSource::kEdgeStereo: return "edge-stereo";
  }
  return "unknown";
}

DetectionSource detection_source_from_string(std::string_view s) {
  if (s == "camera+radar") return DetectionSource::kCameraRadar;
  if (s == "radar-only") return DetectionSource::kRadarOnly;
  if (s == "edge-stereo") return DetectionSource::kEdgeStereo;
  throw Error(ErrorCode::kSchema, "unknown detection source '" + std::string(s) + "'");
}

Association frustum_associate(const std::vector<Detection2D>& bboxes,
                              const std::vector<RadarPoint>& points, const CameraIntrinsics& k,
                              const Pose& cam_from_radar) {
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(bboxes.size(), points.size(), inf);
  for (std::size_t j = 0; j < points.size(); ++j) {
    const auto px = project_to_image(k, transform_point(cam_from_radar, points[j].position));
    if (!px) continue;
    for (std::size_t i = 0; i < bboxes.size(); ++i) {
      const BBox& b = bboxes[i].bbox;
      if (!b.contains(*px)) continue;
      const Pixel c = b.center();
      const double normalized = std::hypot(px->u - c.u, px->v - c.v) / b.diagonal();
      if (normalized <= kFrustumGate) cost(i, j) = normalized;
    }
  }

  Association out;
  out.pairs = assign(cost);
  std::vector<char> box_used(bboxes.size(), 0), point_used(points.size(), 0);
  for (const auto& [i, j] : out.pairs) {
    box_used[i] = 1;
    point_used[j] = 1;
  }
  for (std::size_t i = 0; i < bboxes.size(); ++i)
    if (!box_used[i]) out.unmatched_bboxes.push_back(i);
  for (std::size_t j = 0; j < points.size(); ++j)
    if (!point_used[j]) out.unmatched_radar.push_back(j);
  return out;
}

Mat3 polar_measurement_cov(const Vec3& sensor_position, double range_sigma, double azimuth_sigma,
                           const Mat3& frame_from_sensor) {
  const double range = sensor_position.norm();
  const Vec3 radial = range > 0 ? Vec3(sensor_position / range) : Vec3::UnitX();
  // Tangential axes: horizontal (azimuth) and the remaining (elevation) direction.
  Vec3 horizontal = Vec3::UnitZ().cross(radial);
  if (horizontal.norm() < 1e-9) horizontal = Vec3::UnitY();
  horizontal.normalize();
  const Vec3 vertical = radial.cross(horizontal).normalized();

  Mat3 axes;
  axes.col(0) = radial;
  axes.col(1) = horizontal;
  axes.col(2) = vertical;
  const double tangential = std::pow(range * azimuth_sigma, 2);
  const Eigen::Vector3d variances(std::max(range_sigma * range_sigma, kMinMeasurementVariance),
                                  std::max(tangential, kMinMeasurementVariance),
                                  std::max(tangential, kMinMeasurementVariance));
  const Mat3 rot = frame_from_sensor * axes;
  return symmetrized(rot * variances.asDiagonal() * rot.transpose());
}

std::vector<Detection3D> synthesize(const Association& assoc,
                                    const std::vector<Detection2D>& bboxes,
                                    const std::vector<RadarPoint>& points,
                                    const Pose& agent_from_radar,
                                    const SensorNoiseConfig& radar_noise) {
  auto make = [&](std::size_t j) {
    const RadarPoint& pt = points[j];
    Detection3D d;
    d.position = transform_point(agent_from_radar, pt.position);
    d.radial_speed = pt.radial_speed;
    d.cov = polar_measurement_cov(pt.position, radar_noise.range_sigma, radar_noise.azimuth_sigma,
                                  agent_from_radar.rotation);
    d.timestamp = pt.timestamp;
    return d;
  };

  std::vector<Detection3D> out;
  out.reserve(assoc.pairs.size() + assoc.unmatched_radar.size());
  for (const auto& [i, j] : assoc.pairs) {
    Detection3D d = make(j);
    d.source = DetectionSource::kCameraRadar;
    d.score = bboxes[i].score;
    out.push_back(d);
  }
  for (std::size_t j : assoc.unmatched_radar) {
    Detection3D d = make(j);
    d.source = DetectionSource::kRadarOnly;
    d.score = kRadarOnlyScore;
    d.cov *= kRadarOnlyCovScale;
    out.push_back(d);
  }
  return out;
}

}  // namespace avfuse
