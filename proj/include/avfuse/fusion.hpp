#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "avfuse/geometry.hpp"
#include "avfuse/sensing.hpp"

namespace avfuse {

enum class DetectionSource { kCameraRadar, kRadarOnly, kEdgeStereo };

std::string_view to_string(DetectionSource s);
DetectionSource detection_source_from_string(std::string_view s);

struct Detection3D {
  Vec3 position = Vec3::Zero();  // agent frame
  double radial_speed = 0.0;
  Mat3 cov = Mat3::Identity();
  DetectionSource source = DetectionSource::kCameraRadar;
  double score = 0.0;
  double timestamp = 0.0;
};

struct Association {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (bbox, radar)
  std::vector<std::size_t> unmatched_bboxes;
  std::vector<std::size_t> unmatched_radar;
};

inline constexpr double kFrustumGate = 0.5;
inline constexpr double kRadarOnlyScore = 0.3;
inline constexpr double kRadarOnlyCovScale = 4.0;
/// Lower bound on each polar variance so a noise-free sensor still yields an invertible R.
inline constexpr double kMinMeasurementVariance = 1e-6;

/// Projects radar points into the image and pairs them with the boxes that contain them.
Association frustum_associate(const std::vector<Detection2D>& bboxes,
                              const std::vector<RadarPoint>& points, const CameraIntrinsics& k,
                              const Pose& cam_from_radar);

/// Radar polar noise as a Cartesian covariance in the frame of `frame_from_sensor`.
Mat3 polar_measurement_cov(const Vec3& sensor_position, double range_sigma, double azimuth_sigma,
                           const Mat3& frame_from_sensor);

std::vector<Detection3D> synthesize(const Association& assoc,
                                    const std::vector<Detection2D>& bboxes,
                                    const std::vector<RadarPoint>& points,
                                    const Pose& agent_from_radar,
                                    const SensorNoiseConfig& radar_noise);

}  // namespace avfuse
