#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avfuse/geometry.hpp"
#include "avfuse/random.hpp"

namespace avfuse {

struct GroundTruthObject {
  std::int64_t id = 0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 extent = Vec3::Ones();  // full box l, w, h; l follows the heading
};

struct BBox {
  double umin = 0, vmin = 0, umax = 0, vmax = 0;

  double width() const { return umax - umin; }
  double height() const { return vmax - vmin; }
  double area() const { return width() * height(); }
  double diagonal() const;
  Pixel center() const { return {(umin + umax) / 2, (vmin + vmax) / 2}; }
  /// Strict containment.
  bool contains(const Pixel& p) const {
    return p.u > umin && p.u < umax && p.v > vmin && p.v < vmax;
  }
  double intersection_area(const BBox& other) const;
};

struct Detection2D {
  BBox bbox;
  double score = 0.0;
  int sensor_id = 0;
  double timestamp = 0.0;
};

struct RadarPoint {
  Vec3 position = Vec3::Zero();  // sensor frame
  double radial_speed = 0.0;
  double snr = 0.0;
  int sensor_id = 0;
  double timestamp = 0.0;

  double range() const { return position.norm(); }
};

struct SensorNoiseConfig {
  double pixel_sigma = 0.0;
  double range_sigma = 0.0;
  double azimuth_sigma = 0.0;
  double speed_sigma = 0.0;
  double p_detect = 1.0;
  double clutter_rate = 0.0;
  double fov_azimuth = 2.0 * M_PI / 3.0;  // full width, radians
  double max_range = 100.0;

  bool is_valid() const;
};

enum class SensorType { kCamera, kRadar };

/// Named device defaults. The numbers are placeholders, not measured values.
struct SensorPreset {
  SensorType type;
  double rate_hz;
  SensorNoiseConfig noise;
  CameraIntrinsics intrinsics;
};

/// "blackfly-s" or "iwr1443"; throws kValidation for unknown names.
SensorPreset sensor_preset(const std::string& name);

inline constexpr double kCameraTrueScore = 0.9;
inline constexpr double kCameraClutterScore = 0.4;
inline constexpr double kOcclusionCoverage = 0.85;
inline constexpr double kClutterBoxMin = 20.0;
inline constexpr double kClutterBoxMax = 120.0;

/// Pixel hull of the object's box projected through `world_from_camera`, clipped
/// to the image, or nullopt when the center is behind the camera or off-image.
std::optional<BBox> project_object(const CameraIntrinsics& k, const Pose& world_from_camera,
                                   const GroundTruthObject& obj);

/// Indices of objects whose clean box is visible and not occluded.
std::vector<std::size_t> visible_objects(const CameraIntrinsics& k,
                                         const Pose& world_from_camera,
                                         const std::vector<GroundTruthObject>& objects);

/// `world_from_camera` is the optical frame pose (z forward).
std::vector<Detection2D> camera_observe(const CameraIntrinsics& k,
                                        const Pose& world_from_camera,
                                        const std::vector<GroundTruthObject>& objects,
                                        const SensorNoiseConfig& cfg, Rng& rng,
                                        double timestamp = 0.0, int sensor_id = 0);

/// `world_from_radar` is the radar body frame pose (x forward).
std::vector<RadarPoint> radar_observe(const Pose& world_from_radar,
                                      const std::vector<GroundTruthObject>& objects,
                                      const SensorNoiseConfig& cfg, Rng& rng,
                                      const Vec3& sensor_velocity = Vec3::Zero(),
                                      double timestamp = 0.0, int sensor_id = 0);

}  // namespace avfuse
