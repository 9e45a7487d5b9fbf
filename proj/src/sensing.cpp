#include "avfuse/sensing.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "avfuse/errors.hpp"

namespace avfuse {

double BBox::diagonal() const { return std::hypot(width(), height()); }

double BBox::intersection_area(const BBox& other) const {
  const double w = std::min(umax, other.umax) - std::max(umin, other.umin);
  const double h = std::min(vmax, other.vmax) - std::max(vmin, other.vmin);
  return (w > 0 && h > 0) ? w * h : 0.0;
}

bool SensorNoiseConfig::is_valid() const {
  return pixel_sigma >= 0 && range_sigma >= 0 && azimuth_sigma >= 0 && speed_sigma >= 0 &&
         p_detect >= 0 && p_detect <= 1 && clutter_rate >= 0 && fov_azimuth > 0 &&
         max_range > 0;
}

SensorPreset sensor_preset(const std::string& name) {
  if (name == "blackfly-s") {
    SensorPreset p{SensorType::kCamera, 10.0, {}, {}};
    p.noise.pixel_sigma = 2.0;
    p.noise.p_detect = 0.95;
    p.noise.clutter_rate = 0.1;
    return p;
  }
  if (name == "iwr1443") {
    SensorPreset p{SensorType::kRadar, 20.0, {}, {}};
    p.noise.range_sigma = 0.15;
    p.noise.azimuth_sigma = 0.02;
    p.noise.speed_sigma = 0.1;
    p.noise.p_detect = 0.9;
    p.noise.clutter_rate = 0.2;
    p.noise.fov_azimuth = 2.0 * M_PI / 3.0;
    p.noise.max_range = 100.0;
    return p;
  }
  throw Error(ErrorCode::kValidation, "unknown sensor preset '" + name + "'");
}

namespace {

std::array<Vec3, 8> box_corners(const GroundTruthObject& obj) {
  const double heading = (obj.velocity.head<2>().norm() > 1e-9)
                             ? std::atan2(obj.velocity.y(), obj.velocity.x())
                             : 0.0;
  const Mat3 r = Eigen::AngleAxisd(heading, Vec3::UnitZ()).toRotationMatrix();
  const Vec3 half = obj.extent / 2.0;
  std::array<Vec3, 8> out;
  int i = 0;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1})
        out[i++] = obj.position + r * Vec3(sx * half.x(), sy * half.y(), sz * half.z());
  return out;
}

BBox clip(BBox b, const CameraIntrinsics& k) {
  b.umin = std::clamp(b.umin, 0.0, k.width);
  b.umax = std::clamp(b.umax, 0.0, k.width);
  b.vmin = std::clamp(b.vmin, 0.0, k.height);
  b.vmax = std::clamp(b.vmax, 0.0, k.height);
  return b;
}

}  // namespace

std::optional<BBox> project_object(const CameraIntrinsics& k, const Pose& world_from_camera,
                                   const GroundTruthObject& obj) {
  const Pose camera_from_world = inverse(world_from_camera);
  const auto center = project_to_image(k, transform_point(camera_from_world, obj.position));
  if (!center || center->u < 0 || center->u >= k.width || center->v < 0 ||
      center->v >= k.height)
    return std::nullopt;

  BBox hull{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Vec3& corner : box_corners(obj)) {
    Vec3 pc = transform_point(camera_from_world, corner);
    // Corners behind the image plane are pulled onto it so the hull stays finite.
    pc.z() = std::max(pc.z(), 1e-3);
    const Pixel px = *project_to_image(k, pc);
    hull.umin = std::min(hull.umin, px.u);
    hull.umax = std::max(hull.umax, px.u);
    hull.vmin = std::min(hull.vmin, px.v);
    hull.vmax = std::max(hull.vmax, px.v);
  }
  hull = clip(hull, k);
  if (hull.width() <= 0 || hull.height() <= 0) return std::nullopt;
  return hull;
}

std::vector<std::size_t> visible_objects(const CameraIntrinsics& k,
                                         const Pose& world_from_camera,
                                         const std::vector<GroundTruthObject>& objects) {
  const Pose camera_from_world = inverse(world_from_camera);
  std::vector<std::optional<BBox>> boxes;
  std::vector<double> depth;
  boxes.reserve(objects.size());
  for (const auto& obj : objects) {
    boxes.push_back(project_object(k, world_from_camera, obj));
    depth.push_back(transform_point(camera_from_world, obj.position).z());
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (!boxes[i]) continue;
    bool occluded = false;
    for (std::size_t j = 0; j < objects.size() && !occluded; ++j) {
      if (j == i || !boxes[j] || depth[j] >= depth[i]) continue;
      occluded = boxes[j]->intersection_area(*boxes[i]) >= kOcclusionCoverage * boxes[i]->area();
    }
    if (!occluded) out.push_back(i);
  }
  return out;
}

std::vector<Detection2D> camera_observe(const CameraIntrinsics& k,
                                        const Pose& world_from_camera,
                                        const std::vector<GroundTruthObject>& objects,
                                        const SensorNoiseConfig& cfg, Rng& rng,
                                        double timestamp, int sensor_id) {
  std::vector<Detection2D> out;
  for (std::size_t i : visible_objects(k, world_from_camera, objects)) {
    BBox b = *project_object(k, world_from_camera, objects[i]);
    b.umin += rng.normal(0.0, cfg.pixel_sigma);
    b.vmin += rng.normal(0.0, cfg.pixel_sigma);
    b.umax += rng.normal(0.0, cfg.pixel_sigma);
    b.vmax += rng.normal(0.0, cfg.pixel_sigma);
    const bool detected = rng.bernoulli(cfg.p_detect);
    if (!detected) continue;
    if (b.umin > b.umax) std::swap(b.umin, b.umax);
    if (b.vmin > b.vmax) std::swap(b.vmin, b.vmax);
    b = clip(b, k);
    if (b.width() <= 0 || b.height() <= 0) continue;
    out.push_back({b, kCameraTrueScore, sensor_id, timestamp});
  }

  const std::uint32_t clutter = rng.poisson(cfg.clutter_rate);
  for (std::uint32_t c = 0; c < clutter; ++c) {
    const double w = rng.uniform(kClutterBoxMin, kClutterBoxMax);
    const double h = rng.uniform(kClutterBoxMin, kClutterBoxMax);
    const double u0 = rng.uniform(0.0, std::max(0.0, k.width - w));
    const double v0 = rng.uniform(0.0, std::max(0.0, k.height - h));
    out.push_back({clip({u0, v0, u0 + w, v0 + h}, k), kCameraClutterScore, sensor_id, timestamp});
  }
  return out;
}

namespace {

double snr_for_range(double range) { return 30.0 - 20.0 * std::log10(std::max(range, 1.0)); }

Vec3 from_polar(double range, double azimuth, double elevation) {
  return {range * std::cos(elevation) * std::cos(azimuth),
          range * std::cos(elevation) * std::sin(azimuth), range * std::sin(elevation)};
}

}  // namespace

std::vector<RadarPoint> radar_observe(const Pose& world_from_radar,
                                      const std::vector<GroundTruthObject>& objects,
                                      const SensorNoiseConfig& cfg, Rng& rng,
                                      const Vec3& sensor_velocity, double timestamp,
                                      int sensor_id) {
  const Pose radar_from_world = inverse(world_from_radar);
  const double half_fov = cfg.fov_azimuth / 2.0;
  std::vector<RadarPoint> out;
  for (const auto& obj : objects) {
    const Vec3 p = transform_point(radar_from_world, obj.position);
    const double range = p.norm();
    if (!(range > 0.0) || range > cfg.max_range) continue;
    const double azimuth = std::atan2(p.y(), p.x());
    if (std::abs(azimuth) > half_fov) continue;
    const double elevation = std::atan2(p.z(), p.head<2>().norm());

    const double r_meas = range + rng.normal(0.0, cfg.range_sigma);
    const double az_meas = azimuth + rng.normal(0.0, cfg.azimuth_sigma);
    const double el_meas = elevation + rng.normal(0.0, cfg.azimuth_sigma);
    const Vec3 v_rel = radar_from_world.rotation * (obj.velocity - sensor_velocity);
    const double radial = p.dot(v_rel) / range + rng.normal(0.0, cfg.speed_sigma);
    const bool detected = rng.bernoulli(cfg.p_detect);
    if (!detected || r_meas <= 0.0) continue;

    RadarPoint pt;
    // Noise-free returns keep the exact sensor-frame position.
    pt.position = (r_meas == range && az_meas == azimuth && el_meas == elevation)
                      ? p
                      : from_polar(r_meas, az_meas, el_meas);
    pt.radial_speed = radial;
    pt.snr = snr_for_range(r_meas);
    pt.sensor_id = sensor_id;
    pt.timestamp = timestamp;
    out.push_back(pt);
  }

  const std::uint32_t clutter = rng.poisson(cfg.clutter_rate);
  for (std::uint32_t c = 0; c < clutter; ++c) {
    const double r = rng.uniform(0.5, cfg.max_range);
    const double az = rng.uniform(-half_fov, half_fov);
    RadarPoint pt;
    pt.position = from_polar(r, az, 0.0);
    pt.radial_speed = rng.normal(0.0, cfg.speed_sigma);
    pt.snr = snr_for_range(r) - 15.0;
    pt.sensor_id = sensor_id;
    pt.timestamp = timestamp;
    out.push_back(pt);
  }
  return out;
}

}  // namespace avfuse
