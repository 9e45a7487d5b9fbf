#pragma once

#include <optional>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace avfuse {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

// Frame conventions:
//   world   z-up, x-east, y-north
//   agent / sensor body   x-forward, y-left, z-up
//   camera optical        z-forward, x-right, y-down

/// Rigid transform mapping local coordinates into the parent frame.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  /// Intrinsic z-y-x rotation (yaw about z, then pitch about y, then roll about x), degrees.
  static Pose from_ypr_deg(double yaw, double pitch, double roll, const Vec3& t = Vec3::Zero());

  /// Orthonormal with det +1 within 1e-9.
  bool is_valid() const;

  bool operator==(const Pose& other) const {
    return rotation == other.rotation && translation == other.translation;
  }
};

struct CameraIntrinsics {
  double fx = 1000.0;
  double fy = 1000.0;
  double cx = 960.0;
  double cy = 540.0;
  double width = 1920.0;
  double height = 1080.0;

  bool is_valid() const;
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

Vec3 transform_point(const Pose& pose, const Vec3& p);
Pose inverse(const Pose& pose);
/// Returns a∘b, i.e. transform_point(compose(a, b), p) == transform_point(a, transform_point(b, p)).
Pose compose(const Pose& a, const Pose& b);

/// Rotation taking camera optical coordinates into the sensor body frame.
Pose body_from_optical();

/// Pinhole projection; nullopt when the point is at or behind the image plane (z <= 1e-6).
std::optional<Pixel> project_to_image(const CameraIntrinsics& k, const Vec3& p_cam);

/// Maps a [position, velocity] Gaussian through `pose`. Throws kNonPsd on an asymmetric input.
std::pair<Vec6, Mat6> transform_gaussian(const Pose& pose, const Vec6& mean, const Mat6& cov);

/// Same for a bare position Gaussian.
std::pair<Vec3, Mat3> transform_position_gaussian(const Pose& pose, const Vec3& mean,
                                                  const Mat3& cov);

template <typename Derived>
auto symmetrized(const Eigen::MatrixBase<Derived>& m) {
  return ((m + m.transpose()) * 0.5).eval();
}

inline constexpr double kSymmetryTolerance = 1e-6;
inline constexpr double kEigenvalueFloor = -1e-9;

bool is_symmetric(const Eigen::MatrixXd& m, double tol = kSymmetryTolerance);
double min_eigenvalue(const Eigen::MatrixXd& m);
bool is_psd(const Eigen::MatrixXd& m);
/// Ratio of smallest to largest absolute eigenvalue of a symmetric matrix; 0 for the zero matrix.
double reciprocal_condition(const Eigen::MatrixXd& m);

}  // namespace avfuse
