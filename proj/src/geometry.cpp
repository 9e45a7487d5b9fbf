#include "avfuse/geometry.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "avfuse/errors.hpp"

namespace avfuse {

namespace {
constexpr double kDegToRad = M_PI / 180.0;
}

Pose Pose::from_ypr_deg(double yaw, double pitch, double roll, const Vec3& t) {
  const Mat3 r = (Eigen::AngleAxisd(yaw * kDegToRad, Vec3::UnitZ()) *
                  Eigen::AngleAxisd(pitch * kDegToRad, Vec3::UnitY()) *
                  Eigen::AngleAxisd(roll * kDegToRad, Vec3::UnitX()))
                     .toRotationMatrix();
  return {r, t};
}

bool Pose::is_valid() const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= 1e-9 && std::abs(rotation.determinant() - 1.0) <= 1e-9;
}

bool CameraIntrinsics::is_valid() const {
  return fx > 0 && fy > 0 && cx > 0 && cx < width && cy > 0 && cy < height;
}

Vec3 transform_point(const Pose& pose, const Vec3& p) {
  return pose.rotation * p + pose.translation;
}

Pose inverse(const Pose& pose) {
  const Mat3 rt = pose.rotation.transpose();
  return {rt, -(rt * pose.translation)};
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose body_from_optical() {
  Mat3 r;
  // columns: optical x (right), y (down), z (forward) expressed in body axes
  r << 0, 0, 1,
      -1, 0, 0,
      0, -1, 0;
  return {r, Vec3::Zero()};
}

std::optional<Pixel> project_to_image(const CameraIntrinsics& k, const Vec3& p_cam) {
  if (p_cam.z() <= 1e-6) return std::nullopt;
  return Pixel{k.fx * p_cam.x() / p_cam.z() + k.cx, k.fy * p_cam.y() / p_cam.z() + k.cy};
}

std::pair<Vec6, Mat6> transform_gaussian(const Pose& pose, const Vec6& mean, const Mat6& cov) {
  if (!is_symmetric(cov)) throw Error(ErrorCode::kNonPsd, "state covariance is not symmetric");
  Mat6 t = Mat6::Zero();
  t.topLeftCorner<3, 3>() = pose.rotation;
  t.bottomRightCorner<3, 3>() = pose.rotation;
  Vec6 out;
  out.head<3>() = transform_point(pose, mean.head<3>());
  out.tail<3>() = pose.rotation * mean.tail<3>();
  return {out, symmetrized(t * cov * t.transpose())};
}

std::pair<Vec3, Mat3> transform_position_gaussian(const Pose& pose, const Vec3& mean,
                                                  const Mat3& cov) {
  if (!is_symmetric(cov)) throw Error(ErrorCode::kNonPsd, "position covariance is not symmetric");
  return {transform_point(pose, mean), symmetrized(pose.rotation * cov * pose.rotation.transpose())};
}

bool is_symmetric(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool is_psd(const Eigen::MatrixXd& m) {
  return is_symmetric(m) && min_eigenvalue(m) >= kEigenvalueFloor;
}

double reciprocal_condition(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(m), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd abs = es.eigenvalues().cwiseAbs();
  const double hi = abs.maxCoeff();
  if (!(hi > 0.0) || !std::isfinite(hi)) return 0.0;
  return abs.minCoeff() / hi;
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kValidation: return "ValidationError";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kNonPsd: return "NonPSD";
    case ErrorCode::kSingularInnovation: return "SingularInnovation";
    case ErrorCode::kNotConfirmed: return "NotConfirmed";
    case ErrorCode::kStaleMessage: return "StaleMessage";
    case ErrorCode::kNonInvertible: return "NonInvertible";
    case ErrorCode::kTopicTooLong: return "TopicTooLong";
    case ErrorCode::kPayloadTooLong: return "PayloadTooLong";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kBadVersion: return "BadVersion";
    case ErrorCode::kUnknownType: return "UnknownType";
    case ErrorCode::kTruncated: return "Truncated";
    case ErrorCode::kUnknownLink: return "UnknownLink";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kSchema: return "SchemaError";
    case ErrorCode::kPipeline: return "PipelineError";
  }
  return "Error";
}

}  // namespace avfuse
