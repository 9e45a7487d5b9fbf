#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "avfuse/assignment.hpp"
#include "avfuse/geometry.hpp"
#include "avfuse/tracker.hpp"

namespace avfuse {

struct RemoteTrack {
  std::uint64_t remote_id = 0;
  Vec6 mean = Vec6::Zero();  // sender frame
  Mat6 cov = Mat6::Identity();
};

struct RemoteTrackMsg {
  std::int64_t sender_id = 0;
  Pose sender_pose;  // world-from-sender
  double timestamp = 0.0;
  std::vector<RemoteTrack> tracks;
};

struct AlignedTrack {
  std::uint64_t remote_id = 0;
  Vec6 mean = Vec6::Zero();
  Mat6 cov = Mat6::Identity();
};

inline constexpr double kDefaultStaleness = 1.0;
inline constexpr double kTrackToTrackGateProb = 0.99;

/// Predicts remote tracks to `t_now` in the sender frame, then maps them into
/// the frame of `ego_pose` (world-from-ego). Throws kStaleMessage.
std::vector<AlignedTrack> align(const RemoteTrackMsg& msg, const Pose& ego_pose, double t_now,
                                double q, double staleness = kDefaultStaleness);

/// Position-block Mahalanobis cost with chi-square(0.99, 3) gating, assigned optimally.
Assignment t2t_associate(const std::vector<Track>& local, const std::vector<AlignedTrack>& remote);

double ci_trace(const Eigen::MatrixXd& pa_inv, const Eigen::MatrixXd& pb_inv, double omega);

/// Trace-minimizing covariance-intersection weight. Throws kNonInvertible.
double ci_omega(const Eigen::MatrixXd& pa, const Eigen::MatrixXd& pb);

std::pair<Eigen::VectorXd, Eigen::MatrixXd> ci_fuse(const Eigen::VectorXd& xa,
                                                    const Eigen::MatrixXd& pa,
                                                    const Eigen::VectorXd& xb,
                                                    const Eigen::MatrixXd& pb, double omega);

struct CollabCounters {
  std::uint64_t messages = 0;
  std::uint64_t stale = 0;
  std::uint64_t errors = 0;
  std::uint64_t fused = 0;
  std::uint64_t spawned = 0;

  bool operator==(const CollabCounters&) const = default;
};

struct LinkKey {
  std::int64_t sender = 0;
  std::uint64_t remote_id = 0;
  auto operator<=>(const LinkKey&) const = default;
};

struct FusedTrackLink {
  std::uint64_t local_id = 0;
  double last_fusion = 0.0;
  bool operator==(const FusedTrackLink&) const = default;
};

struct CollabState {
  std::map<LinkKey, FusedTrackLink> links;
  CollabCounters counters;
};

/// Fuses every message into `state` (already predicted to `t_now`). Per-message
/// failures are counted in `collab.counters` and never abort the step.
TrackerState covi_step(const TrackerState& state, CollabState& collab,
                       const std::vector<RemoteTrackMsg>& msgs, const Pose& ego_pose, double t_now,
                       const TrackerConfig& cfg, double staleness = kDefaultStaleness);

}  // namespace avfuse
