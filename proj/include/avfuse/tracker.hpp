#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string_view>
#include <utility>
#include <vector>

#include "avfuse/fusion.hpp"
#include "avfuse/geometry.hpp"

namespace avfuse {

enum class TrackStatus { kTentative, kConfirmed, kDeleted };

std::string_view to_string(TrackStatus s);

struct TrackSnapshot {
  double t = 0.0;
  Vec6 mean = Vec6::Zero();
  Mat6 cov = Mat6::Identity();

  bool operator==(const TrackSnapshot&) const = default;
};

struct Track {
  std::uint64_t id = 0;
  Vec6 mean = Vec6::Zero();  // [px, py, pz, vx, vy, vz], tracker frame
  Mat6 cov = Mat6::Identity();
  TrackStatus status = TrackStatus::kTentative;
  int hits = 0;
  int misses = 0;  // consecutive
  double last_update = 0.0;
  std::deque<char> recent;  // hit (1) / miss (0) per opportunity, newest last
  std::deque<TrackSnapshot> history;

  bool operator==(const Track&) const = default;
};

struct TrackerConfig {
  double q = 1.0;
  int confirm_m = 3;
  int confirm_n = 5;
  int max_misses = 3;
  double gate_prob = 0.99;
  double snapshot_horizon = 1.0;
  double init_velocity_sigma = 20.0;
  double max_coast = 1.0;  // seconds a track outside sensor coverage survives without updates

  bool is_valid() const;
};

struct TrackerState {
  std::vector<Track> tracks;  // live tracks only, in creation order
  std::uint64_t next_id = 1;
  double time = 0.0;
  bool started = false;

  bool operator==(const TrackerState&) const = default;
};

/// Constant-velocity transition and white-acceleration process noise for `dt`.
Mat6 transition_matrix(double dt);
Mat6 process_noise(double dt, double q);

Track predict(const Track& track, double dt, double q);
/// Joseph-form position update. Throws kSingularInnovation.
Track update(const Track& track, const Detection3D& det);

struct GateResult {
  bool accept = false;
  double d2 = 0.0;
};
GateResult gate(const Track& track, const Detection3D& det, double gate_prob);

/// Whether the local sensors could have detected something at `position` at time t.
using Coverage = std::function<bool(double t, const Vec3& position)>;

/// One global-nearest-neighbour tracking cycle at time `t` (detections in tracker frame).
/// With a coverage predicate, unmatched tracks outside coverage are not charged a miss;
/// they coast and are deleted once not updated for longer than max_coast.
TrackerState step(const TrackerState& state, const std::vector<Detection3D>& detections, double t,
                  const TrackerConfig& cfg, const Coverage& coverage = {});

/// Predicts every live track forward to `t` without counting an opportunity.
TrackerState predict_to(const TrackerState& state, double t, const TrackerConfig& cfg);

/// Records a hit for an existing track and applies M-of-N confirmation.
void register_hit(Track& track, const TrackerConfig& cfg);

/// New tentative track from a position measurement; velocity zero with large variance.
Track spawn_track(std::uint64_t id, const Detection3D& det, const TrackerConfig& cfg);

/// Constant-velocity waypoints at t + k*dt for k = 1..floor(horizon/dt). Throws kNotConfirmed.
std::vector<std::pair<double, Vec3>> predict_trajectory(const Track& track, double t,
                                                        double horizon, double dt);

std::vector<const Track*> confirmed_tracks(const TrackerState& state);

}  // namespace avfuse
