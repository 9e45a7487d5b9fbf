#include "avfuse/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "avfuse/assignment.hpp"
#include "avfuse/chi_square.hpp"
#include "avfuse/errors.hpp"

namespace avfuse {

namespace {

using Mat36 = Eigen::Matrix<double, 3, 6>;

Mat36 position_extractor() {
  Mat36 h = Mat36::Zero();
  h.leftCols<3>() = Mat3::Identity();
  return h;
}

struct Innovation {
  Vec3 nu;
  Mat3 s;
};

Innovation innovation(const Track& track, const Detection3D& det) {
  const Mat36 h = position_extractor();
  Innovation in{det.position - h * track.mean, h * track.cov * h.transpose() + det.cov};
  if (!in.s.allFinite() || reciprocal_condition(in.s) < 1e-12)
    throw Error(ErrorCode::kSingularInnovation,
                "innovation covariance not invertible for track " + std::to_string(track.id));
  return in;
}

void push_opportunity(Track& track, bool hit, const TrackerConfig& cfg) {
  track.recent.push_back(hit ? 1 : 0);
  while (static_cast<int>(track.recent.size()) > cfg.confirm_n) track.recent.pop_front();
}

void trim_history(Track& track, double now, double horizon) {
  while (!track.history.empty() && track.history.front().t < now - horizon)
    track.history.pop_front();
}

}  // namespace

std::string_view to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::kTentative: return "tentative";
    case TrackStatus::kConfirmed: return "confirmed";
    case TrackStatus::kDeleted: return "deleted";
  }
  return "unknown";
}

bool TrackerConfig::is_valid() const {
  return q > 0 && confirm_m >= 1 && confirm_m <= confirm_n && max_misses >= 1 &&
         (gate_prob == 0.95 || gate_prob == 0.99) && snapshot_horizon >= 0 &&
         init_velocity_sigma > 0 && max_coast > 0;
}

Mat6 transition_matrix(double dt) {
  Mat6 f = Mat6::Identity();
  f.topRightCorner<3, 3>() = Mat3::Identity() * dt;
  return f;
}

Mat6 process_noise(double dt, double q) {
  const double dt2 = dt * dt;
  Mat6 qm = Mat6::Zero();
  for (int i = 0; i < 3; ++i) {
    qm(i, i) = dt2 * dt2 / 4.0 * q;
    qm(i, i + 3) = qm(i + 3, i) = dt2 * dt / 2.0 * q;
    qm(i + 3, i + 3) = dt2 * q;
  }
  return qm;
}

Track predict(const Track& track, double dt, double q) {
  if (dt == 0.0) return track;
  const Mat6 f = transition_matrix(dt);
  Track out = track;
  out.mean = f * track.mean;
  out.cov = symmetrized(f * track.cov * f.transpose() + process_noise(dt, q));
  return out;
}

Track update(const Track& track, const Detection3D& det) {
  const Mat36 h = position_extractor();
  const Innovation in = innovation(track, det);
  // K = P Hᵀ S⁻¹, computed as (S⁻¹ H P)ᵀ since S and P are symmetric.
  const Eigen::Matrix<double, 6, 3> gain =
      in.s.ldlt().solve(h * track.cov).transpose();
  const Mat6 ikh = Mat6::Identity() - gain * h;

  Track out = track;
  out.mean = track.mean + gain * in.nu;
  out.cov = symmetrized(ikh * track.cov * ikh.transpose() + gain * det.cov * gain.transpose());
  out.hits += 1;
  out.misses = 0;
  out.last_update = det.timestamp;
  out.history.push_back({det.timestamp, out.mean, out.cov});
  return out;
}

GateResult gate(const Track& track, const Detection3D& det, double gate_prob) {
  const Innovation in = innovation(track, det);
  const double d2 = in.nu.dot(in.s.ldlt().solve(in.nu));
  return {d2 <= chi_square_quantile(gate_prob, 3), d2};
}

void register_hit(Track& track, const TrackerConfig& cfg) {
  push_opportunity(track, true, cfg);
  if (track.status == TrackStatus::kTentative &&
      std::count(track.recent.begin(), track.recent.end(), 1) >= cfg.confirm_m)
    track.status = TrackStatus::kConfirmed;
}

Track spawn_track(std::uint64_t id, const Detection3D& det, const TrackerConfig& cfg) {
  Track t;
  t.id = id;
  t.mean.head<3>() = det.position;
  t.mean.tail<3>().setZero();
  t.cov = Mat6::Zero();
  t.cov.topLeftCorner<3, 3>() = det.cov;
  t.cov.bottomRightCorner<3, 3>() =
      Mat3::Identity() * cfg.init_velocity_sigma * cfg.init_velocity_sigma;
  t.hits = 1;
  t.last_update = det.timestamp;
  t.history.push_back({det.timestamp, t.mean, t.cov});
  register_hit(t, cfg);
  return t;
}

TrackerState predict_to(const TrackerState& state, double t, const TrackerConfig& cfg) {
  TrackerState out = state;
  if (out.started) {
    const double dt = t - out.time;
    if (dt < 0)
      throw Error(ErrorCode::kPipeline, "tracker asked to move backwards in time");
    for (auto& track : out.tracks) track = predict(track, dt, cfg.q);
  }
  out.time = t;
  out.started = true;
  return out;
}

TrackerState step(const TrackerState& state, const std::vector<Detection3D>& detections, double t,
                  const TrackerConfig& cfg, const Coverage& coverage) {
  TrackerState out = predict_to(state, t, cfg);
  const std::size_t n_tracks = out.tracks.size();
  const std::size_t n_dets = detections.size();

  Eigen::MatrixXd cost =
      Eigen::MatrixXd::Constant(n_tracks, n_dets, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n_tracks; ++i) {
    for (std::size_t j = 0; j < n_dets; ++j) {
      const GateResult g = gate(out.tracks[i], detections[j], cfg.gate_prob);
      if (g.accept) cost(i, j) = g.d2;
    }
  }
  const Assignment pairs = assign(cost);

  std::vector<char> track_hit(n_tracks, 0), det_used(n_dets, 0);
  for (const auto& [i, j] : pairs) {
    out.tracks[i] = update(out.tracks[i], detections[j]);
    register_hit(out.tracks[i], cfg);
    track_hit[i] = 1;
    det_used[j] = 1;
  }
  for (std::size_t i = 0; i < n_tracks; ++i) {
    if (track_hit[i]) continue;
    Track& track = out.tracks[i];
    if (coverage && !coverage(t, track.mean.head<3>())) {
      if (t - track.last_update > cfg.max_coast) track.status = TrackStatus::kDeleted;
      continue;
    }
    track.misses += 1;
    push_opportunity(track, false, cfg);
    if (track.misses > cfg.max_misses) track.status = TrackStatus::kDeleted;
  }
  std::erase_if(out.tracks, [](const Track& tr) { return tr.status == TrackStatus::kDeleted; });

  for (std::size_t j = 0; j < n_dets; ++j) {
    if (det_used[j]) continue;
    out.tracks.push_back(spawn_track(out.next_id++, detections[j], cfg));
  }
  for (auto& track : out.tracks) trim_history(track, t, cfg.snapshot_horizon);
  return out;
}

std::vector<std::pair<double, Vec3>> predict_trajectory(const Track& track, double t,
                                                        double horizon, double dt) {
  if (track.status != TrackStatus::kConfirmed)
    throw Error(ErrorCode::kNotConfirmed, "track " + std::to_string(track.id) + " is not confirmed");
  if (!(horizon > 0) || !(dt > 0))
    throw Error(ErrorCode::kValidation, "prediction horizon and step must be positive");
  const int count = static_cast<int>(std::floor(horizon / dt + 1e-9));
  std::vector<std::pair<double, Vec3>> out;
  out.reserve(count);
  for (int k = 1; k <= count; ++k) {
    const double tau = k * dt;
    out.emplace_back(t + tau, Vec3(track.mean.head<3>() + track.mean.tail<3>() * tau));
  }
  return out;
}

std::vector<const Track*> confirmed_tracks(const TrackerState& state) {
  std::vector<const Track*> out;
  for (const auto& t : state.tracks)
    if (t.status == TrackStatus::kConfirmed) out.push_back(&t);
  return out;
}

}  // namespace avfuse
