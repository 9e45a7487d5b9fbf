#include "avfuse/collab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "avfuse/chi_square.hpp"
#include "avfuse/errors.hpp"

namespace avfuse {

std::vector<AlignedTrack> align(const RemoteTrackMsg& msg, const Pose& ego_pose, double t_now,
                                double q, double staleness) {
  const double age = t_now - msg.timestamp;
  if (age < 0)
    throw Error(ErrorCode::kValidation, "remote track message is from the future");
  if (age > staleness)
    throw Error(ErrorCode::kStaleMessage, "message from agent " + std::to_string(msg.sender_id) +
                                              " is " + std::to_string(age) + " s old");
  const Pose ego_from_sender = compose(inverse(ego_pose), msg.sender_pose);
  std::vector<AlignedTrack> out;
  out.reserve(msg.tracks.size());
  for (const auto& rt : msg.tracks) {
    Track tmp;
    tmp.mean = rt.mean;
    tmp.cov = rt.cov;
    tmp = predict(tmp, age, q);
    auto [mean, cov] = transform_gaussian(ego_from_sender, tmp.mean, tmp.cov);
    out.push_back({rt.remote_id, mean, cov});
  }
  return out;
}

Assignment t2t_associate(const std::vector<Track>& local, const std::vector<AlignedTrack>& remote) {
  const double gate = chi_square_quantile(kTrackToTrackGateProb, 3);
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(local.size(), remote.size(),
                                                   std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < local.size(); ++i) {
    for (std::size_t j = 0; j < remote.size(); ++j) {
      const Vec3 delta = local[i].mean.head<3>() - remote[j].mean.head<3>();
      const Mat3 s = local[i].cov.topLeftCorner<3, 3>() + remote[j].cov.topLeftCorner<3, 3>();
      if (reciprocal_condition(s) < 1e-12) continue;
      const double d2 = delta.dot(s.ldlt().solve(delta));
      if (d2 <= gate) cost(i, j) = d2;
    }
  }
  return assign(cost);
}

namespace {

Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& m, const char* name) {
  if (!m.allFinite() || reciprocal_condition(m) < 1e-12)
    throw Error(ErrorCode::kNonInvertible, std::string(name) + " is not invertible");
  return symmetrized(m.inverse());
}

constexpr double kGolden = 0.6180339887498949;
constexpr double kOmegaTolerance = 1e-4;
constexpr int kOmegaGrid = 101;

}  // namespace

double ci_trace(const Eigen::MatrixXd& pa_inv, const Eigen::MatrixXd& pb_inv, double omega) {
  const Eigen::MatrixXd info = omega * pa_inv + (1.0 - omega) * pb_inv;
  return info.inverse().trace();
}

double ci_omega(const Eigen::MatrixXd& pa, const Eigen::MatrixXd& pb) {
  const Eigen::MatrixXd a_inv = checked_inverse(pa, "Pa");
  const Eigen::MatrixXd b_inv = checked_inverse(pb, "Pb");
  auto f = [&](double w) { return ci_trace(a_inv, b_inv, w); };

  std::vector<double> values(kOmegaGrid);
  int best = 0;
  for (int i = 0; i < kOmegaGrid; ++i) {
    values[i] = f(i / double(kOmegaGrid - 1));
    if (values[i] < values[best]) best = i;
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  if (*hi_it - *lo_it <= 1e-12 * std::max(1.0, std::abs(*lo_it))) return 0.5;

  double a = std::max(0, best - 1) / double(kOmegaGrid - 1);
  double b = std::min(kOmegaGrid - 1, best + 1) / double(kOmegaGrid - 1);
  double c = b - kGolden * (b - a);
  double d = a + kGolden * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > kOmegaTolerance) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kGolden * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kGolden * (b - a);
      fd = f(d);
    }
  }
  const double refined = (a + b) / 2.0;
  const double grid_omega = best / double(kOmegaGrid - 1);
  return f(refined) < values[best] ? refined : grid_omega;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> ci_fuse(const Eigen::VectorXd& xa,
                                                    const Eigen::MatrixXd& pa,
                                                    const Eigen::VectorXd& xb,
                                                    const Eigen::MatrixXd& pb, double omega) {
  if (omega < 0.0 || omega > 1.0)
    throw Error(ErrorCode::kValidation, "covariance intersection weight outside [0, 1]");
  if (omega == 1.0) return {xa, pa};
  if (omega == 0.0) return {xb, pb};
  const Eigen::MatrixXd a_inv = checked_inverse(pa, "Pa");
  const Eigen::MatrixXd b_inv = checked_inverse(pb, "Pb");
  const Eigen::MatrixXd p =
      symmetrized(checked_inverse(omega * a_inv + (1.0 - omega) * b_inv, "fused information"));
  const Eigen::VectorXd x = p * (omega * a_inv * xa + (1.0 - omega) * b_inv * xb);
  return {x, p};
}

TrackerState covi_step(const TrackerState& state, CollabState& collab,
                       const std::vector<RemoteTrackMsg>& msgs, const Pose& ego_pose, double t_now,
                       const TrackerConfig& cfg, double staleness) {
  TrackerState out = state;
  std::erase_if(collab.links, [&](const auto& entry) {
    return std::none_of(out.tracks.begin(), out.tracks.end(),
                        [&](const Track& t) { return t.id == entry.second.local_id; });
  });
  for (const auto& msg : msgs) {
    ++collab.counters.messages;
    try {
      const std::vector<AlignedTrack> remote = align(msg, ego_pose, t_now, cfg.q, staleness);
      const Assignment pairs = t2t_associate(out.tracks, remote);

      // Fuse into a copy so a failing pair leaves the message's effects atomic.
      std::vector<Track> tracks = out.tracks;
      std::vector<char> remote_used(remote.size(), 0);
      std::vector<std::pair<LinkKey, FusedTrackLink>> new_links;
      std::uint64_t fused = 0;
      for (const auto& [i, j] : pairs) {
        Track& local = tracks[i];
        const double omega = ci_omega(local.cov, remote[j].cov);
        auto [x, p] = ci_fuse(local.mean, local.cov, remote[j].mean, remote[j].cov, omega);
        local.mean = x;
        local.cov = p;
        local.hits += 1;
        local.misses = 0;
        local.last_update = t_now;
        local.history.push_back({t_now, local.mean, local.cov});
        register_hit(local, cfg);
        remote_used[j] = 1;
        new_links.push_back({{msg.sender_id, remote[j].remote_id}, {local.id, t_now}});
        ++fused;
      }
      std::uint64_t next_id = out.next_id;
      for (std::size_t j = 0; j < remote.size(); ++j) {
        if (remote_used[j]) continue;
        Track t;
        t.id = next_id++;
        t.mean = remote[j].mean;
        t.cov = remote[j].cov;
        t.hits = 1;
        t.last_update = t_now;
        t.history.push_back({t_now, t.mean, t.cov});
        register_hit(t, cfg);
        new_links.push_back({{msg.sender_id, remote[j].remote_id}, {t.id, t_now}});
        tracks.push_back(std::move(t));
      }
      collab.counters.spawned += next_id - out.next_id;
      collab.counters.fused += fused;
      for (auto& [key, link] : new_links) collab.links[key] = link;
      out.tracks = std::move(tracks);
      out.next_id = next_id;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kStaleMessage)
        ++collab.counters.stale;
      else
        ++collab.counters.errors;
    }
  }
  return out;
}

}  // namespace avfuse
