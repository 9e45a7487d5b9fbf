#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "avfuse/geometry.hpp"

namespace avfuse {

struct LabeledPoint {
  std::int64_t id = 0;
  Vec3 position = Vec3::Zero();
};

struct Match {
  std::int64_t gt = 0;
  std::int64_t est = 0;
  double distance = 0.0;
};

struct FrameMatchResult {
  double t = 0.0;
  std::vector<Match> matches;
  int fp = 0;
  int fn = 0;

  int gt_count() const { return static_cast<int>(matches.size()) + fn; }
};

inline constexpr double kDefaultMatchRadius = 2.0;

/// CLEAR-style matching. `previous` maps gt id to the estimate id it was
/// matched to in the last frame; such pairs are kept while still within
/// `radius`, and the rest is solved optimally on Euclidean distance.
FrameMatchResult match_frame(const std::vector<LabeledPoint>& gt,
                             const std::vector<LabeledPoint>& est, double radius = kDefaultMatchRadius,
                             const std::map<std::int64_t, std::int64_t>& previous = {},
                             double t = 0.0);

struct ClearMot {
  std::optional<double> mota;  // null when no ground truth was present
  std::optional<double> motp;  // null when nothing matched
  int id_switches = 0;
  int fp = 0;
  int fn = 0;
  int gt = 0;
  int matches = 0;
};

ClearMot clear_mot(const std::vector<FrameMatchResult>& frames);

/// Optimal subpattern assignment distance with cutoff `c` and order `p`.
double ospa(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double c = 5.0, double p = 1.0);

struct PredictionError {
  double ade = 0.0;
  double fde = 0.0;
};

/// Throws kOutOfRange when a waypoint lies beyond `duration`, kValidation when empty.
PredictionError prediction_error(const std::vector<std::pair<double, Vec3>>& predicted,
                                 const std::function<Vec3(double)>& truth, double duration);

}  // namespace avfuse
