#include "avfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "avfuse/assignment.hpp"
#include "avfuse/errors.hpp"

namespace avfuse {

FrameMatchResult match_frame(const std::vector<LabeledPoint>& gt,
                             const std::vector<LabeledPoint>& est, double radius,
                             const std::map<std::int64_t, std::int64_t>& previous, double t) {
  if (!(radius > 0)) throw Error(ErrorCode::kValidation, "match radius must be positive");
  FrameMatchResult out;
  out.t = t;
  std::vector<char> gt_used(gt.size(), 0), est_used(est.size(), 0);

  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto prev = previous.find(gt[i].id);
    if (prev == previous.end()) continue;
    for (std::size_t j = 0; j < est.size(); ++j) {
      if (est_used[j] || est[j].id != prev->second) continue;
      const double d = (gt[i].position - est[j].position).norm();
      if (d <= radius) {
        out.matches.push_back({gt[i].id, est[j].id, d});
        gt_used[i] = est_used[j] = 1;
      }
      break;
    }
  }

  std::vector<std::size_t> gi, ej;
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (!gt_used[i]) gi.push_back(i);
  for (std::size_t j = 0; j < est.size(); ++j)
    if (!est_used[j]) ej.push_back(j);
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(gi.size(), ej.size(),
                                                   std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < gi.size(); ++a)
    for (std::size_t b = 0; b < ej.size(); ++b) {
      const double d = (gt[gi[a]].position - est[ej[b]].position).norm();
      if (d <= radius) cost(a, b) = d;
    }
  for (const auto& [a, b] : assign(cost)) {
    out.matches.push_back({gt[gi[a]].id, est[ej[b]].id, cost(a, b)});
    gt_used[gi[a]] = est_used[ej[b]] = 1;
  }
  out.fn = static_cast<int>(std::count(gt_used.begin(), gt_used.end(), 0));
  out.fp = static_cast<int>(std::count(est_used.begin(), est_used.end(), 0));
  std::sort(out.matches.begin(), out.matches.end(),
            [](const Match& x, const Match& y) { return x.gt < y.gt; });
  return out;
}

ClearMot clear_mot(const std::vector<FrameMatchResult>& frames) {
  ClearMot r;
  double distance_sum = 0.0;
  std::map<std::int64_t, std::int64_t> last;
  for (const auto& f : frames) {
    r.fp += f.fp;
    r.fn += f.fn;
    r.gt += f.gt_count();
    for (const auto& m : f.matches) {
      ++r.matches;
      distance_sum += m.distance;
      auto it = last.find(m.gt);
      if (it != last.end() && it->second != m.est) ++r.id_switches;
      last[m.gt] = m.est;
    }
  }
  if (r.gt > 0) r.mota = double(r.gt - r.fn - r.fp - r.id_switches) / double(r.gt);
  if (r.matches > 0) r.motp = distance_sum / r.matches;
  return r;
}

double ospa(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double c, double p) {
  if (!(c > 0) || !(p >= 1)) throw Error(ErrorCode::kValidation, "OSPA needs c > 0 and p >= 1");
  const std::vector<Vec3>& small = a.size() <= b.size() ? a : b;
  const std::vector<Vec3>& large = a.size() <= b.size() ? b : a;
  const std::size_t m = small.size(), n = large.size();
  if (n == 0) return 0.0;

  Eigen::MatrixXd cost(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost(i, j) = std::pow(std::min(c, (small[i] - large[j]).norm()), p);
  double total = assignment_cost(cost, assign(cost));
  total += std::pow(c, p) * static_cast<double>(n - m);
  return std::pow(total / static_cast<double>(n), 1.0 / p);
}

PredictionError prediction_error(const std::vector<std::pair<double, Vec3>>& predicted,
                                 const std::function<Vec3(double)>& truth, double duration) {
  if (predicted.empty()) throw Error(ErrorCode::kValidation, "no waypoints to score");
  PredictionError e;
  double sum = 0.0;
  for (const auto& [t, pos] : predicted) {
    if (t > duration + 1e-9)
      throw Error(ErrorCode::kOutOfRange, "waypoint at t=" + std::to_string(t) + " beyond duration");
    const double err = (truth(t) - pos).norm();
    sum += err;
    e.fde = err;
  }
  e.ade = sum / static_cast<double>(predicted.size());
  return e;
}

}  // namespace avfuse
