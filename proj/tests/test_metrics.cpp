#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "avfuse/errors.hpp"
#include "avfuse/metrics.hpp"

using namespace avfuse;

namespace {

FrameMatchResult frame(std::vector<Match> matches, int fp, int fn) {
  FrameMatchResult f;
  f.matches = std::move(matches);
  f.fp = fp;
  f.fn = fn;
  return f;
}

// GT=20 over ten frames, FN=3, FP=2, one identity switch.
std::vector<FrameMatchResult> hand_trace() {
  std::vector<FrameMatchResult> frames;
  for (int k = 0; k < 10; ++k) {
    std::vector<Match> m = {{1, k < 5 ? 101 : 103, 0.1}};
    if (k >= 3) m.push_back({2, 102, 0.2});
    frames.push_back(frame(m, k == 9 ? 2 : 0, k < 3 ? 1 : 0));
  }
  return frames;
}

std::vector<Vec3> random_set(std::mt19937_64& gen, int max_n) {
  std::uniform_int_distribution<int> n(0, max_n);
  std::uniform_real_distribution<double> p(-10, 10);
  std::vector<Vec3> out(static_cast<std::size_t>(n(gen)));
  for (auto& v : out) v = Vec3(p(gen), p(gen), p(gen));
  return out;
}

double brute_min_distance(const std::vector<LabeledPoint>& gt, const std::vector<LabeledPoint>& est, double radius,
                          std::size_t& best_count) {
  std::vector<std::size_t> idx(est.size());
  std::iota(idx.begin(), idx.end(), 0);
  best_count = 0;
  double best = 0.0;
  // Permute estimates; pair gt i with est idx[i] when within radius.
  do {
    std::size_t count = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < gt.size() && i < idx.size(); ++i) {
      const double d = (gt[i].position - est[idx[i]].position).norm();
      if (d <= radius) {
        ++count;
        sum += d;
      }
    }
    if (count > best_count || (count == best_count && sum < best)) {
      best_count = count;
      best = sum;
    }
  } while (std::next_permutation(idx.begin(), idx.end()));
  return best;
}

}  // namespace

TEST_CASE("MOTA hand trace") {
  const ClearMot m = clear_mot(hand_trace());
  CHECK(m.gt == 20);
  CHECK(m.fp == 2);
  CHECK(m.fn == 3);
  CHECK(m.id_switches == 1);
  REQUIRE(m.mota);
  CHECK(*m.mota == 0.7);
}

TEST_CASE("perfect tracking") {
  std::vector<FrameMatchResult> frames;
  for (int k = 0; k < 5; ++k) frames.push_back(frame({{1, 1, 0.0}, {2, 2, 0.0}}, 0, 0));
  const ClearMot m = clear_mot(frames);
  CHECK(*m.mota == 1.0);
  CHECK(*m.motp == 0.0);
  CHECK(m.id_switches == 0);
}

TEST_CASE("no ground truth leaves MOTA undefined") {
  const ClearMot m = clear_mot({frame({}, 3, 0)});
  CHECK_FALSE(m.mota);
  CHECK_FALSE(m.motp);
}

TEST_CASE("three-frame identity swap") {
  const Vec3 a(0, 0, 0), b(10, 0, 0);
  std::map<std::int64_t, std::int64_t> prev;
  std::vector<FrameMatchResult> frames;
  const std::vector<std::vector<LabeledPoint>> est = {
      {{7, a}, {8, b}}, {{7, a}, {8, b}}, {{8, a}, {7, b}}};
  for (int k = 0; k < 3; ++k) {
    auto r = match_frame({{1, a}, {2, b}}, est[static_cast<std::size_t>(k)], 2.0, prev, k);
    prev.clear();
    for (const auto& m : r.matches) prev[m.gt] = m.est;
    frames.push_back(r);
  }
  CHECK(clear_mot(frames).id_switches == 2);
  // One object changing label counts once.
  prev.clear();
  frames.clear();
  const std::vector<std::vector<LabeledPoint>> one = {{{7, a}}, {{7, a}}, {{9, a}}};
  for (int k = 0; k < 3; ++k) {
    auto r = match_frame({{1, a}}, one[static_cast<std::size_t>(k)], 2.0, prev, k);
    prev.clear();
    for (const auto& m : r.matches) prev[m.gt] = m.est;
    frames.push_back(r);
  }
  CHECK(clear_mot(frames).id_switches == 1);
}

TEST_CASE("injected false positives never raise MOTA") {
  auto frames = hand_trace();
  double last = *clear_mot(frames).mota;
  for (int k = 0; k < 10; ++k) {
    frames[static_cast<std::size_t>(k)].fp += 1;
    const double now = *clear_mot(frames).mota;
    CHECK(now <= last);
    last = now;
  }
}

TEST_CASE("match_frame examples") {
  const std::vector<LabeledPoint> gt = {{1, Vec3(0, 0, 0)}, {2, Vec3(5, 0, 0)}, {3, Vec3(10, 0, 0)}};
  auto r = match_frame(gt, gt);
  CHECK(r.matches.size() == 3);
  for (const auto& m : r.matches) CHECK(m.distance == 0.0);
  CHECK(r.fp == 0);

  r = match_frame(gt, {});
  CHECK(r.fn == 3);

  r = match_frame({{1, Vec3::Zero()}}, {{10, Vec3(0.5, 0, 0)}, {11, Vec3(1.0, 0, 0)}});
  REQUIRE(r.matches.size() == 1);
  CHECK(r.matches[0].est == 10);
  CHECK(r.fp == 1);
}

TEST_CASE("match_frame equals exhaustive search") {
  std::mt19937_64 gen(21);
  std::uniform_int_distribution<int> n(0, 6);
  std::uniform_real_distribution<double> p(0, 6);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<LabeledPoint> gt, est;
    const int ng = n(gen), ne = n(gen);
    for (int i = 0; i < ng; ++i) gt.push_back({i, Vec3(p(gen), p(gen), 0)});
    for (int i = 0; i < ne; ++i) est.push_back({100 + i, Vec3(p(gen), p(gen), 0)});
    const auto r = match_frame(gt, est, 2.0);
    std::size_t count = 0;
    // Pad estimates so every gt can also stay unmatched in the permutation search.
    std::vector<LabeledPoint> padded = est;
    for (int i = 0; i < ng; ++i) padded.push_back({-1, Vec3(1e9, 0, 0)});
    const double best = brute_min_distance(gt, padded, 2.0, count);
    double total = 0.0;
    for (const auto& m : r.matches) total += m.distance;
    CHECK(r.matches.size() == count);
    CHECK(total == doctest::Approx(best).epsilon(1e-12));
    CHECK(r.fp == ne - static_cast<int>(count));
    CHECK(r.fn == ng - static_cast<int>(count));
  }
}

TEST_CASE("ospa examples") {
  CHECK(ospa({}, {}) == 0.0);
  CHECK(ospa({}, {Vec3(1, 2, 3), Vec3(4, 5, 6)}, 5.0) == 5.0);
  CHECK(ospa({Vec3::Zero()}, {Vec3(1, 0, 0)}, 5.0, 1.0) == 1.0);
  CHECK_THROWS_AS(ospa({}, {}, 0.0), Error);
}

TEST_CASE("ospa axioms on random sets") {
  std::mt19937_64 gen(88);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_set(gen, 6), b = random_set(gen, 6);
    const double c = 5.0;
    const double p = trial % 2 ? 1.0 : 2.0;
    const double ab = ospa(a, b, c, p), ba = ospa(b, a, c, p);
    CHECK(std::abs(ab - ba) <= 1e-12);
    CHECK(ab >= 0.0);
    CHECK(ab <= c + 1e-12);
    CHECK(ospa(a, a, c, p) == 0.0);
    CHECK(ospa(a, {}, c, p) == (a.empty() ? 0.0 : c));
    auto shuffled = a;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    CHECK(ospa(a, shuffled, c, p) <= 1e-12);
    if (!a.empty()) {
      auto moved = a;
      moved[0].x() += 1e-3;
      CHECK(ospa(a, moved, c, p) > 0.0);
    }
  }
}

TEST_CASE("prediction error examples") {
  const auto truth = [](double t) { return Vec3(2.0 * t, 0, 0); };
  std::vector<std::pair<double, Vec3>> pred = {{1.0, Vec3(2, 0, 0)}, {2.0, Vec3(4, 0, 0)}};
  auto e = prediction_error(pred, truth, 10.0);
  CHECK(e.ade == 0.0);
  CHECK(e.fde == 0.0);

  pred = {{1.0, Vec3(2, 1, 0)}, {2.0, Vec3(4, 1, 0)}};
  e = prediction_error(pred, truth, 10.0);
  CHECK(e.ade == 1.0);
  CHECK(e.fde == 1.0);

  // Object turns left at t=0 while the prediction keeps going straight.
  const auto turning = [](double t) { return Vec3(2.0 * t, 0.5 * t * t, 0); };
  pred.clear();
  for (int k = 1; k <= 4; ++k) pred.push_back({0.5 * k, Vec3(k, 0, 0)});
  e = prediction_error(pred, turning, 10.0);
  CHECK(e.fde >= e.ade);
  CHECK(e.fde == doctest::Approx(2.0));

  CHECK_THROWS_AS(prediction_error(pred, truth, 1.0), Error);
  CHECK_THROWS_AS(prediction_error({}, truth, 1.0), Error);
}
