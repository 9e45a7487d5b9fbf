#include <doctest.h>

#include <cmath>
#include <random>

#include "avfuse/collab.hpp"
#include "avfuse/errors.hpp"

using namespace avfuse;

namespace {

Eigen::MatrixXd random_spd(std::mt19937_64& gen, int n) {
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = d(gen);
  return symmetrized(a * a.transpose() + 0.05 * Eigen::MatrixXd::Identity(n, n));
}

double grid_omega(const Eigen::MatrixXd& pa, const Eigen::MatrixXd& pb) {
  const Eigen::MatrixXd ai = pa.inverse(), bi = pb.inverse();
  double best_w = 0.0, best = ci_trace(ai, bi, 0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double w = i / 1000.0, v = ci_trace(ai, bi, w);
    if (v < best) {
      best = v;
      best_w = w;
    }
  }
  return best_w;
}

RemoteTrack remote(std::uint64_t id, const Vec3& p, const Vec3& v, double var = 1.0) {
  RemoteTrack r;
  r.remote_id = id;
  r.mean << p, v;
  r.cov = Mat6::Identity() * var;
  return r;
}

Track local(std::uint64_t id, const Vec3& p, const Vec3& v, double var = 1.0) {
  Track t;
  t.id = id;
  t.mean << p, v;
  t.cov = Mat6::Identity() * var;
  t.status = TrackStatus::kConfirmed;
  t.hits = 5;
  return t;
}

}  // namespace

TEST_CASE("align examples") {
  RemoteTrackMsg msg;
  msg.sender_id = 2;
  msg.timestamp = 4.0;
  msg.tracks = {remote(7, Vec3(1, 2, 3), Vec3(1, 0, 0))};
  auto a = align(msg, Pose::identity(), 4.0, 1.0);
  REQUIRE(a.size() == 1);
  CHECK(a[0].remote_id == 7);
  CHECK(a[0].mean == msg.tracks[0].mean);
  CHECK(a[0].cov == msg.tracks[0].cov);

  a = align(msg, Pose::identity(), 6.0, 1.0, 3.0);
  CHECK(a[0].mean.head<3>() == Vec3(3, 2, 3));

  msg.sender_pose = Pose::from_ypr_deg(90, 0, 0, Vec3(10, 0, 0));
  a = align(msg, Pose::from_translation(Vec3(10, 0, 0)), 6.0, 1.0, 3.0);
  CHECK((a[0].mean.head<3>() - Vec3(-2, 3, 3)).norm() < 1e-12);
  CHECK((a[0].mean.tail<3>() - Vec3(0, 1, 0)).norm() < 1e-12);

  try {
    align(msg, Pose::identity(), 9.0, 1.0);
    FAIL("expected StaleMessage");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kStaleMessage);
  }
}

TEST_CASE("track to track association") {
  const std::vector<Track> locals = {local(1, Vec3(0, 0, 0), Vec3::Zero())};
  AlignedTrack same{9, locals[0].mean, locals[0].cov};
  CHECK(t2t_associate(locals, {same}) == Assignment{{0, 0}});

  AlignedTrack far{9, Vec6::Zero(), Mat6::Identity()};
  far.mean(0) = 100.0;
  // 100^2 / 2 = 5000 against an 11.34 gate.
  CHECK(t2t_associate(locals, {far}).empty());

  // Crossing: local 0 is nearer remote 1 and local 1 nearer remote 0.
  const std::vector<Track> two = {local(1, Vec3(0, 0, 0), Vec3::Zero()), local(2, Vec3(3, 0, 0), Vec3::Zero())};
  std::vector<AlignedTrack> rem = {{1, Vec6::Zero(), Mat6::Identity()}, {2, Vec6::Zero(), Mat6::Identity()}};
  rem[0].mean(0) = 2.6;
  rem[1].mean(0) = 0.2;
  CHECK(t2t_associate(two, rem) == Assignment{{0, 1}, {1, 0}});
}

TEST_CASE("ci_omega examples") {
  Eigen::MatrixXd a(1, 1), b(1, 1);
  a << 1;
  b << 4;
  CHECK(ci_omega(a, b) == 1.0);
  CHECK(ci_omega(b, a) == 0.0);
  const Eigen::MatrixXd p = Eigen::MatrixXd::Identity(3, 3) * 2.0;
  CHECK(ci_omega(p, p) == 0.5);
  CHECK_THROWS_AS(ci_omega(Eigen::MatrixXd::Zero(2, 2), p.topLeftCorner(2, 2)), Error);
}

TEST_CASE("ci_fuse examples") {
  Eigen::VectorXd x(2);
  x << 1, -1;
  const Eigen::MatrixXd p = Eigen::MatrixXd::Identity(2, 2) * 3.0;
  for (double w : {0.0, 0.3, 1.0}) {
    const auto [xf, pf] = ci_fuse(x, p, x, p, w);
    CHECK((xf - x).norm() < 1e-12);
    CHECK((pf - p).norm() < 1e-12);
  }
  Eigen::VectorXd y(2);
  y << 5, 5;
  const auto [x1, p1] = ci_fuse(x, p, y, Eigen::MatrixXd::Identity(2, 2), 1.0);
  CHECK(x1 == x);
  CHECK(p1 == p);

  Eigen::VectorXd xa(1), xb(1);
  xa << 0;
  xb << 2;
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  const auto [xs, ps] = ci_fuse(xa, one, xb, one, 0.5);
  CHECK(xs(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ps(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("ci_fuse output is PSD for every weight") {
  std::mt19937_64 gen(41);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const int n = 1 + i % 6;
    const auto pa = random_spd(gen, n), pb = random_spd(gen, n);
    const auto [x, p] = ci_fuse(Eigen::VectorXd::Zero(n), pa, Eigen::VectorXd::Ones(n), pb, w(gen));
    REQUIRE(min_eigenvalue(p) > kEigenvalueFloor);
    REQUIRE(is_symmetric(p));
  }
}

TEST_CASE("ci optimum beats both inputs and matches a grid scan") {
  std::mt19937_64 gen(43);
  for (int i = 0; i < 1000; ++i) {
    const int n = 1 + i % 6;
    const auto pa = random_spd(gen, n), pb = random_spd(gen, n);
    const double w = ci_omega(pa, pb);
    REQUIRE(w >= 0.0);
    REQUIRE(w <= 1.0);
    const auto [x, p] = ci_fuse(Eigen::VectorXd::Zero(n), pa, Eigen::VectorXd::Zero(n), pb, w);
    CHECK(p.trace() <= std::min(pa.trace(), pb.trace()) + 1e-9);
    CHECK(std::abs(w - grid_omega(pa, pb)) <= 2e-3);
  }
}

TEST_CASE("covi_step examples") {
  TrackerConfig cfg;
  TrackerState s;
  s.started = true;
  s.time = 3.0;
  s.next_id = 2;
  s.tracks = {local(1, Vec3(0, 0, 0), Vec3(1, 0, 0), 2.0)};
  CollabState collab;
  CHECK(covi_step(s, collab, {}, Pose::identity(), 3.0, cfg) == s);

  RemoteTrackMsg occluded;
  occluded.sender_id = 5;
  occluded.timestamp = 3.0;
  occluded.tracks = {remote(4, Vec3(80, 5, 0), Vec3(1, 0, 0))};
  TrackerState spawned = covi_step(s, collab, {occluded}, Pose::identity(), 3.0, cfg);
  REQUIRE(spawned.tracks.size() == 2);
  CHECK(spawned.tracks[1].id == 2);
  CHECK(spawned.tracks[1].status == TrackStatus::kTentative);
  CHECK(spawned.tracks[1].mean.head<3>() == Vec3(80, 5, 0));
  CHECK(collab.counters.spawned == 1);

  RemoteTrackMsg dup;
  dup.sender_id = 5;
  dup.timestamp = 3.0;
  dup.tracks = {remote(9, Vec3(0.3, -0.2, 0), Vec3(1, 0, 0), 1.5)};
  dup.tracks[0].cov(0, 0) = 0.5;
  const TrackerState fused = covi_step(s, collab, {dup}, Pose::identity(), 3.0, cfg);
  REQUIRE(fused.tracks.size() == 1);
  CHECK(fused.tracks[0].cov.trace() <= std::min(s.tracks[0].cov.trace(), dup.tracks[0].cov.trace()) + 1e-9);
  CHECK(collab.counters.fused == 1);
}

TEST_CASE("fusing an identical estimate changes nothing") {
  TrackerConfig cfg;
  TrackerState s;
  s.started = true;
  s.time = 1.0;
  s.next_id = 2;
  s.tracks = {local(1, Vec3(4, 1, 0), Vec3(2, 0, 0), 0.7)};
  RemoteTrackMsg msg;
  msg.sender_id = 3;
  msg.timestamp = 1.0;
  msg.tracks = {RemoteTrack{1, s.tracks[0].mean, s.tracks[0].cov}};
  CollabState collab;
  const TrackerState out = covi_step(s, collab, {msg}, Pose::identity(), 1.0, cfg);
  REQUIRE(out.tracks.size() == 1);
  CHECK(out.tracks[0].mean == s.tracks[0].mean);
  CHECK(out.tracks[0].cov == s.tracks[0].cov);
}

TEST_CASE("stale messages are counted and skipped") {
  TrackerConfig cfg;
  TrackerState s;
  CollabState collab;
  RemoteTrackMsg old;
  old.timestamp = 0.0;
  old.tracks = {remote(1, Vec3(1, 1, 0), Vec3::Zero())};
  const TrackerState out = covi_step(s, collab, {old}, Pose::identity(), 5.0, cfg);
  CHECK(out == s);
  CHECK(collab.counters.stale == 1);
  CHECK(collab.counters.messages == 1);
}
