#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "avfuse/offload.hpp"
#include "avfuse/random.hpp"

using namespace avfuse;

namespace {

Detection3D det_at(const Vec3& p, double var, double t) {
  Detection3D d;
  d.position = p;
  d.cov = Mat3::Identity() * var;
  d.timestamp = t;
  return d;
}

TaskRequest request(std::uint64_t id, double t = 0.0) {
  TaskRequest r;
  r.task_id = id;
  r.frame_time = t;
  r.payload = encode_stereo_payload(StereoPayload{});
  return r;
}

std::vector<Detection3D> scene(double t, Rng& rng, double sigma) {
  std::vector<Detection3D> out;
  const Vec3 a(5 + 10 * t, 0, 0), b(30 + 6 * t, 4, 0);
  for (const Vec3& p : {a, b})
    out.push_back(det_at(p + Vec3(rng.normal(0, sigma), rng.normal(0, sigma), 0), sigma * sigma, t));
  return out;
}

struct DelayedRun {
  TrackerState final_state;
  std::vector<Batch> batches;
  std::vector<IntegrateOutcome> outcomes;
};

// Local batches at 10 Hz; an edge result for every fifth frame arrives `delay` later.
DelayedRun run_delayed(double delay, std::uint64_t seed, const TrackerConfig& cfg) {
  Rng rng(seed);
  OosmTracker tracker(cfg);
  DelayedRun out;
  std::multimap<double, TaskResult> due;
  std::uint64_t next_task = 1;
  for (int k = 0; k <= 60; ++k) {
    const double t = 0.1 * k;
    for (auto it = due.begin(); it != due.end() && it->first <= t + 1e-12;) {
      out.outcomes.push_back(tracker.integrate(it->second, it->first));
      if (out.outcomes.back() != IntegrateOutcome::kStale)
        out.batches.push_back({it->second.frame_time, 1, it->second.task_id, it->second.detections});
      it = due.erase(it);
    }
    const auto local = scene(t, rng, 0.3);
    tracker.apply(local, t);
    out.batches.push_back({t, 0, 0, local});
    if (k % 5 == 0) {
      TaskResult r;
      r.task_id = next_task++;
      r.frame_time = t;
      r.detections = scene(t, rng, 0.05);
      if (delay == 0.0) {
        out.outcomes.push_back(tracker.integrate(r, t));
        out.batches.push_back({t, 1, r.task_id, r.detections});
      } else {
        due.emplace(t + delay, r);
      }
    }
  }
  out.final_state = tracker.state();
  return out;
}

}  // namespace

TEST_CASE("dispatch examples") {
  WorkerPool pool;
  pool.workers = {{0, false, true, 0.0, {}}, {1, false, true, 0.0, {}}};
  CHECK(dispatch(pool, request(1)) == 0);
  CHECK(dispatch(pool, request(2)) == 1);
  CHECK_FALSE(dispatch(pool, request(3)));

  WorkerPool empty;
  CHECK_FALSE(dispatch(empty, request(1)));

  WorkerPool busy;
  busy.workers = {{0, true, true, 0.0, 7}, {1, false, true, 0.0, {}}};
  CHECK(dispatch(busy, request(1)) == 1);
}

TEST_CASE("round robin is fair") {
  for (int k = 1; k <= 5; ++k) {
    WorkerPool pool;
    for (int i = 0; i < k; ++i) pool.workers.push_back({i, false, true, 0.0, {}});
    std::map<std::int64_t, int> counts;
    for (std::uint64_t n = 1; n <= 1000; ++n) {
      const auto w = dispatch(pool, request(n));
      REQUIRE(w);
      ++counts[*w];
      pool.workers[static_cast<std::size_t>(*w)].busy = false;
    }
    int lo = 1 << 30, hi = 0;
    for (auto [id, c] : counts) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    CHECK(static_cast<int>(counts.size()) == k);
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("emulate_worker examples") {
  GroundTruthObject o;
  o.id = 3;
  o.position = Vec3(20, 5, 0.5);
  StereoPayload payload;
  payload.object_ids = {3};
  payload.world_from_agent = Pose::from_translation(Vec3(10, 0, 0));
  TaskRequest req = request(1, 2.0);
  req.payload = encode_stereo_payload(payload);

  WorkerConfig cfg;
  cfg.lat_min = cfg.lat_max = 0.2;
  cfg.accuracy.range_sigma = 0.0;
  cfg.accuracy.azimuth_sigma = 0.0;
  cfg.accuracy.p_detect = 1.0;
  Rng rng(5);
  const TaskResult ok = emulate_worker(req, {o}, cfg, rng);
  CHECK(ok.status == TaskStatus::kOk);
  CHECK(ok.compute_latency == 0.2);
  CHECK(ok.frame_time == 2.0);
  REQUIRE(ok.detections.size() == 1);
  CHECK(ok.detections[0].position == Vec3(10, 5, 0.5));
  CHECK(ok.detections[0].source == DetectionSource::kEdgeStereo);

  cfg.p_fail = 1.0;
  CHECK(emulate_worker(req, {o}, cfg, rng).status == TaskStatus::kFailed);
}

TEST_CASE("stereo payload round trip") {
  StereoPayload p;
  p.object_ids = {4, 9, 12};
  p.world_from_agent = Pose::from_ypr_deg(30, 1, -2, Vec3(1, 2, 3));
  const StereoPayload q = decode_stereo_payload(encode_stereo_payload(p));
  CHECK(q.object_ids == p.object_ids);
  CHECK(q.world_from_agent == p.world_from_agent);
}

TEST_CASE("zero latency results equal a plain step") {
  TrackerConfig cfg;
  const DelayedRun r = run_delayed(0.0, 1, cfg);
  for (auto o : r.outcomes) CHECK(o == IntegrateOutcome::kApplied);
  TrackerState plain;
  for (const auto& b : r.batches) plain = step(plain, b.detections, b.time, cfg);
  CHECK(r.final_state == plain);
}

TEST_CASE("delayed results replay to the in-order state") {
  TrackerConfig cfg;
  for (double delay : {0.05, 0.2, 0.35, 0.8, 0.99}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      CAPTURE(delay);
      CAPTURE(seed);
      const DelayedRun r = run_delayed(delay, seed, cfg);
      CHECK(std::count(r.outcomes.begin(), r.outcomes.end(), IntegrateOutcome::kStale) == 0);
      // Anything arriving before the next local frame needs no rollback.
      CHECK((std::count(r.outcomes.begin(), r.outcomes.end(), IntegrateOutcome::kReplayed) > 0) == (delay > 0.1));
      CHECK(r.final_state == in_order_oracle(r.batches, cfg));
    }
  }
}

TEST_CASE("results older than the horizon are dropped") {
  TrackerConfig cfg;
  const DelayedRun r = run_delayed(5.0, 3, cfg);
  CHECK(std::count(r.outcomes.begin(), r.outcomes.end(), IntegrateOutcome::kStale) ==
        static_cast<long>(r.outcomes.size()));
  TrackerState plain;
  for (const auto& b : r.batches) plain = step(plain, b.detections, b.time, cfg);
  CHECK(r.final_state == plain);
}

TEST_CASE("reap_timeouts retries once and then drops") {
  BrokerConfig cfg;
  Broker broker({10}, cfg);
  auto sends = broker.submit(request(1), 0.0);
  REQUIRE(sends.size() == 1);
  broker.on_heartbeat(10, 0.9);
  std::vector<Send> out;
  CHECK(broker.reap_timeouts(1.0, out).empty());
  broker.on_heartbeat(10, 1.0);
  CHECK(broker.reap_timeouts(1.05, out) == std::vector<std::uint64_t>{1});
  CHECK(broker.counters().retried == 1);
  REQUIRE(out.size() == 1);
  CHECK(out[0].worker == 10);
  out.clear();
  broker.on_heartbeat(10, 2.0);
  CHECK(broker.reap_timeouts(2.1, out) == std::vector<std::uint64_t>{1});
  CHECK(out.empty());
  CHECK(broker.counters().timeout_dropped == 1);
  CHECK(broker.outstanding() == 0);
  CHECK(broker.counters().terminated() == broker.counters().submitted);
}

TEST_CASE("healthy heartbeats keep workers registered") {
  Broker broker({10, 11}, BrokerConfig{});
  std::vector<Send> out;
  for (int k = 1; k <= 20; ++k) {
    broker.on_heartbeat(10, 0.5 * k);
    broker.on_heartbeat(11, 0.5 * k);
    CHECK(broker.reap_timeouts(0.5 * k + 0.1, out).empty());
  }
  CHECK(broker.counters().deregistrations == 0);
  for (const auto& w : broker.pool().workers) CHECK(w.registered);
}

TEST_CASE("silent worker is deregistered and its task moves on") {
  Broker broker({10, 11}, BrokerConfig{});
  auto sends = broker.submit(request(1), 0.0);
  REQUIRE(sends.size() == 1);
  CHECK(sends[0].worker == 10);
  std::vector<Send> out;
  broker.on_heartbeat(11, 1.5);
  CHECK(broker.reap_timeouts(1.6, out) == std::vector<std::uint64_t>{1});
  CHECK(broker.counters().deregistrations == 1);
  REQUIRE(out.size() == 1);
  CHECK(out[0].worker == 11);
  broker.on_heartbeat(10, 1.7);
  CHECK(broker.pool().workers[0].registered);
}

TEST_CASE("queue bound drops overflow") {
  BrokerConfig cfg;
  cfg.queue_bound = 2;
  Broker broker({10}, cfg);
  for (std::uint64_t id = 1; id <= 5; ++id) broker.submit(request(id), 0.0);
  CHECK(broker.queue().size() == 2);
  CHECK(broker.counters().queue_dropped == 2);
}

TEST_CASE("counters balance under random traffic") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    BrokerConfig cfg;
    cfg.queue_bound = 4;
    Broker broker({1, 2, 3}, cfg);
    std::multimap<double, std::pair<std::int64_t, TaskResult>> inflight;
    std::uint64_t next = 1;
    auto launch = [&](const std::vector<Send>& sends, double t) {
      for (const auto& s : sends) {
        if (rng.bernoulli(0.1)) continue;  // lost request
        TaskResult r;
        r.task_id = s.request.task_id;
        r.frame_time = s.request.frame_time;
        r.status = rng.bernoulli(0.1) ? TaskStatus::kFailed : TaskStatus::kOk;
        inflight.emplace(t + rng.uniform(0.05, 1.6), std::pair{s.worker, r});
      }
    };
    for (int k = 0; k < 400; ++k) {
      const double t = 0.05 * k;
      for (auto it = inflight.begin(); it != inflight.end() && it->first <= t;) {
        std::vector<Send> sends;
        auto res = broker.on_result(it->second.first, it->second.second, t, sends);
        if (res) ++broker.counters().ok_integrated;
        launch(sends, t);
        it = inflight.erase(it);
      }
      for (std::int64_t w = 1; w <= 3; ++w)
        if (!(w == 3 && t > 5.0 && t < 10.0) && k % 10 == 0) broker.on_heartbeat(w, t);
      if (k % 4 == 0) launch(broker.submit(request(next++, t), t), t);
      std::vector<Send> sends;
      broker.reap_timeouts(t, sends);
      launch(sends, t);
    }
    broker.finalize();
    const auto& c = broker.counters();
    CHECK(c.submitted == next - 1);
    CHECK(c.terminated() == c.submitted);
  }
}
