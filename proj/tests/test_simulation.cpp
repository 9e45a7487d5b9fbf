#include <doctest.h>

#include <algorithm>
#include <map>

#include "avfuse/codec.hpp"
#include "avfuse/replay.hpp"
#include "avfuse/report.hpp"
#include "avfuse/simulation.hpp"
#include "support.hpp"

using namespace avfuse;

namespace {

Json small_doc() {
  return Json::parse(R"({
    "version": 1, "duration": 10, "seed": 5,
    "agents": [
      {"id": 1, "kind": "ego", "motion": {"type": "constant-velocity", "p0": [0, 0, 0], "v": [5, 0, 0]},
       "sensors": [
         {"type": "camera", "preset": "blackfly-s", "rate": 10, "mount": {"position": [1.5, 0, 1.5], "ypr": [0, 0, 0]}},
         {"type": "radar", "preset": "iwr1443", "mount": {"position": [2, 0, 0.75], "ypr": [0, 0, 0]}}]}
    ],
    "objects": [
      {"id": 1, "motion": {"type": "constant-velocity", "p0": [20, 0, 0.75], "v": [6, 0, 0]}},
      {"id": 2, "motion": {"type": "constant-velocity", "p0": [35, 3.5, 0.75], "v": [4, 0, 0]}}
    ]
  })");
}

std::vector<BusRecord> on_topic(const RunResult& r, const std::string& topic) {
  std::vector<BusRecord> out;
  for (const auto& rec : r.bus)
    if (decode(rec.bytes).frame.topic == topic) out.push_back(rec);
  return out;
}

}  // namespace

TEST_CASE("tick grid") {
  CHECK(tick_count(10.0, 10.0) == 101);
  CHECK(tick_count(30.0, 20.0) == 601);
  CHECK(tick_count(1.0, 3.0) == 4);
  CHECK(tick_count(0.95, 10.0) == 10);
}

TEST_CASE("ten seconds of a 10 Hz camera is 101 ticks") {
  const RunResult r = run(scenario_from_json(small_doc()));
  const auto cam = on_topic(r, "detections/1/0");
  REQUIRE(cam.size() == 101);
  CHECK(cam.front().t_send == 0.0);
  CHECK(cam.back().t_send == 10.0);
}

TEST_CASE("no objects means no tracks and undefined MOTA") {
  Json j = small_doc();
  j["objects"] = Json::array();
  const RunResult r = run(scenario_from_json(j));
  CHECK(confirmed_tracks(r.final_state).empty());
  CHECK_FALSE(r.metrics.mota);
  CHECK(r.metrics.gt == 0);
}

TEST_CASE("runs are deterministic") {
  const Scenario s = scenario_from_json(small_doc());
  const RunResult a = run(s), b = run(s);
  CHECK(canonical_dump(report_json(a, meta_for(a, "x"))) == canonical_dump(report_json(b, meta_for(b, "x"))));
  CHECK(tracks_jsonl(a) == tracks_jsonl(b));
}

TEST_CASE("different seeds give different runs") {
  Json j = small_doc();
  const RunResult a = run(scenario_from_json(j));
  j["seed"] = 6;
  const RunResult b = run(scenario_from_json(j));
  CHECK(tracks_jsonl(a) != tracks_jsonl(b));
}

TEST_CASE("camera noise settings leave radar output untouched") {
  Json j = small_doc();
  const RunResult a = run(scenario_from_json(j));
  j["agents"][0]["sensors"][0]["noise"] = {{"pixel_sigma", 9.0}, {"clutter_rate", 2.0}};
  const RunResult b = run(scenario_from_json(j));
  const auto ra = on_topic(a, "detections/1/1"), rb = on_topic(b, "detections/1/1");
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) CHECK(ra[i].bytes == rb[i].bytes);
  CHECK(on_topic(a, "detections/1/0")[50].bytes != on_topic(b, "detections/1/0")[50].bytes);
}

TEST_CASE("processed frames are in time order") {
  for (const char* name : {"urban.json", "edge.json"}) {
    const RunResult r = run(support::bundled(name));
    std::vector<const BusRecord*> seen;
    for (const auto& rec : r.bus)
      if (rec.seq > 0) seen.push_back(&rec);
    std::sort(seen.begin(), seen.end(), [](auto* a, auto* b) { return a->seq < b->seq; });
    for (std::size_t i = 1; i < seen.size(); ++i) {
      CHECK(seen[i]->seq > seen[i - 1]->seq);
      CHECK(*seen[i]->t_recv >= *seen[i - 1]->t_recv);
    }
    CHECK(r.network.sent == r.network.dropped + r.network.delivered + r.network.in_flight);
  }
}

TEST_CASE("replaying recorded bus frames reproduces the tracks") {
  for (const char* name : {"urban.json", "occlusion.json", "edge.json"}) {
    for (const char* mode : {"cr", "cr-covi", "cr-dist"}) {
      Scenario s = support::bundled(name);
      s.pipeline.mode = pipeline_mode_from_string(mode);
      if (s.pipeline.mode == PipelineMode::kCrCovi && std::string(name) == "edge.json") continue;
      if (s.pipeline.mode == PipelineMode::kCrDist && std::string(name) == "occlusion.json") continue;
      CAPTURE(name);
      CAPTURE(mode);
      const RunResult r = run(s);
      CHECK(support::frames_text(replay_bus_frames(s, r.bus), s.ego().id) ==
            support::frames_text(r.track_frames, s.ego().id));
    }
  }
}

TEST_CASE("bus frames survive the report round trip") {
  const Scenario s = support::bundled("occlusion.json");
  Scenario covi = s;
  covi.pipeline.mode = PipelineMode::kCrCovi;
  const RunResult r = run(covi);
  const Json report = Json::parse(canonical_dump(report_json(r, meta_for(r, "occlusion"))));
  validate_report(report);
  CHECK(support::frames_text(replay_bus_frames(covi, bus_records_from_report(report)), 1) ==
        support::frames_text(r.track_frames, 1));
}

TEST_CASE("recorded sensor log replays to the same tracks") {
  for (const char* mode : {"cr", "cr-covi"}) {
    Scenario s = support::bundled("urban.json");
    s.pipeline.mode = pipeline_mode_from_string(mode);
    const RunResult r = run(s);
    const ReplayFile file = parse_replay(replay_text(r.replay_lines));
    REQUIRE(file.scenario);
    check_replay(file, *file.scenario);
    const RunResult again = run_replay(*file.scenario, file.input);
    CAPTURE(mode);
    CHECK(tracks_jsonl(again) == tracks_jsonl(r));
    CHECK(again.metrics.mota == r.metrics.mota);
  }
}

TEST_CASE("interpolated truth") {
  std::map<double, std::vector<GroundTruthObject>> truth;
  GroundTruthObject o;
  o.id = 1;
  o.position = Vec3(0, 0, 0);
  truth[0.0] = {o};
  o.position = Vec3(10, 0, 0);
  truth[1.0] = {o};
  CHECK(interpolate_truth(truth, 0.25)[0].position == Vec3(2.5, 0, 0));
  CHECK(interpolate_truth(truth, 1.0)[0].position == Vec3(10, 0, 0));
  CHECK_THROWS_AS(interpolate_truth(truth, 1.5), Error);
}

TEST_CASE("collaboration recovers the hidden object") {
  Scenario s = support::bundled("occlusion.json");
  const RunResult cr = run(s);
  s.pipeline.mode = PipelineMode::kCrCovi;
  const RunResult covi = run(s);
  REQUIRE(covi.collab);
  CHECK(covi.collab->messages > 0);
  CHECK(*covi.metrics.recall >= *cr.metrics.recall + 0.2);
  CHECK(*covi.metrics.mota >= *cr.metrics.mota);
}

TEST_CASE("edge offload counters balance") {
  const RunResult r = run(support::bundled("edge.json"));
  REQUIRE(r.offload);
  CHECK(r.offload->submitted > 0);
  CHECK(r.offload->ok_integrated > 0);
  CHECK(r.offload->terminated() == r.offload->submitted);
}

TEST_CASE("zero-latency edge results match local processing") {
  const Scenario s = support::edge_setup(0.0, 1.0, 5.0, 10.0);
  RunOptions opts;
  opts.keep_batch_log = true;
  const RunResult r = run(s, opts);
  REQUIRE(r.offload);
  CHECK(r.offload->ok_integrated > 0);
  CHECK(r.offload->rollbacks == 0);
  const auto prefixes = support::prefix_states(r.batch_log, s.pipeline.tracker, sensor_coverage(s.ego()));
  CHECK(support::stream_matches(r.track_frames, prefixes));
  CHECK(prefixes.back() == r.final_state);
}

TEST_CASE("delayed edge results end in the in-order state") {
  const Scenario s = support::edge_setup(0.2, 1.0, 5.0, 10.0);
  RunOptions opts;
  opts.keep_batch_log = true;
  const RunResult r = run(s, opts);
  REQUIRE(r.offload);
  CHECK(r.offload->rollbacks > 0);
  CHECK(r.offload->stale_dropped == 0);
  CHECK(in_order_oracle(r.batch_log, s.pipeline.tracker, sensor_coverage(s.ego())) == r.final_state);
}

TEST_CASE("very late edge results are dropped as stale") {
  const Scenario s = support::edge_setup(5.0, 10.0, 0.1, 20.0);
  const RunResult r = run(s);
  REQUIRE(r.offload);
  CHECK(r.offload->ok_integrated == 0);
  CHECK(r.offload->stale_dropped >= 2);
  CHECK(r.offload->terminated() == r.offload->submitted);
}
