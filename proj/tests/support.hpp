#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "avfuse/canonical_json.hpp"
#include "avfuse/offload.hpp"
#include "avfuse/scenario.hpp"
#include "avfuse/simulation.hpp"

namespace support {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string scenario_path(const std::string& name) {
  return std::string(AVFUSE_SCENARIO_DIR) + "/" + name;
}

inline avfuse::Scenario bundled(const std::string& name) {
  return avfuse::load_scenario(read_file(scenario_path(name)));
}

inline std::string frames_text(const std::vector<avfuse::TrackFrame>& frames, std::int64_t ego) {
  std::string out;
  for (const auto& f : frames) out += avfuse::canonical_dump(avfuse::track_frame_json(ego, f)) + "\n";
  return out;
}

/// One ego on a straight road with a single edge server on an ideal network.
/// Only the worker latency and the broker timeout vary.
inline avfuse::Scenario edge_setup(double worker_latency, double timeout, double task_rate, double duration) {
  avfuse::Json j = avfuse::Json::parse(R"({
    "version": 1, "seed": 11,
    "agents": [
      {"id": 1, "kind": "ego", "motion": {"type": "constant-velocity", "p0": [0, 0, 0], "v": [8, 0, 0]},
       "sensors": [
         {"type": "camera", "preset": "blackfly-s", "mount": {"position": [1.5, 0, 1.5], "ypr": [0, 0, 0]}},
         {"type": "radar", "preset": "iwr1443", "mount": {"position": [2, 0, 0.75], "ypr": [0, 0, 0]}}]},
      {"id": 10, "kind": "edge-server", "motion": {"type": "static", "position": [100, 30, 0]}}
    ],
    "objects": [
      {"id": 1, "motion": {"type": "constant-velocity", "p0": [25, 0, 0.75], "v": [8.5, 0, 0]}},
      {"id": 2, "motion": {"type": "constant-velocity", "p0": [40, 3.5, 0.75], "v": [7, 0, 0]}},
      {"id": 3, "motion": {"type": "constant-velocity", "p0": [60, -3.5, 0.75], "v": [9, 0, 0]}}
    ],
    "network": {"default": {"base_latency": 0, "jitter": 0, "drop_prob": 0}},
    "pipeline": {"mode": "cr-dist"}
  })");
  j["duration"] = duration;
  j["agents"][1]["worker"] = {{"lat_min", worker_latency}, {"lat_max", worker_latency}, {"p_fail", 0.0}};
  j["pipeline"]["offload"] = {{"task_rate", task_rate}, {"timeout", timeout}};
  return avfuse::scenario_from_json(j);
}

/// Tracker states after each prefix of `batches`, applied in the given order.
inline std::vector<avfuse::TrackerState> prefix_states(const std::vector<avfuse::Batch>& batches,
                                                       const avfuse::TrackerConfig& cfg,
                                                       const avfuse::Coverage& coverage) {
  std::vector<avfuse::TrackerState> out;
  avfuse::TrackerState s;
  for (const auto& b : batches) {
    s = avfuse::step(s, b.detections, b.time, cfg, coverage);
    out.push_back(s);
  }
  return out;
}

/// Whether every published track frame equals some prefix state, in order.
inline bool stream_matches(const std::vector<avfuse::TrackFrame>& frames,
                           const std::vector<avfuse::TrackerState>& prefixes) {
  std::size_t k = 0;
  for (const auto& f : frames) {
    while (k < prefixes.size() && prefixes[k].tracks != f.tracks) ++k;
    if (k == prefixes.size()) return false;
  }
  return true;
}

}  // namespace support
