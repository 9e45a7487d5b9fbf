#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avfuse/bus.hpp"
#include "avfuse/codec.hpp"
#include "avfuse/collab.hpp"
#include "avfuse/log.hpp"
#include "avfuse/metrics.hpp"
#include "avfuse/offload.hpp"
#include "avfuse/scenario.hpp"
#include "avfuse/tracker.hpp"

namespace avfuse {

using TruthFn = std::function<std::vector<GroundTruthObject>(double)>;

/// One frame as seen on the bus. `seq` is the order in which the receiver
/// processed it (0 if it never was: dropped, or still in flight at the end).
/// Frames with no receiver (the ego's own track output) get a seq at publish.
struct BusRecord {
  std::uint64_t seq = 0;
  double t_send = 0.0;
  std::optional<double> t_recv;
  std::int64_t from = 0;
  std::optional<std::int64_t> to;
  Bytes bytes;
};

struct TrackFrame {
  double t = 0.0;
  std::vector<Track> tracks;
};

/// {"t", "agent", "tracks": [summary...]}: a tracks.jsonl line and the ego's TRACKS payload.
Json track_frame_json(std::int64_t agent, const TrackFrame& tf);

struct MetricsSummary {
  // Track level, confirmed tracks against all ground truth.
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> mota;
  std::optional<double> motp;
  int id_switches = 0;
  int fp = 0;
  int fn = 0;
  int gt = 0;
  int matches = 0;
  int samples = 0;
  // Ego detection level.
  std::optional<double> det_precision;
  std::optional<double> det_recall;
  std::optional<double> ade;
  std::optional<double> fde;
  std::optional<double> ospa_mean;
  std::vector<std::pair<double, double>> ospa_series;
};

struct NetworkCounters {
  std::uint64_t sent = 0;
  std::uint64_t dropped = 0;
  std::uint64_t delivered = 0;
  std::uint64_t in_flight = 0;  // scheduled past the end of the run
};

struct RunOptions {
  LogLevel log_level = LogLevel::kInfo;
  bool record_replay = true;
  bool keep_batch_log = false;
};

struct RunResult {
  Scenario scenario;
  std::vector<TrackFrame> track_frames;
  std::vector<BusRecord> bus;
  MetricsSummary metrics;
  std::optional<CollabCounters> collab;
  std::optional<OffloadCounters> offload;
  NetworkCounters network;
  std::uint64_t events = 0;
  std::vector<std::string> replay_lines;
  std::vector<std::string> log_lines;
  TrackerState final_state;
  std::vector<Batch> batch_log;  // applied ego batches, when keep_batch_log
};

/// Recorded sensor output and ground truth standing in for the sensor models.
struct ReplayInput {
  std::vector<codec::SensorFrame> frames;  // file order
  std::map<double, std::vector<GroundTruthObject>> truth;
};

/// Ground truth from recorded samples: exact at recorded times, otherwise
/// linear between the neighbouring samples for objects present in both.
/// Throws kOutOfRange outside the recorded span.
std::vector<GroundTruthObject> interpolate_truth(
    const std::map<double, std::vector<GroundTruthObject>>& truth, double t);

/// Where the agent's radar could have returned a point at time t; the ego
/// tracker's miss accounting uses it. Holds a reference to `agent`.
Coverage sensor_coverage(const AgentSpec& agent);

/// Number of grid points k/rate with k/rate <= duration.
std::size_t tick_count(double duration, double rate);

/// Runs the scenario's pipeline mode to the end of its duration. Pipeline
/// errors surface as kPipeline with the event time in the message.
RunResult run(const Scenario& scenario, const RunOptions& options = {});

/// Same loop, driven by recorded sensor frames instead of the sensor models.
RunResult run_replay(const Scenario& scenario, const ReplayInput& input,
                     const RunOptions& options = {});

/// Feeds the frames the ego received, in their recorded order, into a fresh ego
/// pipeline and returns the track output it produces.
std::vector<TrackFrame> replay_bus_frames(const Scenario& scenario,
                                          const std::vector<BusRecord>& records);

}  // namespace avfuse
