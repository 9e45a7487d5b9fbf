#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avfuse/bus.hpp"
#include "avfuse/fusion.hpp"
#include "avfuse/random.hpp"
#include "avfuse/sensing.hpp"
#include "avfuse/tracker.hpp"

namespace avfuse {

struct TaskRequest {
  std::uint64_t task_id = 0;
  std::string kind = "stereo-depth";
  double frame_time = 0.0;
  Bytes payload;

  bool operator==(const TaskRequest&) const = default;
};

enum class TaskStatus { kOk, kFailed, kTimeout };

std::string_view to_string(TaskStatus s);
TaskStatus task_status_from_string(std::string_view s);

struct TaskResult {
  std::uint64_t task_id = 0;
  TaskStatus status = TaskStatus::kOk;
  double frame_time = 0.0;
  std::vector<Detection3D> detections;  // requester's agent frame, at frame_time
  double compute_latency = 0.0;
};

// ---------------------------------------------------------------------------
// Worker side

struct WorkerConfig {
  double lat_min = 0.2;
  double lat_max = 0.2;
  double p_fail = 0.0;
  SensorNoiseConfig accuracy;

  bool is_valid() const;
};

/// What the "stereo" request carries in place of an image pair.
struct StereoPayload {
  std::vector<std::int64_t> object_ids;  // visible to the requester's camera at frame_time
  Pose world_from_agent;
};

Bytes encode_stereo_payload(const StereoPayload& p);
StereoPayload decode_stereo_payload(const Bytes& payload);

/// Emulates a compute-heavy detector: ground-truth-derived detections with the
/// worker's accuracy profile. The result becomes available at arrival + compute_latency.
TaskResult emulate_worker(const TaskRequest& req, const std::vector<GroundTruthObject>& truth,
                          const WorkerConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Broker side

struct WorkerEntry {
  std::int64_t id = 0;
  bool busy = false;
  bool registered = true;
  double last_heartbeat = 0.0;
  std::optional<std::uint64_t> task;  // in-flight task, if any
};

struct WorkerPool {
  std::vector<WorkerEntry> workers;
  std::size_t rr_cursor = 0;
};

/// Round-robin over idle registered workers starting at the cursor. Marks the
/// chosen worker busy. nullopt means the caller must queue the request.
std::optional<std::int64_t> dispatch(WorkerPool& pool, const TaskRequest& req);

struct BrokerConfig {
  double timeout = 1.0;
  std::size_t queue_bound = 16;
  double heartbeat_interval = 0.5;
  int max_retries = 1;
  int missed_heartbeats = 3;

  bool is_valid() const;
};

struct OffloadCounters {
  std::uint64_t submitted = 0;
  std::uint64_t ok_integrated = 0;
  std::uint64_t failed = 0;
  std::uint64_t timeout_dropped = 0;
  std::uint64_t stale_dropped = 0;
  std::uint64_t queue_dropped = 0;
  std::uint64_t retried = 0;
  std::uint64_t rollbacks = 0;
  std::uint64_t late_ignored = 0;
  std::uint64_t deregistrations = 0;

  std::uint64_t terminated() const {
    return ok_integrated + failed + timeout_dropped + stale_dropped + queue_dropped;
  }
  bool operator==(const OffloadCounters&) const = default;
};

struct Send {
  std::int64_t worker = 0;
  TaskRequest request;
};

/// Event-driven broker state. Every transition is triggered by a submitted
/// request, a received result or heartbeat, or a timer call; no shared memory
/// with the workers.
class Broker {
 public:
  Broker(std::vector<std::int64_t> worker_ids, BrokerConfig cfg);

  std::vector<Send> submit(const TaskRequest& req, double t_now);

  /// Frees the worker, and returns the result if its task is still outstanding
  /// (the caller then integrates or counts it). Also drains the queue.
  std::optional<TaskResult> on_result(std::int64_t worker, const TaskResult& result, double t_now,
                                      std::vector<Send>& sends);

  void on_heartbeat(std::int64_t worker, double t_now);

  /// Expires requests older than the timeout (retrying each once) and
  /// deregisters silent workers. Returns the expired task ids.
  std::vector<std::uint64_t> reap_timeouts(double t_now, std::vector<Send>& sends);

  /// Counts everything still outstanding as timed out, e.g. at the end of a run.
  void finalize();

  const WorkerPool& pool() const { return pool_; }
  const std::deque<std::uint64_t>& queue() const { return queue_; }
  std::size_t outstanding() const { return pending_.size(); }
  OffloadCounters& counters() { return counters_; }
  const OffloadCounters& counters() const { return counters_; }
  const BrokerConfig& config() const { return cfg_; }

 private:
  struct Pending {
    TaskRequest req;
    double attempt_started = 0.0;
    int retries = 0;
    std::optional<std::int64_t> worker;
  };

  void place(std::uint64_t task_id, double t_now, std::vector<Send>& sends);
  void drain_queue(double t_now, std::vector<Send>& sends);
  void expire(std::uint64_t task_id, double t_now, std::vector<Send>& sends);
  WorkerEntry* find_worker(std::int64_t id);

  BrokerConfig cfg_;
  WorkerPool pool_;
  std::map<std::uint64_t, Pending> pending_;
  std::deque<std::uint64_t> queue_;
  OffloadCounters counters_;
};

// ---------------------------------------------------------------------------
// Out-of-sequence integration

/// Detections applied to the tracker as one step. Batches are ordered by
/// (time, local before edge, task id); the same order defines the in-order oracle.
struct Batch {
  double time = 0.0;
  int origin = 0;  // 0 local, 1 edge result
  std::uint64_t seq = 0;
  std::vector<Detection3D> detections;

  bool precedes(const Batch& other) const;
};

enum class IntegrateOutcome { kApplied, kReplayed, kStale };

/// Tracker wrapper that keeps a snapshot after every batch within the horizon
/// so that late batches can be inserted by rollback and replay.
class OosmTracker {
 public:
  explicit OosmTracker(TrackerConfig cfg, bool keep_log = false, Coverage coverage = {});

  /// In-order local batch.
  void apply(const std::vector<Detection3D>& detections, double t);

  IntegrateOutcome integrate(const TaskResult& result, double t_now);

  const TrackerState& state() const { return state_; }
  /// Direct mutation for collaborative fusion; invalidates rollback history.
  TrackerState& mutable_state();
  const std::vector<Batch>& log() const { return log_; }
  const TrackerConfig& config() const { return cfg_; }
  std::size_t snapshot_count() const { return entries_.size(); }

 private:
  struct Entry {
    Batch batch;
    TrackerState after;
  };

  void push(Batch batch, double t_now);
  void prune(double t_now);

  TrackerConfig cfg_;
  bool keep_log_;
  Coverage coverage_;
  TrackerState base_;  // state before entries_.front()
  TrackerState state_;
  std::deque<Entry> entries_;
  std::vector<Batch> log_;
};

/// Applies `batches` in their canonical order to a fresh tracker.
TrackerState in_order_oracle(std::vector<Batch> batches, const TrackerConfig& cfg,
                             const Coverage& coverage = {});

}  // namespace avfuse
