#include "avfuse/offload.hpp"

#include <algorithm>
#include <cmath>

#include "avfuse/codec.hpp"
#include "avfuse/errors.hpp"

namespace avfuse {

std::string_view to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::kOk: return "ok";
    case TaskStatus::kFailed: return "failed";
    case TaskStatus::kTimeout: return "timeout";
  }
  return "unknown";
}

TaskStatus task_status_from_string(std::string_view s) {
  if (s == "ok") return TaskStatus::kOk;
  if (s == "failed") return TaskStatus::kFailed;
  if (s == "timeout") return TaskStatus::kTimeout;
  throw Error(ErrorCode::kSchema, "unknown task status '" + std::string(s) + "'");
}

bool WorkerConfig::is_valid() const {
  return lat_min >= 0 && lat_max >= lat_min && p_fail >= 0 && p_fail <= 1 && accuracy.is_valid();
}

Bytes encode_stereo_payload(const StereoPayload& p) {
  return to_payload({{"object_ids", p.object_ids}, {"world_from_agent", codec::pose(p.world_from_agent)}});
}

StereoPayload decode_stereo_payload(const Bytes& payload) {
  const Json j = parse_payload(payload);
  return codec::guarded("stereo payload", [&] {
    return StereoPayload{j.at("object_ids").get<std::vector<std::int64_t>>(),
                         codec::pose(j.at("world_from_agent"))};
  });
}

TaskResult emulate_worker(const TaskRequest& req, const std::vector<GroundTruthObject>& truth,
                          const WorkerConfig& cfg, Rng& rng) {
  TaskResult r;
  r.task_id = req.task_id;
  r.frame_time = req.frame_time;
  r.compute_latency = cfg.lat_min == cfg.lat_max ? cfg.lat_min : rng.uniform(cfg.lat_min, cfg.lat_max);
  if (rng.bernoulli(cfg.p_fail)) {
    r.status = TaskStatus::kFailed;
    return r;
  }
  r.status = TaskStatus::kOk;

  const StereoPayload payload = decode_stereo_payload(req.payload);
  const Pose agent_from_world = inverse(payload.world_from_agent);
  for (std::int64_t id : payload.object_ids) {
    const auto it = std::find_if(truth.begin(), truth.end(),
                                 [&](const GroundTruthObject& o) { return o.id == id; });
    if (it == truth.end()) continue;
    const Vec3 p = transform_point(agent_from_world, it->position);
    const double range = p.norm();
    const double az = std::atan2(p.y(), p.x());
    const double el = std::atan2(p.z(), p.head<2>().norm());
    const double r_m = range + rng.normal(0.0, cfg.accuracy.range_sigma);
    const double az_m = az + rng.normal(0.0, cfg.accuracy.azimuth_sigma);
    const double el_m = el + rng.normal(0.0, cfg.accuracy.azimuth_sigma);
    const bool detected = rng.bernoulli(cfg.accuracy.p_detect);
    if (!detected || !(range > 0)) continue;

    Detection3D d;
    d.position = (r_m == range && az_m == az && el_m == el)
                     ? p
                     : Vec3(r_m * std::cos(el_m) * std::cos(az_m),
                            r_m * std::cos(el_m) * std::sin(az_m), r_m * std::sin(el_m));
    d.cov = polar_measurement_cov(p, cfg.accuracy.range_sigma, cfg.accuracy.azimuth_sigma,
                                  Mat3::Identity());
    d.source = DetectionSource::kEdgeStereo;
    d.score = 0.95;
    d.timestamp = req.frame_time;
    r.detections.push_back(d);
  }
  return r;
}

std::optional<std::int64_t> dispatch(WorkerPool& pool, const TaskRequest& req) {
  const std::size_t n = pool.workers.size();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = (pool.rr_cursor + k) % n;
    WorkerEntry& w = pool.workers[i];
    if (!w.registered || w.busy) continue;
    w.busy = true;
    w.task = req.task_id;
    pool.rr_cursor = (i + 1) % n;
    return w.id;
  }
  return std::nullopt;
}

bool BrokerConfig::is_valid() const {
  return timeout > 0 && heartbeat_interval > 0 && max_retries >= 0 && missed_heartbeats >= 1;
}

Broker::Broker(std::vector<std::int64_t> worker_ids, BrokerConfig cfg) : cfg_(cfg) {
  for (std::int64_t id : worker_ids) pool_.workers.push_back({id, false, true, 0.0, std::nullopt});
}

WorkerEntry* Broker::find_worker(std::int64_t id) {
  for (auto& w : pool_.workers)
    if (w.id == id) return &w;
  return nullptr;
}

void Broker::place(std::uint64_t task_id, double t_now, std::vector<Send>& sends) {
  Pending& p = pending_.at(task_id);
  p.attempt_started = t_now;
  p.worker.reset();
  if (queue_.empty()) {
    if (const auto worker = dispatch(pool_, p.req)) {
      p.worker = worker;
      sends.push_back({*worker, p.req});
      return;
    }
  }
  if (queue_.size() >= cfg_.queue_bound) {
    pending_.erase(task_id);
    ++counters_.queue_dropped;
    return;
  }
  queue_.push_back(task_id);
}

void Broker::drain_queue(double t_now, std::vector<Send>& sends) {
  while (!queue_.empty()) {
    const std::uint64_t id = queue_.front();
    Pending& p = pending_.at(id);
    const auto worker = dispatch(pool_, p.req);
    if (!worker) return;
    queue_.pop_front();
    p.worker = worker;
    p.attempt_started = t_now;
    sends.push_back({*worker, p.req});
  }
}

std::vector<Send> Broker::submit(const TaskRequest& req, double t_now) {
  if (pending_.count(req.task_id))
    throw Error(ErrorCode::kValidation, "task id " + std::to_string(req.task_id) + " reused");
  ++counters_.submitted;
  pending_[req.task_id] = Pending{req, t_now, 0, std::nullopt};
  std::vector<Send> sends;
  place(req.task_id, t_now, sends);
  return sends;
}

std::optional<TaskResult> Broker::on_result(std::int64_t worker, const TaskResult& result,
                                            double t_now, std::vector<Send>& sends) {
  if (WorkerEntry* w = find_worker(worker); w && w->task == result.task_id) {
    w->busy = false;
    w->task.reset();
  }
  std::optional<TaskResult> out;
  if (auto it = pending_.find(result.task_id); it != pending_.end()) {
    // An answer from an earlier attempt completes the task too; the current
    // attempt's worker stays busy until it reports.
    std::erase(queue_, result.task_id);
    pending_.erase(it);
    if (result.status == TaskStatus::kOk) {
      out = result;
    } else if (result.status == TaskStatus::kFailed) {
      ++counters_.failed;
    } else {
      ++counters_.timeout_dropped;
    }
  } else {
    ++counters_.late_ignored;
  }
  drain_queue(t_now, sends);
  return out;
}

void Broker::on_heartbeat(std::int64_t worker, double t_now) {
  WorkerEntry* w = find_worker(worker);
  if (!w) return;
  w->last_heartbeat = std::max(w->last_heartbeat, t_now);
  if (!w->registered) {
    w->registered = true;
    w->busy = false;
    w->task.reset();
  }
}

void Broker::expire(std::uint64_t task_id, double t_now, std::vector<Send>& sends) {
  Pending& p = pending_.at(task_id);
  std::erase(queue_, task_id);
  // The attempt's worker is presumed done with it (request or answer lost).
  if (p.worker)
    if (WorkerEntry* w = find_worker(*p.worker); w && w->task == task_id) {
      w->busy = false;
      w->task.reset();
    }
  if (p.retries >= cfg_.max_retries) {
    pending_.erase(task_id);
    ++counters_.timeout_dropped;
    return;
  }
  ++p.retries;
  ++counters_.retried;
  place(task_id, t_now, sends);
}

std::vector<std::uint64_t> Broker::reap_timeouts(double t_now, std::vector<Send>& sends) {
  std::vector<std::uint64_t> expired;
  const double silence = cfg_.missed_heartbeats * cfg_.heartbeat_interval;
  for (auto& w : pool_.workers) {
    if (!w.registered || t_now - w.last_heartbeat <= silence) continue;
    w.registered = false;
    w.busy = false;
    ++counters_.deregistrations;
    if (w.task) {
      if (pending_.count(*w.task) && pending_.at(*w.task).worker == w.id) expired.push_back(*w.task);
      w.task.reset();
    }
  }
  for (const auto& [id, p] : pending_) {
    if (t_now - p.attempt_started > cfg_.timeout &&
        std::find(expired.begin(), expired.end(), id) == expired.end())
      expired.push_back(id);
  }
  std::sort(expired.begin(), expired.end());
  for (std::uint64_t id : expired) expire(id, t_now, sends);
  drain_queue(t_now, sends);
  return expired;
}

void Broker::finalize() {
  counters_.timeout_dropped += pending_.size();
  pending_.clear();
  queue_.clear();
}

// ---------------------------------------------------------------------------

bool Batch::precedes(const Batch& other) const {
  if (time != other.time) return time < other.time;
  if (origin != other.origin) return origin < other.origin;
  return seq < other.seq;
}

OosmTracker::OosmTracker(TrackerConfig cfg, bool keep_log, Coverage coverage)
    : cfg_(cfg), keep_log_(keep_log), coverage_(std::move(coverage)) {}

TrackerState& OosmTracker::mutable_state() {
  entries_.clear();
  base_ = state_;
  return state_;
}

void OosmTracker::push(Batch batch, double t_now) {
  if (keep_log_) {
    const auto pos = std::upper_bound(log_.begin(), log_.end(), batch,
                                      [](const Batch& a, const Batch& b) { return a.precedes(b); });
    log_.insert(pos, batch);
  }
  state_ = step(state_, batch.detections, batch.time, cfg_, coverage_);
  entries_.push_back({std::move(batch), state_});
  prune(t_now);
}

void OosmTracker::prune(double t_now) {
  const double cutoff = t_now - cfg_.snapshot_horizon;
  while (!entries_.empty() && entries_.front().batch.time < cutoff) {
    base_ = std::move(entries_.front().after);
    entries_.pop_front();
  }
}

void OosmTracker::apply(const std::vector<Detection3D>& detections, double t) {
  push(Batch{t, 0, 0, detections}, t);
}

IntegrateOutcome OosmTracker::integrate(const TaskResult& result, double t_now) {
  Batch batch{result.frame_time, 1, result.task_id, result.detections};
  if (entries_.empty() || entries_.back().batch.precedes(batch)) {
    if (state_.started && batch.time < state_.time) return IntegrateOutcome::kStale;
    if (batch.time < t_now - cfg_.snapshot_horizon) return IntegrateOutcome::kStale;
    push(std::move(batch), t_now);
    return IntegrateOutcome::kApplied;
  }
  if (batch.time < t_now - cfg_.snapshot_horizon) return IntegrateOutcome::kStale;

  // Newest snapshot strictly before the late batch in canonical order.
  std::size_t keep = entries_.size();
  while (keep > 0 && !entries_[keep - 1].batch.precedes(batch)) --keep;
  if (keep == 0 && base_.started && batch.time < base_.time) return IntegrateOutcome::kStale;

  std::vector<Batch> replay;
  replay.reserve(entries_.size() - keep + 1);
  replay.push_back(std::move(batch));
  for (std::size_t i = keep; i < entries_.size(); ++i) replay.push_back(std::move(entries_[i].batch));
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(keep), entries_.end());
  state_ = keep == 0 ? base_ : entries_.back().after;

  // push() would log replayed batches twice, so only the new one is logged.
  if (keep_log_) {
    const auto pos = std::upper_bound(log_.begin(), log_.end(), replay.front(),
                                      [](const Batch& a, const Batch& b) { return a.precedes(b); });
    log_.insert(pos, replay.front());
  }
  const bool saved = keep_log_;
  keep_log_ = false;
  for (auto& b : replay) push(std::move(b), t_now);
  keep_log_ = saved;
  return IntegrateOutcome::kReplayed;
}

TrackerState in_order_oracle(std::vector<Batch> batches, const TrackerConfig& cfg,
                             const Coverage& coverage) {
  std::stable_sort(batches.begin(), batches.end(),
                   [](const Batch& a, const Batch& b) { return a.precedes(b); });
  TrackerState state;
  for (const auto& b : batches) state = step(state, b.detections, b.time, cfg, coverage);
  return state;
}

}  // namespace avfuse
