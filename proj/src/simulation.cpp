#include "avfuse/simulation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <memory>
#include <queue>
#include <set>

#include "avfuse/canonical_json.hpp"
#include "avfuse/errors.hpp"
#include "avfuse/fusion.hpp"

namespace avfuse {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::int64_t topic_suffix_id(const std::string& topic) {
  const auto pos = topic.rfind('/');
  const std::string tail = pos == std::string::npos ? topic : topic.substr(pos + 1);
  std::int64_t id = 0;
  const auto res = std::from_chars(tail.data(), tail.data() + tail.size(), id);
  if (res.ec != std::errc() || res.ptr != tail.data() + tail.size())
    throw Error(ErrorCode::kSchema, "topic '" + topic + "' does not end in an agent id");
  return id;
}

BusFrame make_frame(MsgType type, double t, std::string topic, const Json& payload) {
  BusFrame f;
  f.msg_type = type;
  f.timestamp_ns = to_nanoseconds(t);
  f.topic = std::move(topic);
  f.payload = to_payload(payload);
  return f;
}

Detection3D to_world(const Detection3D& d, const Pose& world_from_agent) {
  Detection3D w = d;
  w.position = transform_point(world_from_agent, d.position);
  const Mat3& r = world_from_agent.rotation;
  const Mat3 c = r * d.cov * r.transpose();
  w.cov = 0.5 * (c + c.transpose());
  return w;
}

/// Camera+radar late fusion for one agent at time t, in world coordinates.
/// Needs a radar frame at t; the camera frame is used when it is also from t.
std::vector<Detection3D> fuse_local(const AgentSpec& agent, const codec::SensorFrame* cam,
                                    const codec::SensorFrame& radar, double t) {
  const MountedSensor* radar_spec = agent.radar();
  const MountedSensor* cam_spec = agent.camera();
  std::vector<Detection2D> boxes;
  Association assoc;
  if (cam != nullptr && cam_spec != nullptr && cam->t == t) {
    boxes = cam->boxes;
    const Pose agent_from_optical = compose(cam_spec->mount, body_from_optical());
    const Pose cam_from_radar = compose(inverse(agent_from_optical), radar_spec->mount);
    assoc = frustum_associate(boxes, radar.points, cam_spec->intrinsics, cam_from_radar);
  } else {
    for (std::size_t j = 0; j < radar.points.size(); ++j) assoc.unmatched_radar.push_back(j);
  }
  std::vector<Detection3D> dets = synthesize(assoc, boxes, radar.points, radar_spec->mount, radar_spec->noise);
  const Pose world_from_agent = agent.pose_at(t);
  for (auto& d : dets) d = to_world(d, world_from_agent);
  return dets;
}

/// Where the agent's radar could return a point at time t.
Coverage radar_coverage(const AgentSpec& agent) {
  const MountedSensor* radar = agent.radar();
  if (radar == nullptr) return [](double, const Vec3&) { return false; };
  return [&agent, radar](double t, const Vec3& p_world) {
    const Pose world_from_radar = compose(agent.pose_at(t), radar->mount);
    const Vec3 p = transform_point(inverse(world_from_radar), p_world);
    const double range = p.norm();
    return range <= radar->noise.max_range &&
           std::abs(std::atan2(p.y(), p.x())) <= radar->noise.fov_azimuth / 2.0;
  };
}

struct Outgoing {
  std::int64_t to = 0;
  BusFrame frame;
};

/// Sensor frames received since the last flush, newest per type.
struct SensorStash {
  std::optional<codec::SensorFrame> camera;
  std::optional<codec::SensorFrame> radar;

  void put(codec::SensorFrame f) {
    (f.type == SensorType::kCamera ? camera : radar) = std::move(f);
  }
  bool empty() const { return !camera && !radar; }
  void clear() {
    camera.reset();
    radar.reset();
  }
};

}  // namespace

Json track_frame_json(std::int64_t agent, const TrackFrame& tf) {
  Json tracks = Json::array();
  for (const auto& t : tf.tracks) tracks.push_back(codec::track_summary(t));
  return {{"t", tf.t}, {"agent", agent}, {"tracks", tracks}};
}

std::vector<GroundTruthObject> interpolate_truth(
    const std::map<double, std::vector<GroundTruthObject>>& truth, double t) {
  if (truth.empty() || t < truth.begin()->first || t > truth.rbegin()->first)
    throw Error(ErrorCode::kOutOfRange, "no recorded ground truth around t=" + fmt(t));
  const auto hi = truth.lower_bound(t);
  if (hi->first == t) return hi->second;
  const auto lo = std::prev(hi);
  const double a = (t - lo->first) / (hi->first - lo->first);
  std::vector<GroundTruthObject> out;
  for (const auto& o : lo->second) {
    const auto match = std::find_if(hi->second.begin(), hi->second.end(),
                                    [&](const GroundTruthObject& x) { return x.id == o.id; });
    if (match == hi->second.end()) continue;
    GroundTruthObject g = o;
    g.position = o.position + a * (match->position - o.position);
    g.velocity = o.velocity + a * (match->velocity - o.velocity);
    out.push_back(g);
  }
  return out;
}

Coverage sensor_coverage(const AgentSpec& agent) { return radar_coverage(agent); }

std::size_t tick_count(double duration, double rate) {
  return static_cast<std::size_t>(std::floor(duration * rate + 1e-9)) + 1;
}

// ---------------------------------------------------------------------------

namespace {

class EgoNode {
 public:
  EgoNode(const Scenario& s, TruthFn truth, Logger& log, bool keep_log)
      : s_(s), ego_(s.ego()), truth_(std::move(truth)), log_(log),
        tracker_(s.pipeline.tracker, keep_log, radar_coverage(ego_)) {
    if (s.pipeline.mode == PipelineMode::kCrDist) {
      std::vector<std::int64_t> workers;
      for (const auto& a : s.agents)
        if (a.kind == AgentKind::kEdgeServer) workers.push_back(a.id);
      broker_.emplace(workers, s.pipeline.offload.broker);
    }
  }

  void on_frame(const BusFrame& f, double t, std::vector<Outgoing>& out) {
    switch (f.msg_type) {
      case MsgType::kDetections:
        stash_.put(codec::sensor_frame(parse_payload(f.payload)));
        break;
      case MsgType::kTracks:
        try {
          inbox_.push_back(codec::remote_track_msg(parse_payload(f.payload)));
        } catch (const Error& e) {
          ++collab_.counters.errors;
          log_.warn(t, "collab", std::string("undecodable track message: ") + e.what());
        }
        break;
      case MsgType::kTaskResp:
        if (broker_) on_task_result(f, t, out);
        break;
      case MsgType::kHeartbeat:
        if (broker_) broker_->on_heartbeat(topic_suffix_id(f.topic), t);
        break;
      case MsgType::kClock:
        if (broker_) {
          std::vector<Send> sends;
          const auto expired = broker_->reap_timeouts(t, sends);
          for (auto id : expired) log_.info(t, "offload", "task " + std::to_string(id) + " expired");
          route(sends, t, out);
        }
        break;
      case MsgType::kTaskReq:
        break;
    }
  }

  /// Processes everything received since the last flush. Returns the track
  /// output when anything was consumed.
  std::optional<TrackFrame> flush(double t, std::vector<Outgoing>& out) {
    if (stash_.empty() && inbox_.empty()) return std::nullopt;
    last_local_.reset();
    if (stash_.radar && stash_.radar->t == t && ego_.radar() != nullptr) {
      const codec::SensorFrame* cam = stash_.camera ? &*stash_.camera : nullptr;
      last_local_ = fuse_local(ego_, cam, *stash_.radar, t);
      tracker_.apply(*last_local_, t);
    }
    if (broker_ && stash_.camera && stash_.camera->t == t && t >= next_task_time_ - 1e-9) {
      submit_task(t, out);
      next_task_time_ += 1.0 / s_.pipeline.offload.task_rate;
    }
    if (!inbox_.empty()) {
      TrackerState& st = tracker_.mutable_state();
      const std::uint64_t errors = collab_.counters.errors;
      const std::uint64_t stale = collab_.counters.stale;
      st = covi_step(predict_to(st, t, s_.pipeline.tracker), collab_, inbox_, Pose::identity(), t,
                     s_.pipeline.tracker, s_.pipeline.collab.staleness);
      if (collab_.counters.stale > stale) log_.debug(t, "collab", "stale remote message dropped");
      if (collab_.counters.errors > errors) log_.warn(t, "collab", "remote message rejected");
      inbox_.clear();
    }
    stash_.clear();
    return TrackFrame{t, tracker_.state().tracks};
  }

  void finish() {
    if (broker_) broker_->finalize();
  }

  const TrackerState& state() const { return tracker_.state(); }
  const std::optional<std::vector<Detection3D>>& last_local() const { return last_local_; }
  const CollabCounters& collab_counters() const { return collab_.counters; }
  std::optional<OffloadCounters> offload_counters() const {
    if (!broker_) return std::nullopt;
    return broker_->counters();
  }
  const std::vector<Batch>& batch_log() const { return tracker_.log(); }

 private:
  void route(const std::vector<Send>& sends, double t, std::vector<Outgoing>& out) {
    for (const auto& s : sends)
      out.push_back({s.worker, make_frame(MsgType::kTaskReq, t, "tasks/req/" + std::to_string(s.worker),
                                          codec::task_request(s.request))});
  }

  void submit_task(double t, std::vector<Outgoing>& out) {
    StereoPayload payload;
    payload.world_from_agent = ego_.pose_at(t);
    const auto objects = truth_(t);
    if (const MountedSensor* cam = ego_.camera()) {
      const Pose world_from_cam = compose(payload.world_from_agent, compose(cam->mount, body_from_optical()));
      for (std::size_t i : visible_objects(cam->intrinsics, world_from_cam, objects))
        payload.object_ids.push_back(objects[i].id);
    }
    TaskRequest req;
    req.task_id = next_task_id_++;
    req.frame_time = t;
    req.payload = encode_stereo_payload(payload);
    std::vector<Send> sends = broker_->submit(req, t);
    route(sends, t, out);
  }

  void on_task_result(const BusFrame& f, double t, std::vector<Outgoing>& out) {
    const std::int64_t worker = topic_suffix_id(f.topic);
    TaskResult result = codec::task_result(parse_payload(f.payload));
    std::vector<Send> sends;
    auto accepted = broker_->on_result(worker, result, t, sends);
    route(sends, t, out);
    if (!accepted) return;
    const Pose world_from_agent = ego_.pose_at(accepted->frame_time);
    for (auto& d : accepted->detections) d = to_world(d, world_from_agent);
    auto& c = broker_->counters();
    switch (tracker_.integrate(*accepted, t)) {
      case IntegrateOutcome::kApplied:
        ++c.ok_integrated;
        break;
      case IntegrateOutcome::kReplayed:
        ++c.ok_integrated;
        ++c.rollbacks;
        log_.debug(t, "offload", "rollback to " + fmt(accepted->frame_time));
        break;
      case IntegrateOutcome::kStale:
        ++c.stale_dropped;
        log_.info(t, "offload", "stale result for task " + std::to_string(accepted->task_id));
        break;
    }
  }

  const Scenario& s_;
  const AgentSpec& ego_;
  TruthFn truth_;
  Logger& log_;
  OosmTracker tracker_;
  CollabState collab_;
  std::optional<Broker> broker_;
  SensorStash stash_;
  std::vector<RemoteTrackMsg> inbox_;
  std::optional<std::vector<Detection3D>> last_local_;
  std::uint64_t next_task_id_ = 1;
  double next_task_time_ = 0.0;
};

/// Vehicle or roadside unit running its own camera+radar tracker and sharing
/// confirmed tracks.
class CollabNode {
 public:
  CollabNode(const AgentSpec& spec, const TrackerConfig& cfg)
      : spec_(spec), cfg_(cfg), coverage_(radar_coverage(spec)) {}

  void on_frame(const BusFrame& f) {
    if (f.msg_type == MsgType::kDetections) stash_.put(codec::sensor_frame(parse_payload(f.payload)));
  }

  void flush(double t) {
    if (stash_.radar && stash_.radar->t == t && spec_.radar() != nullptr) {
      const codec::SensorFrame* cam = stash_.camera ? &*stash_.camera : nullptr;
      state_ = step(state_, fuse_local(spec_, cam, *stash_.radar, t), t, cfg_, coverage_);
    }
    stash_.clear();
  }

  RemoteTrackMsg broadcast(double t) const {
    RemoteTrackMsg msg;
    msg.sender_id = spec_.id;
    msg.sender_pose = spec_.pose_at(t);
    msg.timestamp = state_.started ? state_.time : t;
    const Pose sender_from_world = inverse(msg.sender_pose);
    for (const Track* tr : confirmed_tracks(state_)) {
      const auto [mean, cov] = transform_gaussian(sender_from_world, tr->mean, tr->cov);
      msg.tracks.push_back({tr->id, mean, cov});
    }
    return msg;
  }

 private:
  const AgentSpec& spec_;
  TrackerConfig cfg_;
  Coverage coverage_;
  TrackerState state_;
  SensorStash stash_;
};

struct WorkerNode {
  const AgentSpec* spec = nullptr;
  Rng rng;
  double busy_until = 0.0;
};

enum class EventKind { kSensorTick, kReplayFrame, kTimer, kMetricSample, kBusDeliver, kTaskComplete };
enum class TimerKind { kBroadcast, kHeartbeat, kClock };

struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::kSensorTick;
  std::int64_t agent = 0;
  std::size_t index = 0;  // sensor index, replay frame, bus record or task result
  TimerKind timer = TimerKind::kBroadcast;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

class Engine {
 public:
  Engine(const Scenario& s, const RunOptions& opts, const ReplayInput* replay)
      : s_(s), opts_(opts), replay_(replay), log_(opts.log_level) {
    if (replay_ != nullptr) {
      truth_ = [this](double t) { return interpolate_truth(replay_->truth, t); };
    } else {
      truth_ = [this](double t) { return world_at(s_.objects, t, s_.duration); };
    }
    ego_ = std::make_unique<EgoNode>(s_, truth_, log_, opts.keep_batch_log);
    for (const auto& a : s_.agents) {
      if (a.id == s_.ego().id) continue;
      if (s_.pipeline.mode == PipelineMode::kCrCovi && a.kind != AgentKind::kEdgeServer && !a.sensors.empty())
        collabs_.emplace(a.id, CollabNode(a, s_.pipeline.tracker));
      if (s_.pipeline.mode == PipelineMode::kCrDist && a.kind == AgentKind::kEdgeServer)
        workers_.emplace(a.id, WorkerNode{&a, Rng(stream_seed(s_.seed, "agent:" + std::to_string(a.id) + "/worker")), 0.0});
    }
  }

  RunResult run() {
    schedule_initial();
    log_.info(0.0, "scenario",
              "run start mode=" + std::string(to_string(s_.pipeline.mode)) + " seed=" + std::to_string(s_.seed));
    if (opts_.record_replay) result_.replay_lines.push_back(canonical_dump(Json{{"scenario", to_json(s_)}}));

    while (!queue_.empty()) {
      const Event ev = queue_.top();
      if (ev.time > s_.duration) break;
      queue_.pop();
      ++result_.events;
      try {
        handle(ev);
        if (queue_.empty() || queue_.top().time > ev.time) end_step(ev.time);
      } catch (const Error& e) {
        throw Error(ErrorCode::kPipeline, "t=" + fmt(ev.time) + ": " + e.what());
      } catch (const std::exception& e) {
        throw Error(ErrorCode::kPipeline, "t=" + fmt(ev.time) + ": " + e.what());
      }
    }
    while (!queue_.empty()) {
      if (queue_.top().kind == EventKind::kBusDeliver) ++result_.network.in_flight;
      queue_.pop();
    }
    ego_->finish();
    finalize_metrics();
    log_.info(s_.duration, "scenario", "run end events=" + std::to_string(result_.events));

    result_.scenario = s_;
    if (s_.pipeline.mode == PipelineMode::kCrCovi) result_.collab = ego_->collab_counters();
    result_.offload = ego_->offload_counters();
    result_.final_state = ego_->state();
    result_.batch_log = ego_->batch_log();
    result_.log_lines = log_.lines();
    return std::move(result_);
  }

 private:
  bool active(const AgentSpec& a) const {
    return a.id == s_.ego().id || collabs_.count(a.id) > 0;
  }

  void push(double time, EventKind kind, std::int64_t agent = 0, std::size_t index = 0,
            TimerKind timer = TimerKind::kBroadcast) {
    queue_.push(Event{time, next_seq_++, kind, agent, index, timer});
  }

  void schedule_initial() {
    if (replay_ == nullptr) {
      for (const auto& a : s_.agents) {
        if (!active(a)) continue;
        for (std::size_t i = 0; i < a.sensors.size(); ++i) {
          const double rate = a.sensors[i].rate_hz;
          const std::size_t n = tick_count(s_.duration, rate);
          for (std::size_t k = 0; k < n; ++k) push(static_cast<double>(k) / rate, EventKind::kSensorTick, a.id, i);
        }
      }
    } else {
      for (std::size_t i = 0; i < replay_->frames.size(); ++i) {
        const auto& f = replay_->frames[i];
        const AgentSpec* a = s_.find_agent(f.agent);
        if (a == nullptr || !active(*a)) continue;
        push(f.t, EventKind::kReplayFrame, f.agent, i);
      }
    }
    for (const auto& [id, node] : collabs_) {
      const double rate = s_.pipeline.collab.broadcast_rate;
      for (std::size_t k = 0, n = tick_count(s_.duration, rate); k < n; ++k)
        push(static_cast<double>(k) / rate, EventKind::kTimer, id, 0, TimerKind::kBroadcast);
    }
    if (!workers_.empty()) {
      const double hb = s_.pipeline.offload.broker.heartbeat_interval;
      for (const auto& [id, node] : workers_)
        for (std::size_t k = 0, n = tick_count(s_.duration, 1.0 / hb); k < n; ++k)
          push(static_cast<double>(k) * hb, EventKind::kTimer, id, 0, TimerKind::kHeartbeat);
    }
    if (s_.pipeline.mode == PipelineMode::kCrDist) {
      const double rate = s_.pipeline.offload.reap_rate;
      for (std::size_t k = 0, n = tick_count(s_.duration, rate); k < n; ++k)
        push(static_cast<double>(k) / rate, EventKind::kTimer, s_.ego().id, 0, TimerKind::kClock);
    }
    const double rate = s_.pipeline.evaluation.rate;
    for (std::size_t k = 0, n = tick_count(s_.duration, rate); k < n; ++k)
      push(static_cast<double>(k) / rate, EventKind::kMetricSample);
  }

  void handle(const Event& ev) {
    const double t = ev.time;
    switch (ev.kind) {
      case EventKind::kSensorTick:
        publish_sensor(observe(*s_.find_agent(ev.agent), ev.index, t));
        break;
      case EventKind::kReplayFrame:
        publish_sensor(replay_->frames[ev.index]);
        break;
      case EventKind::kTimer:
        on_timer(ev, t);
        break;
      case EventKind::kMetricSample:
        sample_due_ = true;
        break;
      case EventKind::kBusDeliver:
        on_deliver(ev.index, t);
        break;
      case EventKind::kTaskComplete: {
        const auto& [worker, result] = results_[ev.index];
        send(worker, s_.ego().id,
             make_frame(MsgType::kTaskResp, t, "tasks/resp/" + std::to_string(worker), codec::task_result(result)), t);
        break;
      }
    }
  }

  Rng& sensor_rng(std::int64_t agent, std::size_t sensor) {
    const auto key = std::pair{agent, sensor};
    auto it = sensor_rngs_.find(key);
    if (it == sensor_rngs_.end())
      it = sensor_rngs_
               .emplace(key, Rng(stream_seed(s_.seed, "agent:" + std::to_string(agent) + "/sensor:" +
                                                          std::to_string(sensor))))
               .first;
    return it->second;
  }

  Rng& link_rng(std::int64_t from, std::int64_t to) {
    const auto key = std::pair{from, to};
    auto it = link_rngs_.find(key);
    if (it == link_rngs_.end()) it = link_rngs_.emplace(key, Rng(stream_seed(s_.seed, link_key(from, to)))).first;
    return it->second;
  }

  codec::SensorFrame observe(const AgentSpec& a, std::size_t idx, double t) {
    const MountedSensor& sensor = a.sensors[idx];
    const auto objects = truth_(t);
    const Pose world_from_agent = a.pose_at(t);
    codec::SensorFrame f;
    f.t = t;
    f.agent = a.id;
    f.sensor = static_cast<int>(idx);
    f.type = sensor.type;
    Rng& rng = sensor_rng(a.id, idx);
    if (sensor.type == SensorType::kCamera) {
      const Pose world_from_cam = compose(world_from_agent, compose(sensor.mount, body_from_optical()));
      f.boxes = camera_observe(sensor.intrinsics, world_from_cam, objects, sensor.noise, rng, t, f.sensor);
    } else {
      f.points = radar_observe(compose(world_from_agent, sensor.mount), objects, sensor.noise, rng,
                               a.velocity_at(t), t, f.sensor);
    }
    return f;
  }

  void record_truth(double t) {
    if (!opts_.record_replay || !truth_written_.insert(t).second) return;
    Json objs = Json::array();
    for (const auto& o : truth_(t)) objs.push_back(codec::truth_object(o));
    result_.replay_lines.push_back(canonical_dump(Json{{"t", t}, {"truth", objs}}));
  }

  void publish_sensor(const codec::SensorFrame& f) {
    const Json payload = codec::sensor_frame(f);
    if (opts_.record_replay) {
      record_truth(f.t);
      result_.replay_lines.push_back(canonical_dump(payload));
    }
    const BusFrame frame = make_frame(MsgType::kDetections, f.t,
                                      "detections/" + std::to_string(f.agent) + "/" + std::to_string(f.sensor), payload);
    local(f.agent, frame, f.t);
  }

  /// Zero-latency hand-off between processes on the same agent.
  void local(std::int64_t agent, const BusFrame& frame, double t) {
    BusRecord rec;
    rec.seq = ++processed_;
    rec.t_send = t;
    rec.t_recv = t;
    rec.from = agent;
    rec.to = agent;
    rec.bytes = encode(frame);
    result_.bus.push_back(std::move(rec));
    dispatch(agent, frame, t);
  }

  void send(std::int64_t from, std::int64_t to, const BusFrame& frame, double t) {
    BusRecord rec;
    rec.t_send = t;
    rec.from = from;
    rec.to = to;
    rec.bytes = encode(frame);
    ++result_.network.sent;
    const Delivery d = deliver(s_.network, from, to, t, link_rng(from, to));
    if (d.dropped) {
      ++result_.network.dropped;
      log_.debug(t, "bus", "dropped " + frame.topic);
    } else {
      rec.t_recv = d.at;
      push(d.at, EventKind::kBusDeliver, to, result_.bus.size());
    }
    result_.bus.push_back(std::move(rec));
  }

  void on_deliver(std::size_t index, double t) {
    BusRecord& rec = result_.bus[index];
    rec.seq = ++processed_;
    ++result_.network.delivered;
    const BusFrame frame = decode(rec.bytes).frame;
    dispatch(*rec.to, frame, t);
  }

  void dispatch(std::int64_t to, const BusFrame& frame, double t) {
    if (to == s_.ego().id) {
      std::vector<Outgoing> out;
      ego_->on_frame(frame, t, out);
      for (const auto& o : out) send(to, o.to, o.frame, t);
    } else if (auto c = collabs_.find(to); c != collabs_.end()) {
      c->second.on_frame(frame);
    } else if (auto w = workers_.find(to); w != workers_.end()) {
      if (frame.msg_type == MsgType::kTaskReq) worker_request(w->second, frame, t);
    }
  }

  void worker_request(WorkerNode& w, const BusFrame& frame, double t) {
    const TaskRequest req = codec::task_request(parse_payload(frame.payload));
    const TaskResult result = emulate_worker(req, truth_(req.frame_time), w.spec->worker, w.rng);
    const double done = std::max(t, w.busy_until) + result.compute_latency;
    w.busy_until = done;
    results_.emplace_back(w.spec->id, result);
    push(done, EventKind::kTaskComplete, w.spec->id, results_.size() - 1);
  }

  void on_timer(const Event& ev, double t) {
    switch (ev.timer) {
      case TimerKind::kBroadcast: {
        const RemoteTrackMsg msg = collabs_.at(ev.agent).broadcast(t);
        send(ev.agent, s_.ego().id,
             make_frame(MsgType::kTracks, t, "tracks/" + std::to_string(ev.agent), codec::remote_track_msg(msg)), t);
        break;
      }
      case TimerKind::kHeartbeat:
        send(ev.agent, s_.ego().id,
             make_frame(MsgType::kHeartbeat, t, "heartbeat/" + std::to_string(ev.agent), codec::heartbeat(ev.agent, t)),
             t);
        break;
      case TimerKind::kClock:
        local(ev.agent, make_clock_frame(t), t);
        break;
    }
  }

  void end_step(double t) {
    for (auto& [id, node] : collabs_) node.flush(t);
    std::vector<Outgoing> out;
    if (auto tf = ego_->flush(t, out)) {
      const std::int64_t ego = s_.ego().id;
      BusRecord rec;
      rec.seq = ++processed_;
      rec.t_send = t;
      rec.t_recv = t;
      rec.from = ego;
      rec.bytes = encode(make_frame(MsgType::kTracks, t, "tracks/" + std::to_string(ego), track_frame_json(ego, *tf)));
      result_.bus.push_back(std::move(rec));
      if (ego_->last_local()) score_detections(*ego_->last_local(), t);
      result_.track_frames.push_back(std::move(*tf));
    }
    for (const auto& o : out) send(s_.ego().id, o.to, o.frame, t);
    if (sample_due_) {
      sample_due_ = false;
      evaluate(t);
    }
  }

  bool truth_covers(double t) const {
    if (replay_ == nullptr) return t >= 0.0 && t <= s_.duration;
    return !replay_->truth.empty() && t >= replay_->truth.begin()->first && t <= replay_->truth.rbegin()->first;
  }

  void score_detections(const std::vector<Detection3D>& dets, double t) {
    if (!truth_covers(t)) return;
    record_truth(t);
    std::vector<LabeledPoint> gt, est;
    for (const auto& o : truth_(t)) gt.push_back({o.id, o.position});
    for (std::size_t i = 0; i < dets.size(); ++i) est.push_back({static_cast<std::int64_t>(i), dets[i].position});
    const auto m = match_frame(gt, est, s_.pipeline.evaluation.match_radius, {}, t);
    det_tp_ += static_cast<int>(m.matches.size());
    det_fp_ += m.fp;
    det_fn_ += m.fn;
  }

  void evaluate(double t) {
    if (!truth_covers(t)) return;
    record_truth(t);
    const auto& ev = s_.pipeline.evaluation;
    const TrackerState& st = ego_->state();
    std::vector<LabeledPoint> gt, est;
    std::vector<Vec3> gt_pos, est_pos;
    for (const auto& o : truth_(t)) {
      gt.push_back({o.id, o.position});
      gt_pos.push_back(o.position);
    }
    std::map<std::int64_t, Track> at_t;
    for (const Track* tr : confirmed_tracks(st)) {
      const Track p = st.time < t ? predict(*tr, t - st.time, s_.pipeline.tracker.q) : *tr;
      const auto id = static_cast<std::int64_t>(p.id);
      est.push_back({id, p.mean.head<3>()});
      est_pos.push_back(p.mean.head<3>());
      at_t.emplace(id, p);
    }
    FrameMatchResult m = match_frame(gt, est, ev.match_radius, previous_, t);
    previous_.clear();
    for (const auto& mm : m.matches) previous_[mm.gt] = mm.est;
    result_.metrics.ospa_series.emplace_back(t, ospa(est_pos, gt_pos, ev.ospa_c, ev.ospa_p));

    const double truth_end = replay_ == nullptr ? s_.duration
                                                : std::min(s_.duration, replay_->truth.rbegin()->first);
    for (const auto& mm : m.matches) {
      auto pred = predict_trajectory(at_t.at(mm.est), t, ev.prediction_horizon, ev.prediction_dt);
      std::erase_if(pred, [&](const auto& w) { return w.first > truth_end; });
      if (pred.empty()) continue;
      const std::int64_t gid = mm.gt;
      const auto pe = prediction_error(
          pred,
          [&](double tau) {
            for (const auto& o : truth_(tau))
              if (o.id == gid) return o.position;
            throw Error(ErrorCode::kOutOfRange, "object " + std::to_string(gid) + " missing at t=" + fmt(tau));
          },
          truth_end);
      ade_sum_ += pe.ade;
      fde_sum_ += pe.fde;
      ++pred_n_;
    }
    frames_.push_back(std::move(m));
  }

  void finalize_metrics() {
    MetricsSummary& out = result_.metrics;
    out.samples = static_cast<int>(frames_.size());
    if (!frames_.empty()) {
      const ClearMot cm = clear_mot(frames_);
      out.mota = cm.mota;
      out.motp = cm.motp;
      out.id_switches = cm.id_switches;
      out.fp = cm.fp;
      out.fn = cm.fn;
      out.gt = cm.gt;
      out.matches = cm.matches;
      if (cm.matches + cm.fp > 0) out.precision = static_cast<double>(cm.matches) / (cm.matches + cm.fp);
      if (cm.gt > 0) out.recall = static_cast<double>(cm.matches) / cm.gt;
    }
    if (det_tp_ + det_fp_ > 0) out.det_precision = static_cast<double>(det_tp_) / (det_tp_ + det_fp_);
    if (det_tp_ + det_fn_ > 0) out.det_recall = static_cast<double>(det_tp_) / (det_tp_ + det_fn_);
    if (pred_n_ > 0) {
      out.ade = ade_sum_ / pred_n_;
      out.fde = fde_sum_ / pred_n_;
    }
    if (!out.ospa_series.empty()) {
      double sum = 0.0;
      for (const auto& [t, v] : out.ospa_series) sum += v;
      out.ospa_mean = sum / static_cast<double>(out.ospa_series.size());
    }
  }

  const Scenario& s_;
  RunOptions opts_;
  const ReplayInput* replay_;
  Logger log_;
  TruthFn truth_;
  std::unique_ptr<EgoNode> ego_;
  std::map<std::int64_t, CollabNode> collabs_;
  std::map<std::int64_t, WorkerNode> workers_;
  std::map<std::pair<std::int64_t, std::size_t>, Rng> sensor_rngs_;
  std::map<std::pair<std::int64_t, std::int64_t>, Rng> link_rngs_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t processed_ = 0;
  std::vector<std::pair<std::int64_t, TaskResult>> results_;
  std::set<double> truth_written_;
  bool sample_due_ = false;
  std::map<std::int64_t, std::int64_t> previous_;
  std::vector<FrameMatchResult> frames_;
  int det_tp_ = 0, det_fp_ = 0, det_fn_ = 0;
  double ade_sum_ = 0.0, fde_sum_ = 0.0;
  int pred_n_ = 0;
  RunResult result_;
};

}  // namespace

RunResult run(const Scenario& scenario, const RunOptions& options) {
  validate(scenario);
  return Engine(scenario, options, nullptr).run();
}

RunResult run_replay(const Scenario& scenario, const ReplayInput& input, const RunOptions& options) {
  validate(scenario);
  return Engine(scenario, options, &input).run();
}

std::vector<TrackFrame> replay_bus_frames(const Scenario& scenario, const std::vector<BusRecord>& records) {
  Logger log(LogLevel::kError);
  EgoNode ego(scenario, [&](double t) { return world_at(scenario.objects, t, scenario.duration); }, log, false);
  const std::int64_t ego_id = scenario.ego().id;

  std::vector<const BusRecord*> inbound;
  for (const auto& r : records) {
    if (r.seq == 0 || !r.t_recv) continue;
    if ((r.to && *r.to == ego_id) || (!r.to && r.from == ego_id)) inbound.push_back(&r);
  }
  std::sort(inbound.begin(), inbound.end(), [](const BusRecord* a, const BusRecord* b) { return a->seq < b->seq; });

  std::vector<TrackFrame> out;
  std::vector<Outgoing> discard;
  for (const BusRecord* r : inbound) {
    const BusFrame frame = decode(r->bytes).frame;
    if (!r->to) {
      // The ego's own track output marks where the live run flushed.
      if (auto tf = ego.flush(*r->t_recv, discard)) out.push_back(std::move(*tf));
    } else {
      ego.on_frame(frame, *r->t_recv, discard);
    }
    discard.clear();
  }
  return out;
}

}  // namespace avfuse
