#include "avfuse/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "avfuse/codec.hpp"
#include "avfuse/errors.hpp"

namespace avfuse {

std::string_view to_string(AgentKind k) {
  switch (k) {
    case AgentKind::kEgo: return "ego";
    case AgentKind::kVehicle: return "vehicle";
    case AgentKind::kInfrastructure: return "infrastructure";
    case AgentKind::kEdgeServer: return "edge-server";
  }
  return "unknown";
}

std::string_view to_string(PipelineMode m) {
  switch (m) {
    case PipelineMode::kCr: return "cr";
    case PipelineMode::kCrCovi: return "cr-covi";
    case PipelineMode::kCrDist: return "cr-dist";
  }
  return "unknown";
}

PipelineMode pipeline_mode_from_string(std::string_view s) {
  if (s == "cr") return PipelineMode::kCr;
  if (s == "cr-covi") return PipelineMode::kCrCovi;
  if (s == "cr-dist") return PipelineMode::kCrDist;
  throw Error(ErrorCode::kValidation, "pipeline mode must be one of cr, cr-covi, cr-dist");
}

std::pair<Vec3, Vec3> Motion::state_at(double t) const {
  switch (type) {
    case Type::kStatic: return {p0, Vec3::Zero()};
    case Type::kConstantVelocity: return {p0 + v * t, v};
    case Type::kWaypoints: {
      if (t <= waypoints.front().first) {
        const auto& [t0, p0w] = waypoints[0];
        const auto& [t1, p1w] = waypoints[1];
        return {p0w, (p1w - p0w) / (t1 - t0)};
      }
      for (std::size_t i = 1; i < waypoints.size(); ++i) {
        const auto& [ta, pa] = waypoints[i - 1];
        const auto& [tb, pb] = waypoints[i];
        if (t <= tb) {
          const Vec3 vel = (pb - pa) / (tb - ta);
          return {pa + vel * (t - ta), vel};
        }
      }
      const auto& [ta, pa] = waypoints[waypoints.size() - 2];
      const auto& [tb, pb] = waypoints.back();
      return {pb, (pb - pa) / (tb - ta)};
    }
  }
  return {p0, Vec3::Zero()};
}

Pose AgentSpec::pose_at(double t) const {
  const auto [pos, vel] = motion.state_at(t);
  if (motion.ypr_deg) {
    const Vec3& ypr = *motion.ypr_deg;
    return Pose::from_ypr_deg(ypr.x(), ypr.y(), ypr.z(), pos);
  }
  const double yaw = vel.head<2>().norm() > 1e-9 ? std::atan2(vel.y(), vel.x()) : 0.0;
  return {Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix(), pos};
}

Vec3 AgentSpec::velocity_at(double t) const { return motion.state_at(t).second; }

const MountedSensor* AgentSpec::camera() const {
  for (const auto& s : sensors)
    if (s.type == SensorType::kCamera) return &s;
  return nullptr;
}

const MountedSensor* AgentSpec::radar() const {
  for (const auto& s : sensors)
    if (s.type == SensorType::kRadar) return &s;
  return nullptr;
}

const AgentSpec& Scenario::ego() const {
  for (const auto& a : agents)
    if (a.kind == AgentKind::kEgo) return a;
  throw Error(ErrorCode::kValidation, "at least one agent of kind ego");
}

const AgentSpec* Scenario::find_agent(std::int64_t id) const {
  for (const auto& a : agents)
    if (a.id == id) return &a;
  return nullptr;
}

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::kValidation, msg); }

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  if (!j.is_object()) invalid(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      invalid("unknown field '" + key + "' in " + where);
  }
}

const Json& require(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) invalid("missing field '" + std::string(key) + "' in " + where);
  return j.at(key);
}

double number(const Json& j, const std::string& what) {
  if (!j.is_number()) invalid(what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) invalid(what + " must be finite");
  return v;
}

double number_or(const Json& j, const char* key, double fallback, const std::string& where) {
  return j.contains(key) ? number(j.at(key), where + "." + key) : fallback;
}

std::int64_t integer(const Json& j, const std::string& what) {
  if (!j.is_number_integer()) invalid(what + " must be an integer");
  return j.get<std::int64_t>();
}

Vec3 vector3(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) invalid(what + " must be an array of 3 numbers");
  return {number(j[0], what), number(j[1], what), number(j[2], what)};
}

Motion parse_motion(const Json& j, const std::string& where) {
  const std::string type = require(j, "type", where).is_string()
                               ? j.at("type").get<std::string>()
                               : (invalid(where + ".type must be a string"), std::string());
  Motion m;
  if (type == "static") {
    check_keys(j, {"type", "position", "ypr"}, where);
    m.type = Motion::Type::kStatic;
    m.p0 = vector3(require(j, "position", where), where + ".position");
  } else if (type == "constant-velocity") {
    check_keys(j, {"type", "p0", "v", "ypr"}, where);
    m.type = Motion::Type::kConstantVelocity;
    m.p0 = vector3(require(j, "p0", where), where + ".p0");
    m.v = vector3(require(j, "v", where), where + ".v");
  } else if (type == "waypoints") {
    check_keys(j, {"type", "points", "ypr"}, where);
    m.type = Motion::Type::kWaypoints;
    const Json& pts = require(j, "points", where);
    if (!pts.is_array() || pts.size() < 2) invalid(where + ".points needs at least two waypoints");
    for (const auto& p : pts) {
      check_keys(p, {"t", "position"}, where + ".points[]");
      m.waypoints.emplace_back(number(require(p, "t", where), where + ".points[].t"),
                               vector3(require(p, "position", where), where + ".points[].position"));
    }
    m.p0 = m.waypoints.front().second;
  } else {
    invalid(where + ".type must be static, constant-velocity or waypoints");
  }
  if (j.contains("ypr")) m.ypr_deg = vector3(j.at("ypr"), where + ".ypr");
  return m;
}

Json motion_json(const Motion& m) {
  Json j;
  switch (m.type) {
    case Motion::Type::kStatic:
      j = {{"type", "static"}, {"position", codec::vec(m.p0)}};
      break;
    case Motion::Type::kConstantVelocity:
      j = {{"type", "constant-velocity"}, {"p0", codec::vec(m.p0)}, {"v", codec::vec(m.v)}};
      break;
    case Motion::Type::kWaypoints: {
      Json pts = Json::array();
      for (const auto& [t, p] : m.waypoints) pts.push_back({{"t", t}, {"position", codec::vec(p)}});
      j = {{"type", "waypoints"}, {"points", pts}};
      break;
    }
  }
  if (m.ypr_deg) j["ypr"] = codec::vec(*m.ypr_deg);
  return j;
}

SensorNoiseConfig parse_noise(const Json& j, SensorNoiseConfig base, const std::string& where) {
  check_keys(j, {"pixel_sigma", "range_sigma", "azimuth_sigma", "speed_sigma", "p_detect",
                 "clutter_rate", "fov_azimuth", "max_range"},
             where);
  base.pixel_sigma = number_or(j, "pixel_sigma", base.pixel_sigma, where);
  base.range_sigma = number_or(j, "range_sigma", base.range_sigma, where);
  base.azimuth_sigma = number_or(j, "azimuth_sigma", base.azimuth_sigma, where);
  base.speed_sigma = number_or(j, "speed_sigma", base.speed_sigma, where);
  base.p_detect = number_or(j, "p_detect", base.p_detect, where);
  base.clutter_rate = number_or(j, "clutter_rate", base.clutter_rate, where);
  base.fov_azimuth = number_or(j, "fov_azimuth", base.fov_azimuth, where);
  base.max_range = number_or(j, "max_range", base.max_range, where);
  if (!base.is_valid())
    invalid(where + ": sigmas >= 0, 0 <= p_detect <= 1, clutter_rate >= 0, fov and range positive");
  return base;
}

Json noise_json(const SensorNoiseConfig& n) {
  return {{"pixel_sigma", n.pixel_sigma}, {"range_sigma", n.range_sigma},
          {"azimuth_sigma", n.azimuth_sigma}, {"speed_sigma", n.speed_sigma},
          {"p_detect", n.p_detect},       {"clutter_rate", n.clutter_rate},
          {"fov_azimuth", n.fov_azimuth}, {"max_range", n.max_range}};
}

CameraIntrinsics parse_intrinsics(const Json& j, CameraIntrinsics base, const std::string& where) {
  check_keys(j, {"fx", "fy", "cx", "cy", "width", "height"}, where);
  base.fx = number_or(j, "fx", base.fx, where);
  base.fy = number_or(j, "fy", base.fy, where);
  base.cx = number_or(j, "cx", base.cx, where);
  base.cy = number_or(j, "cy", base.cy, where);
  base.width = number_or(j, "width", base.width, where);
  base.height = number_or(j, "height", base.height, where);
  if (!base.is_valid()) invalid(where + ": fx, fy > 0 and principal point inside the image");
  return base;
}

Pose parse_mount(const Json& j, const std::string& where) {
  check_keys(j, {"position", "ypr"}, where);
  const Vec3 pos = j.contains("position") ? vector3(j.at("position"), where + ".position") : Vec3::Zero();
  const Vec3 ypr = j.contains("ypr") ? vector3(j.at("ypr"), where + ".ypr") : Vec3::Zero();
  return Pose::from_ypr_deg(ypr.x(), ypr.y(), ypr.z(), pos);
}

MountedSensor parse_sensor(const Json& j, const std::string& where) {
  check_keys(j, {"type", "preset", "rate", "mount", "noise", "intrinsics", "mount_pose"}, where);
  MountedSensor s;
  const Json& type = require(j, "type", where);
  if (type == "camera") {
    s.type = SensorType::kCamera;
  } else if (type == "radar") {
    s.type = SensorType::kRadar;
  } else {
    invalid(where + ".type must be camera or radar");
  }
  if (j.contains("preset")) {
    if (!j.at("preset").is_string()) invalid(where + ".preset must be a string");
    s.preset = j.at("preset").get<std::string>();
    const SensorPreset p = sensor_preset(s.preset);
    if (p.type != s.type) invalid(where + ": preset '" + s.preset + "' is for a different sensor type");
    s.rate_hz = p.rate_hz;
    s.noise = p.noise;
    s.intrinsics = p.intrinsics;
  }
  s.rate_hz = number_or(j, "rate", s.rate_hz, where);
  if (!(s.rate_hz > 0)) invalid(where + ".rate must be positive");
  if (j.contains("mount_pose")) {
    s.mount = codec::pose(j.at("mount_pose"));
  } else if (j.contains("mount")) {
    s.mount = parse_mount(j.at("mount"), where + ".mount");
  }
  if (j.contains("noise")) s.noise = parse_noise(j.at("noise"), s.noise, where + ".noise");
  if (j.contains("intrinsics")) {
    if (s.type != SensorType::kCamera) invalid(where + ": intrinsics only apply to cameras");
    s.intrinsics = parse_intrinsics(j.at("intrinsics"), s.intrinsics, where + ".intrinsics");
  }
  if (!s.noise.is_valid()) invalid(where + ": invalid noise configuration");
  return s;
}

Json sensor_json(const MountedSensor& s) {
  Json j = {{"type", s.type == SensorType::kCamera ? "camera" : "radar"},
            {"rate", s.rate_hz},
            {"mount_pose", codec::pose(s.mount)},
            {"noise", noise_json(s.noise)}};
  if (!s.preset.empty()) j["preset"] = s.preset;
  if (s.type == SensorType::kCamera) {
    const auto& k = s.intrinsics;
    j["intrinsics"] = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
                       {"width", k.width}, {"height", k.height}};
  }
  return j;
}

AgentKind parse_kind(const Json& j, const std::string& where) {
  if (j == "ego") return AgentKind::kEgo;
  if (j == "vehicle") return AgentKind::kVehicle;
  if (j == "infrastructure") return AgentKind::kInfrastructure;
  if (j == "edge-server") return AgentKind::kEdgeServer;
  invalid(where + ".kind must be ego, vehicle, infrastructure or edge-server");
}

WorkerConfig parse_worker(const Json& j, const std::string& where) {
  check_keys(j, {"lat_min", "lat_max", "p_fail", "accuracy"}, where);
  WorkerConfig w;
  w.accuracy.range_sigma = 0.05;
  w.accuracy.azimuth_sigma = 0.005;
  w.accuracy.p_detect = 0.99;
  w.accuracy.max_range = 200.0;
  w.accuracy.fov_azimuth = 2.0 * M_PI;
  w.lat_min = number_or(j, "lat_min", w.lat_min, where);
  w.lat_max = number_or(j, "lat_max", std::max(w.lat_min, w.lat_max), where);
  w.p_fail = number_or(j, "p_fail", w.p_fail, where);
  if (j.contains("accuracy")) w.accuracy = parse_noise(j.at("accuracy"), w.accuracy, where + ".accuracy");
  if (!w.is_valid()) invalid(where + ": 0 <= lat_min <= lat_max and 0 <= p_fail <= 1");
  return w;
}

Json worker_json(const WorkerConfig& w) {
  return {{"lat_min", w.lat_min}, {"lat_max", w.lat_max}, {"p_fail", w.p_fail},
          {"accuracy", noise_json(w.accuracy)}};
}

AgentSpec parse_agent(const Json& j, std::size_t index) {
  const std::string where = "agents[" + std::to_string(index) + "]";
  check_keys(j, {"id", "kind", "motion", "sensors", "worker"}, where);
  AgentSpec a;
  a.id = integer(require(j, "id", where), where + ".id");
  a.kind = parse_kind(require(j, "kind", where), where);
  if (j.contains("motion")) {
    a.motion = parse_motion(j.at("motion"), where + ".motion");
  } else if (a.kind != AgentKind::kEdgeServer) {
    invalid("missing field 'motion' in " + where);
  }
  if (j.contains("sensors")) {
    const Json& sensors = j.at("sensors");
    if (!sensors.is_array()) invalid(where + ".sensors must be an array");
    for (std::size_t i = 0; i < sensors.size(); ++i)
      a.sensors.push_back(parse_sensor(sensors[i], where + ".sensors[" + std::to_string(i) + "]"));
  }
  if (j.contains("worker")) {
    if (a.kind != AgentKind::kEdgeServer) invalid(where + ": only edge servers take a worker block");
    a.worker = parse_worker(j.at("worker"), where + ".worker");
  } else if (a.kind == AgentKind::kEdgeServer) {
    a.worker = parse_worker(Json::object(), where + ".worker");
  }
  return a;
}

ObjectSpec parse_object(const Json& j, std::size_t index) {
  const std::string where = "objects[" + std::to_string(index) + "]";
  check_keys(j, {"id", "motion", "extent"}, where);
  ObjectSpec o;
  o.id = integer(require(j, "id", where), where + ".id");
  o.motion = parse_motion(require(j, "motion", where), where + ".motion");
  if (j.contains("extent")) o.extent = vector3(j.at("extent"), where + ".extent");
  if ((o.extent.array() <= 0).any()) invalid(where + ".extent components must be positive");
  return o;
}

LinkParams parse_link(const Json& j, const std::string& where, bool with_endpoints) {
  if (with_endpoints)
    check_keys(j, {"from", "to", "base_latency", "jitter", "drop_prob"}, where);
  else
    check_keys(j, {"base_latency", "jitter", "drop_prob"}, where);
  LinkParams p;
  p.base_latency = number_or(j, "base_latency", 0.0, where);
  p.jitter = number_or(j, "jitter", 0.0, where);
  p.drop_prob = number_or(j, "drop_prob", 0.0, where);
  if (!p.is_valid()) invalid(where + ": base_latency >= jitter >= 0 and 0 <= drop_prob <= 1");
  return p;
}

Json link_json(const LinkParams& p) {
  return {{"base_latency", p.base_latency}, {"jitter", p.jitter}, {"drop_prob", p.drop_prob}};
}

NetworkModel parse_network(const Json& j) {
  check_keys(j, {"default", "links"}, "network");
  NetworkModel net;
  if (j.contains("default")) net.default_link = parse_link(j.at("default"), "network.default", false);
  if (j.contains("links")) {
    const Json& links = j.at("links");
    if (!links.is_array()) invalid("network.links must be an array");
    for (std::size_t i = 0; i < links.size(); ++i) {
      const std::string where = "network.links[" + std::to_string(i) + "]";
      const LinkParams p = parse_link(links[i], where, true);
      const auto from = integer(require(links[i], "from", where), where + ".from");
      const auto to = integer(require(links[i], "to", where), where + ".to");
      if (!net.links.emplace(std::pair{from, to}, p).second) invalid(where + ": duplicate link");
    }
  }
  return net;
}

TrackerConfig parse_tracker(const Json& j) {
  const std::string where = "pipeline.tracker";
  check_keys(j, {"q", "confirm_m", "confirm_n", "max_misses", "gate_prob", "snapshot_horizon",
                 "init_velocity_sigma", "max_coast"},
             where);
  TrackerConfig c;
  c.q = number_or(j, "q", c.q, where);
  if (j.contains("confirm_m")) c.confirm_m = static_cast<int>(integer(j.at("confirm_m"), where + ".confirm_m"));
  if (j.contains("confirm_n")) c.confirm_n = static_cast<int>(integer(j.at("confirm_n"), where + ".confirm_n"));
  if (j.contains("max_misses")) c.max_misses = static_cast<int>(integer(j.at("max_misses"), where + ".max_misses"));
  c.gate_prob = number_or(j, "gate_prob", c.gate_prob, where);
  c.snapshot_horizon = number_or(j, "snapshot_horizon", c.snapshot_horizon, where);
  c.init_velocity_sigma = number_or(j, "init_velocity_sigma", c.init_velocity_sigma, where);
  c.max_coast = number_or(j, "max_coast", c.max_coast, where);
  if (!c.is_valid())
    invalid(where + ": q > 0, 1 <= confirm_m <= confirm_n, max_misses >= 1, gate_prob in {0.95, 0.99}, max_coast > 0");
  return c;
}

PipelineConfig parse_pipeline(const Json& j) {
  check_keys(j, {"mode", "tracker", "collab", "offload", "evaluation"}, "pipeline");
  PipelineConfig p;
  const Json& mode = require(j, "mode", "pipeline");
  if (!mode.is_string()) invalid("pipeline.mode must be a string");
  p.mode = pipeline_mode_from_string(mode.get<std::string>());
  if (j.contains("tracker")) p.tracker = parse_tracker(j.at("tracker"));

  if (j.contains("collab")) {
    const Json& c = j.at("collab");
    check_keys(c, {"broadcast_rate", "staleness"}, "pipeline.collab");
    p.collab.broadcast_rate = number_or(c, "broadcast_rate", p.collab.broadcast_rate, "pipeline.collab");
    p.collab.staleness = number_or(c, "staleness", p.collab.staleness, "pipeline.collab");
  }
  if (!(p.collab.broadcast_rate > 0) || !(p.collab.staleness > 0))
    invalid("pipeline.collab: broadcast_rate and staleness must be positive");

  if (j.contains("offload")) {
    const Json& o = j.at("offload");
    const std::string where = "pipeline.offload";
    check_keys(o, {"task_rate", "reap_rate", "timeout", "queue_bound", "heartbeat_interval",
                   "max_retries", "missed_heartbeats"},
               where);
    p.offload.task_rate = number_or(o, "task_rate", p.offload.task_rate, where);
    p.offload.reap_rate = number_or(o, "reap_rate", p.offload.reap_rate, where);
    p.offload.broker.timeout = number_or(o, "timeout", p.offload.broker.timeout, where);
    p.offload.broker.heartbeat_interval =
        number_or(o, "heartbeat_interval", p.offload.broker.heartbeat_interval, where);
    if (o.contains("queue_bound")) {
      const auto qb = integer(o.at("queue_bound"), where + ".queue_bound");
      if (qb < 0) invalid(where + ".queue_bound must be >= 0");
      p.offload.broker.queue_bound = static_cast<std::size_t>(qb);
    }
    if (o.contains("max_retries"))
      p.offload.broker.max_retries = static_cast<int>(integer(o.at("max_retries"), where + ".max_retries"));
    if (o.contains("missed_heartbeats"))
      p.offload.broker.missed_heartbeats =
          static_cast<int>(integer(o.at("missed_heartbeats"), where + ".missed_heartbeats"));
  }
  if (!(p.offload.task_rate > 0) || !(p.offload.reap_rate > 0) || !p.offload.broker.is_valid())
    invalid("pipeline.offload: rates, timeout and heartbeat interval must be positive");

  if (j.contains("evaluation")) {
    const Json& e = j.at("evaluation");
    const std::string where = "pipeline.evaluation";
    check_keys(e, {"rate", "match_radius", "ospa_c", "ospa_p", "prediction_horizon", "prediction_dt"},
               where);
    p.evaluation.rate = number_or(e, "rate", p.evaluation.rate, where);
    p.evaluation.match_radius = number_or(e, "match_radius", p.evaluation.match_radius, where);
    p.evaluation.ospa_c = number_or(e, "ospa_c", p.evaluation.ospa_c, where);
    p.evaluation.ospa_p = number_or(e, "ospa_p", p.evaluation.ospa_p, where);
    p.evaluation.prediction_horizon =
        number_or(e, "prediction_horizon", p.evaluation.prediction_horizon, where);
    p.evaluation.prediction_dt = number_or(e, "prediction_dt", p.evaluation.prediction_dt, where);
  }
  const auto& ev = p.evaluation;
  if (!(ev.rate > 0) || !(ev.match_radius > 0) || !(ev.ospa_c > 0) || !(ev.ospa_p >= 1) ||
      !(ev.prediction_horizon > 0) || !(ev.prediction_dt > 0))
    invalid("pipeline.evaluation: rate, radius, cutoff, horizon and step positive; ospa_p >= 1");
  return p;
}

void validate_motion(const Motion& m, double duration, const std::string& where) {
  if (m.type != Motion::Type::kWaypoints) return;
  for (std::size_t i = 1; i < m.waypoints.size(); ++i)
    if (!(m.waypoints[i].first > m.waypoints[i - 1].first))
      invalid(where + ": waypoint times strictly increasing");
  if (m.waypoints.front().first > 0.0 || m.waypoints.back().first < duration)
    invalid(where + ": waypoints spanning [0, duration]");
}

std::size_t line_of(std::string_view text, std::size_t byte) {
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + std::min(byte, text.size()), '\n'));
}

}  // namespace

Scenario scenario_from_json(const Json& j) {
  check_keys(j, {"version", "duration", "seed", "agents", "objects", "network", "pipeline"},
             "scenario");
  if (integer(require(j, "version", "scenario"), "version") != kScenarioVersion)
    invalid("version must be 1");
  Scenario s;
  s.duration = number(require(j, "duration", "scenario"), "duration");
  if (j.contains("seed")) {
    const Json& seed = j.at("seed");
    if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() && seed.get<std::int64_t>() < 0))
      invalid("seed must be a non-negative integer");
    s.seed = seed.get<std::uint64_t>();
  }
  const Json& agents = require(j, "agents", "scenario");
  if (!agents.is_array()) invalid("agents must be an array");
  for (std::size_t i = 0; i < agents.size(); ++i) s.agents.push_back(parse_agent(agents[i], i));
  if (j.contains("objects")) {
    const Json& objects = j.at("objects");
    if (!objects.is_array()) invalid("objects must be an array");
    for (std::size_t i = 0; i < objects.size(); ++i) s.objects.push_back(parse_object(objects[i], i));
  }
  if (j.contains("network")) s.network = parse_network(j.at("network"));
  if (j.contains("pipeline")) s.pipeline = parse_pipeline(j.at("pipeline"));  // default: cr
  std::stable_sort(s.agents.begin(), s.agents.end(),
                   [](const AgentSpec& a, const AgentSpec& b) { return a.id < b.id; });
  validate(s);
  return s;
}

void validate(const Scenario& s) {
  if (!(s.duration > 0)) invalid("duration > 0");
  std::set<std::int64_t> agent_ids, object_ids;
  int egos = 0;
  for (const auto& a : s.agents) {
    if (!agent_ids.insert(a.id).second) invalid("agent ids unique (duplicate id " + std::to_string(a.id) + ")");
    const std::string where = "agent " + std::to_string(a.id);
    if (a.kind == AgentKind::kEgo) ++egos;
    if (a.kind == AgentKind::kEdgeServer && !a.sensors.empty()) invalid(where + ": edge-server has no sensors");
    if (a.kind == AgentKind::kInfrastructure && a.motion.type != Motion::Type::kStatic)
      invalid(where + ": infrastructure is static");
    int cameras = 0, radars = 0;
    for (const auto& sensor : a.sensors) (sensor.type == SensorType::kCamera ? cameras : radars)++;
    if (cameras > 1 || radars > 1) invalid(where + ": at most one camera and one radar per agent");
    validate_motion(a.motion, s.duration, where);
  }
  if (egos == 0) invalid("at least one agent of kind ego");
  if (egos > 1) invalid("exactly one agent of kind ego");
  for (const auto& o : s.objects) {
    if (!object_ids.insert(o.id).second) invalid("object ids unique (duplicate id " + std::to_string(o.id) + ")");
    validate_motion(o.motion, s.duration, "object " + std::to_string(o.id));
  }

  const auto count = [&](auto pred) { return std::count_if(s.agents.begin(), s.agents.end(), pred); };
  if (s.pipeline.mode == PipelineMode::kCrCovi &&
      count([](const AgentSpec& a) {
        return (a.kind == AgentKind::kVehicle || a.kind == AgentKind::kInfrastructure) && !a.sensors.empty();
      }) == 0)
    invalid("cr-covi requires a collaborator (a vehicle or infrastructure agent with sensors)");
  if (s.pipeline.mode == PipelineMode::kCrDist &&
      count([](const AgentSpec& a) { return a.kind == AgentKind::kEdgeServer; }) == 0)
    invalid("cr-dist requires at least one edge-server agent");

  // Every wireless hop the mode uses must resolve to a configured link.
  const AgentSpec& ego = s.ego();
  for (const auto& a : s.agents) {
    if (a.id == ego.id) continue;
    const bool collaborator = s.pipeline.mode == PipelineMode::kCrCovi && !a.sensors.empty() &&
                              a.kind != AgentKind::kEdgeServer;
    const bool worker = s.pipeline.mode == PipelineMode::kCrDist && a.kind == AgentKind::kEdgeServer;
    try {
      if (collaborator) s.network.link(a.id, ego.id);
      if (worker) {
        s.network.link(ego.id, a.id);
        s.network.link(a.id, ego.id);
      }
    } catch (const Error& e) {
      invalid("network: " + e.detail());
    }
  }
}

Json to_json(const Scenario& s) {
  Json agents = Json::array();
  for (const auto& a : s.agents) {
    Json aj = {{"id", a.id}, {"kind", std::string(to_string(a.kind))}, {"motion", motion_json(a.motion)}};
    Json sensors = Json::array();
    for (const auto& sensor : a.sensors) sensors.push_back(sensor_json(sensor));
    aj["sensors"] = sensors;
    if (a.kind == AgentKind::kEdgeServer) aj["worker"] = worker_json(a.worker);
    agents.push_back(aj);
  }
  Json objects = Json::array();
  for (const auto& o : s.objects)
    objects.push_back({{"id", o.id}, {"motion", motion_json(o.motion)}, {"extent", codec::vec(o.extent)}});

  Json network = Json::object();
  if (s.network.default_link) network["default"] = link_json(*s.network.default_link);
  Json links = Json::array();
  for (const auto& [key, p] : s.network.links) {
    Json l = link_json(p);
    l["from"] = key.first;
    l["to"] = key.second;
    links.push_back(l);
  }
  network["links"] = links;

  const auto& t = s.pipeline.tracker;
  const auto& o = s.pipeline.offload;
  const auto& e = s.pipeline.evaluation;
  Json pipeline = {
      {"mode", std::string(to_string(s.pipeline.mode))},
      {"tracker",
       {{"q", t.q}, {"confirm_m", t.confirm_m}, {"confirm_n", t.confirm_n}, {"max_misses", t.max_misses},
        {"gate_prob", t.gate_prob}, {"snapshot_horizon", t.snapshot_horizon},
        {"init_velocity_sigma", t.init_velocity_sigma}, {"max_coast", t.max_coast}}},
      {"collab", {{"broadcast_rate", s.pipeline.collab.broadcast_rate}, {"staleness", s.pipeline.collab.staleness}}},
      {"offload",
       {{"task_rate", o.task_rate}, {"reap_rate", o.reap_rate}, {"timeout", o.broker.timeout},
        {"queue_bound", o.broker.queue_bound}, {"heartbeat_interval", o.broker.heartbeat_interval},
        {"max_retries", o.broker.max_retries}, {"missed_heartbeats", o.broker.missed_heartbeats}}},
      {"evaluation",
       {{"rate", e.rate}, {"match_radius", e.match_radius}, {"ospa_c", e.ospa_c}, {"ospa_p", e.ospa_p},
        {"prediction_horizon", e.prediction_horizon}, {"prediction_dt", e.prediction_dt}}}};

  return {{"version", kScenarioVersion}, {"duration", s.duration}, {"seed", s.seed},
          {"agents", agents},            {"objects", objects},    {"network", network},
          {"pipeline", pipeline}};
}

Json parse_scenario_document(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    const std::size_t at = e.byte == 0 ? 0 : e.byte - 1;
    const std::size_t line = line_of(text, at);
    const std::size_t line_start = text.rfind('\n', at == 0 ? 0 : at - 1);
    const std::size_t column = line_start == std::string_view::npos || at == 0 ? at + 1 : at - line_start;
    throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                                       e.what());
  }
}

Scenario load_scenario(std::string_view text) { return scenario_from_json(parse_scenario_document(text)); }

std::vector<GroundTruthObject> world_at(const std::vector<ObjectSpec>& objects, double t,
                                        double duration) {
  if (!(t >= 0.0) || t > duration)
    throw Error(ErrorCode::kOutOfRange, "t=" + std::to_string(t) + " outside [0, " +
                                            std::to_string(duration) + "]");
  std::vector<GroundTruthObject> out;
  out.reserve(objects.size());
  for (const auto& o : objects) {
    const auto [pos, vel] = o.motion.state_at(t);
    out.push_back({o.id, pos, vel, o.extent});
  }
  return out;
}

}  // namespace avfuse
