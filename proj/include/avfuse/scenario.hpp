#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "avfuse/bus.hpp"
#include "avfuse/canonical_json.hpp"
#include "avfuse/geometry.hpp"
#include "avfuse/offload.hpp"
#include "avfuse/sensing.hpp"
#include "avfuse/tracker.hpp"

namespace avfuse {

enum class AgentKind { kEgo, kVehicle, kInfrastructure, kEdgeServer };
enum class PipelineMode { kCr, kCrCovi, kCrDist };

std::string_view to_string(AgentKind k);
std::string_view to_string(PipelineMode m);
/// Throws kValidation for anything other than cr, cr-covi, cr-dist.
PipelineMode pipeline_mode_from_string(std::string_view s);

struct Motion {
  enum class Type { kStatic, kConstantVelocity, kWaypoints };
  Type type = Type::kStatic;
  Vec3 p0 = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  std::vector<std::pair<double, Vec3>> waypoints;
  std::optional<Vec3> ypr_deg;  // fixed orientation; otherwise heading follows velocity

  /// Position and velocity at t (no range check).
  std::pair<Vec3, Vec3> state_at(double t) const;
};

struct MountedSensor {
  SensorType type = SensorType::kCamera;
  std::string preset;  // informational once resolved
  double rate_hz = 10.0;
  Pose mount;  // agent-from-sensor body frame (x forward)
  SensorNoiseConfig noise;
  CameraIntrinsics intrinsics;
};

struct AgentSpec {
  std::int64_t id = 0;
  AgentKind kind = AgentKind::kEgo;
  Motion motion;
  std::vector<MountedSensor> sensors;
  WorkerConfig worker;  // edge servers only

  Pose pose_at(double t) const;  // world-from-agent
  Vec3 velocity_at(double t) const;
  const MountedSensor* camera() const;
  const MountedSensor* radar() const;
};

struct ObjectSpec {
  std::int64_t id = 0;
  Motion motion;
  Vec3 extent = Vec3(4.5, 1.8, 1.5);
};

struct CollabConfig {
  double broadcast_rate = 5.0;
  double staleness = 1.0;
};

struct OffloadConfig {
  double task_rate = 5.0;
  double reap_rate = 10.0;
  BrokerConfig broker;
};

struct EvaluationConfig {
  double rate = 10.0;
  double match_radius = 2.0;
  double ospa_c = 5.0;
  double ospa_p = 1.0;
  double prediction_horizon = 2.0;
  double prediction_dt = 0.5;
};

struct PipelineConfig {
  PipelineMode mode = PipelineMode::kCr;
  TrackerConfig tracker;
  CollabConfig collab;
  OffloadConfig offload;
  EvaluationConfig evaluation;
};

struct Scenario {
  double duration = 10.0;
  std::uint64_t seed = 0;
  std::vector<AgentSpec> agents;  // sorted by id
  std::vector<ObjectSpec> objects;
  NetworkModel network;
  PipelineConfig pipeline;

  const AgentSpec& ego() const;
  const AgentSpec* find_agent(std::int64_t id) const;
};

inline constexpr int kScenarioVersion = 1;

/// Parses and validates a scenario document. Throws kParse (with line and
/// column) for malformed JSON and kValidation naming the violated rule.
Scenario load_scenario(std::string_view text);
/// JSON parsing step of load_scenario: kParse with line and column, no validation.
Json parse_scenario_document(std::string_view text);
Scenario scenario_from_json(const Json& j);

/// Runs the cross-field checks; load_scenario calls this already.
void validate(const Scenario& s);

/// Normalized document with every default and preset made explicit.
Json to_json(const Scenario& s);

/// Ground truth at t; throws kOutOfRange outside [0, duration].
std::vector<GroundTruthObject> world_at(const std::vector<ObjectSpec>& objects, double t,
                                        double duration);

}  // namespace avfuse
