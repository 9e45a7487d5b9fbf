#include "avfuse/replay.hpp"

#include <cmath>
#include <limits>

#include "avfuse/codec.hpp"
#include "avfuse/errors.hpp"

namespace avfuse {

namespace {

std::string at_line(std::size_t n, const std::string& msg) { return "line " + std::to_string(n) + ": " + msg; }

}  // namespace

ReplayFile parse_replay(std::string_view text) {
  ReplayFile out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool seen_content = false;
  double last_frame_t = -std::numeric_limits<double>::infinity();
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    Json j;
    try {
      j = Json::parse(line.begin(), line.end());
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::kSchema, at_line(line_no, std::string("malformed JSON: ") + e.what()));
    }
    if (!j.is_object()) throw Error(ErrorCode::kSchema, at_line(line_no, "expected a JSON object"));

    try {
      if (j.contains("scenario")) {
        if (seen_content) throw Error(ErrorCode::kSchema, "scenario header must be the first line");
        if (j.size() != 1) throw Error(ErrorCode::kSchema, "scenario header has extra fields");
        out.scenario = scenario_from_json(j.at("scenario"));
      } else if (j.contains("truth")) {
        codec::guarded("truth line", [&] {
          if (j.size() != 2 || !j.contains("t")) throw Error(ErrorCode::kSchema, "truth line needs exactly t and truth");
          const double t = j.at("t").get<double>();
          std::vector<GroundTruthObject> objs;
          for (const auto& o : j.at("truth")) objs.push_back(codec::truth_object(o));
          if (!out.input.truth.emplace(t, std::move(objs)).second)
            throw Error(ErrorCode::kSchema, "duplicate truth time");
        });
      } else {
        codec::SensorFrame f = codec::sensor_frame(j);
        if (!std::isfinite(f.t) || f.t < 0.0) throw Error(ErrorCode::kSchema, "t must be finite and >= 0");
        if (f.t < last_frame_t) throw Error(ErrorCode::kSchema, "frames out of time order");
        last_frame_t = f.t;
        out.input.frames.push_back(std::move(f));
        out.frame_lines.push_back(line_no);
      }
    } catch (const Error& e) {
      throw Error(e.code() == ErrorCode::kValidation ? ErrorCode::kValidation : ErrorCode::kSchema,
                  at_line(line_no, e.detail()));
    }
    seen_content = true;
  }
  return out;
}

void check_replay(const ReplayFile& file, const Scenario& scenario) {
  for (std::size_t i = 0; i < file.input.frames.size(); ++i) {
    const auto& f = file.input.frames[i];
    const std::size_t line = file.frame_lines[i];
    const AgentSpec* a = scenario.find_agent(f.agent);
    if (a == nullptr) throw Error(ErrorCode::kSchema, at_line(line, "unknown agent " + std::to_string(f.agent)));
    if (f.sensor < 0 || static_cast<std::size_t>(f.sensor) >= a->sensors.size())
      throw Error(ErrorCode::kSchema, at_line(line, "agent has no sensor " + std::to_string(f.sensor)));
    if (a->sensors[static_cast<std::size_t>(f.sensor)].type != f.type)
      throw Error(ErrorCode::kSchema, at_line(line, "sensor type does not match the scenario"));
    if (f.t > scenario.duration) throw Error(ErrorCode::kSchema, at_line(line, "frame after scenario duration"));
  }
}

std::string replay_text(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

}  // namespace avfuse
