#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "avfuse/scenario.hpp"
#include "avfuse/simulation.hpp"

namespace avfuse {

struct ReplayFile {
  std::optional<Scenario> scenario;  // from a {"scenario": {...}} first line
  ReplayInput input;
  std::vector<std::size_t> frame_lines;  // 1-based source line of each frame
};

/// Parses the replay JSONL format. Errors are kSchema (or kValidation for a bad
/// embedded scenario) with the offending 1-based line number in the message.
ReplayFile parse_replay(std::string_view text);

/// Checks frames against the scenario's agents and sensors, naming the line.
void check_replay(const ReplayFile& file, const Scenario& scenario);

/// Writes RunResult::replay_lines as a JSONL document.
std::string replay_text(const std::vector<std::string>& lines);

}  // namespace avfuse
