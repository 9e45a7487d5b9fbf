#include "avfuse/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "avfuse/errors.hpp"
#include "avfuse/log.hpp"
#include "avfuse/replay.hpp"
#include "avfuse/report.hpp"
#include "avfuse/scenario.hpp"
#include "avfuse/simulation.hpp"

namespace avfuse {

namespace fs = std::filesystem;

namespace {

struct CliFailure {
  int code;
  std::string message;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliFailure{kExitIo, "IoError: cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw CliFailure{kExitIo, "IoError: failed reading " + path};
  return ss.str();
}

/// Writes next to the target and renames, so readers never see a partial file.
void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
    if (!o) throw CliFailure{kExitIo, "IoError: cannot write " + tmp.string()};
    o << content;
    o.flush();
    if (!o) throw CliFailure{kExitIo, "IoError: failed writing " + tmp.string()};
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw CliFailure{kExitIo, "IoError: cannot rename " + tmp.string() + ": " + ec.message()};
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw CliFailure{kExitIo, "IoError: cannot create output directory " + dir};
}

int code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kIo: return kExitIo;
    case ErrorCode::kPipeline: return kExitRuntime;
    default: return kExitInvalid;
  }
}

std::string lines_text(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  return s;
}

void write_artifacts(const std::string& dir, const RunResult& r, const ReportMeta& meta, std::ostream& out) {
  ensure_dir(dir);
  const Json report = report_json(r, meta);
  write_atomic(fs::path(dir) / "report.json", canonical_dump(report) + "\n");
  write_atomic(fs::path(dir) / "tracks.jsonl", tracks_jsonl(r));
  write_atomic(fs::path(dir) / "metrics.csv", metrics_csv({report}));
  write_atomic(fs::path(dir) / "run.log", lines_text(r.log_lines));
  write_atomic(fs::path(dir) / "replay.jsonl", replay_text(r.replay_lines));
  out << summary_line(report) << "\n";
}

int cmd_validate(const std::string& path, std::ostream& out) {
  const std::string text = read_file(path);
  const Scenario s = load_scenario(text);
  out << canonical_dump(to_json(s)) << "\n";
  return kExitOk;
}

struct RunArgs {
  std::string scenario;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

int cmd_run(const RunArgs& a, std::ostream& out) {
  const std::string text = read_file(a.scenario);
  Json doc = parse_scenario_document(text);
  if (!doc.is_object()) throw Error(ErrorCode::kValidation, "scenario must be a JSON object");
  if (!a.mode.empty()) {
    pipeline_mode_from_string(a.mode);
    doc["pipeline"]["mode"] = a.mode;
  }
  if (a.seed) doc["seed"] = *a.seed;
  const Scenario s = scenario_from_json(doc);
  RunOptions opts;
  opts.log_level = log_level_from_env();
  const RunResult r = run(s, opts);
  write_artifacts(a.out_dir, r, meta_for(r, fs::path(a.scenario).stem().string()), out);
  return kExitOk;
}

struct ReplayArgs {
  std::string input;
  std::string mode;
  std::string scenario;
  std::string out_dir;
};

int cmd_replay(const ReplayArgs& a, std::ostream& out) {
  const std::string text = read_file(a.input);
  ReplayFile file = parse_replay(text);
  std::optional<Scenario> s = file.scenario;
  if (!a.scenario.empty()) s = load_scenario(read_file(a.scenario));
  const std::string label = fs::path(a.input).stem().string();

  if (!s) {
    if (!file.input.frames.empty() || !file.input.truth.empty())
      throw Error(ErrorCode::kSchema, "line 1: replay needs a scenario header line or --scenario");
    RunResult empty;
    ReportMeta meta{label, a.mode.empty() ? std::string("cr") : a.mode, std::nullopt, 0};
    if (!a.mode.empty()) pipeline_mode_from_string(a.mode);
    write_artifacts(a.out_dir, empty, meta, out);
    return kExitOk;
  }
  if (!a.mode.empty()) {
    s->pipeline.mode = pipeline_mode_from_string(a.mode);
    validate(*s);
  }
  check_replay(file, *s);
  RunOptions opts;
  opts.log_level = log_level_from_env();
  const RunResult r = run_replay(*s, file.input, opts);
  write_artifacts(a.out_dir, r, meta_for(r, label), out);
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& runs, const std::string& out_dir, std::ostream& out) {
  if (runs.size() < 2) throw Error(ErrorCode::kValidation, "compare needs at least two reports");
  std::vector<Json> reports;
  for (const auto& path : runs) {
    const std::string text = read_file(path);
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kSchema, path + ": " + e.what());
    }
    try {
      validate_report(j);
    } catch (const Error& e) {
      throw Error(ErrorCode::kSchema, path + ": " + e.detail());
    }
    reports.push_back(std::move(j));
  }
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_atomic(fs::path(out_dir) / "compare.csv", metrics_csv(reports));
  }
  out << compare_table(reports);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-agent camera-radar fusion testbed"};
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a scenario and print it normalized");
  validate_cmd->add_option("scenario", validate_path, "Scenario JSON file")->required();

  RunArgs run_args;
  std::uint64_t seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write report artifacts");
  run_cmd->add_option("--scenario", run_args.scenario, "Scenario JSON file")->required();
  run_cmd->add_option("--mode", run_args.mode, "Pipeline mode: cr, cr-covi or cr-dist");
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Master seed (overrides the file)");
  run_cmd->add_option("--out", run_args.out_dir, "Output directory")->required();

  ReplayArgs replay_args;
  auto* replay_cmd = app.add_subcommand("replay", "Drive the pipeline from a recorded JSONL log");
  replay_cmd->add_option("--input", replay_args.input, "Replay JSONL file")->required();
  replay_cmd->add_option("--mode", replay_args.mode, "Pipeline mode override");
  replay_cmd->add_option("--scenario", replay_args.scenario, "Scenario file when the log has no header");
  replay_cmd->add_option("--out", replay_args.out_dir, "Output directory")->required();

  std::vector<std::string> compare_runs;
  std::string compare_out;
  auto* compare_cmd = app.add_subcommand("compare", "Tabulate metrics of two or more reports");
  compare_cmd->add_option("--out", compare_out, "Directory for compare.csv");
  compare_cmd->add_option("runs", compare_runs, "report.json files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitInvalid;
  }

  try {
    if (*validate_cmd) return cmd_validate(validate_path, out);
    if (*run_cmd) {
      if (*seed_opt) run_args.seed = seed;
      return cmd_run(run_args, out);
    }
    if (*replay_cmd) return cmd_replay(replay_args, out);
    if (*compare_cmd) return cmd_compare(compare_runs, compare_out, out);
  } catch (const CliFailure& f) {
    err << f.message << "\n";
    return f.code;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return code_for(e);
  } catch (const std::exception& e) {
    err << "PipelineError: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitInvalid;
}

}  // namespace avfuse
