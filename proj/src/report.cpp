#include "avfuse/report.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "avfuse/codec.hpp"
#include "avfuse/errors.hpp"

namespace avfuse {

namespace {

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string number_text(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) return number_text(v.get<double>());
  if (v.is_number()) return v.dump();
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::kSchema, msg); }

const std::vector<std::string>& counter_columns() {
  static const std::vector<std::string> cols = {
      "events",           "network_sent",        "network_dropped",      "network_delivered",
      "collab_messages",  "collab_stale",        "collab_fused",         "collab_spawned",
      "offload_submitted", "offload_ok_integrated", "offload_failed",      "offload_timeout_dropped",
      "offload_stale_dropped", "offload_queue_dropped", "offload_rollbacks"};
  return cols;
}

Json counter_value(const Json& counters, const std::string& col) {
  if (col == "events") return counters.at("events");
  const auto us = col.find('_');
  const std::string group = col.substr(0, us);
  const std::string key = col.substr(us + 1);
  const Json& g = counters.at(group);
  if (g.is_null()) return nullptr;
  return g.at(key);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> csv_header() {
  std::vector<std::string> h = {"label", "mode", "seed"};
  for (const auto& m : metric_names()) h.push_back(m);
  for (const auto& c : counter_columns()) h.push_back(c);
  return h;
}

}  // namespace

ReportMeta meta_for(const RunResult& r, std::string label) {
  return {std::move(label), std::string(to_string(r.scenario.pipeline.mode)), to_json(r.scenario), r.scenario.seed};
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {
      "precision", "recall",  "det_precision", "det_recall", "mota", "motp", "id_switches",
      "fp",        "fn",      "gt",            "matches",    "samples", "ade", "fde", "ospa_mean"};
  return names;
}

Json metrics_json(const MetricsSummary& m) {
  return {{"precision", opt(m.precision)},
          {"recall", opt(m.recall)},
          {"det_precision", opt(m.det_precision)},
          {"det_recall", opt(m.det_recall)},
          {"mota", opt(m.mota)},
          {"motp", opt(m.motp)},
          {"id_switches", m.id_switches},
          {"fp", m.fp},
          {"fn", m.fn},
          {"gt", m.gt},
          {"matches", m.matches},
          {"samples", m.samples},
          {"ade", opt(m.ade)},
          {"fde", opt(m.fde)},
          {"ospa_mean", opt(m.ospa_mean)}};
}

Json report_json(const RunResult& r, const ReportMeta& meta) {
  Json series = Json::array();
  for (const auto& [t, v] : r.metrics.ospa_series) series.push_back(Json::array({t, v}));

  Json collab = nullptr;
  if (r.collab) {
    collab = {{"messages", r.collab->messages}, {"stale", r.collab->stale}, {"errors", r.collab->errors},
              {"fused", r.collab->fused},       {"spawned", r.collab->spawned}};
  }
  Json offload = nullptr;
  if (r.offload) {
    const auto& o = *r.offload;
    offload = {{"submitted", o.submitted},
               {"ok_integrated", o.ok_integrated},
               {"failed", o.failed},
               {"timeout_dropped", o.timeout_dropped},
               {"stale_dropped", o.stale_dropped},
               {"queue_dropped", o.queue_dropped},
               {"retried", o.retried},
               {"rollbacks", o.rollbacks},
               {"late_ignored", o.late_ignored},
               {"deregistrations", o.deregistrations}};
  }
  const Json counters = {{"events", r.events},
                         {"network",
                          {{"sent", r.network.sent},
                           {"dropped", r.network.dropped},
                           {"delivered", r.network.delivered},
                           {"in_flight", r.network.in_flight}}},
                         {"collab", collab},
                         {"offload", offload}};

  const std::int64_t ego = meta.scenario ? r.scenario.ego().id : 0;
  Json frames = Json::array();
  for (const auto& tf : r.track_frames) frames.push_back(track_frame_json(ego, tf));

  Json bus = Json::array();
  for (const auto& b : r.bus) {
    const BusFrame f = decode(b.bytes).frame;
    bus.push_back({{"seq", b.seq},
                   {"t_send", b.t_send},
                   {"t_recv", b.t_recv ? Json(*b.t_recv) : Json(nullptr)},
                   {"from", b.from},
                   {"to", b.to ? Json(*b.to) : Json(nullptr)},
                   {"topic", f.topic},
                   {"type", std::string(to_string(f.msg_type))},
                   {"bytes", codec::to_hex(b.bytes)}});
  }

  return {{"schema", kReportSchema},
          {"schema_version", kReportSchemaVersion},
          {"label", meta.label},
          {"mode", meta.mode},
          {"seed", meta.seed},
          {"scenario", meta.scenario ? *meta.scenario : Json(nullptr)},
          {"metrics", metrics_json(r.metrics)},
          {"ospa_series", series},
          {"counters", counters},
          {"track_frames", frames},
          {"bus_frames", bus}};
}

std::string tracks_jsonl(const RunResult& r) {
  std::string out;
  if (r.track_frames.empty()) return out;
  const std::int64_t ego = r.scenario.ego().id;
  for (const auto& tf : r.track_frames) {
    out += canonical_dump(track_frame_json(ego, tf));
    out += '\n';
  }
  return out;
}

std::string metrics_csv(const std::vector<Json>& reports) {
  std::ostringstream os;
  const auto header = csv_header();
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& r : reports) {
    os << cell(r.at("label")) << ',' << cell(r.at("mode")) << ',' << cell(r.at("seed"));
    for (const auto& m : metric_names()) os << ',' << cell(r.at("metrics").at(m));
    for (const auto& c : counter_columns()) os << ',' << cell(counter_value(r.at("counters"), c));
    os << '\n';
  }
  return os.str();
}

void validate_report(const Json& r) {
  if (!r.is_object()) bad("report is not a JSON object");
  if (!r.contains("schema") || r.at("schema") != kReportSchema) bad("not a run report (schema tag)");
  if (!r.contains("schema_version") || r.at("schema_version") != kReportSchemaVersion)
    bad("unsupported report schema_version");
  for (const char* key : {"label", "mode"})
    if (!r.contains(key) || !r.at(key).is_string()) bad(std::string("report field '") + key + "' missing or not a string");
  if (!r.contains("seed") || !r.at("seed").is_number_integer()) bad("report field 'seed' missing");
  if (!r.contains("scenario") || !(r.at("scenario").is_object() || r.at("scenario").is_null()))
    bad("report field 'scenario' missing");
  if (!r.contains("metrics") || !r.at("metrics").is_object()) bad("report field 'metrics' missing");
  const Json& m = r.at("metrics");
  for (const auto& name : metric_names()) {
    if (!m.contains(name)) bad("metric '" + name + "' missing");
    if (!(m.at(name).is_null() || m.at(name).is_number())) bad("metric '" + name + "' is not a number or null");
  }
  if (m.size() != metric_names().size()) bad("unexpected metric fields");
  if (!m.at("mota").is_null() && m.at("mota").get<double>() > 1.0) bad("mota above 1");
  for (const char* p : {"precision", "recall", "det_precision", "det_recall"}) {
    if (m.at(p).is_null()) continue;
    const double v = m.at(p).get<double>();
    if (v < 0.0 || v > 1.0) bad(std::string(p) + " outside [0, 1]");
  }
  if (!r.contains("counters") || !r.at("counters").is_object()) bad("report field 'counters' missing");
  const Json& c = r.at("counters");
  for (const char* key : {"events", "network", "collab", "offload"})
    if (!c.contains(key)) bad(std::string("counter group '") + key + "' missing");
  for (const char* key : {"ospa_series", "track_frames", "bus_frames"})
    if (!r.contains(key) || !r.at(key).is_array()) bad(std::string("report field '") + key + "' missing");
  for (const auto& b : r.at("bus_frames")) {
    if (!b.contains("bytes") || !b.at("bytes").is_string()) bad("bus frame without bytes");
    const Bytes bytes = codec::from_hex(b.at("bytes").get<std::string>());
    const auto d = decode(bytes);
    if (d.consumed != bytes.size()) bad("bus frame with trailing bytes");
    if (d.frame.topic != b.at("topic")) bad("bus frame topic does not match its bytes");
  }
}

void validate_tracks_jsonl(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t n = 0;
  double last_t = -1.0;
  while (std::getline(is, line)) {
    ++n;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      bad("tracks line " + std::to_string(n) + ": " + e.what());
    }
    if (!j.is_object() || j.size() != 3 || !j.contains("t") || !j.contains("agent") || !j.contains("tracks"))
      bad("tracks line " + std::to_string(n) + ": expected t, agent, tracks");
    const double t = j.at("t").get<double>();
    if (t < last_t) bad("tracks line " + std::to_string(n) + ": time goes backwards");
    last_t = t;
    for (const auto& tr : j.at("tracks"))
      if (!tr.contains("id") || !tr.contains("status") || tr.at("mean").size() != 6 || tr.at("cov_diag").size() != 6)
        bad("tracks line " + std::to_string(n) + ": malformed track");
  }
}

void validate_metrics_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) bad("metrics CSV is empty");
  const auto header = csv_header();
  if (split_csv_line(line) != header) bad("metrics CSV header mismatch");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    if (split_csv_line(line).size() != header.size())
      bad("metrics CSV row " + std::to_string(rows) + " has the wrong number of cells");
  }
  if (rows == 0) bad("metrics CSV has no rows");
}

std::vector<BusRecord> bus_records_from_report(const Json& report) {
  return codec::guarded("bus frames", [&] {
    std::vector<BusRecord> out;
    for (const auto& b : report.at("bus_frames")) {
      BusRecord r;
      r.seq = b.at("seq").get<std::uint64_t>();
      r.t_send = b.at("t_send").get<double>();
      if (!b.at("t_recv").is_null()) r.t_recv = b.at("t_recv").get<double>();
      r.from = b.at("from").get<std::int64_t>();
      if (!b.at("to").is_null()) r.to = b.at("to").get<std::int64_t>();
      r.bytes = codec::from_hex(b.at("bytes").get<std::string>());
      out.push_back(std::move(r));
    }
    return out;
  });
}

std::vector<Json> track_frames_from_report(const Json& report) {
  return report.at("track_frames").get<std::vector<Json>>();
}

std::string compare_table(const std::vector<Json>& reports) {
  std::ostringstream os;
  auto name = [](const Json& r) { return r.at("label").get<std::string>() + ":" + r.at("mode").get<std::string>(); };
  os << "metric";
  for (const auto& r : reports) os << '\t' << name(r);
  for (std::size_t i = 1; i < reports.size(); ++i) os << "\tdelta(" << name(reports[i]) << "-" << name(reports[0]) << ")";
  os << '\n';
  for (const auto& m : metric_names()) {
    os << m;
    for (const auto& r : reports) {
      const std::string c = cell(r.at("metrics").at(m));
      os << '\t' << (c.empty() ? "null" : c);
    }
    const Json& base = reports[0].at("metrics").at(m);
    for (std::size_t i = 1; i < reports.size(); ++i) {
      const Json& v = reports[i].at("metrics").at(m);
      if (base.is_null() || v.is_null()) {
        os << "\tnull";
      } else {
        os << '\t' << number_text(v.get<double>() - base.get<double>());
      }
    }
    os << '\n';
  }
  return os.str();
}

std::string summary_line(const Json& report) {
  Json s = {{"label", report.at("label")}, {"mode", report.at("mode")}, {"seed", report.at("seed")}};
  for (const char* k : {"recall", "precision", "mota", "motp", "id_switches", "ade", "fde", "ospa_mean"})
    s[k] = report.at("metrics").at(k);
  return canonical_dump(s);
}

}  // namespace avfuse
