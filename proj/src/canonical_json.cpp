#include "avfuse/canonical_json.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "avfuse/errors.hpp"

namespace avfuse {

namespace {

void write_string(const std::string& s, std::string& out) {
  out.push_back('"');
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  out.push_back('"');
}

void write_double(double v, std::string& out) {
  if (!std::isfinite(v)) throw Error(ErrorCode::kSchema, "non-finite number in canonical JSON");
  if (v == 0.0) v = 0.0;  // fold -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

void write(const Json& v, std::string& out) {
  switch (v.type()) {
    case Json::value_t::null: out += "null"; break;
    case Json::value_t::boolean: out += v.get<bool>() ? "true" : "false"; break;
    case Json::value_t::number_integer: out += std::to_string(v.get<std::int64_t>()); break;
    case Json::value_t::number_unsigned: out += std::to_string(v.get<std::uint64_t>()); break;
    case Json::value_t::number_float: write_double(v.get<double>(), out); break;
    case Json::value_t::string: write_string(v.get_ref<const std::string&>(), out); break;
    case Json::value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& e : v) {
        if (!first) out.push_back(',');
        first = false;
        write(e, out);
      }
      out.push_back(']');
      break;
    }
    case Json::value_t::object: {
      // nlohmann::json stores objects in a std::map, already sorted bytewise.
      out.push_back('{');
      bool first = true;
      for (const auto& [key, e] : v.items()) {
        if (!first) out.push_back(',');
        first = false;
        write_string(key, out);
        out.push_back(':');
        write(e, out);
      }
      out.push_back('}');
      break;
    }
    default: throw Error(ErrorCode::kSchema, "unsupported JSON value in canonical output");
  }
}

}  // namespace

std::string canonical_dump(const Json& value) {
  std::string out;
  write(value, out);
  return out;
}

Bytes to_payload(const Json& value) {
  const std::string s = canonical_dump(value);
  return Bytes(s.begin(), s.end());
}

Json parse_payload(const Bytes& payload) {
  try {
    return Json::parse(payload.begin(), payload.end());
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

}  // namespace avfuse
