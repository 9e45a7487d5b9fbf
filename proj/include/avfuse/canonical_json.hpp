#pragma once

#include <string>

#include <json.hpp>

#include "avfuse/bus.hpp"

namespace avfuse {

using Json = nlohmann::json;

/// Canonical form: UTF-8, object keys sorted bytewise, no insignificant
/// whitespace, doubles in shortest round-trip form. Non-finite numbers throw.
std::string canonical_dump(const Json& value);

Bytes to_payload(const Json& value);
/// Throws kParse on malformed JSON.
Json parse_payload(const Bytes& payload);

}  // namespace avfuse
