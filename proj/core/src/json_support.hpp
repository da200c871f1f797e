#pragma once

// Private helpers shared by the record readers/writers.

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vrc/datamodel.hpp"
#include "vrc/errors.hpp"

namespace vrc::detail {

using json = nlohmann::json;

inline json box_to_json(const BBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

inline BBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw ParseError("box must be an array of 4 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
          j[3].get<double>()};
}

inline json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed record file: ") + e.what());
  }
}

// Checks the "format" tag and "schema_version" of a document.
inline void check_header(const json& doc, std::string_view format, int version) {
  if (!doc.is_object() || !doc.contains("format") || !doc["format"].is_string()) {
    throw ParseError("record file has no 'format' field");
  }
  if (doc["format"].get<std::string>() != format) {
    throw ParseError("expected format '" + std::string(format) + "', found '" +
                     doc["format"].get<std::string>() + "'");
  }
  if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer()) {
    throw ParseError("record file has no integer 'schema_version'");
  }
  const int found = doc["schema_version"].get<int>();
  if (found != version) {
    throw VersionError("unsupported " + std::string(format) + " schema version " +
                       std::to_string(found) + " (this build reads version " +
                       std::to_string(version) + ")");
  }
}

// Dumps `head` compactly, then appends `rows` as a one-element-per-line array
// under `key`.
inline std::string dump_with_rows(const json& head, std::string_view key,
                                  const std::vector<json>& rows) {
  std::string out = head.dump();
  out.pop_back();  // closing brace
  if (head.size() > 0) out += ',';
  out += '"';
  out += key;
  out += "\":[";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += i == 0 ? "\n" : ",\n";
    out += rows[i].dump();
  }
  out += "\n]}\n";
  return out;
}

// Wraps nlohmann type errors into ParseError.
template <typename Fn>
auto guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed record file: ") + e.what());
  }
}

}  // namespace vrc::detail
