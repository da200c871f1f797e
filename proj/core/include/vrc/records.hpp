#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vrc/datamodel.hpp"

namespace vrc {

// Every file this project writes is a JSON document whose "format" and
// "schema_version" fields are checked on load. Large arrays (images, bags)
// are written one element per line so files diff cleanly.
inline constexpr int kManifestSchemaVersion = 1;
inline constexpr int kBagListSchemaVersion = 1;

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string serialize_manifest(const DatasetManifest& manifest);
// Throws ParseError, VersionError or ValidationError.
DatasetManifest parse_manifest(std::string_view text);

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct BagList {
  BagSpec spec;
  std::vector<Bag> bags;
  std::map<std::string, std::string> metadata;

  bool operator==(const BagList&) const = default;
};

std::string serialize_bags(const BagList& bags);
BagList parse_bags(std::string_view text);

BagList load_bags(const std::filesystem::path& path);
void save_bags(const BagList& bags, const std::filesystem::path& path);

}  // namespace vrc
