#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vrc/datamodel.hpp"

namespace vrc {

inline constexpr int kPredictionsSchemaVersion = 1;

struct ImagePrediction {
  std::string image_id;
  std::size_t subject_region = 0;
  std::size_t object_region = 0;
  BBox subject_box;
  BBox object_box;

  bool operator==(const ImagePrediction&) const = default;
};

struct BagPrediction {
  std::size_t bag_index = 0;
  bool skipped = false;
  std::string skip_reason;
  double cost = 0.0;
  std::vector<ImagePrediction> images;  // bag order; empty when skipped

  bool operator==(const BagPrediction&) const = default;
};

// Output of inference over a bag file: one entry per bag, in bag order.
struct PredictionSet {
  std::string mode;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;
  std::vector<BagPrediction> bags;

  bool operator==(const PredictionSet&) const = default;
};

std::string serialize_predictions(const PredictionSet& predictions);
PredictionSet parse_predictions(std::string_view text);
PredictionSet load_predictions(const std::filesystem::path& path);
void save_predictions(const PredictionSet& predictions, const std::filesystem::path& path);

}  // namespace vrc
