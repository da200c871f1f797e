#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vrc/datamodel.hpp"
#include "vrc/predictions.hpp"
#include "vrc/records.hpp"

namespace vrc {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr double kCorLocIou = 0.5;

// True iff some ground-truth tuple of `predicate_id` overlaps the predicted
// subject and object boxes each with IoU strictly above `iou_thresh`.
// Throws MetricError when the image has no tuple of that predicate.
bool image_correct(const BBox& subject, const BBox& object,
                   std::span<const RelationshipAnnotation> ground_truth, int predicate_id,
                   double iou_thresh = kCorLocIou);

struct BagResult {
  std::size_t bag_index = 0;
  int predicate_id = -1;
  std::vector<bool> image_correct;

  bool all_correct() const;
  bool operator==(const BagResult&) const = default;
};

// Fraction of images localized correctly. Throws MetricError with no images.
double vr_corloc(std::span<const BagResult> bags);
// Fraction of bags with every image correct. Throws MetricError with no bags.
double bag_corloc(std::span<const BagResult> bags);

struct EvalReport {
  std::vector<BagResult> bags;  // evaluated bags only
  std::vector<std::size_t> skipped_bags;
  std::size_t images = 0;
  std::size_t correct_images = 0;
  std::size_t correct_bags = 0;
  double vr_corloc = 0.0;
  double bag_corloc = 0.0;
  std::string mode;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;

  bool operator==(const EvalReport&) const = default;
};

// Scores predictions against the manifest's ground truth for each bag's
// common predicate. Skipped bags are listed but excluded from both metrics.
EvalReport evaluate(const PredictionSet& predictions, const DatasetManifest& manifest,
                    const BagList& bags);

std::string serialize_report(const EvalReport& report);
EvalReport parse_report(std::string_view text);
void save_report(const EvalReport& report, const std::filesystem::path& path);

// Plain-text table: overall metrics, then VR-CorLoc per predicate.
std::string summary_table(const EvalReport& report, const DatasetManifest* manifest = nullptr);

}  // namespace vrc
