#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vrc {

// Axis-aligned box in normalized image coordinates.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  // Inside [0,1]^2 with positive area.
  bool valid() const;

  bool operator==(const BBox&) const = default;
};

struct Region {
  BBox box;
  std::vector<double> appearance;
  std::vector<double> class_scores;
  double objectness = 0.0;

  bool operator==(const Region&) const = default;
};

struct RelationshipAnnotation {
  BBox subject_box;
  BBox object_box;
  int predicate_id = -1;
  // Set by match_annotations when both boxes clear the IoU threshold.
  std::optional<std::size_t> subject_region;
  std::optional<std::size_t> object_region;

  bool matched() const { return subject_region && object_region; }
  bool operator==(const RelationshipAnnotation&) const = default;
};

struct ImageRecord {
  std::string image_id;
  std::vector<Region> regions;
  std::vector<RelationshipAnnotation> annotations;

  bool has_predicate(int predicate_id) const;
  bool operator==(const ImageRecord&) const = default;
};

// Ordered (subject, object) region pair; one candidate label of an image.
struct PairLabel {
  std::size_t subject = 0;
  std::size_t object = 0;

  auto operator<=>(const PairLabel&) const = default;
};

struct Bag {
  std::vector<std::string> image_ids;
  // Supervision and evaluation only. Inference never reads it.
  int common_predicate_id = -1;

  bool operator==(const Bag&) const = default;
};

enum class Split { kTrain, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct Predicate {
  int id = 0;
  std::string name;
  Split split = Split::kTrain;

  bool operator==(const Predicate&) const = default;
};

struct DatasetManifest {
  std::size_t appearance_dim = 0;
  std::size_t class_dim = 0;
  std::vector<Predicate> predicates;
  std::vector<ImageRecord> images;
  // Free-form provenance (generator config, seed); written verbatim.
  std::map<std::string, std::string> metadata;

  const Predicate* find_predicate(int id) const;
  std::vector<int> predicate_ids(Split split) const;

  bool operator==(const DatasetManifest&) const = default;
};

// Throws ValidationError on the first broken invariant.
void validate(const DatasetManifest& manifest);

// id -> position lookup over a manifest's images.
class ImageLookup {
 public:
  explicit ImageLookup(const DatasetManifest& manifest);

  const ImageRecord& at(std::string_view image_id) const;
  bool contains(std::string_view image_id) const;

 private:
  const DatasetManifest* manifest_;
  std::unordered_map<std::string, std::size_t> index_;
};

double iou(const BBox& a, const BBox& b);

// Greedy suppression in descending objectness order (ties by lower index).
// Returns kept indices in that order, at most top_k of them.
std::vector<std::size_t> nms_topk(std::span<const Region> regions,
                                  double iou_thresh, std::size_t top_k);

// All ordered pairs (s, o), s != o, lexicographic. Throws
// DegenerateImageError when the image has fewer than two regions.
std::vector<PairLabel> build_label_set(const ImageRecord& image);
std::vector<PairLabel> build_label_set(std::size_t region_count);

// Attaches the highest-IoU region to each annotation's subject and object box
// when both IoUs reach iou_thresh; clears the match otherwise.
ImageRecord match_annotations(const ImageRecord& image, double iou_thresh);

// Runs nms_topk, keeps the surviving regions in kept order and re-matches
// the annotations against them.
ImageRecord prune_regions(const ImageRecord& image, double nms_thresh,
                          std::size_t top_k, double match_thresh);

struct BagSpec {
  Split split = Split::kTest;
  std::size_t bag_size = 4;
  std::size_t count = 500;
  std::uint64_t seed = 0;

  bool operator==(const BagSpec&) const = default;
};

// Uniform predicate, then bag_size distinct images uniformly from its pool.
// Throws ConfigError if no predicate of the split has bag_size images.
std::vector<Bag> make_bags(const DatasetManifest& manifest, const BagSpec& spec);

}  // namespace vrc
