#include "vrc/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "vrc/errors.hpp"

namespace vrc {

namespace {

constexpr double kScoreSumTolerance = 1e-5;

std::string image_context(const ImageRecord& image) {
  return "image '" + image.image_id + "'";
}

}  // namespace

bool BBox::valid() const {
  return x1 >= 0.0 && y1 >= 0.0 && x2 <= 1.0 && y2 <= 1.0 && x1 < x2 &&
         y1 < y2;
}

bool ImageRecord::has_predicate(int predicate_id) const {
  return std::any_of(annotations.begin(), annotations.end(),
                     [&](const RelationshipAnnotation& a) {
                       return a.predicate_id == predicate_id;
                     });
}

std::string_view to_string(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "test") return Split::kTest;
  throw ConfigError("unknown split '" + std::string(text) +
                    "' (expected train or test)");
}

const Predicate* DatasetManifest::find_predicate(int id) const {
  for (const auto& p : predicates) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

std::vector<int> DatasetManifest::predicate_ids(Split split) const {
  std::vector<int> ids;
  for (const auto& p : predicates) {
    if (p.split == split) ids.push_back(p.id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void validate(const DatasetManifest& manifest) {
  std::set<int> seen;
  for (const auto& p : manifest.predicates) {
    if (!seen.insert(p.id).second) {
      throw ValidationError("duplicate predicate id " + std::to_string(p.id));
    }
  }
  std::set<std::string_view> ids;
  for (const auto& image : manifest.images) {
    if (!ids.insert(image.image_id).second) {
      throw ValidationError("duplicate image id '" + image.image_id + "'");
    }
    for (std::size_t r = 0; r < image.regions.size(); ++r) {
      const auto& region = image.regions[r];
      const auto where = image_context(image) + " region " + std::to_string(r);
      if (!region.box.valid()) {
        throw ValidationError(where + ": box outside [0,1] or empty");
      }
      if (region.appearance.size() != manifest.appearance_dim) {
        throw ValidationError(where + ": appearance dimension " +
                              std::to_string(region.appearance.size()) +
                              " != declared " +
                              std::to_string(manifest.appearance_dim));
      }
      if (region.class_scores.size() != manifest.class_dim) {
        throw ValidationError(where + ": class-score dimension " +
                              std::to_string(region.class_scores.size()) +
                              " != declared " +
                              std::to_string(manifest.class_dim));
      }
      if (manifest.class_dim > 0) {
        const double sum = std::accumulate(region.class_scores.begin(),
                                           region.class_scores.end(), 0.0);
        if (std::abs(sum - 1.0) > kScoreSumTolerance) {
          throw ValidationError(where + ": class scores sum to " +
                                std::to_string(sum));
        }
      }
      if (!(region.objectness >= 0.0 && region.objectness <= 1.0)) {
        throw ValidationError(where + ": objectness outside [0,1]");
      }
    }
    for (const auto& a : image.annotations) {
      if (manifest.find_predicate(a.predicate_id) == nullptr) {
        throw ValidationError(image_context(image) + ": predicate id " +
                              std::to_string(a.predicate_id) +
                              " not in vocabulary");
      }
      if (!a.subject_box.valid() || !a.object_box.valid()) {
        throw ValidationError(image_context(image) +
                              ": annotation box outside [0,1] or empty");
      }
      const auto n = image.regions.size();
      if ((a.subject_region && *a.subject_region >= n) ||
          (a.object_region && *a.object_region >= n)) {
        throw ValidationError(image_context(image) +
                              ": matched region index out of range");
      }
    }
  }
}

ImageLookup::ImageLookup(const DatasetManifest& manifest) : manifest_(&manifest) {
  index_.reserve(manifest.images.size());
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    index_.emplace(manifest.images[i].image_id, i);
  }
}

const ImageRecord& ImageLookup::at(std::string_view image_id) const {
  const auto it = index_.find(std::string(image_id));
  if (it == index_.end()) {
    throw ValidationError("unknown image id '" + std::string(image_id) + "'");
  }
  return manifest_->images[it->second];
}

bool ImageLookup::contains(std::string_view image_id) const {
  return index_.contains(std::string(image_id));
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<std::size_t> nms_topk(std::span<const Region> regions,
                                  double iou_thresh, std::size_t top_k) {
  std::vector<std::size_t> order(regions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return regions[a].objectness > regions[b].objectness;
                   });
  std::vector<std::size_t> kept;
  for (const auto idx : order) {
    if (kept.size() >= top_k) break;
    const bool suppressed =
        std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
          return iou(regions[k].box, regions[idx].box) > iou_thresh;
        });
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

std::vector<PairLabel> build_label_set(std::size_t region_count) {
  if (region_count < 2) {
    throw DegenerateImageError("label set needs at least 2 regions, got " +
                               std::to_string(region_count));
  }
  std::vector<PairLabel> labels;
  labels.reserve(region_count * (region_count - 1));
  for (std::size_t s = 0; s < region_count; ++s) {
    for (std::size_t o = 0; o < region_count; ++o) {
      if (s != o) labels.push_back({s, o});
    }
  }
  return labels;
}

std::vector<PairLabel> build_label_set(const ImageRecord& image) {
  if (image.regions.size() < 2) {
    throw DegenerateImageError(image_context(image) + " has " +
                               std::to_string(image.regions.size()) +
                               " region(s); at least 2 are required");
  }
  return build_label_set(image.regions.size());
}

namespace {

struct BestMatch {
  std::size_t index = 0;
  double overlap = -1.0;
};

BestMatch best_region(const std::vector<Region>& regions, const BBox& box) {
  BestMatch best;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const double v = iou(regions[r].box, box);
    if (v > best.overlap) best = {r, v};
  }
  return best;
}

}  // namespace

ImageRecord match_annotations(const ImageRecord& image, double iou_thresh) {
  ImageRecord out = image;
  for (auto& a : out.annotations) {
    a.subject_region.reset();
    a.object_region.reset();
    if (image.regions.empty()) continue;
    const auto s = best_region(image.regions, a.subject_box);
    const auto o = best_region(image.regions, a.object_box);
    // A single region cannot be both ends of a pair label.
    if (s.overlap >= iou_thresh && o.overlap >= iou_thresh && s.index != o.index) {
      a.subject_region = s.index;
      a.object_region = o.index;
    }
  }
  return out;
}

ImageRecord prune_regions(const ImageRecord& image, double nms_thresh,
                          std::size_t top_k, double match_thresh) {
  const auto kept = nms_topk(image.regions, nms_thresh, top_k);
  ImageRecord pruned;
  pruned.image_id = image.image_id;
  pruned.annotations = image.annotations;
  pruned.regions.reserve(kept.size());
  for (const auto idx : kept) pruned.regions.push_back(image.regions[idx]);
  return match_annotations(pruned, match_thresh);
}

std::vector<Bag> make_bags(const DatasetManifest& manifest, const BagSpec& spec) {
  if (spec.bag_size < 2) {
    throw ConfigError("bag size must be at least 2");
  }
  std::vector<std::pair<int, std::vector<std::size_t>>> pools;
  for (const int pid : manifest.predicate_ids(spec.split)) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < manifest.images.size(); ++i) {
      const auto& image = manifest.images[i];
      if (image.regions.size() >= 2 && image.has_predicate(pid)) {
        pool.push_back(i);
      }
    }
    if (pool.size() >= spec.bag_size) pools.emplace_back(pid, std::move(pool));
  }
  if (pools.empty()) {
    throw ConfigError("no " + std::string(to_string(spec.split)) +
                      " predicate occurs in at least " +
                      std::to_string(spec.bag_size) + " images");
  }

  std::mt19937_64 rng(spec.seed);
  std::vector<Bag> bags;
  bags.reserve(spec.count);
  for (std::size_t n = 0; n < spec.count; ++n) {
    std::uniform_int_distribution<std::size_t> pick_pred(0, pools.size() - 1);
    auto [pid, pool] = pools[pick_pred(rng)];
    // Partial Fisher-Yates: the first bag_size slots form the sample.
    for (std::size_t k = 0; k < spec.bag_size; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    Bag bag;
    bag.common_predicate_id = pid;
    for (std::size_t k = 0; k < spec.bag_size; ++k) {
      bag.image_ids.push_back(manifest.images[pool[k]].image_id);
    }
    bags.push_back(std::move(bag));
  }
  return bags;
}

}  // namespace vrc
