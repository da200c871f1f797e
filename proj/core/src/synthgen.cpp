#include "vrc/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "vrc/errors.hpp"

namespace vrc {

void SynthConfig::check() const {
  if (!(mu > 0.0)) throw ConfigError("predicate norm mu must be positive");
  if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
  if (!(orientation >= 0.0 && orientation <= 1.0)) {
    throw ConfigError("orientation must lie in [0, 1]");
  }
  if (regions_per_image < 2) throw ConfigError("need at least 2 regions per image");
  if (train_predicates < 1 || test_predicates < 1) {
    throw ConfigError("need at least one train and one test predicate");
  }
  if (appearance_dim < 1 || class_dim < 1) throw ConfigError("feature dims must be positive");
  if (annotations_per_image < 1) throw ConfigError("need at least one annotation per image");
  if (annotations_per_image > train_predicates + test_predicates) {
    throw ConfigError("more annotations per image than predicates");
  }
  const std::size_t pairs = annotations_per_image + (hard_mode ? distractors_per_image : 0);
  if (2 * pairs > regions_per_image) {
    throw ConfigError("annotated and distractor pairs need " + std::to_string(2 * pairs) +
                      " distinct regions but images have " +
                      std::to_string(regions_per_image));
  }
}

namespace {

BBox random_box(std::mt19937_64& rng) {
  // Sides in [0.1, 0.5] keep the area at or above 0.01.
  std::uniform_real_distribution<double> side(0.1, 0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double w = side(rng);
  const double h = side(rng);
  const double x = unit(rng) * (1.0 - w);
  const double y = unit(rng) * (1.0 - h);
  return {x, y, x + w, y + h};
}

Vector random_direction(std::size_t dim, double norm, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(dim));
  do {
    for (auto& x : v) x = gauss(rng);
  } while (v.norm() < 1e-12);
  return v * (norm / v.norm());
}

std::string format_double(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

}  // namespace

SynthWorld generate_world(const SynthConfig& config) {
  config.check();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SynthWorld world;
  DatasetManifest& m = world.manifest;
  m.appearance_dim = config.appearance_dim;
  m.class_dim = config.class_dim;
  const std::size_t n_pred = config.train_predicates + config.test_predicates;
  world.axis = random_direction(config.appearance_dim, 1.0, rng);
  const double along = config.orientation;
  const double across = std::sqrt(1.0 - along * along);
  for (std::size_t k = 0; k < n_pred; ++k) {
    const int id = static_cast<int>(k);
    char name[32];
    std::snprintf(name, sizeof name, "pred_%02zu", k);
    m.predicates.push_back({id, name, k < config.train_predicates ? Split::kTrain : Split::kTest});
    Vector r = random_direction(config.appearance_dim, 1.0, rng);
    if (config.appearance_dim > 1) {
      r -= r.dot(world.axis) * world.axis;
      r.normalize();
    }
    world.predicate_vectors[id] = config.mu * (along * world.axis + across * r);
  }

  const double noise_sd = config.sigma / std::sqrt(static_cast<double>(config.appearance_dim));
  const std::size_t p = config.regions_per_image;
  std::vector<std::size_t> predicate_order(n_pred);
  std::vector<std::size_t> region_order(p);
  for (std::size_t n = 0; n < config.images; ++n) {
    ImageRecord image;
    char id[32];
    std::snprintf(id, sizeof id, "img_%05zu", n);
    image.image_id = id;
    for (std::size_t r = 0; r < p; ++r) {
      Region region;
      // Rejection keeps every region pair at IoU <= 0.5 so ground truth
      // matches exactly one region.
      for (;;) {
        region.box = random_box(rng);
        const bool clear = std::none_of(image.regions.begin(), image.regions.end(),
                                        [&](const Region& o) { return iou(o.box, region.box) > 0.5; });
        if (clear) break;
      }
      region.appearance.resize(config.appearance_dim);
      for (auto& a : region.appearance) a = gauss(rng);
      region.class_scores.resize(config.class_dim);
      double total = 0.0;
      for (auto& c : region.class_scores) total += (c = std::exp(gauss(rng)));
      for (auto& c : region.class_scores) c /= total;
      region.objectness = unit(rng);
      image.regions.push_back(std::move(region));
    }

    std::iota(predicate_order.begin(), predicate_order.end(), std::size_t{0});
    std::shuffle(predicate_order.begin(), predicate_order.end(), rng);
    std::iota(region_order.begin(), region_order.end(), std::size_t{0});
    std::shuffle(region_order.begin(), region_order.end(), rng);
    std::size_t next_region = 0;
    auto translate = [&](std::size_t s, std::size_t o, const Vector& v) {
      auto& dst = image.regions[o].appearance;
      const auto& src = image.regions[s].appearance;
      for (std::size_t k = 0; k < config.appearance_dim; ++k) {
        dst[k] = src[k] + v(static_cast<Eigen::Index>(k)) + noise_sd * gauss(rng);
      }
    };
    for (std::size_t a = 0; a < config.annotations_per_image; ++a) {
      const int pid = static_cast<int>(predicate_order[a]);
      const std::size_t s = region_order[next_region++];
      const std::size_t o = region_order[next_region++];
      translate(s, o, world.predicate_vectors.at(pid));
      RelationshipAnnotation ann;
      ann.subject_box = image.regions[s].box;
      ann.object_box = image.regions[o].box;
      ann.predicate_id = pid;
      ann.subject_region = s;
      ann.object_region = o;
      image.annotations.push_back(ann);
    }
    if (config.hard_mode) {
      for (std::size_t d = 0; d < config.distractors_per_image; ++d) {
        // Any predicate this image is not annotated with.
        std::uniform_int_distribution<std::size_t> pick(config.annotations_per_image, n_pred - 1);
        const int pid = static_cast<int>(predicate_order[pick(rng)]);
        const std::size_t s = region_order[next_region++];
        const std::size_t o = region_order[next_region++];
        translate(s, o, world.predicate_vectors.at(pid));
      }
    }
    m.images.push_back(std::move(image));
  }

  m.metadata["generator"] = "synthgen";
  m.metadata["seed"] = std::to_string(config.seed);
  m.metadata["train_predicates"] = std::to_string(config.train_predicates);
  m.metadata["test_predicates"] = std::to_string(config.test_predicates);
  m.metadata["images"] = std::to_string(config.images);
  m.metadata["regions_per_image"] = std::to_string(config.regions_per_image);
  m.metadata["mu"] = format_double(config.mu);
  m.metadata["sigma"] = format_double(config.sigma);
  m.metadata["orientation"] = format_double(config.orientation);
  m.metadata["annotations_per_image"] = std::to_string(config.annotations_per_image);
  m.metadata["hard_mode"] = config.hard_mode ? "true" : "false";
  m.metadata["distractors_per_image"] = std::to_string(config.distractors_per_image);
  validate(m);
  return world;
}

DatasetManifest generate(const SynthConfig& config) { return generate_world(config).manifest; }

SeparabilityReport separability_report(const DatasetManifest& manifest) {
  std::vector<int> ids;
  std::vector<Vector> diffs;
  const auto dim = static_cast<Eigen::Index>(manifest.appearance_dim);
  for (const auto& image : manifest.images) {
    for (const auto& a : image.annotations) {
      if (!a.matched()) continue;
      const auto& s = image.regions[*a.subject_region].appearance;
      const auto& o = image.regions[*a.object_region].appearance;
      diffs.push_back(Eigen::Map<const Vector>(o.data(), dim) -
                      Eigen::Map<const Vector>(s.data(), dim));
      ids.push_back(a.predicate_id);
    }
  }
  std::map<int, PredicateSeparation> per;
  std::map<int, std::pair<std::size_t, std::size_t>> pair_counts;  // within, across
  double within_sum = 0.0;
  double across_sum = 0.0;
  std::size_t within_n = 0;
  std::size_t across_n = 0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    auto& entry = per[ids[i]];
    entry.predicate_id = ids[i];
    ++entry.count;
    for (std::size_t j = 0; j < diffs.size(); ++j) {
      if (i == j) continue;
      const double d = (diffs[i] - diffs[j]).norm();
      if (ids[i] == ids[j]) {
        entry.within += d;
        ++pair_counts[ids[i]].first;
        if (j > i) {
          within_sum += d;
          ++within_n;
        }
      } else {
        entry.across += d;
        ++pair_counts[ids[i]].second;
        if (j > i) {
          across_sum += d;
          ++across_n;
        }
      }
    }
  }
  SeparabilityReport report;
  for (auto& [id, entry] : per) {
    const auto [w, a] = pair_counts[id];
    if (w > 0) entry.within /= static_cast<double>(w);
    if (a > 0) entry.across /= static_cast<double>(a);
    report.predicates.push_back(entry);
  }
  if (within_n > 0) report.within = within_sum / static_cast<double>(within_n);
  if (across_n > 0) report.across = across_sum / static_cast<double>(across_n);
  return report;
}

}  // namespace vrc
