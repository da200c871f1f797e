#include "vrc/pipeline.hpp"

#include <atomic>
#include <exception>
#include <sstream>
#include <thread>

#include "vrc/errors.hpp"

namespace vrc {

std::string to_string(InferMode mode) {
  switch (mode) {
    case InferMode::kSubjectFixed: return "subject_fixed";
    case InferMode::kOneAnnotated: return "one_annotated";
    case InferMode::kFree: break;
  }
  return "free";
}

InferMode parse_infer_mode(const std::string& text) {
  if (text == "free") return InferMode::kFree;
  if (text == "subject_fixed") return InferMode::kSubjectFixed;
  if (text == "one_annotated") return InferMode::kOneAnnotated;
  throw ConfigError("unknown mode '" + text + "' (expected free, subject_fixed or one_annotated)");
}

Scorer make_scorer(const Checkpoint& checkpoint, ScorerKind kind) {
  if (kind == ScorerKind::kCosine) return Scorer::cosine();
  auto params = std::make_shared<const RelationNetParams>(checkpoint.relation);
  return Scorer::relation(std::move(params), kind == ScorerKind::kRelationSymmetric);
}

BagProblem build_problem(const Bag& bag, const ImageLookup& lookup, const FeatureLayout& layout,
                         const RelationEmbedder& embedder, const Scorer& scorer) {
  BagProblem problem;
  std::vector<Matrix> embeddings;
  for (const auto& id : bag.image_ids) {
    const auto& image = lookup.at(id);
    problem.images.push_back(&image);
    problem.labels.push_back(build_label_set(image));
    std::vector<Vector> features;
    features.reserve(image.regions.size());
    for (const auto& r : image.regions) features.push_back(assemble_feature(r, layout));
    embeddings.push_back(embedder.embed_labels(features, problem.labels.back()));
  }
  problem.potentials = std::make_unique<EmbeddingPotentials>(std::move(embeddings), scorer);
  return problem;
}

namespace {

const RelationshipAnnotation* first_annotation(const ImageRecord& image, int predicate_id,
                                               bool matched_only) {
  for (const auto& a : image.annotations) {
    if (a.predicate_id == predicate_id && (!matched_only || a.matched())) return &a;
  }
  return nullptr;
}

BagPrediction skipped(std::size_t index, std::string reason) {
  BagPrediction out;
  out.bag_index = index;
  out.skipped = true;
  out.skip_reason = std::move(reason);
  return out;
}

BagPrediction infer_one(std::size_t index, const Bag& bag, const ImageLookup& lookup,
                        const Checkpoint& checkpoint, const Scorer& scorer,
                        const InferOptions& options) {
  BagProblem problem;
  try {
    problem = build_problem(bag, lookup, checkpoint.layout, checkpoint.embedder, scorer);
  } catch (const DegenerateImageError& e) {
    return skipped(index, e.what());
  }
  const auto& pot = *problem.potentials;
  std::optional<Labeling> labeling;
  switch (options.mode) {
    case InferMode::kFree:
      labeling = options.exact ? brute_force(pot, options.brute_force_cap)
                               : infer_free(pot, options.inference);
      break;
    case InferMode::kSubjectFixed: {
      std::vector<BBox> subjects;
      std::vector<std::vector<BBox>> boxes;
      for (std::size_t u = 0; u < problem.images.size(); ++u) {
        const auto* gt = first_annotation(*problem.images[u], bag.common_predicate_id, false);
        if (gt == nullptr) {
          return skipped(index, "image '" + bag.image_ids[u] + "' has no subject box");
        }
        subjects.push_back(gt->subject_box);
        auto& b = boxes.emplace_back();
        for (const auto& r : problem.images[u]->regions) b.push_back(r.box);
      }
      auto result = infer_subject_fixed(pot, problem.labels, boxes, subjects, options.inference);
      if (!result.labeling) {
        std::string reason = "no region matches the subject box in image";
        for (const auto u : result.unmatched_images) reason += " '" + bag.image_ids[u] + "'";
        return skipped(index, reason);
      }
      labeling = std::move(result.labeling);
      break;
    }
    case InferMode::kOneAnnotated: {
      const auto* gt = first_annotation(*problem.images[0], bag.common_predicate_id, true);
      if (gt == nullptr) {
        return skipped(index, "image '" + bag.image_ids[0] +
                                  "' has no matched annotation to clamp");
      }
      const PairLabel clamp{*gt->subject_region, *gt->object_region};
      const auto& labels = problem.labels[0];
      const auto it = std::lower_bound(labels.begin(), labels.end(), clamp);
      labeling = infer_one_annotated(pot, 0, static_cast<std::size_t>(it - labels.begin()),
                                     options.inference);
      break;
    }
  }
  BagPrediction out;
  out.bag_index = index;
  out.cost = labeling->cost;
  for (std::size_t u = 0; u < problem.images.size(); ++u) {
    const auto& image = *problem.images[u];
    const auto& l = problem.labels[u][labeling->labels[u]];
    out.images.push_back({image.image_id, l.subject, l.object, image.regions[l.subject].box,
                          image.regions[l.object].box});
  }
  return out;
}

std::string format_double(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

}  // namespace

PredictionSet infer_bags(const DatasetManifest& manifest, const BagList& bags,
                         const Checkpoint& checkpoint, const InferOptions& options) {
  options.inference.check();
  if (options.exact && options.mode != InferMode::kFree) {
    throw ConfigError("exact search is only available in free mode");
  }
  if (checkpoint.layout != layout_of(manifest)) {
    throw ValidationError("checkpoint feature layout does not match the manifest");
  }
  const ImageLookup lookup(manifest);
  const Scorer scorer = make_scorer(checkpoint, options.inference.scorer);
  const std::size_t n = bags.bags.size();

  PredictionSet out;
  out.mode = to_string(options.mode);
  out.seed = options.inference.seed;
  out.config["mode"] = out.mode;
  out.config["scorer"] = to_string(options.inference.scorer);
  out.config["restarts"] = std::to_string(options.inference.restarts);
  out.config["pool_size"] = std::to_string(options.inference.pool_size);
  out.config["pool_sample"] = std::to_string(options.inference.pool_sample);
  out.config["seed"] = std::to_string(options.inference.seed);
  out.config["exact"] = options.exact ? "true" : "false";
  out.config["bags.seed"] = std::to_string(bags.spec.seed);
  out.config["bags.split"] = std::string(to_string(bags.spec.split));
  out.config["bags.bag_size"] = std::to_string(bags.spec.bag_size);
  out.config["checkpoint.seed"] = std::to_string(checkpoint.seed);
  out.config["checkpoint.episodes_done"] = std::to_string(checkpoint.episodes_done);
  if (!checkpoint.loss_history.empty()) {
    out.config["checkpoint.final_loss"] = format_double(checkpoint.loss_history.back());
  }
  out.bags.resize(n);

  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out.bags[i] = infer_one(i, bags.bags[i], lookup, checkpoint, scorer, options);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, n));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace vrc
