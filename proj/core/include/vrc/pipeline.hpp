#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vrc/checkpoint.hpp"
#include "vrc/datamodel.hpp"
#include "vrc/predictions.hpp"
#include "vrc/records.hpp"
#include "vrc/solver.hpp"

namespace vrc {

enum class InferMode { kFree, kSubjectFixed, kOneAnnotated };

std::string to_string(InferMode mode);
InferMode parse_infer_mode(const std::string& text);

struct InferOptions {
  InferMode mode = InferMode::kFree;
  InferenceConfig inference;
  // Exact search instead of greedy (free mode only).
  bool exact = false;
  std::uint64_t brute_force_cap = kDefaultBruteForceCap;
  std::size_t workers = 1;
};

// Everything inference needs for one bag.
struct BagProblem {
  std::vector<const ImageRecord*> images;
  std::vector<std::vector<PairLabel>> labels;
  std::unique_ptr<EmbeddingPotentials> potentials;
};

Scorer make_scorer(const Checkpoint& checkpoint, ScorerKind kind);

// Throws DegenerateImageError for an image with fewer than two regions.
BagProblem build_problem(const Bag& bag, const ImageLookup& lookup, const FeatureLayout& layout,
                         const RelationEmbedder& embedder, const Scorer& scorer);

// Runs one inference mode over every bag. Bags are independent; with
// workers > 1 they are processed concurrently and collected in bag order,
// so the output does not depend on the worker count.
PredictionSet infer_bags(const DatasetManifest& manifest, const BagList& bags,
                         const Checkpoint& checkpoint, const InferOptions& options);

}  // namespace vrc
