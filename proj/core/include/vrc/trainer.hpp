#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vrc/checkpoint.hpp"
#include "vrc/datamodel.hpp"
#include "vrc/embedder.hpp"
#include "vrc/optimizer.hpp"

namespace vrc {

struct ModelConfig {
  EmbeddingKind embedding = EmbeddingKind::kTranslation;
  std::size_t embed_dim = 64;
  bool shared_projection = false;
  std::uint64_t seed = 0;
};

// Fresh checkpoint: seeded embedder, classifier head and relation network.
Checkpoint initialize_model(const DatasetManifest& manifest, const ModelConfig& config);

struct PretrainConfig {
  AdamConfig adam;
  std::size_t steps = 500;
  std::size_t batch_size = 64;
};

// Predicate-classification pretraining of the translation embedder on the
// matched training-split annotations. A concat embedder has no weights and
// is returned unchanged.
Checkpoint pretrain(const DatasetManifest& manifest, Checkpoint model,
                    const PretrainConfig& config);

// One relationship candidate of an episode: a matched training annotation,
// or a sampled unannotated region pair (predicate_id -1, never positive).
struct EpisodeCandidate {
  std::size_t image_slot = 0;  // position of the image in the bag
  int predicate_id = -1;
  PairLabel regions;
  Vector subject_feature;
  Vector object_feature;
  Vector embedding;
};

// Ordered cross-image pair of candidates with label +1 (both carry the bag's
// common predicate) or -1.
struct EpisodePair {
  std::size_t first = 0;
  std::size_t second = 0;
  int label = -1;
};

struct Episode {
  std::vector<EpisodeCandidate> candidates;
  std::vector<EpisodePair> pairs;
  std::size_t positives = 0;
  std::size_t negatives_before_sampling = 0;
};

struct EpisodeBuild {
  std::optional<Episode> episode;
  std::string skip_reason;  // set when episode is empty
};

// All ordered cross-image pairs of the candidates: every matched training
// annotation plus up to background_per_image region pairs per image drawn
// from those no training annotation claims. Negatives are subsampled
// (seeded) to at most negative_ratio per positive. Throws LeakError if the
// bag's predicate is not a training predicate.
EpisodeBuild build_episode(const Bag& bag, const DatasetManifest& manifest,
                           const ImageLookup& lookup, const RelationEmbedder& embedder,
                           double negative_ratio, std::size_t background_per_image,
                           std::mt19937_64& rng);

// ln(1 + exp(-label * score)), overflow-safe.
double logistic_loss(double score, int label);
// d/dscore of logistic_loss.
double logistic_loss_grad(double score, int label);

struct TrainConfig {
  AdamConfig adam;
  std::size_t episodes = 2000;
  double negative_ratio = 3.0;
  // Unannotated proposal pairs per image added as negative candidates, so
  // the scorer sees the clutter it has to rank against at inference.
  std::size_t background_per_image = 8;
  // Share of each episode's negative budget filled with the negatives the
  // current network scores highest; the rest is sampled uniformly.
  double hard_negative_share = 0.5;
  bool freeze_embedder = true;

  void check() const;
};

struct EpisodeLog {
  std::int64_t episode = 0;
  double loss = 0.0;
  bool skipped = false;
  double wall_seconds = 0.0;
};

// Runs episodes [start.episodes_done, config.episodes) over `bags` in a
// seeded shuffled order (reshuffled per pass), one optimizer step per
// episode. Resuming from a saved checkpoint reproduces an uninterrupted run.
Checkpoint train(const DatasetManifest& manifest, std::span<const Bag> bags, Checkpoint start,
                 const TrainConfig& config,
                 const std::function<void(const EpisodeLog&)>& on_episode = {});

// Keeps every positive and floor(negative_ratio * positives) negatives: the
// top-scoring hard_share of that budget, then a uniform sample of the rest.
// Kept pairs stay in their original order.
void select_negatives(Episode& episode, const RelationNetParams& params, double negative_ratio,
                      double hard_share, std::mt19937_64& rng);

// Mean logistic loss of the relation network over the given episode.
double episode_loss(const RelationNetParams& params, const Episode& episode);

}  // namespace vrc
