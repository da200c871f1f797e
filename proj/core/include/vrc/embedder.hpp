#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vrc/datamodel.hpp"
#include "vrc/optimizer.hpp"
#include "vrc/tensor.hpp"

namespace vrc {

// Raw region feature layout: [x1, y1, x2, y2, appearance..., class_scores...].
struct FeatureLayout {
  std::size_t appearance_dim = 0;
  std::size_t class_dim = 0;

  std::size_t dim() const { return 4 + appearance_dim + class_dim; }
  bool operator==(const FeatureLayout&) const = default;
};

FeatureLayout layout_of(const DatasetManifest& manifest);

// Throws ValidationError when the region does not match the layout.
Vector assemble_feature(const Region& region, const FeatureLayout& layout);

struct FeatureParts {
  Vector box;
  Vector appearance;
  Vector class_scores;
};
FeatureParts split_feature(const Vector& feature, const FeatureLayout& layout);

enum class EmbeddingKind { kTranslation, kConcat };

std::string to_string(EmbeddingKind kind);
EmbeddingKind parse_embedding_kind(const std::string& text);

// Weights of the translation embedder plus the predicate classifier used only
// during pretraining. With `shared`, object_proj is empty and subject_proj
// serves both roles.
struct EmbedderParams {
  Matrix subject_proj;  // embed_dim x feature_dim
  Matrix object_proj;   // embed_dim x feature_dim, or empty when shared
  bool shared = false;
  Matrix classifier;       // classes x embed_dim
  Vector classifier_bias;  // classes

  std::size_t feature_dim() const { return static_cast<std::size_t>(subject_proj.cols()); }
  std::size_t embed_dim() const { return static_cast<std::size_t>(subject_proj.rows()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(classifier.rows()); }
  const Matrix& object_weights() const { return shared ? subject_proj : object_proj; }

  // Weights uniform in +-1/sqrt(feature_dim), classifier bias zero.
  static EmbedderParams initialize(std::size_t feature_dim, std::size_t embed_dim,
                                   std::size_t num_classes, bool shared,
                                   std::uint64_t seed);
};

// f = W_o * object - W_s * subject
Vector embed_translation(const EmbedderParams& params, const Vector& subject,
                         const Vector& object);

// f = [subject; object]
Vector embed_concat(const Vector& subject, const Vector& object);

// Maps an ordered region pair to its relationship embedding.
struct RelationEmbedder {
  EmbeddingKind kind = EmbeddingKind::kTranslation;
  EmbedderParams params;  // unused for kConcat
  std::size_t feature_dim = 0;

  std::size_t output_dim() const {
    return kind == EmbeddingKind::kConcat ? 2 * feature_dim : params.embed_dim();
  }
  Vector embed(const Vector& subject, const Vector& object) const;

  // Embeds every label of one image; column t is the embedding of labels[t].
  Matrix embed_labels(std::span<const Vector> features,
                      std::span<const PairLabel> labels) const;
};

// Train-split predicate ids mapped to dense classifier rows, ascending by id.
class PredicateClasses {
 public:
  PredicateClasses() = default;
  explicit PredicateClasses(std::vector<int> train_ids);
  static PredicateClasses from_manifest(const DatasetManifest& manifest);

  // Throws LeakError for ids outside the training vocabulary.
  std::size_t class_of(int predicate_id) const;
  std::size_t size() const { return ids_.size(); }
  const std::vector<int>& ids() const { return ids_; }

 private:
  std::vector<int> ids_;
};

struct PretrainExample {
  Vector subject;
  Vector object;
  int predicate_id = -1;
};

struct EmbedderGrads {
  Matrix subject_proj;
  Matrix object_proj;
  Matrix classifier;
  Vector classifier_bias;
};

// Mean softmax cross-entropy of classifier * f + bias over the batch. Fills
// `grads` when non-null. Throws LeakError for a non-training predicate.
double pretrain_loss(const EmbedderParams& params, std::span<const PretrainExample> batch,
                     const PredicateClasses& classes, EmbedderGrads* grads);

// One optimizer update on all embedder and classifier weights. Returns the
// batch loss measured before the update.
double pretrain_step(EmbedderParams& params, std::span<const PretrainExample> batch,
                     const PredicateClasses& classes, Adam& optimizer);

// Matched training-split annotations of the manifest as pretraining examples.
std::vector<PretrainExample> collect_pretrain_examples(const DatasetManifest& manifest);

// Sends an embedding-space gradient back into the projection weights.
void accumulate_translation_grad(const EmbedderParams& params, const Vector& subject,
                                 const Vector& object, const Vector& grad_embedding,
                                 EmbedderGrads& grads);

EmbedderGrads zero_grads_like(const EmbedderParams& params);

// Applies `grads` to the projections (and classifier when present) under the
// "embedder.*" slot names.
void apply_embedder_update(EmbedderParams& params, const EmbedderGrads& grads,
                           Adam& optimizer, bool include_classifier);

}  // namespace vrc
