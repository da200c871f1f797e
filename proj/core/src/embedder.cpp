#include "vrc/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vrc/errors.hpp"

namespace vrc {

FeatureLayout layout_of(const DatasetManifest& manifest) {
  return {manifest.appearance_dim, manifest.class_dim};
}

Vector assemble_feature(const Region& region, const FeatureLayout& layout) {
  if (region.appearance.size() != layout.appearance_dim ||
      region.class_scores.size() != layout.class_dim) {
    throw ValidationError("region feature dimensions (" +
                          std::to_string(region.appearance.size()) + ", " +
                          std::to_string(region.class_scores.size()) +
                          ") do not match layout (" +
                          std::to_string(layout.appearance_dim) + ", " +
                          std::to_string(layout.class_dim) + ")");
  }
  Vector x(static_cast<Eigen::Index>(layout.dim()));
  x << region.box.x1, region.box.y1, region.box.x2, region.box.y2,
      Eigen::Map<const Vector>(region.appearance.data(),
                               static_cast<Eigen::Index>(layout.appearance_dim)),
      Eigen::Map<const Vector>(region.class_scores.data(),
                               static_cast<Eigen::Index>(layout.class_dim));
  return x;
}

FeatureParts split_feature(const Vector& feature, const FeatureLayout& layout) {
  if (static_cast<std::size_t>(feature.size()) != layout.dim()) {
    throw ValidationError("feature dimension does not match layout");
  }
  const auto a = static_cast<Eigen::Index>(layout.appearance_dim);
  const auto c = static_cast<Eigen::Index>(layout.class_dim);
  return {feature.head(4), feature.segment(4, a), feature.tail(c)};
}

std::string to_string(EmbeddingKind kind) {
  return kind == EmbeddingKind::kConcat ? "concat" : "translation";
}

EmbeddingKind parse_embedding_kind(const std::string& text) {
  if (text == "translation") return EmbeddingKind::kTranslation;
  if (text == "concat") return EmbeddingKind::kConcat;
  throw ConfigError("unknown embedding '" + text + "' (expected translation or concat)");
}

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double limit,
                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  }
  return m;
}

}  // namespace

EmbedderParams EmbedderParams::initialize(std::size_t feature_dim, std::size_t embed_dim,
                                          std::size_t num_classes, bool shared,
                                          std::uint64_t seed) {
  if (feature_dim == 0 || embed_dim == 0) {
    throw ConfigError("embedder dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  const auto r = static_cast<Eigen::Index>(embed_dim);
  const auto d = static_cast<Eigen::Index>(feature_dim);
  const double in_limit = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  const double head_limit = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  EmbedderParams p;
  p.shared = shared;
  p.subject_proj = uniform_matrix(r, d, in_limit, rng);
  if (!shared) p.object_proj = uniform_matrix(r, d, in_limit, rng);
  p.classifier = uniform_matrix(static_cast<Eigen::Index>(num_classes), r, head_limit, rng);
  p.classifier_bias = Vector::Zero(static_cast<Eigen::Index>(num_classes));
  return p;
}

Vector embed_translation(const EmbedderParams& params, const Vector& subject,
                         const Vector& object) {
  if (static_cast<std::size_t>(subject.size()) != params.feature_dim() ||
      static_cast<std::size_t>(object.size()) != params.feature_dim()) {
    throw ValidationError("translation embedder expects features of dimension " +
                          std::to_string(params.feature_dim()));
  }
  return params.object_weights() * object - params.subject_proj * subject;
}

Vector embed_concat(const Vector& subject, const Vector& object) {
  if (subject.size() != object.size()) {
    throw ValidationError("concat embedder expects equal feature dimensions");
  }
  Vector f(subject.size() + object.size());
  f << subject, object;
  return f;
}

Vector RelationEmbedder::embed(const Vector& subject, const Vector& object) const {
  return kind == EmbeddingKind::kConcat ? embed_concat(subject, object)
                                        : embed_translation(params, subject, object);
}

Matrix RelationEmbedder::embed_labels(std::span<const Vector> features,
                                      std::span<const PairLabel> labels) const {
  const auto n = static_cast<Eigen::Index>(labels.size());
  Matrix out(static_cast<Eigen::Index>(output_dim()), n);
  if (kind == EmbeddingKind::kConcat) {
    for (Eigen::Index t = 0; t < n; ++t) {
      const auto& l = labels[static_cast<std::size_t>(t)];
      out.col(t) = embed_concat(features[l.subject], features[l.object]);
    }
    return out;
  }
  // Project every region once; each label is a difference of two columns.
  Matrix x(static_cast<Eigen::Index>(feature_dim),
           static_cast<Eigen::Index>(features.size()));
  for (std::size_t r = 0; r < features.size(); ++r) {
    if (static_cast<std::size_t>(features[r].size()) != feature_dim) {
      throw ValidationError("region feature dimension mismatch");
    }
    x.col(static_cast<Eigen::Index>(r)) = features[r];
  }
  const Matrix subj = params.subject_proj * x;
  const Matrix obj = params.shared ? subj : Matrix(params.object_proj * x);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& l = labels[static_cast<std::size_t>(t)];
    out.col(t) = obj.col(static_cast<Eigen::Index>(l.object)) -
                 subj.col(static_cast<Eigen::Index>(l.subject));
  }
  return out;
}

PredicateClasses::PredicateClasses(std::vector<int> train_ids) : ids_(std::move(train_ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

PredicateClasses PredicateClasses::from_manifest(const DatasetManifest& manifest) {
  return PredicateClasses(manifest.predicate_ids(Split::kTrain));
}

std::size_t PredicateClasses::class_of(int predicate_id) const {
  const auto it = std::lower_bound(ids_.begin(), ids_.end(), predicate_id);
  if (it == ids_.end() || *it != predicate_id) {
    throw LeakError("predicate " + std::to_string(predicate_id) +
                    " is not a training predicate; refusing to use it as supervision");
  }
  return static_cast<std::size_t>(it - ids_.begin());
}

EmbedderGrads zero_grads_like(const EmbedderParams& params) {
  EmbedderGrads g;
  g.subject_proj = Matrix::Zero(params.subject_proj.rows(), params.subject_proj.cols());
  g.object_proj = Matrix::Zero(params.object_proj.rows(), params.object_proj.cols());
  g.classifier = Matrix::Zero(params.classifier.rows(), params.classifier.cols());
  g.classifier_bias = Vector::Zero(params.classifier_bias.size());
  return g;
}

void accumulate_translation_grad(const EmbedderParams& params, const Vector& subject,
                                 const Vector& object, const Vector& grad_embedding,
                                 EmbedderGrads& grads) {
  if (params.shared) {
    grads.subject_proj.noalias() += grad_embedding * (object - subject).transpose();
  } else {
    grads.object_proj.noalias() += grad_embedding * object.transpose();
    grads.subject_proj.noalias() -= grad_embedding * subject.transpose();
  }
}

double pretrain_loss(const EmbedderParams& params, std::span<const PretrainExample> batch,
                     const PredicateClasses& classes, EmbedderGrads* grads) {
  if (batch.empty()) throw ConfigError("empty pretraining batch");
  if (classes.size() != params.num_classes()) {
    throw ConfigError("classifier has " + std::to_string(params.num_classes()) +
                      " rows but the training vocabulary has " +
                      std::to_string(classes.size()) + " predicates");
  }
  if (grads != nullptr) *grads = zero_grads_like(params);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& ex : batch) {
    const auto target = static_cast<Eigen::Index>(classes.class_of(ex.predicate_id));
    const Vector f = embed_translation(params, ex.subject, ex.object);
    const Vector logits = params.classifier * f + params.classifier_bias;
    const double peak = logits.maxCoeff();
    const Vector shifted = (logits.array() - peak).exp().matrix();
    const double norm = shifted.sum();
    total += std::log(norm) + peak - logits(target);
    if (grads == nullptr) continue;
    Vector dlogits = shifted / norm;
    dlogits(target) -= 1.0;
    dlogits *= inv_n;
    grads->classifier.noalias() += dlogits * f.transpose();
    grads->classifier_bias += dlogits;
    const Vector df = params.classifier.transpose() * dlogits;
    accumulate_translation_grad(params, ex.subject, ex.object, df, *grads);
  }
  return total * inv_n;
}

void apply_embedder_update(EmbedderParams& params, const EmbedderGrads& grads,
                           Adam& optimizer, bool include_classifier) {
  optimizer.update("embedder.W_s", flat(params.subject_proj), flat(grads.subject_proj));
  if (!params.shared) {
    optimizer.update("embedder.W_o", flat(params.object_proj), flat(grads.object_proj));
  }
  if (include_classifier) {
    optimizer.update("embedder.W_p", flat(params.classifier), flat(grads.classifier));
    optimizer.update("embedder.c_p", flat(params.classifier_bias),
                     flat(grads.classifier_bias));
  }
}

double pretrain_step(EmbedderParams& params, std::span<const PretrainExample> batch,
                     const PredicateClasses& classes, Adam& optimizer) {
  EmbedderGrads grads;
  const double loss = pretrain_loss(params, batch, classes, &grads);
  if (!std::isfinite(loss)) throw NumericError("pretraining loss is not finite");
  optimizer.begin_step();
  apply_embedder_update(params, grads, optimizer, /*include_classifier=*/true);
  return loss;
}

std::vector<PretrainExample> collect_pretrain_examples(const DatasetManifest& manifest) {
  const auto layout = layout_of(manifest);
  std::vector<PretrainExample> out;
  for (const auto& image : manifest.images) {
    for (const auto& a : image.annotations) {
      if (!a.matched()) continue;
      const auto* pred = manifest.find_predicate(a.predicate_id);
      if (pred == nullptr || pred->split != Split::kTrain) continue;
      out.push_back({assemble_feature(image.regions[*a.subject_region], layout),
                     assemble_feature(image.regions[*a.object_region], layout),
                     a.predicate_id});
    }
  }
  return out;
}

}  // namespace vrc
