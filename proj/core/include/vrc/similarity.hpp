#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vrc/tensor.hpp"

namespace vrc {

// Relation network over two relationship embeddings of width d:
//   K = tanh(W1 [fi; fj] + b1) * sigmoid(W2 [fi; fj] + b2) + (fi + fj) / 2
//   R = w^T K + b
// with * the elementwise product.
struct RelationNetParams {
  Matrix w1;  // d x 2d
  Matrix w2;  // d x 2d
  Vector b1;
  Vector b2;
  Vector w;
  double b = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(w.size()); }
  // Throws ValidationError on inconsistent shapes or non-finite entries.
  void check() const;

  // Weights uniform in +-1/sqrt(fan_in); biases and b zero.
  static RelationNetParams initialize(std::size_t dim, std::uint64_t seed);
};

Vector gated_combine(const RelationNetParams& params, const Vector& fi, const Vector& fj);
double relation_score(const RelationNetParams& params, const Vector& fi, const Vector& fj);
// (R(fi, fj) + R(fj, fi)) / 2
double symmetric_relation_score(const RelationNetParams& params, const Vector& fi,
                                const Vector& fj);
// Cosine similarity; 0 when either norm is below 1e-12.
double cosine_score(const Vector& fi, const Vector& fj);

enum class ScorerKind { kRelationSymmetric, kRelationRaw, kCosine };

std::string to_string(ScorerKind kind);
ScorerKind parse_scorer_kind(const std::string& text);

// Similarity function used by the labeling objective. Holds the relation
// network by shared pointer so copies stay cheap and read-only.
class Scorer {
 public:
  static Scorer relation(std::shared_ptr<const RelationNetParams> params, bool symmetric);
  static Scorer cosine();

  ScorerKind kind() const { return kind_; }
  const RelationNetParams* params() const { return params_.get(); }
  double score(const Vector& fi, const Vector& fj) const;

 private:
  ScorerKind kind_ = ScorerKind::kCosine;
  std::shared_ptr<const RelationNetParams> params_;
};

// Pairwise cost of the labeling objective: the negated similarity.
double pairwise_cost(const Scorer& scorer, const Vector& fi, const Vector& fj);

struct RelationGrads {
  Matrix w1;
  Matrix w2;
  Vector b1;
  Vector b2;
  Vector w;
  double b = 0.0;
  Vector fi;
  Vector fj;

  static RelationGrads zeros(std::size_t dim);
  // Adds the parameter gradients (not fi/fj) of `other`.
  void accumulate_params(const RelationGrads& other);
};

// Exact gradients of upstream * R(fi, fj).
RelationGrads relation_backward(const RelationNetParams& params, const Vector& fi,
                                const Vector& fj, double upstream);

struct GradCheckConfig {
  std::uint64_t seed = 0;
  std::size_t embed_dim = 16;
  std::size_t feature_dim = 6;
  std::size_t classes = 4;
  std::size_t batch = 3;
  double step = 1e-5;
  // Test hook: scales the analytic gradient of this group by (1 + scale).
  std::string sabotage_group;
  double sabotage_scale = 0.0;
};

struct GradCheckEntry {
  std::string group;
  std::size_t size = 0;
  double max_rel_error = 0.0;

  bool operator==(const GradCheckEntry&) const = default;
};

struct GradCheckReport {
  std::uint64_t seed = 0;
  std::size_t embed_dim = 0;
  std::vector<GradCheckEntry> entries;

  double worst() const;
  bool passed(double tolerance) const { return worst() < tolerance; }
  bool operator==(const GradCheckReport&) const = default;
};

// Compares analytic gradients of the relation network (all parameters and
// both inputs) and of the embedder pretraining loss against central
// differences. Error per group: max |analytic - numeric| divided by the
// group's largest gradient magnitude.
GradCheckReport grad_check(const GradCheckConfig& config);

}  // namespace vrc
