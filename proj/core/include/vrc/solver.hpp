#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vrc/datamodel.hpp"
#include "vrc/similarity.hpp"
#include "vrc/tensor.hpp"

namespace vrc {

// Pairwise similarities between the candidate labels of a bag's images. The
// pairwise cost of the labeling objective is the negated similarity.
class PairwisePotentials {
 public:
  virtual ~PairwisePotentials() = default;

  virtual std::size_t num_images() const = 0;
  virtual std::size_t num_labels(std::size_t image) const = 0;
  // Similarity of label i of image u to label j of image v, u != v.
  virtual double similarity(std::size_t u, std::size_t i, std::size_t v,
                            std::size_t j) const = 0;

  // similarity(u,i,v,j) + similarity(v,j,u,i): both ordered terms of an
  // image pair. Used for all pair selections so greedy and exhaustive search
  // compare identical numbers.
  double pair_similarity(std::size_t u, std::size_t i, std::size_t v, std::size_t j) const;

  // Block of pair_similarity over rows (labels of u) x cols (labels of v).
  virtual Matrix pair_similarity_block(std::size_t u, std::span<const std::size_t> rows,
                                       std::size_t v,
                                       std::span<const std::size_t> cols) const;
};

// Explicit similarity tables; table(u, v)(i, j) = similarity(u, i, v, j).
class DensePotentials : public PairwisePotentials {
 public:
  explicit DensePotentials(std::vector<std::size_t> label_counts);

  Matrix& table(std::size_t u, std::size_t v);
  const Matrix& table(std::size_t u, std::size_t v) const;
  // Sets similarity(u,i,v,j) and similarity(v,j,u,i) to value.
  void set_symmetric(std::size_t u, std::size_t i, std::size_t v, std::size_t j, double value);

  std::size_t num_images() const override { return counts_.size(); }
  std::size_t num_labels(std::size_t image) const override { return counts_.at(image); }
  double similarity(std::size_t u, std::size_t i, std::size_t v, std::size_t j) const override;

 private:
  std::vector<std::size_t> counts_;
  std::vector<Matrix> tables_;  // row-major over (u, v)
};

// Potentials from per-image label embeddings (one column per label) and a
// scorer. The relation network is factorized per label so a pair costs
// O(width) exponentials instead of a full matrix product.
class EmbeddingPotentials : public PairwisePotentials {
 public:
  EmbeddingPotentials(std::vector<Matrix> embeddings, Scorer scorer);

  std::size_t num_images() const override { return images_.size(); }
  std::size_t num_labels(std::size_t image) const override;
  double similarity(std::size_t u, std::size_t i, std::size_t v, std::size_t j) const override;
  Matrix pair_similarity_block(std::size_t u, std::span<const std::size_t> rows, std::size_t v,
                               std::span<const std::size_t> cols) const override;

  const Matrix& embeddings(std::size_t image) const { return images_.at(image).embeddings; }
  const Scorer& scorer() const { return scorer_; }

 private:
  struct ImageCache {
    Matrix embeddings;
    Matrix first_tanh;   // W1[:, :d] f + b1, label in the first slot
    Matrix second_tanh;  // W1[:, d:] f
    Matrix first_gate;   // W2[:, :d] f + b2
    Matrix second_gate;  // W2[:, d:] f
    Vector half_readout; // w^T f / 2
    // exp(2 * tanh halves) and exp(-gate halves): a pair's activations are
    // then products, with no exponential per pair.
    Matrix exp_first_tanh;
    Matrix exp_second_tanh;
    Matrix exp_first_gate;
    Matrix exp_second_gate;
    bool factorable = false;
    Matrix unit;         // normalized columns for cosine
  };

  double raw_relation(const ImageCache& a, std::size_t i, const ImageCache& c,
                      std::size_t j) const;

  Scorer scorer_;
  std::vector<ImageCache> images_;
  bool factored_ = false;  // every cache within the overflow-safe range
};

// View of `base` where image u only exposes the labels allowed[u] (indices
// into base, ascending). Similarities refer to positions in allowed[u].
class RestrictedPotentials : public PairwisePotentials {
 public:
  RestrictedPotentials(const PairwisePotentials& base,
                       std::vector<std::vector<std::size_t>> allowed);

  std::size_t num_images() const override { return allowed_.size(); }
  std::size_t num_labels(std::size_t image) const override { return allowed_.at(image).size(); }
  double similarity(std::size_t u, std::size_t i, std::size_t v, std::size_t j) const override;
  Matrix pair_similarity_block(std::size_t u, std::span<const std::size_t> rows, std::size_t v,
                               std::span<const std::size_t> cols) const override;

  std::size_t base_index(std::size_t u, std::size_t i) const { return allowed_[u][i]; }

 private:
  const PairwisePotentials* base_;
  std::vector<std::vector<std::size_t>> allowed_;
};

// One label index per image, in bag order, and its objective value.
struct Labeling {
  std::vector<std::size_t> labels;
  double cost = 0.0;

  bool operator==(const Labeling&) const = default;
};

// Sum over ordered image pairs (u, v), u != v, of -similarity. The unary
// term is constant and omitted. Throws ValidationError on bad indices.
double labeling_cost(const PairwisePotentials& potentials, std::span<const std::size_t> labels);

inline constexpr std::uint64_t kDefaultBruteForceCap = 1'000'000;

// Exact minimizer by enumeration in lexicographic order; the first minimum
// wins ties. Throws CapExceededError when the product of label-set sizes
// exceeds `cap`.
Labeling brute_force(const PairwisePotentials& potentials,
                     std::uint64_t cap = kDefaultBruteForceCap);

struct InferenceConfig {
  ScorerKind scorer = ScorerKind::kRelationSymmetric;
  std::size_t restarts = 4;
  // Labels kept per image before search; 0 disables truncation.
  std::size_t pool_size = 200;
  // Labels sampled from each other image to rank candidates for truncation.
  std::size_t pool_sample = 32;
  std::uint64_t seed = 0;

  void check() const;
};

// Per image, the label indices kept by truncation (all labels when the
// image has at most pool_size of them). Labels are ranked by their mean
// similarity to a seeded sample of labels from the other images.
std::vector<std::vector<std::size_t>> truncate_label_pools(
    const PairwisePotentials& potentials, const InferenceConfig& config);

// Sequential greedy labeling. Each restart fixes an image order (the first
// restart uses bag order, later ones seeded shuffles), picks the best label
// pair of the first two images exhaustively, then adds one image at a time
// with the label minimizing its summed cost to the labels already chosen.
// The cheapest restart wins; ties go to the lexicographically smaller
// labeling.
Labeling greedy_infer(const PairwisePotentials& potentials, const InferenceConfig& config);

// greedy_infer over the truncated pools, mapped back to full label indices.
Labeling infer_free(const PairwisePotentials& potentials, const InferenceConfig& config);

struct SubjectFixedResult {
  std::optional<Labeling> labeling;
  // Images where no region overlapped the given subject box at IoU >= 0.5.
  std::vector<std::size_t> unmatched_images;
};

// Restricts each image to labels whose subject is the region best matching
// the given subject box (IoU >= 0.5), then runs greedy_infer.
SubjectFixedResult infer_subject_fixed(const PairwisePotentials& potentials,
                                       std::span<const std::vector<PairLabel>> labels,
                                       std::span<const std::vector<BBox>> region_boxes,
                                       std::span<const BBox> subject_boxes,
                                       const InferenceConfig& config);

// Clamps image `annotated` to `clamp_label`. The free images are then
// labeled greedily: the first two in processing order jointly (given the
// clamp), the rest one at a time, over `restarts` seeded orders.
Labeling infer_one_annotated(const PairwisePotentials& potentials, std::size_t annotated,
                             std::size_t clamp_label, const InferenceConfig& config);

}  // namespace vrc
