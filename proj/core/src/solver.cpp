#include "vrc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "vrc/errors.hpp"

namespace vrc {

// --- PairwisePotentials -----------------------------------------------------

double PairwisePotentials::pair_similarity(std::size_t u, std::size_t i, std::size_t v,
                                           std::size_t j) const {
  return similarity(u, i, v, j) + similarity(v, j, u, i);
}

Matrix PairwisePotentials::pair_similarity_block(std::size_t u,
                                                 std::span<const std::size_t> rows,
                                                 std::size_t v,
                                                 std::span<const std::size_t> cols) const {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          pair_similarity(u, rows[r], v, cols[c]);
    }
  }
  return out;
}

// --- DensePotentials --------------------------------------------------------

DensePotentials::DensePotentials(std::vector<std::size_t> label_counts)
    : counts_(std::move(label_counts)) {
  const auto n = counts_.size();
  tables_.resize(n * n);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v) continue;
      tables_[u * n + v] = Matrix::Zero(static_cast<Eigen::Index>(counts_[u]),
                                        static_cast<Eigen::Index>(counts_[v]));
    }
  }
}

Matrix& DensePotentials::table(std::size_t u, std::size_t v) {
  if (u == v || u >= counts_.size() || v >= counts_.size()) {
    throw ValidationError("no similarity table for image pair");
  }
  return tables_[u * counts_.size() + v];
}

const Matrix& DensePotentials::table(std::size_t u, std::size_t v) const {
  return const_cast<DensePotentials*>(this)->table(u, v);
}

void DensePotentials::set_symmetric(std::size_t u, std::size_t i, std::size_t v,
                                    std::size_t j, double value) {
  table(u, v)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
  table(v, u)(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = value;
}

double DensePotentials::similarity(std::size_t u, std::size_t i, std::size_t v,
                                   std::size_t j) const {
  return table(u, v)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

// --- EmbeddingPotentials ----------------------------------------------------

namespace {

// tanh(x) * sigmoid(y) from two exponentials.
inline double gated(double x, double y) {
  const double t = 1.0 - 2.0 / (1.0 + std::exp(2.0 * x));
  const double s = 1.0 / (1.0 + std::exp(-y));
  return t * s;
}

// Same quantity for x = a + b, y = c + e given P = exp(2a) * exp(2b) and
// Q = exp(-c) * exp(-e): tanh = (P - 1) / (P + 1), sigmoid = 1 / (1 + Q).
inline double gated_factored(double p, double q) {
  return (p - 1.0) / ((p + 1.0) * (1.0 + q));
}

// Pre-activation halves stay below these so products of two cached
// exponentials cannot overflow.
constexpr double kTanhHalfLimit = 170.0;
constexpr double kGateHalfLimit = 340.0;

bool within(const Matrix& m, double limit) {
  return m.size() == 0 || m.cwiseAbs().maxCoeff() <= limit;
}

}  // namespace

EmbeddingPotentials::EmbeddingPotentials(std::vector<Matrix> embeddings, Scorer scorer)
    : scorer_(std::move(scorer)) {
  images_.reserve(embeddings.size());
  const RelationNetParams* p = scorer_.params();
  for (auto& e : embeddings) {
    ImageCache cache;
    cache.embeddings = std::move(e);
    if (p != nullptr) {
      const auto d = static_cast<Eigen::Index>(p->dim());
      if (cache.embeddings.rows() != d) {
        throw ValidationError("embedding width " + std::to_string(cache.embeddings.rows()) +
                              " does not match relation network width " + std::to_string(d));
      }
      cache.first_tanh = (p->w1.leftCols(d) * cache.embeddings).colwise() + p->b1;
      cache.second_tanh = p->w1.rightCols(d) * cache.embeddings;
      cache.first_gate = (p->w2.leftCols(d) * cache.embeddings).colwise() + p->b2;
      cache.second_gate = p->w2.rightCols(d) * cache.embeddings;
      cache.half_readout = 0.5 * (p->w.transpose() * cache.embeddings).transpose();
      cache.factorable = within(cache.first_tanh, kTanhHalfLimit) &&
                         within(cache.second_tanh, kTanhHalfLimit) &&
                         within(cache.first_gate, kGateHalfLimit) &&
                         within(cache.second_gate, kGateHalfLimit);
      cache.exp_first_tanh = (2.0 * cache.first_tanh.array()).exp().matrix();
      cache.exp_second_tanh = (2.0 * cache.second_tanh.array()).exp().matrix();
      cache.exp_first_gate = (-cache.first_gate.array()).exp().matrix();
      cache.exp_second_gate = (-cache.second_gate.array()).exp().matrix();
    } else {
      cache.unit = cache.embeddings;
      for (Eigen::Index t = 0; t < cache.unit.cols(); ++t) {
        const double n = cache.unit.col(t).norm();
        if (n < 1e-12) {
          cache.unit.col(t).setZero();
        } else {
          cache.unit.col(t) /= n;
        }
      }
    }
    images_.push_back(std::move(cache));
  }
  factored_ = p != nullptr && std::all_of(images_.begin(), images_.end(),
                                          [](const ImageCache& c) { return c.factorable; });
}

std::size_t EmbeddingPotentials::num_labels(std::size_t image) const {
  return static_cast<std::size_t>(images_.at(image).embeddings.cols());
}

double EmbeddingPotentials::raw_relation(const ImageCache& a, std::size_t i,
                                         const ImageCache& c, std::size_t j) const {
  const RelationNetParams& p = *scorer_.params();
  const auto ii = static_cast<Eigen::Index>(i);
  const auto jj = static_cast<Eigen::Index>(j);
  const double* w = p.w.data();
  double acc = 0.0;
  const auto d = static_cast<std::size_t>(p.w.size());
  if (factored_) {
    const double* t1 = a.exp_first_tanh.col(ii).data();
    const double* t2 = c.exp_second_tanh.col(jj).data();
    const double* g1 = a.exp_first_gate.col(ii).data();
    const double* g2 = c.exp_second_gate.col(jj).data();
    for (std::size_t k = 0; k < d; ++k) acc += w[k] * gated_factored(t1[k] * t2[k], g1[k] * g2[k]);
  } else {
    const double* t1 = a.first_tanh.col(ii).data();
    const double* t2 = c.second_tanh.col(jj).data();
    const double* g1 = a.first_gate.col(ii).data();
    const double* g2 = c.second_gate.col(jj).data();
    for (std::size_t k = 0; k < d; ++k) acc += w[k] * gated(t1[k] + t2[k], g1[k] + g2[k]);
  }
  return acc + a.half_readout(ii) + c.half_readout(jj) + p.b;
}

double EmbeddingPotentials::similarity(std::size_t u, std::size_t i, std::size_t v,
                                       std::size_t j) const {
  const auto& a = images_.at(u);
  const auto& c = images_.at(v);
  if (i >= static_cast<std::size_t>(a.embeddings.cols()) ||
      j >= static_cast<std::size_t>(c.embeddings.cols())) {
    throw ValidationError("label index out of range");
  }
  switch (scorer_.kind()) {
    case ScorerKind::kRelationRaw:
      return raw_relation(a, i, c, j);
    case ScorerKind::kRelationSymmetric:
      return 0.5 * (raw_relation(a, i, c, j) + raw_relation(c, j, a, i));
    case ScorerKind::kCosine:
      return a.unit.col(static_cast<Eigen::Index>(i)).dot(c.unit.col(static_cast<Eigen::Index>(j)));
  }
  return 0.0;
}

Matrix EmbeddingPotentials::pair_similarity_block(std::size_t u,
                                                  std::span<const std::size_t> rows,
                                                  std::size_t v,
                                                  std::span<const std::size_t> cols) const {
  if (scorer_.kind() == ScorerKind::kCosine) {
    return PairwisePotentials::pair_similarity_block(u, rows, v, cols);
  }
  const auto& a = images_.at(u);
  const auto& c = images_.at(v);
  const bool symmetric = scorer_.kind() == ScorerKind::kRelationSymmetric;
  const RelationNetParams& p = *scorer_.params();
  const auto d = static_cast<std::size_t>(p.w.size());
  const std::size_t n = cols.size();
  for (const auto j : cols) {
    if (j >= static_cast<std::size_t>(c.embeddings.cols())) {
      throw ValidationError("label index out of range");
    }
  }
  if (!factored_) return PairwisePotentials::pair_similarity_block(u, rows, v, cols);
  // Column-side caches transposed to k-major so the inner loop runs over
  // contiguous labels. Each (row, col) entry accumulates in the same order
  // as raw_relation.
  std::vector<double> c_first_tanh(d * n), c_second_tanh(d * n), c_first_gate(d * n),
      c_second_gate(d * n), c_half(n);
  for (std::size_t q = 0; q < n; ++q) {
    const auto jj = static_cast<Eigen::Index>(cols[q]);
    for (std::size_t k = 0; k < d; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      c_first_tanh[k * n + q] = c.exp_first_tanh(kk, jj);
      c_second_tanh[k * n + q] = c.exp_second_tanh(kk, jj);
      c_first_gate[k * n + q] = c.exp_first_gate(kk, jj);
      c_second_gate[k * n + q] = c.exp_second_gate(kk, jj);
    }
    c_half[q] = c.half_readout(jj);
  }
  std::vector<double> forward(n), backward(n);
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= static_cast<std::size_t>(a.embeddings.cols())) {
      throw ValidationError("label index out of range");
    }
    const auto ii = static_cast<Eigen::Index>(rows[r]);
    std::fill(forward.begin(), forward.end(), 0.0);
    std::fill(backward.begin(), backward.end(), 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const double wk = p.w(kk);
      // forward: label rows[r] in the first slot; backward: cols[q] first.
      const double ft = a.exp_first_tanh(kk, ii);
      const double fg = a.exp_first_gate(kk, ii);
      const double st = a.exp_second_tanh(kk, ii);
      const double sg = a.exp_second_gate(kk, ii);
      const double* ct2 = &c_second_tanh[k * n];
      const double* cg2 = &c_second_gate[k * n];
      const double* ct1 = &c_first_tanh[k * n];
      const double* cg1 = &c_first_gate[k * n];
      for (std::size_t q = 0; q < n; ++q) {
        forward[q] += wk * gated_factored(ft * ct2[q], fg * cg2[q]);
        backward[q] += wk * gated_factored(ct1[q] * st, cg1[q] * sg);
      }
    }
    for (std::size_t q = 0; q < n; ++q) {
      const double fwd = forward[q] + a.half_readout(ii) + c_half[q] + p.b;
      const double bwd = backward[q] + c_half[q] + a.half_readout(ii) + p.b;
      double value;
      if (symmetric) {
        // Same operation sequence as similarity(u,..) + similarity(v,..).
        const double s_uv = 0.5 * (fwd + bwd);
        const double s_vu = 0.5 * (bwd + fwd);
        value = s_uv + s_vu;
      } else {
        value = fwd + bwd;
      }
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q)) = value;
    }
  }
  return out;
}

// --- RestrictedPotentials ---------------------------------------------------

RestrictedPotentials::RestrictedPotentials(const PairwisePotentials& base,
                                           std::vector<std::vector<std::size_t>> allowed)
    : base_(&base), allowed_(std::move(allowed)) {
  if (allowed_.size() != base.num_images()) {
    throw ValidationError("restriction must list allowed labels for every image");
  }
  for (std::size_t u = 0; u < allowed_.size(); ++u) {
    if (allowed_[u].empty()) throw ValidationError("restriction leaves an image without labels");
    for (const auto t : allowed_[u]) {
      if (t >= base.num_labels(u)) throw ValidationError("restricted label out of range");
    }
  }
}

double RestrictedPotentials::similarity(std::size_t u, std::size_t i, std::size_t v,
                                        std::size_t j) const {
  return base_->similarity(u, allowed_.at(u).at(i), v, allowed_.at(v).at(j));
}

Matrix RestrictedPotentials::pair_similarity_block(std::size_t u,
                                                   std::span<const std::size_t> rows,
                                                   std::size_t v,
                                                   std::span<const std::size_t> cols) const {
  std::vector<std::size_t> base_rows(rows.size());
  std::vector<std::size_t> base_cols(cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) base_rows[r] = allowed_.at(u).at(rows[r]);
  for (std::size_t c = 0; c < cols.size(); ++c) base_cols[c] = allowed_.at(v).at(cols[c]);
  return base_->pair_similarity_block(u, base_rows, v, base_cols);
}

// --- objective and exact search ----------------------------------------------

namespace {

void check_labeling(const PairwisePotentials& potentials, std::span<const std::size_t> labels) {
  if (labels.size() != potentials.num_images()) {
    throw ValidationError("labeling has " + std::to_string(labels.size()) +
                          " entries for a bag of " +
                          std::to_string(potentials.num_images()) + " images");
  }
  for (std::size_t u = 0; u < labels.size(); ++u) {
    if (labels[u] >= potentials.num_labels(u)) {
      throw ValidationError("label " + std::to_string(labels[u]) + " out of range for image " +
                            std::to_string(u));
    }
  }
}

std::vector<std::size_t> iota_vector(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

double labeling_cost(const PairwisePotentials& potentials, std::span<const std::size_t> labels) {
  check_labeling(potentials, labels);
  double cost = 0.0;
  for (std::size_t u = 0; u < labels.size(); ++u) {
    for (std::size_t v = 0; v < labels.size(); ++v) {
      if (u != v) cost += -potentials.similarity(u, labels[u], v, labels[v]);
    }
  }
  return cost;
}

Labeling brute_force(const PairwisePotentials& potentials, std::uint64_t cap) {
  const auto n = potentials.num_images();
  if (n == 0) throw ConfigError("brute force over an empty bag");
  double space = 1.0;
  for (std::size_t u = 0; u < n; ++u) space *= static_cast<double>(potentials.num_labels(u));
  if (space > static_cast<double>(cap)) {
    std::string sizes;
    for (std::size_t u = 0; u < n; ++u) {
      sizes += (u ? " x " : "") + std::to_string(potentials.num_labels(u));
    }
    throw CapExceededError("exhaustive search over " + sizes + " = " +
                           std::to_string(static_cast<long double>(space)) +
                           " labelings exceeds the cap of " + std::to_string(cap));
  }
  std::vector<std::size_t> current(n, 0);
  Labeling best{current, labeling_cost(potentials, current)};
  while (true) {
    // Odometer increment; the last image varies fastest.
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++current[pos] < potentials.num_labels(pos)) break;
      current[pos] = 0;
      if (pos == 0) return best;
    }
    const double cost = labeling_cost(potentials, current);
    if (cost < best.cost) best = {current, cost};
  }
}

// --- greedy -----------------------------------------------------------------

void InferenceConfig::check() const {
  if (restarts < 1) throw ConfigError("restart count must be at least 1");
}

namespace {

bool better(const Labeling& a, const Labeling& b) {
  if (a.cost != b.cost) return a.cost < b.cost;
  return a.labels < b.labels;
}

class BlockCache {
 public:
  explicit BlockCache(const PairwisePotentials& p) : p_(p) {}

  // Full pair_similarity block for images a < c.
  const Matrix& get(std::size_t a, std::size_t c) {
    auto key = std::make_pair(a, c);
    auto it = blocks_.find(key);
    if (it == blocks_.end()) {
      const auto rows = iota_vector(p_.num_labels(a));
      const auto cols = iota_vector(p_.num_labels(c));
      it = blocks_.emplace(key, p_.pair_similarity_block(a, rows, c, cols)).first;
    }
    return it->second;
  }

 private:
  const PairwisePotentials& p_;
  std::map<std::pair<std::size_t, std::size_t>, Matrix> blocks_;
};

// Summed -pair_similarity of every label of `image` against the labels
// already assigned in `chosen` (images listed in `assigned`).
Vector cost_against(const PairwisePotentials& p, std::size_t image,
                    const std::vector<std::size_t>& assigned,
                    const std::vector<std::size_t>& chosen) {
  const auto all = iota_vector(p.num_labels(image));
  Vector cost = Vector::Zero(static_cast<Eigen::Index>(all.size()));
  for (const auto s : assigned) {
    const std::size_t row[] = {chosen[s]};
    cost -= p.pair_similarity_block(s, row, image, all).row(0).transpose();
  }
  return cost;
}

std::size_t argmin_lowest(const Vector& v) {
  std::size_t best = 0;
  for (Eigen::Index t = 1; t < v.size(); ++t) {
    if (v(t) < v(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(t);
  }
  return best;
}

// One greedy pass. `fixed` holds images whose labels are already set in
// `labels`; `order` lists the free images in processing order.
Labeling greedy_pass(const PairwisePotentials& p, const std::vector<std::size_t>& order,
                     std::vector<std::size_t> assigned, std::vector<std::size_t> labels,
                     BlockCache& cache) {
  std::size_t next = 0;
  if (order.size() >= 2) {
    const std::size_t a = std::min(order[0], order[1]);
    const std::size_t c = std::max(order[0], order[1]);
    const Matrix& block = cache.get(a, c);
    const Vector fixed_a = cost_against(p, a, assigned, labels);
    const Vector fixed_c = cost_against(p, c, assigned, labels);
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    std::size_t bj = 0;
    // Row-major scan over (a, c) with strict improvement keeps the
    // lexicographically smallest pair among ties.
    for (Eigen::Index i = 0; i < block.rows(); ++i) {
      for (Eigen::Index j = 0; j < block.cols(); ++j) {
        const double cost = -block(i, j) + fixed_a(i) + fixed_c(j);
        if (cost < best) {
          best = cost;
          bi = static_cast<std::size_t>(i);
          bj = static_cast<std::size_t>(j);
        }
      }
    }
    labels[a] = bi;
    labels[c] = bj;
    assigned.push_back(a);
    assigned.push_back(c);
    next = 2;
  }
  for (; next < order.size(); ++next) {
    const std::size_t w = order[next];
    labels[w] = argmin_lowest(cost_against(p, w, assigned, labels));
    assigned.push_back(w);
  }
  return {labels, labeling_cost(p, labels)};
}

Labeling run_restarts(const PairwisePotentials& p, const std::vector<std::size_t>& free_images,
                      const std::vector<std::size_t>& fixed_images,
                      const std::vector<std::size_t>& initial_labels,
                      const InferenceConfig& config) {
  config.check();
  BlockCache cache(p);
  std::mt19937_64 rng(config.seed);
  std::optional<Labeling> best;
  std::vector<std::size_t> order = free_images;
  for (std::size_t r = 0; r < config.restarts; ++r) {
    if (r > 0) std::shuffle(order.begin(), order.end(), rng);
    Labeling result = greedy_pass(p, order, fixed_images, initial_labels, cache);
    if (!best || better(result, *best)) best = std::move(result);
  }
  return *best;
}

}  // namespace

Labeling greedy_infer(const PairwisePotentials& potentials, const InferenceConfig& config) {
  const auto n = potentials.num_images();
  if (n < 2) throw ConfigError("greedy inference needs a bag of at least 2 images");
  for (std::size_t u = 0; u < n; ++u) {
    if (potentials.num_labels(u) == 0) throw ValidationError("image without candidate labels");
  }
  return run_restarts(potentials, iota_vector(n), {}, std::vector<std::size_t>(n, 0), config);
}

std::vector<std::vector<std::size_t>> truncate_label_pools(const PairwisePotentials& potentials,
                                                           const InferenceConfig& config) {
  const auto n = potentials.num_images();
  std::vector<std::vector<std::size_t>> pools(n);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t u = 0; u < n; ++u) {
    const auto count = potentials.num_labels(u);
    pools[u] = iota_vector(count);
    if (config.pool_size == 0 || count <= config.pool_size) continue;
    Vector score = Vector::Zero(static_cast<Eigen::Index>(count));
    std::size_t sampled = 0;
    for (std::size_t v = 0; v < n; ++v) {
      if (v == u) continue;
      auto candidates = iota_vector(potentials.num_labels(v));
      const auto take = std::min(config.pool_sample, candidates.size());
      for (std::size_t k = 0; k < take; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, candidates.size() - 1);
        std::swap(candidates[k], candidates[pick(rng)]);
      }
      candidates.resize(take);
      std::sort(candidates.begin(), candidates.end());
      const Matrix block = potentials.pair_similarity_block(u, pools[u], v, candidates);
      score += 0.5 * block.rowwise().sum();
      sampled += take;
    }
    if (sampled > 0) score /= static_cast<double>(sampled);
    std::vector<std::size_t> ranked = pools[u];
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
      return score(static_cast<Eigen::Index>(a)) > score(static_cast<Eigen::Index>(b));
    });
    ranked.resize(config.pool_size);
    std::sort(ranked.begin(), ranked.end());
    pools[u] = std::move(ranked);
  }
  return pools;
}

namespace {

Labeling map_back(const PairwisePotentials& full, const RestrictedPotentials& view,
                  const Labeling& restricted) {
  Labeling out;
  out.labels.resize(restricted.labels.size());
  for (std::size_t u = 0; u < restricted.labels.size(); ++u) {
    out.labels[u] = view.base_index(u, restricted.labels[u]);
  }
  out.cost = labeling_cost(full, out.labels);
  return out;
}

}  // namespace

Labeling infer_free(const PairwisePotentials& potentials, const InferenceConfig& config) {
  auto pools = truncate_label_pools(potentials, config);
  bool truncated = false;
  for (std::size_t u = 0; u < pools.size(); ++u) {
    truncated = truncated || pools[u].size() != potentials.num_labels(u);
  }
  if (!truncated) return greedy_infer(potentials, config);
  const RestrictedPotentials view(potentials, std::move(pools));
  return map_back(potentials, view, greedy_infer(view, config));
}

SubjectFixedResult infer_subject_fixed(const PairwisePotentials& potentials,
                                       std::span<const std::vector<PairLabel>> labels,
                                       std::span<const std::vector<BBox>> region_boxes,
                                       std::span<const BBox> subject_boxes,
                                       const InferenceConfig& config) {
  const auto n = potentials.num_images();
  if (labels.size() != n || region_boxes.size() != n || subject_boxes.size() != n) {
    throw ValidationError("subject-fixed inference needs labels, regions and a subject box "
                          "for every image");
  }
  SubjectFixedResult result;
  std::vector<std::vector<std::size_t>> allowed(n);
  for (std::size_t u = 0; u < n; ++u) {
    if (labels[u].size() != potentials.num_labels(u)) {
      throw ValidationError("label list does not match potentials");
    }
    std::size_t best_region = 0;
    double best_iou = -1.0;
    for (std::size_t r = 0; r < region_boxes[u].size(); ++r) {
      const double v = iou(region_boxes[u][r], subject_boxes[u]);
      if (v > best_iou) {
        best_iou = v;
        best_region = r;
      }
    }
    if (best_iou < 0.5) {
      result.unmatched_images.push_back(u);
      continue;
    }
    for (std::size_t t = 0; t < labels[u].size(); ++t) {
      if (labels[u][t].subject == best_region) allowed[u].push_back(t);
    }
    if (allowed[u].empty()) result.unmatched_images.push_back(u);
  }
  if (!result.unmatched_images.empty()) return result;
  const RestrictedPotentials view(potentials, std::move(allowed));
  result.labeling = map_back(potentials, view, greedy_infer(view, config));
  return result;
}

Labeling infer_one_annotated(const PairwisePotentials& potentials, std::size_t annotated,
                             std::size_t clamp_label, const InferenceConfig& config) {
  const auto n = potentials.num_images();
  if (n < 2) throw ConfigError("one-annotated inference needs a bag of at least 2 images");
  if (annotated >= n || clamp_label >= potentials.num_labels(annotated)) {
    throw ValidationError("clamped label is not a valid label of the annotated image");
  }
  auto pools = truncate_label_pools(potentials, config);
  pools[annotated] = {clamp_label};
  const RestrictedPotentials view(potentials, std::move(pools));
  std::vector<std::size_t> free_images;
  for (std::size_t u = 0; u < n; ++u) {
    if (u != annotated) free_images.push_back(u);
  }
  std::vector<std::size_t> initial(n, 0);
  const Labeling restricted = run_restarts(view, free_images, {annotated}, initial, config);
  return map_back(potentials, view, restricted);
}

}  // namespace vrc
