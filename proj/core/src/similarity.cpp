#include "vrc/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "vrc/embedder.hpp"
#include "vrc/errors.hpp"

namespace vrc {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector stack(const Vector& fi, const Vector& fj) {
  Vector c(fi.size() + fj.size());
  c << fi, fj;
  return c;
}

void check_inputs(const RelationNetParams& params, const Vector& fi, const Vector& fj) {
  const auto d = static_cast<Eigen::Index>(params.dim());
  if (fi.size() != d || fj.size() != d) {
    throw ValidationError("relation network of width " + std::to_string(d) +
                          " got embeddings of width " + std::to_string(fi.size()) +
                          " and " + std::to_string(fj.size()));
  }
}

struct Forward {
  Vector input;  // [fi; fj]
  Vector gate_tanh;
  Vector gate_sigmoid;
  Vector combined;  // K
  double score = 0.0;
};

Forward forward(const RelationNetParams& p, const Vector& fi, const Vector& fj) {
  check_inputs(p, fi, fj);
  Forward out;
  out.input = stack(fi, fj);
  out.gate_tanh = (p.w1 * out.input + p.b1).array().tanh().matrix();
  out.gate_sigmoid = (p.w2 * out.input + p.b2).unaryExpr(&sigmoid);
  out.combined = out.gate_tanh.cwiseProduct(out.gate_sigmoid) + 0.5 * (fi + fj);
  out.score = p.w.dot(out.combined) + p.b;
  return out;
}

}  // namespace

void RelationNetParams::check() const {
  const auto d = w.size();
  if (d < 1) throw ValidationError("relation network width must be at least 1");
  if (w1.rows() != d || w1.cols() != 2 * d || w2.rows() != d || w2.cols() != 2 * d ||
      b1.size() != d || b2.size() != d) {
    throw ValidationError("relation network tensors have inconsistent shapes");
  }
  if (!w1.allFinite() || !w2.allFinite() || !b1.allFinite() || !b2.allFinite() ||
      !w.allFinite() || !std::isfinite(b)) {
    throw ValidationError("relation network has non-finite weights");
  }
}

RelationNetParams RelationNetParams::initialize(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ConfigError("relation network width must be positive");
  std::mt19937_64 rng(seed);
  const auto d = static_cast<Eigen::Index>(dim);
  const double in_limit = 1.0 / std::sqrt(2.0 * static_cast<double>(dim));
  const double out_limit = 1.0 / std::sqrt(static_cast<double>(dim));
  auto fill = [&rng](Eigen::Index rows, Eigen::Index cols, double limit) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
    }
    return m;
  };
  RelationNetParams p;
  p.w1 = fill(d, 2 * d, in_limit);
  p.w2 = fill(d, 2 * d, in_limit);
  p.w = fill(d, 1, out_limit);
  p.b1 = Vector::Zero(d);
  p.b2 = Vector::Zero(d);
  p.b = 0.0;
  return p;
}

Vector gated_combine(const RelationNetParams& params, const Vector& fi, const Vector& fj) {
  return forward(params, fi, fj).combined;
}

double relation_score(const RelationNetParams& params, const Vector& fi, const Vector& fj) {
  return forward(params, fi, fj).score;
}

double symmetric_relation_score(const RelationNetParams& params, const Vector& fi,
                                const Vector& fj) {
  return 0.5 * (relation_score(params, fi, fj) + relation_score(params, fj, fi));
}

double cosine_score(const Vector& fi, const Vector& fj) {
  if (fi.size() != fj.size()) throw ValidationError("cosine of vectors of unequal width");
  const double ni = fi.norm();
  const double nj = fj.norm();
  if (ni < 1e-12 || nj < 1e-12) return 0.0;
  return std::clamp(fi.dot(fj) / (ni * nj), -1.0, 1.0);
}

std::string to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::kRelationSymmetric:
      return "relation";
    case ScorerKind::kRelationRaw:
      return "relation-raw";
    case ScorerKind::kCosine:
      return "cosine";
  }
  return "unknown";
}

ScorerKind parse_scorer_kind(const std::string& text) {
  if (text == "relation") return ScorerKind::kRelationSymmetric;
  if (text == "relation-raw") return ScorerKind::kRelationRaw;
  if (text == "cosine") return ScorerKind::kCosine;
  throw ConfigError("unknown scorer '" + text +
                    "' (expected relation, relation-raw or cosine)");
}

Scorer Scorer::relation(std::shared_ptr<const RelationNetParams> params, bool symmetric) {
  if (!params) throw ConfigError("relation scorer needs parameters");
  params->check();
  Scorer s;
  s.kind_ = symmetric ? ScorerKind::kRelationSymmetric : ScorerKind::kRelationRaw;
  s.params_ = std::move(params);
  return s;
}

Scorer Scorer::cosine() { return Scorer{}; }

double Scorer::score(const Vector& fi, const Vector& fj) const {
  switch (kind_) {
    case ScorerKind::kRelationSymmetric:
      return symmetric_relation_score(*params_, fi, fj);
    case ScorerKind::kRelationRaw:
      return relation_score(*params_, fi, fj);
    case ScorerKind::kCosine:
      return cosine_score(fi, fj);
  }
  return 0.0;
}

double pairwise_cost(const Scorer& scorer, const Vector& fi, const Vector& fj) {
  return -scorer.score(fi, fj);
}

RelationGrads RelationGrads::zeros(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  RelationGrads g;
  g.w1 = Matrix::Zero(d, 2 * d);
  g.w2 = Matrix::Zero(d, 2 * d);
  g.b1 = Vector::Zero(d);
  g.b2 = Vector::Zero(d);
  g.w = Vector::Zero(d);
  g.b = 0.0;
  g.fi = Vector::Zero(d);
  g.fj = Vector::Zero(d);
  return g;
}

void RelationGrads::accumulate_params(const RelationGrads& other) {
  w1 += other.w1;
  w2 += other.w2;
  b1 += other.b1;
  b2 += other.b2;
  w += other.w;
  b += other.b;
}

RelationGrads relation_backward(const RelationNetParams& params, const Vector& fi,
                                const Vector& fj, double upstream) {
  const Forward fw = forward(params, fi, fj);
  const auto d = static_cast<Eigen::Index>(params.dim());
  RelationGrads g;
  g.w = upstream * fw.combined;
  g.b = upstream;
  const Vector d_combined = upstream * params.w;
  const Vector d_pre1 = d_combined.cwiseProduct(fw.gate_sigmoid)
                            .cwiseProduct((1.0 - fw.gate_tanh.array().square()).matrix());
  const Vector d_pre2 =
      d_combined.cwiseProduct(fw.gate_tanh)
          .cwiseProduct((fw.gate_sigmoid.array() * (1.0 - fw.gate_sigmoid.array())).matrix());
  g.w1 = d_pre1 * fw.input.transpose();
  g.b1 = d_pre1;
  g.w2 = d_pre2 * fw.input.transpose();
  g.b2 = d_pre2;
  const Vector d_input = params.w1.transpose() * d_pre1 + params.w2.transpose() * d_pre2;
  g.fi = d_input.head(d) + 0.5 * d_combined;
  g.fj = d_input.tail(d) + 0.5 * d_combined;
  return g;
}

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.max_rel_error);
  return w;
}

namespace {

// Central differences of `loss` with respect to every entry of `param`.
std::vector<double> numeric_gradient(std::span<double> param, double h,
                                     const std::function<double()>& loss) {
  std::vector<double> out(param.size());
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double saved = param[i];
    param[i] = saved + h;
    const double up = loss();
    param[i] = saved - h;
    const double down = loss();
    param[i] = saved;
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

GradCheckEntry compare(std::string group, std::span<const double> analytic,
                       const std::vector<double>& numeric, const GradCheckConfig& cfg) {
  const double sabotage = cfg.sabotage_group == group ? 1.0 + cfg.sabotage_scale : 1.0;
  double scale = 0.0;
  double diff = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i] * sabotage;
    scale = std::max({scale, std::abs(a), std::abs(numeric[i])});
    diff = std::max(diff, std::abs(a - numeric[i]));
  }
  const double rel = scale > 0.0 ? diff / scale : 0.0;
  return {std::move(group), analytic.size(), rel};
}

Vector gaussian_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

}  // namespace

GradCheckReport grad_check(const GradCheckConfig& cfg) {
  GradCheckReport report;
  report.seed = cfg.seed;
  report.embed_dim = cfg.embed_dim;
  std::mt19937_64 rng(cfg.seed);
  const auto d = static_cast<Eigen::Index>(cfg.embed_dim);
  const double h = cfg.step;

  // Relation network: random weights with non-zero biases, random inputs.
  RelationNetParams p = RelationNetParams::initialize(cfg.embed_dim, rng());
  p.b1 = 0.3 * gaussian_vector(d, rng);
  p.b2 = 0.3 * gaussian_vector(d, rng);
  p.b = 0.3 * gaussian_vector(1, rng)(0);
  Vector fi = gaussian_vector(d, rng);
  Vector fj = gaussian_vector(d, rng);
  const RelationGrads g = relation_backward(p, fi, fj, 1.0);
  auto score = [&] { return relation_score(p, fi, fj); };
  std::span<double> b_view(&p.b, 1);
  report.entries.push_back(
      compare("relation.W1", flat(g.w1), numeric_gradient(flat(p.w1), h, score), cfg));
  report.entries.push_back(
      compare("relation.W2", flat(g.w2), numeric_gradient(flat(p.w2), h, score), cfg));
  report.entries.push_back(
      compare("relation.b1", flat(g.b1), numeric_gradient(flat(p.b1), h, score), cfg));
  report.entries.push_back(
      compare("relation.b2", flat(g.b2), numeric_gradient(flat(p.b2), h, score), cfg));
  report.entries.push_back(
      compare("relation.w", flat(g.w), numeric_gradient(flat(p.w), h, score), cfg));
  report.entries.push_back(compare("relation.b", std::span<const double>(&g.b, 1),
                                   numeric_gradient(b_view, h, score), cfg));
  report.entries.push_back(
      compare("relation.f_i", flat(g.fi), numeric_gradient(flat(fi), h, score), cfg));
  report.entries.push_back(
      compare("relation.f_j", flat(g.fj), numeric_gradient(flat(fj), h, score), cfg));

  // Embedder pretraining loss, separate projections.
  EmbedderParams e = EmbedderParams::initialize(cfg.feature_dim, cfg.embed_dim, cfg.classes,
                                                /*shared=*/false, rng());
  e.classifier_bias = 0.3 * gaussian_vector(static_cast<Eigen::Index>(cfg.classes), rng);
  std::vector<int> ids;
  for (std::size_t c = 0; c < cfg.classes; ++c) ids.push_back(static_cast<int>(c));
  const PredicateClasses classes(ids);
  std::vector<PretrainExample> batch;
  for (std::size_t n = 0; n < cfg.batch; ++n) {
    batch.push_back({gaussian_vector(static_cast<Eigen::Index>(cfg.feature_dim), rng),
                     gaussian_vector(static_cast<Eigen::Index>(cfg.feature_dim), rng),
                     static_cast<int>(n % cfg.classes)});
  }
  EmbedderGrads eg;
  pretrain_loss(e, batch, classes, &eg);
  auto loss = [&] { return pretrain_loss(e, batch, classes, nullptr); };
  report.entries.push_back(compare("embedder.W_s", flat(eg.subject_proj),
                                   numeric_gradient(flat(e.subject_proj), h, loss), cfg));
  report.entries.push_back(compare("embedder.W_o", flat(eg.object_proj),
                                   numeric_gradient(flat(e.object_proj), h, loss), cfg));
  report.entries.push_back(compare("embedder.W_p", flat(eg.classifier),
                                   numeric_gradient(flat(e.classifier), h, loss), cfg));
  report.entries.push_back(compare("embedder.c_p", flat(eg.classifier_bias),
                                   numeric_gradient(flat(e.classifier_bias), h, loss), cfg));

  // Shared projection routes both gradient terms into one matrix.
  EmbedderParams es = EmbedderParams::initialize(cfg.feature_dim, cfg.embed_dim,
                                                 cfg.classes, /*shared=*/true, rng());
  EmbedderGrads esg;
  pretrain_loss(es, batch, classes, &esg);
  auto shared_loss = [&] { return pretrain_loss(es, batch, classes, nullptr); };
  report.entries.push_back(
      compare("embedder.W_shared", flat(esg.subject_proj),
              numeric_gradient(flat(es.subject_proj), h, shared_loss), cfg));
  return report;
}

}  // namespace vrc
