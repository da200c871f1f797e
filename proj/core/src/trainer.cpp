#include "vrc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "seeding.hpp"
#include "vrc/errors.hpp"
#include "vrc/similarity.hpp"

namespace vrc {

Checkpoint initialize_model(const DatasetManifest& manifest, const ModelConfig& config) {
  Checkpoint ck;
  ck.layout = layout_of(manifest);
  ck.seed = config.seed;
  ck.train_predicates = manifest.predicate_ids(Split::kTrain);
  if (ck.train_predicates.empty()) throw ConfigError("manifest has no training predicates");
  ck.embedder.kind = config.embedding;
  ck.embedder.feature_dim = ck.layout.dim();
  const std::size_t width =
      config.embedding == EmbeddingKind::kConcat ? 2 * ck.layout.dim() : config.embed_dim;
  if (config.embedding == EmbeddingKind::kTranslation) {
    ck.embedder.params = EmbedderParams::initialize(
        ck.layout.dim(), config.embed_dim, ck.train_predicates.size(),
        config.shared_projection, detail::derive_seed(config.seed, detail::kEmbedderInit, 0));
  }
  ck.relation = RelationNetParams::initialize(
      width, detail::derive_seed(config.seed, detail::kRelationInit, 0));
  ck.config["model.embedding"] = to_string(config.embedding);
  ck.config["model.embed_dim"] = std::to_string(width);
  ck.config["model.shared_projection"] = config.shared_projection ? "true" : "false";
  ck.config["model.seed"] = std::to_string(config.seed);
  return ck;
}

Checkpoint pretrain(const DatasetManifest& manifest, Checkpoint model,
                    const PretrainConfig& config) {
  if (model.embedder.kind == EmbeddingKind::kConcat || config.steps == 0) return model;
  if (config.batch_size == 0) throw ConfigError("pretraining batch size must be positive");
  const PredicateClasses classes(model.train_predicates);
  const auto examples = collect_pretrain_examples(manifest);
  if (examples.empty()) throw ConfigError("no matched training annotations to pretrain on");

  Adam optimizer(config.adam);
  optimizer.restore(model.pretrain_optimizer.step(), model.pretrain_optimizer.slots());
  std::vector<std::size_t> index(examples.size());
  std::vector<PretrainExample> batch;
  const std::size_t take = std::min(config.batch_size, examples.size());
  for (std::size_t s = 0; s < config.steps; ++s) {
    const auto step = static_cast<std::uint64_t>(model.pretrain_steps);
    std::mt19937_64 rng(detail::derive_seed(model.seed, detail::kPretrainBatch, step));
    std::iota(index.begin(), index.end(), std::size_t{0});
    batch.clear();
    for (std::size_t k = 0; k < take; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, index.size() - 1);
      std::swap(index[k], index[pick(rng)]);
      batch.push_back(examples[index[k]]);
    }
    const double loss = pretrain_step(model.embedder.params, batch, classes, optimizer);
    model.pretrain_loss_history.push_back(loss);
    ++model.pretrain_steps;
  }
  model.pretrain_optimizer = optimizer;
  model.config["pretrain.steps"] = std::to_string(model.pretrain_steps);
  model.config["pretrain.batch_size"] = std::to_string(config.batch_size);
  std::ostringstream lr;
  lr << config.adam.learning_rate;
  model.config["pretrain.learning_rate"] = lr.str();
  return model;
}

EpisodeBuild build_episode(const Bag& bag, const DatasetManifest& manifest,
                           const ImageLookup& lookup, const RelationEmbedder& embedder,
                           double negative_ratio, std::size_t background_per_image,
                           std::mt19937_64& rng) {
  const auto* common = manifest.find_predicate(bag.common_predicate_id);
  if (common == nullptr || common->split != Split::kTrain) {
    throw LeakError("bag with predicate " + std::to_string(bag.common_predicate_id) +
                    " is not a training bag");
  }
  const auto layout = layout_of(manifest);
  EpisodeBuild result;
  Episode ep;
  std::vector<std::size_t> pool;
  for (std::size_t slot = 0; slot < bag.image_ids.size(); ++slot) {
    const auto& image = lookup.at(bag.image_ids[slot]);
    std::vector<Vector> features;
    auto feature = [&](std::size_t r) -> const Vector& {
      if (features.empty()) {
        for (const auto& region : image.regions) features.push_back(assemble_feature(region, layout));
      }
      return features[r];
    };
    std::vector<PairLabel> claimed;
    std::size_t found = 0;
    for (const auto& a : image.annotations) {
      if (!a.matched()) continue;
      const auto* pred = manifest.find_predicate(a.predicate_id);
      // Test-split relationships never enter training, not even as negatives.
      if (pred == nullptr || pred->split != Split::kTrain) continue;
      EpisodeCandidate c;
      c.image_slot = slot;
      c.predicate_id = a.predicate_id;
      c.regions = {*a.subject_region, *a.object_region};
      c.subject_feature = feature(c.regions.subject);
      c.object_feature = feature(c.regions.object);
      c.embedding = embedder.embed(c.subject_feature, c.object_feature);
      claimed.push_back(c.regions);
      ep.candidates.push_back(std::move(c));
      ++found;
    }
    if (found == 0) {
      result.skip_reason = "image '" + image.image_id + "' has no matched training annotation";
      return result;
    }
    if (background_per_image == 0) continue;
    const std::size_t p = image.regions.size();
    std::sort(claimed.begin(), claimed.end());
    pool.clear();
    for (std::size_t k = 0; k < p * (p - 1); ++k) {
      const std::size_t s = k / (p - 1);
      const std::size_t r = k % (p - 1);
      const PairLabel l{s, r < s ? r : r + 1};
      if (!std::binary_search(claimed.begin(), claimed.end(), l)) pool.push_back(k);
    }
    const std::size_t take = std::min(background_per_image, pool.size());
    for (std::size_t k = 0; k < take; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
      const std::size_t s = pool[k] / (p - 1);
      const std::size_t r = pool[k] % (p - 1);
      EpisodeCandidate c;
      c.image_slot = slot;
      c.regions = {s, r < s ? r : r + 1};
      c.subject_feature = feature(c.regions.subject);
      c.object_feature = feature(c.regions.object);
      c.embedding = embedder.embed(c.subject_feature, c.object_feature);
      ep.candidates.push_back(std::move(c));
    }
  }

  std::vector<EpisodePair> positives;
  std::vector<EpisodePair> negatives;
  for (std::size_t i = 0; i < ep.candidates.size(); ++i) {
    for (std::size_t j = 0; j < ep.candidates.size(); ++j) {
      const auto& a = ep.candidates[i];
      const auto& b = ep.candidates[j];
      if (a.image_slot == b.image_slot) continue;
      const bool positive = a.predicate_id == bag.common_predicate_id &&
                            b.predicate_id == bag.common_predicate_id;
      (positive ? positives : negatives).push_back({i, j, positive ? 1 : -1});
    }
  }
  if (positives.empty()) {
    result.skip_reason = "no cross-image pair shares the common predicate";
    return result;
  }
  ep.positives = positives.size();
  ep.negatives_before_sampling = negatives.size();
  const auto cap = static_cast<std::size_t>(
      std::floor(negative_ratio * static_cast<double>(positives.size())));
  if (negatives.size() > cap) {
    std::vector<std::size_t> idx(negatives.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t k = 0; k < cap; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
      std::swap(idx[k], idx[pick(rng)]);
    }
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    std::vector<EpisodePair> kept;
    kept.reserve(cap);
    for (const auto k : idx) kept.push_back(negatives[k]);
    negatives = std::move(kept);
  }
  ep.pairs = std::move(positives);
  ep.pairs.insert(ep.pairs.end(), negatives.begin(), negatives.end());
  result.episode = std::move(ep);
  return result;
}

double logistic_loss(double score, int label) {
  const double z = -static_cast<double>(label) * score;
  // softplus(z) = max(z, 0) + log1p(exp(-|z|))
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double logistic_loss_grad(double score, int label) {
  const double y = static_cast<double>(label);
  const double z = -y * score;
  // -y * sigmoid(z)
  const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return -y * sig;
}

void TrainConfig::check() const {
  if (!(adam.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(negative_ratio >= 1.0)) throw ConfigError("negative ratio must be at least 1");
  if (!(hard_negative_share >= 0.0 && hard_negative_share <= 1.0)) {
    throw ConfigError("hard negative share must lie in [0, 1]");
  }
}

void select_negatives(Episode& episode, const RelationNetParams& params, double negative_ratio,
                      double hard_share, std::mt19937_64& rng) {
  const std::size_t pos = episode.positives;
  const std::size_t neg = episode.pairs.size() - pos;
  const auto cap = static_cast<std::size_t>(
      std::floor(negative_ratio * static_cast<double>(pos)));
  if (neg <= cap) return;
  const auto hard = std::min(
      cap, static_cast<std::size_t>(std::floor(hard_share * static_cast<double>(cap))));
  std::vector<std::size_t> idx(neg);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (hard > 0) {
    std::vector<double> score(neg);
    for (std::size_t k = 0; k < neg; ++k) {
      const auto& p = episode.pairs[pos + k];
      score[k] = relation_score(params, episode.candidates[p.first].embedding,
                                episode.candidates[p.second].embedding);
    }
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(hard), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        return score[a] > score[b] || (score[a] == score[b] && a < b);
                      });
    std::sort(idx.begin() + static_cast<std::ptrdiff_t>(hard), idx.end());
  }
  for (std::size_t k = hard; k < cap; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
    std::swap(idx[k], idx[pick(rng)]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<EpisodePair> kept(episode.pairs.begin(),
                                episode.pairs.begin() + static_cast<std::ptrdiff_t>(pos));
  for (const auto k : idx) kept.push_back(episode.pairs[pos + k]);
  episode.pairs = std::move(kept);
}

double episode_loss(const RelationNetParams& params, const Episode& episode) {
  double total = 0.0;
  for (const auto& pair : episode.pairs) {
    const double s = relation_score(params, episode.candidates[pair.first].embedding,
                                    episode.candidates[pair.second].embedding);
    total += logistic_loss(s, pair.label);
  }
  return episode.pairs.empty() ? 0.0 : total / static_cast<double>(episode.pairs.size());
}

namespace {

constexpr double kKeepAllNegatives = 1e12;

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::uint64_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(detail::derive_seed(seed, detail::kEpisodeOrder, epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void apply_relation_update(RelationNetParams& p, RelationGrads& g, Adam& optimizer) {
  optimizer.update("relation.W1", flat(p.w1), flat(g.w1));
  optimizer.update("relation.W2", flat(p.w2), flat(g.w2));
  optimizer.update("relation.b1", flat(p.b1), flat(g.b1));
  optimizer.update("relation.b2", flat(p.b2), flat(g.b2));
  optimizer.update("relation.w", flat(p.w), flat(g.w));
  optimizer.update("relation.b", std::span<double>(&p.b, 1), std::span<const double>(&g.b, 1));
}

}  // namespace

Checkpoint train(const DatasetManifest& manifest, std::span<const Bag> bags, Checkpoint start,
                 const TrainConfig& config,
                 const std::function<void(const EpisodeLog&)>& on_episode) {
  config.check();
  for (const auto& bag : bags) {
    const auto* pred = manifest.find_predicate(bag.common_predicate_id);
    if (pred == nullptr || pred->split != Split::kTrain) {
      throw LeakError("training bags include predicate " +
                      std::to_string(bag.common_predicate_id) +
                      ", which is not a training predicate");
    }
  }
  if (start.layout != layout_of(manifest)) {
    throw ValidationError("checkpoint feature layout does not match the manifest");
  }
  const auto total = static_cast<std::int64_t>(config.episodes);
  if (start.episodes_done >= total || bags.empty()) return start;

  Checkpoint ck = std::move(start);
  const ImageLookup lookup(manifest);
  Adam optimizer(config.adam);
  optimizer.restore(ck.metric_optimizer.step(), ck.metric_optimizer.slots());
  const bool tune_embedder =
      !config.freeze_embedder && ck.embedder.kind == EmbeddingKind::kTranslation;

  std::uint64_t cached_epoch = ~std::uint64_t{0};
  std::vector<std::size_t> order;
  for (std::int64_t e = ck.episodes_done; e < total; ++e) {
    const auto clock = std::chrono::steady_clock::now();
    const auto episode = static_cast<std::uint64_t>(e);
    const std::uint64_t epoch = episode / bags.size();
    if (epoch != cached_epoch) {
      order = epoch_order(ck.seed, epoch, bags.size());
      cached_epoch = epoch;
    }
    const Bag& bag = bags[order[episode % bags.size()]];
    std::mt19937_64 rng(detail::derive_seed(ck.seed, detail::kEpisodeSampling, episode));
    // With mining, the full negative pool is kept until the network has
    // scored it.
    const bool mine = config.hard_negative_share > 0.0;
    auto built = build_episode(bag, manifest, lookup, ck.embedder,
                               mine ? kKeepAllNegatives : config.negative_ratio,
                               config.background_per_image, rng);
    if (built.episode && mine) {
      select_negatives(*built.episode, ck.relation, config.negative_ratio,
                       config.hard_negative_share, rng);
    }
    ck.episodes_done = e + 1;
    if (!built.episode) {
      ++ck.episodes_skipped;
      if (on_episode) on_episode({e, 0.0, true, 0.0});
      continue;
    }
    const Episode& ep = *built.episode;
    const double inv_n = 1.0 / static_cast<double>(ep.pairs.size());
    RelationGrads grads = RelationGrads::zeros(ck.relation.dim());
    EmbedderGrads embed_grads;
    if (tune_embedder) embed_grads = zero_grads_like(ck.embedder.params);
    double loss = 0.0;
    for (const auto& pair : ep.pairs) {
      const auto& a = ep.candidates[pair.first];
      const auto& b = ep.candidates[pair.second];
      const double score = relation_score(ck.relation, a.embedding, b.embedding);
      loss += logistic_loss(score, pair.label);
      const double upstream = logistic_loss_grad(score, pair.label) * inv_n;
      const RelationGrads g = relation_backward(ck.relation, a.embedding, b.embedding, upstream);
      grads.accumulate_params(g);
      if (tune_embedder) {
        accumulate_translation_grad(ck.embedder.params, a.subject_feature, a.object_feature,
                                    g.fi, embed_grads);
        accumulate_translation_grad(ck.embedder.params, b.subject_feature, b.object_feature,
                                    g.fj, embed_grads);
      }
    }
    loss *= inv_n;
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite training loss at episode " + std::to_string(e) + " (" +
                         std::to_string(ep.pairs.size()) + " pairs, " +
                         std::to_string(ep.positives) + " positive)");
    }
    optimizer.begin_step();
    apply_relation_update(ck.relation, grads, optimizer);
    if (tune_embedder) {
      apply_embedder_update(ck.embedder.params, embed_grads, optimizer,
                            /*include_classifier=*/false);
    }
    ck.loss_history.push_back(loss);
    if (on_episode) {
      const std::chrono::duration<double> took = std::chrono::steady_clock::now() - clock;
      on_episode({e, loss, false, took.count()});
    }
  }
  ck.metric_optimizer = optimizer;
  ck.config["train.episodes"] = std::to_string(config.episodes);
  std::ostringstream hyper;
  hyper << config.adam.learning_rate;
  ck.config["train.learning_rate"] = hyper.str();
  hyper.str("");
  hyper << config.negative_ratio;
  ck.config["train.negative_ratio"] = hyper.str();
  ck.config["train.background_per_image"] = std::to_string(config.background_per_image);
  hyper.str("");
  hyper << config.hard_negative_share;
  ck.config["train.hard_negative_share"] = hyper.str();
  ck.config["train.freeze_embedder"] = config.freeze_embedder ? "true" : "false";
  return ck;
}

}  // namespace vrc
