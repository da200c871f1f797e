#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "vrc/checkpoint.hpp"
#include "vrc/errors.hpp"
#include "vrc/synthgen.hpp"
#include "vrc/trainer.hpp"

using namespace vrc;

namespace {

// Image whose annotation k joins regions (2k, 2k+1) with predicates[k].
ImageRecord annotated_image(const std::string& id, const std::vector<int>& predicates,
                            std::mt19937_64& rng) {
  ImageRecord image;
  image.image_id = id;
  const std::size_t regions = 2 * predicates.size() + 2;
  std::normal_distribution<double> normal;
  for (std::size_t r = 0; r < regions; ++r) {
    const double x = 0.08 * static_cast<double>(r);
    Region reg = testing::region(testing::box(x, 0.1, x + 0.05, 0.3), 3, 2, 0.5);
    for (auto& v : reg.appearance) v = normal(rng);
    reg.class_scores = {0.5, 0.5};
    image.regions.push_back(reg);
  }
  for (std::size_t k = 0; k < predicates.size(); ++k) {
    RelationshipAnnotation a;
    a.subject_box = image.regions[2 * k].box;
    a.object_box = image.regions[2 * k + 1].box;
    a.predicate_id = predicates[k];
    a.subject_region = 2 * k;
    a.object_region = 2 * k + 1;
    image.annotations.push_back(a);
  }
  return image;
}

DatasetManifest hand_manifest(const std::vector<std::vector<int>>& per_image) {
  DatasetManifest m;
  m.appearance_dim = 3;
  m.class_dim = 2;
  m.predicates = {{0, "p0", Split::kTrain}, {1, "p1", Split::kTrain}, {2, "p2", Split::kTrain},
                  {3, "t3", Split::kTest}};
  std::mt19937_64 rng(17);
  for (std::size_t i = 0; i < per_image.size(); ++i) {
    m.images.push_back(annotated_image("i" + std::to_string(i), per_image[i], rng));
  }
  validate(m);
  return m;
}

Bag bag_of(const DatasetManifest& m, int predicate) {
  Bag b;
  for (const auto& image : m.images) b.image_ids.push_back(image.image_id);
  b.common_predicate_id = predicate;
  return b;
}

RelationEmbedder embedder_for(const DatasetManifest& m) {
  RelationEmbedder e;
  e.feature_dim = layout_of(m).dim();
  e.params = EmbedderParams::initialize(e.feature_dim, 6, 3, false, 1);
  return e;
}

EpisodeBuild episode(const DatasetManifest& m, const Bag& bag, double ratio,
                     std::size_t background = 0) {
  ImageLookup lookup(m);
  std::mt19937_64 rng(3);
  return build_episode(bag, m, lookup, embedder_for(m), ratio, background, rng);
}

}  // namespace

TEST_CASE("two single-annotation images give two positives") {
  const auto m = hand_manifest({{0}, {0}});
  const auto built = episode(m, bag_of(m, 0), 3.0);
  REQUIRE(built.episode);
  const auto& ep = *built.episode;
  CHECK(ep.pairs.size() == 2);
  CHECK(ep.positives == 2);
  for (const auto& p : ep.pairs) {
    CHECK(p.label == 1);
    CHECK(ep.candidates[p.first].image_slot != ep.candidates[p.second].image_slot);
  }
}

TEST_CASE("mixed predicates follow the positive rule") {
  const auto m = hand_manifest({{0, 1}, {0}});
  const auto built = episode(m, bag_of(m, 0), 10.0);
  REQUIRE(built.episode);
  const auto& ep = *built.episode;
  CHECK(ep.positives == 2);
  CHECK(ep.negatives_before_sampling == 2);
  for (const auto& p : ep.pairs) {
    const auto& a = ep.candidates[p.first];
    const auto& b = ep.candidates[p.second];
    CHECK(a.image_slot != b.image_slot);
    CHECK((p.label == 1) == (a.predicate_id == 0 && b.predicate_id == 0));
  }
}

TEST_CASE("four images with three annotations each") {
  const auto m = hand_manifest({{0, 1, 2}, {0, 1, 2}, {0, 1, 2}, {0, 1, 2}});
  const auto built = episode(m, bag_of(m, 0), 1000.0);
  REQUIRE(built.episode);
  const auto& ep = *built.episode;
  // b (b-1) k^2 ordered cross-image pairs
  CHECK(ep.positives + ep.negatives_before_sampling == 4 * 3 * 9);
  CHECK(ep.pairs.size() == 108);
  CHECK(ep.positives == 12);

  const auto sampled = episode(m, bag_of(m, 0), 3.0);
  CHECK(sampled.episode->pairs.size() == 12 + 36);
  const auto ratio_one = episode(m, bag_of(m, 0), 1.0);
  CHECK(ratio_one.episode->pairs.size() == 24);
}

TEST_CASE("background candidates are unclaimed pairs and never positive") {
  const auto m = hand_manifest({{0, 1}, {0}, {0, 2}});
  const auto built = episode(m, bag_of(m, 0), 1000.0, 5);
  REQUIRE(built.episode);
  const auto& ep = *built.episode;
  std::size_t background = 0;
  for (const auto& c : ep.candidates) {
    if (c.predicate_id != -1) continue;
    ++background;
    CHECK(c.regions.subject != c.regions.object);
    for (const auto& a : m.images[c.image_slot].annotations) {
      CHECK_FALSE((c.regions.subject == *a.subject_region && c.regions.object == *a.object_region));
    }
  }
  CHECK(background == 15);
  for (const auto& p : ep.pairs) {
    if (ep.candidates[p.first].predicate_id == -1 || ep.candidates[p.second].predicate_id == -1) {
      CHECK(p.label == -1);
    }
  }
}

TEST_CASE("hard negatives are the top-scoring ones") {
  const auto m = hand_manifest({{0, 1, 2}, {0, 1}, {0, 2}});
  const auto full = episode(m, bag_of(m, 0), 1e6, 4);
  REQUIRE(full.episode);
  const auto& all = *full.episode;
  std::mt19937_64 prng(5);
  RelationNetParams params = RelationNetParams::initialize(6, 4);
  params.b1 = testing::random_vector(prng, 6);

  auto hard = all;
  std::mt19937_64 rng(1);
  select_negatives(hard, params, 2.0, 1.0, rng);
  const std::size_t cap = 2 * all.positives;
  REQUIRE(hard.pairs.size() == all.positives + cap);
  auto score = [&](const EpisodePair& p) {
    return relation_score(params, all.candidates[p.first].embedding,
                          all.candidates[p.second].embedding);
  };
  std::vector<double> neg_scores;
  for (std::size_t k = all.positives; k < all.pairs.size(); ++k) neg_scores.push_back(score(all.pairs[k]));
  std::sort(neg_scores.rbegin(), neg_scores.rend());
  double kept_min = INFINITY;
  for (std::size_t k = 0; k < hard.pairs.size(); ++k) {
    if (k < all.positives) {
      CHECK(hard.pairs[k].label == 1);
      continue;
    }
    CHECK(hard.pairs[k].label == -1);
    kept_min = std::min(kept_min, score(hard.pairs[k]));
  }
  CHECK(kept_min == neg_scores[cap - 1]);

  auto mixed = all;
  std::mt19937_64 r1(2), r2(2);
  select_negatives(mixed, params, 2.0, 0.5, r1);
  auto again = all;
  select_negatives(again, params, 2.0, 0.5, r2);
  CHECK(mixed.pairs.size() == hard.pairs.size());
  for (std::size_t k = 0; k < mixed.pairs.size(); ++k) {
    CHECK(mixed.pairs[k].first == again.pairs[k].first);
    CHECK(mixed.pairs[k].second == again.pairs[k].second);
  }

  TrainConfig bad;
  bad.hard_negative_share = 1.5;
  CHECK_THROWS_AS(bad.check(), ConfigError);
}

TEST_CASE("episode skips and leaks") {
  const auto m = hand_manifest({{0}, {1}});
  CHECK_FALSE(episode(m, bag_of(m, 0), 3.0).episode);
  CHECK_FALSE(episode(m, bag_of(m, 0), 3.0).skip_reason.empty());
  CHECK_THROWS_AS(episode(m, bag_of(m, 3), 3.0), LeakError);

  // an image carrying only a test predicate has nothing to train on
  const auto t = hand_manifest({{0}, {3}});
  CHECK_FALSE(episode(t, bag_of(t, 0), 3.0).episode);
}

TEST_CASE("logistic loss values and shape") {
  CHECK(logistic_loss(0.0, 1) == doctest::Approx(std::log(2.0)));
  CHECK(logistic_loss(2.0, -1) == doctest::Approx(2.126928).epsilon(1e-6));
  CHECK(logistic_loss(800.0, 1) == 0.0);
  CHECK(logistic_loss(-800.0, 1) == doctest::Approx(800.0));
  CHECK(std::isfinite(logistic_loss(1e6, -1)));
  double prev_pos = logistic_loss(-10.0, 1);
  double prev_neg = logistic_loss(-10.0, -1);
  for (double s = -9.5; s <= 10.0; s += 0.5) {
    const double pos = logistic_loss(s, 1);
    const double neg = logistic_loss(s, -1);
    CHECK(pos >= 0.0);
    CHECK(pos < prev_pos);
    CHECK(neg > prev_neg);
    prev_pos = pos;
    prev_neg = neg;
    for (int y : {1, -1}) {
      const double h = 1e-6;
      const double fd = (logistic_loss(s + h, y) - logistic_loss(s - h, y)) / (2 * h);
      CHECK(logistic_loss_grad(s, y) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("train config checks") {
  TrainConfig c;
  CHECK_NOTHROW(c.check());
  c.adam.learning_rate = -1e-3;
  CHECK_THROWS_AS(c.check(), ConfigError);
  c = TrainConfig{};
  c.negative_ratio = 0.5;
  CHECK_THROWS_AS(c.check(), ConfigError);
}

namespace {

struct World {
  DatasetManifest manifest;
  std::vector<Bag> train_bags;
  std::vector<Bag> test_bags;
};

const World& small_world() {
  static const World w = [] {
    SynthConfig cfg;
    cfg.images = 150;
    cfg.regions_per_image = 8;
    cfg.appearance_dim = 8;
    cfg.class_dim = 4;
    cfg.train_predicates = 6;
    cfg.test_predicates = 2;
    cfg.seed = 5;
    World w;
    w.manifest = generate(cfg);
    w.train_bags = make_bags(w.manifest, BagSpec{Split::kTrain, 4, 400, 1});
    w.test_bags = make_bags(w.manifest, BagSpec{Split::kTest, 4, 10, 2});
    return w;
  }();
  return w;
}

Checkpoint start_model(std::uint64_t seed = 2) {
  ModelConfig mc;
  mc.embed_dim = 16;
  mc.seed = seed;
  PretrainConfig pc;
  pc.steps = 50;
  return pretrain(small_world().manifest, initialize_model(small_world().manifest, mc), pc);
}

}  // namespace

TEST_CASE("zero episodes return the initial model") {
  const auto init = start_model();
  TrainConfig tc;
  tc.episodes = 0;
  const auto out = train(small_world().manifest, small_world().train_bags, init, tc);
  CHECK(same_weights(out, init));
  CHECK(out.episodes_done == 0);
  CHECK(out.loss_history.empty());
}

TEST_CASE("zero learning rate leaves weights unchanged") {
  const auto init = start_model();
  TrainConfig tc;
  tc.episodes = 20;
  tc.adam.learning_rate = 0.0;
  const auto out = train(small_world().manifest, small_world().train_bags, init, tc);
  CHECK(same_weights(out, init));
  CHECK(out.episodes_done == 20);
}

TEST_CASE("training is deterministic") {
  TrainConfig tc;
  tc.episodes = 30;
  const auto a = train(small_world().manifest, small_world().train_bags, start_model(), tc);
  const auto b = train(small_world().manifest, small_world().train_bags, start_model(), tc);
  CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));
  const auto c = train(small_world().manifest, small_world().train_bags, start_model(3), tc);
  CHECK_FALSE(same_weights(a, c));
}

TEST_CASE("resuming reproduces an uninterrupted run") {
  TrainConfig full;
  full.episodes = 40;
  const auto straight = train(small_world().manifest, small_world().train_bags, start_model(), full);

  TrainConfig first = full;
  first.episodes = 17;
  const auto partial = train(small_world().manifest, small_world().train_bags, start_model(), first);
  const auto reloaded = parse_checkpoint(serialize_checkpoint(partial));
  const auto resumed = train(small_world().manifest, small_world().train_bags, reloaded, full);
  CHECK(serialize_checkpoint(resumed) == serialize_checkpoint(straight));
}

TEST_CASE("fine-tuning moves the embedder, frozen training does not") {
  TrainConfig tc;
  tc.episodes = 10;
  const auto init = start_model();
  const auto frozen = train(small_world().manifest, small_world().train_bags, init, tc);
  CHECK(frozen.embedder.params.subject_proj == init.embedder.params.subject_proj);
  tc.freeze_embedder = false;
  const auto tuned = train(small_world().manifest, small_world().train_bags, init, tc);
  CHECK(tuned.embedder.params.subject_proj != init.embedder.params.subject_proj);
  CHECK(tuned.embedder.params.classifier == init.embedder.params.classifier);
}

TEST_CASE("training on a separable world lowers the loss") {
  TrainConfig tc;
  tc.episodes = 300;
  const auto out = train(small_world().manifest, small_world().train_bags, start_model(), tc);
  const auto& h = out.loss_history;
  REQUIRE(h.size() >= 100);
  const double head = std::accumulate(h.begin(), h.begin() + 50, 0.0) / 50;
  const double tail = std::accumulate(h.end() - 50, h.end(), 0.0) / 50;
  CHECK(tail < head);
}

TEST_CASE("test bags are refused by training") {
  TrainConfig tc;
  tc.episodes = 5;
  CHECK_THROWS_AS(train(small_world().manifest, small_world().test_bags, start_model(), tc),
                  LeakError);
}

TEST_CASE("checkpoint round trip keeps scores and optimizer state") {
  TrainConfig tc;
  tc.episodes = 15;
  const auto ck = train(small_world().manifest, small_world().train_bags, start_model(), tc);
  testing::TempDir dir("ckpt");
  save_checkpoint(ck, dir / "c.json");
  const auto back = load_checkpoint(dir / "c.json");
  CHECK(same_weights(back, ck));
  CHECK(back.metric_optimizer == ck.metric_optimizer);
  CHECK(back.pretrain_optimizer == ck.pretrain_optimizer);
  CHECK(back.loss_history == ck.loss_history);
  CHECK(back.config == ck.config);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 5; ++t) {
    const Vector a = testing::random_vector(rng, 16);
    const Vector b = testing::random_vector(rng, 16);
    CHECK(relation_score(back.relation, a, b) == relation_score(ck.relation, a, b));
  }
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(ck));
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto text = serialize_checkpoint(start_model());
  CHECK_THROWS_AS(parse_checkpoint(text.substr(0, text.size() / 2)), ParseError);
  auto bumped = text;
  const auto at = bumped.find("\"schema_version\": 1");
  REQUIRE(at != std::string::npos);
  bumped.replace(at, 19, "\"schema_version\": 7");
  CHECK_THROWS_AS(parse_checkpoint(bumped), VersionError);
  auto reshaped = text;
  const auto dim = reshaped.find("\"embed_dim\": 16");
  REQUIRE(dim != std::string::npos);
  reshaped.replace(dim, 15, "\"embed_dim\": 15");
  CHECK_THROWS_AS(parse_checkpoint(reshaped), ValidationError);
}
