#include <algorithm>

#include "doctest.h"
#include "helpers.hpp"
#include "vrc/errors.hpp"
#include "vrc/metrics.hpp"

using namespace vrc;
using testing::box;

namespace {

RelationshipAnnotation tuple(BBox s, BBox o, int predicate) {
  RelationshipAnnotation a;
  a.subject_box = s;
  a.object_box = o;
  a.predicate_id = predicate;
  return a;
}

BagResult result(std::vector<bool> flags) { return BagResult{0, 0, std::move(flags)}; }

}  // namespace

TEST_CASE("image correctness needs both boxes") {
  const BBox s = box(0.1, 0.1, 0.4, 0.4);
  const BBox o = box(0.5, 0.5, 0.9, 0.9);
  const std::vector<RelationshipAnnotation> gt{tuple(s, o, 3)};
  CHECK(image_correct(s, o, gt, 3));

  // subject exact, object IoU 0.3
  const BBox o_low = box(0.5, 0.5, 0.9, 0.62);
  REQUIRE(iou(o_low, o) == doctest::Approx(0.3));
  CHECK_FALSE(image_correct(s, o_low, gt, 3));

  CHECK_THROWS_AS(image_correct(s, o, gt, 4), MetricError);
}

TEST_CASE("just above one half against one of two tuples") {
  // (0,0,1,1) vs (0,0,0.51,1) overlaps at exactly 0.51
  const BBox full = box(0, 0, 1, 1);
  const BBox part = box(0, 0, 0.51, 1);
  REQUIRE(iou(full, part) == doctest::Approx(0.51));
  const std::vector<RelationshipAnnotation> gt{
      tuple(box(0.6, 0.6, 0.7, 0.7), box(0.8, 0.8, 0.9, 0.9), 1), tuple(part, part, 1)};
  CHECK(image_correct(full, full, gt, 1));

  // exactly one half is not enough
  const BBox half = box(0, 0, 0.5, 1);
  REQUIRE(iou(full, half) == 0.5);
  const std::vector<RelationshipAnnotation> at_half{tuple(half, half, 1)};
  CHECK_FALSE(image_correct(full, full, at_half, 1));
}

TEST_CASE("raising the threshold never helps") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (int t = 0; t < 200; ++t) {
    auto rb = [&] {
      const double x = u(rng), y = u(rng);
      return box(x, y, x + 0.1 + u(rng), y + 0.1 + u(rng));
    };
    const std::vector<RelationshipAnnotation> gt{tuple(rb(), rb(), 0), tuple(rb(), rb(), 0)};
    const BBox s = rb(), o = rb();
    bool prev = true;
    for (double th = 0.0; th <= 1.0; th += 0.05) {
      const bool now = image_correct(s, o, gt, 0, th);
      if (!prev) CHECK_FALSE(now);
      prev = now;
    }
  }
}

TEST_CASE("vr corloc counts images") {
  const std::vector<BagResult> all{result({true, true}), result({true, true})};
  CHECK(vr_corloc(all) == 1.0);
  CHECK(bag_corloc(all) == 1.0);

  const std::vector<BagResult> three_of_eight{result({true, false, false, true}),
                                              result({false, true, false, false})};
  CHECK(vr_corloc(three_of_eight) == 0.375);

  const std::vector<BagResult> none{result({false, false})};
  CHECK(vr_corloc(none) == 0.0);

  CHECK_THROWS_AS(vr_corloc(std::vector<BagResult>{}), MetricError);
  CHECK_THROWS_AS(vr_corloc(std::vector<BagResult>{result({})}), MetricError);
}

TEST_CASE("bag corloc needs every image") {
  const std::vector<BagResult> mixed{result({true, true}), result({true, false})};
  CHECK(bag_corloc(mixed) == 0.5);
  CHECK(vr_corloc(mixed) == 0.75);

  const std::vector<BagResult> each_wrong{result({true, false}), result({false, true})};
  CHECK(bag_corloc(each_wrong) == 0.0);
  CHECK(vr_corloc(each_wrong) == 0.5);
  CHECK_THROWS_AS(bag_corloc(std::vector<BagResult>{}), MetricError);
}

TEST_CASE("metric properties over random outcomes") {
  std::mt19937_64 rng(2);
  std::bernoulli_distribution coin(0.7);
  for (int t = 0; t < 200; ++t) {
    std::vector<BagResult> bags;
    const int n = 1 + t % 9;
    for (int b = 0; b < n; ++b) {
      std::vector<bool> flags(4);
      for (std::size_t k = 0; k < 4; ++k) flags[k] = coin(rng);
      bags.push_back(result(flags));
    }
    const double vr = vr_corloc(bags);
    const double bag = bag_corloc(bags);
    CHECK(bag <= vr);
    CHECK(vr >= 0.0);
    CHECK(vr <= 1.0);
    auto shuffled = bags;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (auto& b : shuffled) {
      std::vector<bool> f = b.image_correct;
      std::reverse(f.begin(), f.end());
      b.image_correct = f;
    }
    CHECK(vr_corloc(shuffled) == vr);
    CHECK(bag_corloc(shuffled) == bag);
  }
}

namespace {

// Two images per bag, one tuple of predicate 0 each, boxes at known spots.
struct EvalFixture {
  DatasetManifest manifest;
  BagList bags;
};

EvalFixture eval_fixture() {
  EvalFixture f;
  f.manifest.appearance_dim = 1;
  f.manifest.class_dim = 1;
  f.manifest.predicates = {{0, "on", Split::kTest}};
  for (int i = 0; i < 4; ++i) {
    ImageRecord image;
    image.image_id = "im" + std::to_string(i);
    Region a = testing::region(box(0.1, 0.1, 0.3, 0.3), 1, 1);
    Region b = testing::region(box(0.6, 0.6, 0.8, 0.8), 1, 1);
    a.class_scores = {1.0};
    b.class_scores = {1.0};
    image.regions = {a, b};
    image.annotations = {tuple(a.box, b.box, 0)};
    f.manifest.images.push_back(image);
  }
  validate(f.manifest);
  f.bags.bags = {Bag{{"im0", "im1"}, 0}, Bag{{"im2", "im3"}, 0}, Bag{{"im0", "im3"}, 0}};
  return f;
}

ImagePrediction predict(const DatasetManifest& m, int image, bool right) {
  const auto& im = m.images[static_cast<std::size_t>(image)];
  const std::size_t s = right ? 0 : 1;
  return {im.image_id, s, 1 - s, im.regions[s].box, im.regions[1 - s].box};
}

}  // namespace

TEST_CASE("evaluate end to end") {
  const auto f = eval_fixture();
  PredictionSet p;
  p.mode = "free";
  p.seed = 3;
  p.bags = {BagPrediction{0, false, "", -1.0, {predict(f.manifest, 0, true), predict(f.manifest, 1, true)}},
            BagPrediction{1, false, "", -1.0, {predict(f.manifest, 2, true), predict(f.manifest, 3, false)}},
            BagPrediction{2, true, "degenerate", 0.0, {}}};
  const auto report = evaluate(p, f.manifest, f.bags);
  CHECK(report.bag_corloc == 0.5);
  CHECK(report.vr_corloc == 0.75);
  CHECK(report.images == 4);
  CHECK(report.correct_images == 3);
  CHECK(report.correct_bags == 1);
  CHECK(report.skipped_bags == std::vector<std::size_t>{2});
  CHECK(report.mode == "free");
  CHECK(parse_report(serialize_report(report)) == report);
  CHECK(summary_table(report, &f.manifest).find("0.7500") != std::string::npos);

  PredictionSet correct = p;
  correct.bags[1].images[1] = predict(f.manifest, 3, true);
  const auto perfect = evaluate(correct, f.manifest, f.bags);
  CHECK(perfect.vr_corloc == 1.0);
  CHECK(perfect.bag_corloc == 1.0);

  PredictionSet empty;
  CHECK_THROWS_AS(evaluate(empty, f.manifest, f.bags), MetricError);

  PredictionSet wrong_image = p;
  wrong_image.bags[0].images[0].image_id = "im2";
  CHECK_THROWS_AS(evaluate(wrong_image, f.manifest, f.bags), MetricError);
}
