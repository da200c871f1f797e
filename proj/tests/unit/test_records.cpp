#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "vrc/errors.hpp"
#include "vrc/predictions.hpp"
#include "vrc/records.hpp"
#include "vrc/synthgen.hpp"

using namespace vrc;
using nlohmann::json;

namespace {

DatasetManifest small_world() {
  SynthConfig cfg;
  cfg.images = 12;
  cfg.regions_per_image = 6;
  cfg.appearance_dim = 5;
  cfg.class_dim = 3;
  cfg.seed = 21;
  return generate(cfg);
}

}  // namespace

TEST_CASE("manifest round trip is lossless") {
  const auto m = small_world();
  testing::TempDir dir("records");
  save_manifest(m, dir / "m.json");
  const auto back = load_manifest(dir / "m.json");
  CHECK(back == m);
  CHECK(serialize_manifest(back) == serialize_manifest(m));
}

TEST_CASE("manifest parse errors") {
  const auto text = serialize_manifest(small_world());
  CHECK_THROWS_AS(parse_manifest("{not json"), ParseError);
  CHECK_THROWS_AS(parse_manifest("{\"format\": \"vrc-manifest\"}"), ParseError);

  auto doc = json::parse(text);
  doc["schema_version"] = 99;
  CHECK_THROWS_AS(parse_manifest(doc.dump()), VersionError);

  doc = json::parse(text);
  doc["format"] = "vrc-bags";
  CHECK_THROWS_AS(parse_manifest(doc.dump()), ParseError);

  doc = json::parse(text);
  doc["appearance_dim"] = 6;
  CHECK_THROWS_AS(parse_manifest(doc.dump()), ValidationError);

  doc = json::parse(text);
  doc["images"][0]["regions"][0]["box"] = {0.1, 0.2};
  CHECK_THROWS_AS(parse_manifest(doc.dump()), ParseError);
}

TEST_CASE("bag list round trip") {
  const auto m = small_world();
  BagList list;
  list.spec = BagSpec{Split::kTrain, 2, 7, 3};
  list.bags = make_bags(m, list.spec);
  list.metadata["note"] = "x";
  const auto back = parse_bags(serialize_bags(list));
  CHECK(back == list);

  auto doc = json::parse(serialize_bags(list));
  doc["schema_version"] = 2;
  CHECK_THROWS_AS(parse_bags(doc.dump()), VersionError);
}

TEST_CASE("predictions round trip") {
  PredictionSet p;
  p.mode = "free";
  p.seed = 5;
  p.config["restarts"] = "4";
  BagPrediction b;
  b.bag_index = 0;
  b.cost = -1.25;
  b.images.push_back({"img", 1, 2, testing::box(0, 0, 0.5, 0.5), testing::box(0.1, 0.2, 0.3, 0.4)});
  p.bags.push_back(b);
  BagPrediction skipped;
  skipped.bag_index = 1;
  skipped.skipped = true;
  skipped.skip_reason = "degenerate";
  p.bags.push_back(skipped);
  CHECK(parse_predictions(serialize_predictions(p)) == p);
}

TEST_CASE("missing files surface as configuration errors") {
  CHECK_THROWS_AS(load_manifest("/nonexistent/dir/m.json"), ConfigError);
}

TEST_CASE("atomic writes leave no temporary behind") {
  testing::TempDir dir("atomic");
  write_file_atomic(dir / "f.txt", "abc");
  write_file_atomic(dir / "f.txt", "defg");
  CHECK(read_file(dir / "f.txt") == "defg");
  CHECK_FALSE(std::filesystem::exists(dir / "f.txt.tmp"));
}
