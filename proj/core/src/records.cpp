#include "vrc/records.hpp"

#include <fstream>
#include <sstream>

#include "json_support.hpp"
#include "vrc/errors.hpp"

namespace vrc {

using detail::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw ConfigError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw ConfigError("cannot move '" + tmp.string() + "' to '" + path.string() +
                      "': " + ec.message());
  }
}

namespace {

json region_to_json(const Region& r) {
  return {{"box", detail::box_to_json(r.box)},
          {"appearance", r.appearance},
          {"class_scores", r.class_scores},
          {"objectness", r.objectness}};
}

Region region_from_json(const json& j) {
  Region r;
  r.box = detail::box_from_json(j.at("box"));
  r.appearance = j.at("appearance").get<std::vector<double>>();
  r.class_scores = j.at("class_scores").get<std::vector<double>>();
  r.objectness = j.at("objectness").get<double>();
  return r;
}

json annotation_to_json(const RelationshipAnnotation& a) {
  json j = {{"subject_box", detail::box_to_json(a.subject_box)},
            {"object_box", detail::box_to_json(a.object_box)},
            {"predicate_id", a.predicate_id}};
  if (a.subject_region) j["subject_region"] = *a.subject_region;
  if (a.object_region) j["object_region"] = *a.object_region;
  return j;
}

RelationshipAnnotation annotation_from_json(const json& j) {
  RelationshipAnnotation a;
  a.subject_box = detail::box_from_json(j.at("subject_box"));
  a.object_box = detail::box_from_json(j.at("object_box"));
  a.predicate_id = j.at("predicate_id").get<int>();
  if (j.contains("subject_region")) a.subject_region = j["subject_region"].get<std::size_t>();
  if (j.contains("object_region")) a.object_region = j["object_region"].get<std::size_t>();
  return a;
}

json image_to_json(const ImageRecord& image) {
  json regions = json::array();
  for (const auto& r : image.regions) regions.push_back(region_to_json(r));
  json annotations = json::array();
  for (const auto& a : image.annotations) annotations.push_back(annotation_to_json(a));
  return {{"image_id", image.image_id},
          {"regions", std::move(regions)},
          {"annotations", std::move(annotations)}};
}

ImageRecord image_from_json(const json& j) {
  ImageRecord image;
  image.image_id = j.at("image_id").get<std::string>();
  for (const auto& r : j.at("regions")) image.regions.push_back(region_from_json(r));
  for (const auto& a : j.at("annotations")) {
    image.annotations.push_back(annotation_from_json(a));
  }
  return image;
}

}  // namespace

std::string serialize_manifest(const DatasetManifest& manifest) {
  json predicates = json::array();
  for (const auto& p : manifest.predicates) {
    predicates.push_back(
        {{"id", p.id}, {"name", p.name}, {"split", std::string(to_string(p.split))}});
  }
  json head = {{"format", "vrc-manifest"},
               {"schema_version", kManifestSchemaVersion},
               {"appearance_dim", manifest.appearance_dim},
               {"class_dim", manifest.class_dim},
               {"metadata", manifest.metadata},
               {"predicates", std::move(predicates)}};
  std::vector<json> rows;
  rows.reserve(manifest.images.size());
  for (const auto& image : manifest.images) rows.push_back(image_to_json(image));
  return detail::dump_with_rows(head, "images", rows);
}

DatasetManifest parse_manifest(std::string_view text) {
  const json doc = detail::parse_json(text);
  detail::check_header(doc, "vrc-manifest", kManifestSchemaVersion);
  auto manifest = detail::guarded([&] {
    DatasetManifest m;
    m.appearance_dim = doc.at("appearance_dim").get<std::size_t>();
    m.class_dim = doc.at("class_dim").get<std::size_t>();
    if (doc.contains("metadata")) {
      m.metadata = doc["metadata"].get<std::map<std::string, std::string>>();
    }
    for (const auto& p : doc.at("predicates")) {
      m.predicates.push_back({p.at("id").get<int>(), p.at("name").get<std::string>(),
                              parse_split(p.at("split").get<std::string>())});
    }
    for (const auto& image : doc.at("images")) m.images.push_back(image_from_json(image));
    return m;
  });
  validate(manifest);
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path));
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_manifest(manifest));
}

std::string serialize_bags(const BagList& bags) {
  json head = {{"format", "vrc-bags"},
               {"schema_version", kBagListSchemaVersion},
               {"split", std::string(to_string(bags.spec.split))},
               {"bag_size", bags.spec.bag_size},
               {"count", bags.spec.count},
               {"seed", bags.spec.seed},
               {"metadata", bags.metadata}};
  std::vector<json> rows;
  rows.reserve(bags.bags.size());
  for (const auto& bag : bags.bags) {
    rows.push_back({{"image_ids", bag.image_ids}, {"predicate_id", bag.common_predicate_id}});
  }
  return detail::dump_with_rows(head, "bags", rows);
}

BagList parse_bags(std::string_view text) {
  const json doc = detail::parse_json(text);
  detail::check_header(doc, "vrc-bags", kBagListSchemaVersion);
  return detail::guarded([&] {
    BagList list;
    list.spec.split = parse_split(doc.at("split").get<std::string>());
    list.spec.bag_size = doc.at("bag_size").get<std::size_t>();
    list.spec.count = doc.at("count").get<std::size_t>();
    list.spec.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("metadata")) {
      list.metadata = doc["metadata"].get<std::map<std::string, std::string>>();
    }
    for (const auto& b : doc.at("bags")) {
      Bag bag;
      bag.image_ids = b.at("image_ids").get<std::vector<std::string>>();
      bag.common_predicate_id = b.at("predicate_id").get<int>();
      if (bag.image_ids.size() < 2) throw ValidationError("bag with fewer than 2 images");
      list.bags.push_back(std::move(bag));
    }
    return list;
  });
}

BagList load_bags(const std::filesystem::path& path) { return parse_bags(read_file(path)); }

void save_bags(const BagList& bags, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_bags(bags));
}

}  // namespace vrc
