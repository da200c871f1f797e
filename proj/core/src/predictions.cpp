#include "vrc/predictions.hpp"

#include "json_support.hpp"
#include "vrc/records.hpp"

namespace vrc {

using detail::json;

std::string serialize_predictions(const PredictionSet& predictions) {
  const json head = {{"format", "vrc-predictions"},
                     {"schema_version", kPredictionsSchemaVersion},
                     {"mode", predictions.mode},
                     {"seed", predictions.seed},
                     {"config", predictions.config}};
  std::vector<json> rows;
  rows.reserve(predictions.bags.size());
  for (const auto& bag : predictions.bags) {
    json images = json::array();
    for (const auto& im : bag.images) {
      images.push_back({{"image_id", im.image_id},
                        {"subject_region", im.subject_region},
                        {"object_region", im.object_region},
                        {"subject_box", detail::box_to_json(im.subject_box)},
                        {"object_box", detail::box_to_json(im.object_box)}});
    }
    json row = {{"bag_index", bag.bag_index}, {"skipped", bag.skipped}, {"cost", bag.cost},
                {"images", std::move(images)}};
    if (bag.skipped) row["skip_reason"] = bag.skip_reason;
    rows.push_back(std::move(row));
  }
  return detail::dump_with_rows(head, "bags", rows);
}

PredictionSet parse_predictions(std::string_view text) {
  const json doc = detail::parse_json(text);
  detail::check_header(doc, "vrc-predictions", kPredictionsSchemaVersion);
  return detail::guarded([&] {
    PredictionSet out;
    out.mode = doc.at("mode").get<std::string>();
    out.seed = doc.at("seed").get<std::uint64_t>();
    out.config = doc.at("config").get<std::map<std::string, std::string>>();
    for (const auto& row : doc.at("bags")) {
      BagPrediction bag;
      bag.bag_index = row.at("bag_index").get<std::size_t>();
      bag.skipped = row.at("skipped").get<bool>();
      bag.cost = row.at("cost").get<double>();
      if (row.contains("skip_reason")) bag.skip_reason = row["skip_reason"].get<std::string>();
      for (const auto& im : row.at("images")) {
        bag.images.push_back({im.at("image_id").get<std::string>(),
                              im.at("subject_region").get<std::size_t>(),
                              im.at("object_region").get<std::size_t>(),
                              detail::box_from_json(im.at("subject_box")),
                              detail::box_from_json(im.at("object_box"))});
      }
      out.bags.push_back(std::move(bag));
    }
    return out;
  });
}

PredictionSet load_predictions(const std::filesystem::path& path) {
  return parse_predictions(read_file(path));
}

void save_predictions(const PredictionSet& predictions, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_predictions(predictions));
}

}  // namespace vrc
