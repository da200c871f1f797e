#include "vrc/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json_support.hpp"
#include "vrc/errors.hpp"

namespace vrc {

using detail::json;

bool image_correct(const BBox& subject, const BBox& object,
                   std::span<const RelationshipAnnotation> ground_truth, int predicate_id,
                   double iou_thresh) {
  bool any = false;
  for (const auto& gt : ground_truth) {
    if (gt.predicate_id != predicate_id) continue;
    any = true;
    if (iou(subject, gt.subject_box) > iou_thresh && iou(object, gt.object_box) > iou_thresh) {
      return true;
    }
  }
  if (!any) {
    throw MetricError("no ground-truth relationship with predicate " +
                      std::to_string(predicate_id));
  }
  return false;
}

bool BagResult::all_correct() const {
  return std::all_of(image_correct.begin(), image_correct.end(), [](bool c) { return c; });
}

double vr_corloc(std::span<const BagResult> bags) {
  std::size_t total = 0;
  std::size_t correct = 0;
  for (const auto& b : bags) {
    total += b.image_correct.size();
    correct += static_cast<std::size_t>(
        std::count(b.image_correct.begin(), b.image_correct.end(), true));
  }
  if (total == 0) throw MetricError("VR-CorLoc is undefined over zero images");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double bag_corloc(std::span<const BagResult> bags) {
  if (bags.empty()) throw MetricError("Bag-CorLoc is undefined over zero bags");
  const auto correct = std::count_if(bags.begin(), bags.end(),
                                     [](const BagResult& b) { return b.all_correct(); });
  return static_cast<double>(correct) / static_cast<double>(bags.size());
}

EvalReport evaluate(const PredictionSet& predictions, const DatasetManifest& manifest,
                    const BagList& bags) {
  const ImageLookup lookup(manifest);
  EvalReport report;
  report.mode = predictions.mode;
  report.seed = predictions.seed;
  report.config = predictions.config;
  for (const auto& pred : predictions.bags) {
    if (pred.bag_index >= bags.bags.size()) {
      throw MetricError("prediction refers to bag " + std::to_string(pred.bag_index) +
                        " but the bag file has " + std::to_string(bags.bags.size()));
    }
    if (pred.skipped) {
      report.skipped_bags.push_back(pred.bag_index);
      continue;
    }
    const Bag& bag = bags.bags[pred.bag_index];
    if (pred.images.size() != bag.image_ids.size()) {
      throw MetricError("bag " + std::to_string(pred.bag_index) +
                        " has a different image count in the predictions");
    }
    BagResult result{pred.bag_index, bag.common_predicate_id, {}};
    for (std::size_t k = 0; k < pred.images.size(); ++k) {
      const auto& im = pred.images[k];
      if (im.image_id != bag.image_ids[k]) {
        throw MetricError("bag " + std::to_string(pred.bag_index) + " image " +
                          std::to_string(k) + " is '" + im.image_id + "', expected '" +
                          bag.image_ids[k] + "'");
      }
      const auto& image = lookup.at(im.image_id);
      result.image_correct.push_back(image_correct(im.subject_box, im.object_box,
                                                   image.annotations,
                                                   bag.common_predicate_id));
    }
    report.images += result.image_correct.size();
    report.correct_images += static_cast<std::size_t>(
        std::count(result.image_correct.begin(), result.image_correct.end(), true));
    if (result.all_correct()) ++report.correct_bags;
    report.bags.push_back(std::move(result));
  }
  report.vr_corloc = vr_corloc(report.bags);
  report.bag_corloc = bag_corloc(report.bags);
  return report;
}

std::string serialize_report(const EvalReport& report) {
  const json head = {{"format", "vrc-report"},
                     {"schema_version", kReportSchemaVersion},
                     {"mode", report.mode},
                     {"seed", report.seed},
                     {"config", report.config},
                     {"vr_corloc", report.vr_corloc},
                     {"bag_corloc", report.bag_corloc},
                     {"images", report.images},
                     {"correct_images", report.correct_images},
                     {"evaluated_bags", report.bags.size()},
                     {"correct_bags", report.correct_bags},
                     {"skipped_bags", report.skipped_bags}};
  std::vector<json> rows;
  rows.reserve(report.bags.size());
  for (const auto& b : report.bags) {
    rows.push_back({{"bag_index", b.bag_index},
                    {"predicate_id", b.predicate_id},
                    {"image_correct", b.image_correct}});
  }
  return detail::dump_with_rows(head, "bags", rows);
}

EvalReport parse_report(std::string_view text) {
  const json doc = detail::parse_json(text);
  detail::check_header(doc, "vrc-report", kReportSchemaVersion);
  return detail::guarded([&] {
    EvalReport r;
    r.mode = doc.at("mode").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.config = doc.at("config").get<std::map<std::string, std::string>>();
    r.vr_corloc = doc.at("vr_corloc").get<double>();
    r.bag_corloc = doc.at("bag_corloc").get<double>();
    r.images = doc.at("images").get<std::size_t>();
    r.correct_images = doc.at("correct_images").get<std::size_t>();
    r.correct_bags = doc.at("correct_bags").get<std::size_t>();
    r.skipped_bags = doc.at("skipped_bags").get<std::vector<std::size_t>>();
    for (const auto& row : doc.at("bags")) {
      r.bags.push_back({row.at("bag_index").get<std::size_t>(),
                        row.at("predicate_id").get<int>(),
                        row.at("image_correct").get<std::vector<bool>>()});
    }
    return r;
  });
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_report(report));
}

std::string summary_table(const EvalReport& report, const DatasetManifest* manifest) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %10s\n", "metric", "value");
  out << line;
  std::snprintf(line, sizeof line, "%-22s %10.4f\n", "VR-CorLoc", report.vr_corloc);
  out << line;
  std::snprintf(line, sizeof line, "%-22s %10.4f\n", "Bag-CorLoc", report.bag_corloc);
  out << line;
  std::snprintf(line, sizeof line, "%-22s %6zu/%zu\n", "images correct",
                report.correct_images, report.images);
  out << line;
  std::snprintf(line, sizeof line, "%-22s %6zu/%zu\n", "bags correct", report.correct_bags,
                report.bags.size());
  out << line;
  std::snprintf(line, sizeof line, "%-22s %10zu\n", "bags skipped", report.skipped_bags.size());
  out << line;

  std::map<int, std::pair<std::size_t, std::size_t>> per;  // correct, total
  for (const auto& b : report.bags) {
    auto& [c, t] = per[b.predicate_id];
    t += b.image_correct.size();
    c += static_cast<std::size_t>(std::count(b.image_correct.begin(), b.image_correct.end(), true));
  }
  if (per.empty()) return out.str();
  out << '\n';
  std::snprintf(line, sizeof line, "%-22s %10s %8s\n", "predicate", "VR-CorLoc", "images");
  out << line;
  for (const auto& [id, ct] : per) {
    std::string name = std::to_string(id);
    if (manifest != nullptr) {
      if (const auto* p = manifest->find_predicate(id)) name = p->name;
    }
    std::snprintf(line, sizeof line, "%-22s %10.4f %8zu\n", name.c_str(),
                  static_cast<double>(ct.first) / static_cast<double>(ct.second), ct.second);
    out << line;
  }
  return out.str();
}

}  // namespace vrc
