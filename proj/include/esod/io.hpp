/// File formats: detection/ground-truth JSON lines (one image per line),
/// the feature CSV, and the label CSV binding image ids to model labels.
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "esod/features.hpp"
#include "esod/geometry.hpp"

namespace esod {

struct ImageBoxes {
  std::string image_id;
  std::vector<Detection> detections;       // entries with a score
  std::vector<GroundTruthBox> gts;         // entries without
};

/// One image per line: {"image_id": ..., "boxes": [{cx,cy,w,h,class_id,score?}]}.
/// Boxes carrying a score are detections, the rest ground truth.
inline std::vector<ImageBoxes> read_boxes_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<ImageBoxes> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                               e.what());
    }
    ImageBoxes ib;
    ib.image_id = j.at("image_id").get<std::string>();
    for (const auto& bj : j.value("boxes", nlohmann::json::array())) {
      Box box{bj.at("cx").get<double>(), bj.at("cy").get<double>(),
              bj.at("w").get<double>(), bj.at("h").get<double>()};
      int class_id = bj.value("class_id", 0);
      if (bj.contains("score")) {
        Detection d{box, class_id, bj.at("score").get<double>()};
        d.validate();
        ib.detections.push_back(d);
      } else {
        GroundTruthBox g{box, class_id};
        g.validate();
        ib.gts.push_back(g);
      }
    }
    out.push_back(std::move(ib));
  }
  return out;
}

inline void write_boxes_jsonl(const std::vector<ImageBoxes>& images,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& ib : images) {
    nlohmann::ordered_json j;
    j["image_id"] = ib.image_id;
    j["boxes"] = nlohmann::ordered_json::array();
    for (const auto& d : ib.detections)
      j["boxes"].push_back({{"cx", d.box.cx}, {"cy", d.box.cy}, {"w", d.box.w},
                            {"h", d.box.h}, {"class_id", d.class_id},
                            {"score", d.score}});
    for (const auto& g : ib.gts)
      j["boxes"].push_back({{"cx", g.box.cx}, {"cy", g.box.cy}, {"w", g.box.w},
                            {"h", g.box.h}, {"class_id", g.class_id}});
    out << j.dump() << "\n";
  }
}

struct FeatureRow {
  std::string image_id;
  FeatureVector features;
};

inline std::string feature_csv_header() {
  std::string h = "image_id";
  for (const char* name : kFeatureNames) {
    h += ',';
    h += name;
  }
  return h;
}

inline void write_features_csv(const std::vector<FeatureRow>& rows,
                               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << feature_csv_header() << "\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.image_id;
    for (double v : r.features.v) out << ',' << v;
    out << "\n";
  }
}

inline std::vector<FeatureRow> read_features_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != feature_csv_header())
    throw std::runtime_error("bad feature CSV header in " + path);
  std::vector<FeatureRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    FeatureRow r;
    if (!std::getline(ss, r.image_id, ','))
      throw std::runtime_error("bad feature row: " + line);
    std::string cell;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      if (!std::getline(ss, cell, ','))
        throw std::runtime_error("short feature row: " + line);
      r.features[i] = std::stod(cell);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

struct LabelRow {
  std::string image_id;
  int label = 0;
  std::string model;
};

inline void write_labels_csv(const std::vector<LabelRow>& rows,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "image_id,label,model\n";
  for (const auto& r : rows)
    out << r.image_id << ',' << r.label << ',' << r.model << "\n";
}

inline std::vector<LabelRow> read_labels_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "image_id,label,model")
    throw std::runtime_error("bad label CSV header in " + path);
  std::vector<LabelRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    LabelRow r;
    std::string label;
    if (!std::getline(ss, r.image_id, ',') || !std::getline(ss, label, ',') ||
        !std::getline(ss, r.model))
      throw std::runtime_error("bad label row: " + line);
    r.label = std::stoi(label);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace esod
