/// Measured per-(model, platform) profiles: inference time and energy,
/// plus optional per-task loss values. Immutable after load; the
/// simulator treats these numbers as ground truth.
#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace esod {

struct ModelInfo {
  std::string name;
  std::string backbone;
  double map_score = 0.0;  // mAP on the reference set, [0, 100]

  void validate() const {
    if (name.empty()) throw std::invalid_argument("model name empty");
    if (!(map_score >= 0.0 && map_score <= 100.0))
      throw std::invalid_argument("mAP outside [0,100] for " + name);
  }
};

struct LinkSpec {
  double bandwidth_bytes_per_s = 0.0;
  double rtt_s = 0.0;
  double tx_power_w = 0.0;

  void validate() const {
    if (!(bandwidth_bytes_per_s > 0.0))
      throw std::invalid_argument("link bandwidth must be positive");
    if (rtt_s < 0.0 || tx_power_w < 0.0)
      throw std::invalid_argument("negative link parameter");
  }
};

struct PlatformInfo {
  std::string name;
  bool is_local = false;
  std::optional<LinkSpec> link;  // present iff not local

  void validate() const {
    if (name.empty()) throw std::invalid_argument("platform name empty");
    if (is_local == link.has_value())
      throw std::invalid_argument("platform " + name +
                                  ": link must be present iff remote");
    if (link) link->validate();
  }
};

struct Measurement {
  double infer_time_s = 0.0;
  double infer_energy_j = 0.0;
};

class ProfileTable {
 public:
  std::vector<ModelInfo> models;
  std::vector<PlatformInfo> platforms;

  void add(const std::string& model, const std::string& platform,
           double time_ms, double energy_j) {
    if (!(time_ms > 0.0) || !(energy_j > 0.0))
      throw std::invalid_argument("nonpositive measurement for " + model +
                                  "/" + platform);
    auto key = std::make_pair(model, platform);
    if (table_.count(key))
      throw std::invalid_argument("duplicate measurement for " + model + "/" +
                                  platform);
    table_[key] = {time_ms / 1000.0, energy_j};
  }

  Measurement query(const std::string& model,
                    const std::string& platform) const {
    auto it = table_.find({model, platform});
    if (it == table_.end())
      throw std::out_of_range("no profile for " + model + "/" + platform);
    return it->second;
  }

  bool has(const std::string& model, const std::string& platform) const {
    return table_.count({model, platform}) > 0;
  }

  std::vector<std::string> platforms_for(const std::string& model) const {
    std::vector<std::string> out;
    for (const auto& [key, m] : table_)
      if (key.first == model) out.push_back(key.second);
    return out;
  }

  const ModelInfo& model_info(const std::string& name) const {
    for (const auto& m : models)
      if (m.name == name) return m;
    throw std::out_of_range("unknown model " + name);
  }

  const PlatformInfo& platform_info(const std::string& name) const {
    for (const auto& p : platforms)
      if (p.name == name) return p;
    throw std::out_of_range("unknown platform " + name);
  }

  /// Per-task measured loss if available, otherwise the per-model
  /// surrogate (100 - mAP) / 100, constant across tasks.
  double loss_for(const std::string& model, const std::string& task_id) const {
    auto it = task_loss_.find({model, task_id});
    if (it != task_loss_.end()) return it->second;
    return (100.0 - model_info(model).map_score) / 100.0;
  }

  void set_task_loss(const std::string& model, const std::string& task_id,
                     double loss) {
    task_loss_[{model, task_id}] = loss;
  }

  const std::map<std::pair<std::string, std::string>, Measurement>&
  measurements() const {
    return table_;
  }
  const std::map<std::pair<std::string, std::string>, double>& task_losses()
      const {
    return task_loss_;
  }

  void validate() const {
    int locals = 0;
    for (const auto& m : models) m.validate();
    for (const auto& p : platforms) {
      p.validate();
      locals += p.is_local ? 1 : 0;
    }
    if (!platforms.empty() && locals != 1)
      throw std::invalid_argument("exactly one platform must be local");
  }

 private:
  std::map<std::pair<std::string, std::string>, Measurement> table_;
  std::map<std::pair<std::string, std::string>, double> task_loss_;
};

inline nlohmann::ordered_json to_json(const ProfileTable& t) {
  nlohmann::ordered_json j;
  j["models"] = nlohmann::ordered_json::array();
  for (const auto& m : t.models)
    j["models"].push_back(
        {{"name", m.name}, {"backbone", m.backbone}, {"map_score", m.map_score}});
  j["platforms"] = nlohmann::ordered_json::array();
  for (const auto& p : t.platforms) {
    nlohmann::ordered_json pj = {{"name", p.name}, {"is_local", p.is_local}};
    if (p.link)
      pj["link"] = {{"bandwidth_bytes_per_s", p.link->bandwidth_bytes_per_s},
                    {"rtt_s", p.link->rtt_s},
                    {"tx_power_w", p.link->tx_power_w}};
    j["platforms"].push_back(pj);
  }
  j["measurements"] = nlohmann::ordered_json::array();
  for (const auto& [key, m] : t.measurements())
    j["measurements"].push_back({{"model", key.first},
                                 {"platform", key.second},
                                 {"time_ms", m.infer_time_s * 1000.0},
                                 {"energy_j", m.infer_energy_j}});
  if (!t.task_losses().empty()) {
    j["task_loss"] = nlohmann::ordered_json::array();
    for (const auto& [key, v] : t.task_losses())
      j["task_loss"].push_back(
          {{"model", key.first}, {"task", key.second}, {"loss", v}});
  }
  return j;
}

inline ProfileTable profiles_from_json(const nlohmann::json& j) {
  ProfileTable t;
  for (const auto& m : j.value("models", nlohmann::json::array()))
    t.models.push_back({m.at("name").get<std::string>(),
                        m.value("backbone", std::string{}),
                        m.value("map_score", 0.0)});
  for (const auto& p : j.value("platforms", nlohmann::json::array())) {
    PlatformInfo pi;
    pi.name = p.at("name").get<std::string>();
    pi.is_local = p.value("is_local", false);
    if (p.contains("link")) {
      const auto& l = p.at("link");
      pi.link = LinkSpec{l.at("bandwidth_bytes_per_s").get<double>(),
                         l.value("rtt_s", 0.0), l.value("tx_power_w", 0.0)};
    }
    t.platforms.push_back(pi);
  }
  for (const auto& m : j.value("measurements", nlohmann::json::array()))
    t.add(m.at("model").get<std::string>(), m.at("platform").get<std::string>(),
          m.at("time_ms").get<double>(), m.at("energy_j").get<double>());
  for (const auto& l : j.value("task_loss", nlohmann::json::array()))
    t.set_task_loss(l.at("model").get<std::string>(),
                    l.at("task").get<std::string>(), l.at("loss").get<double>());
  t.validate();
  return t;
}

/// Load a profile file. JSON files use the full schema; CSV files carry
/// only measurements with a model,platform,time_ms,energy_j header.
inline ProfileTable ingest_measurements(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    ProfileTable t;
    std::string line;
    if (!std::getline(in, line)) return t;  // empty file, valid
    if (line != "model,platform,time_ms,energy_j")
      throw std::runtime_error("bad measurement CSV header in " + path);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string model, platform, time_ms, energy_j;
      if (!std::getline(ss, model, ',') || !std::getline(ss, platform, ',') ||
          !std::getline(ss, time_ms, ',') || !std::getline(ss, energy_j))
        throw std::runtime_error("bad measurement row: " + line);
      t.add(model, platform, std::stod(time_ms), std::stod(energy_j));
    }
    return t;
  }
  nlohmann::json j;
  in >> j;
  return profiles_from_json(j);
}

inline void write_profiles(const ProfileTable& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json(t).dump(2) << "\n";
}

}  // namespace esod
