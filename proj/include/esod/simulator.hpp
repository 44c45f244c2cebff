/// Deterministic replay of scheduled tasks against the profile tables:
/// per-task model/platform decisions, transmission + inference accounting,
/// and aggregate reporting with reduction percentages vs a baseline.
/// All costs come from profiles; the host clock is never consulted.
#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "esod/classifier.hpp"
#include "esod/features.hpp"
#include "esod/profiles.hpp"
#include "esod/scoring.hpp"

namespace esod {

struct Task {
  std::string image_id;
  FeatureVector features;  // raw (unnormalized)
  double encoded_size_bytes = 0.0;
  std::vector<GroundTruthBox> gts;                            // optional
  std::map<std::string, std::vector<Detection>> detections;   // optional

  void validate() const {
    if (!(encoded_size_bytes > 0.0))
      throw std::invalid_argument("task size must be positive");
  }
};

struct Outcome {
  std::string image_id;
  std::string model;
  std::string platform;
  double score = 0.0;
  double transmit_time_s = 0.0;
  double infer_time_s = 0.0;
  double transmit_energy_j = 0.0;
  double infer_energy_j = 0.0;
  double loss = 0.0;
  bool feasible = true;
  bool decided = true;
  std::string error;

  double total_time_s() const { return transmit_time_s + infer_time_s; }
  double total_energy_j() const { return transmit_energy_j + infer_energy_j; }
};

struct Aggregates {
  double total_time_s = 0.0;
  double total_energy_j = 0.0;
  double mean_time_s = 0.0;
  double mean_energy_j = 0.0;
  double mean_loss = 0.0;
  int n_tasks = 0;
  int n_failed = 0;
};

struct RunReport {
  std::string preset_name;
  std::uint32_t seed = 0;
  std::vector<Outcome> outcomes;
  Aggregates aggregates;
};

/// Store-and-forward link model: time = size/bandwidth + rtt,
/// energy = radio power x time. Local platforms cost nothing.
inline std::pair<double, double> transmission_cost(double size_bytes,
                                                   const PlatformInfo& platform) {
  if (platform.is_local) return {0.0, 0.0};
  if (!platform.link)
    throw std::invalid_argument("remote platform " + platform.name +
                                " has no link");
  double time = size_bytes / platform.link->bandwidth_bytes_per_s +
                platform.link->rtt_s;
  return {time, platform.link->tx_power_w * time};
}

inline ScoreWeights preset(const std::string& name) {
  if (name == "time-oriented") return {1.0, 0.0, 0.0};
  if (name == "energy-oriented") return {0.0, 1.0, 0.0};
  if (name == "balance") return {0.5, 0.5, 0.0};
  throw std::invalid_argument("unknown preset: " + name);
}

struct RunOptions {
  std::string preset_name;  // echoed into the report
  std::uint32_t seed = 0;
  // Forces every task onto one (model, platform), bypassing the
  // pre-classifier; this is the "run the heavy model locally" baseline.
  std::optional<std::pair<std::string, std::string>> forced;
  LossWeights loss_weights{};
};

inline Aggregates aggregate(const std::vector<Outcome>& outcomes) {
  Aggregates a;
  int decided = 0;
  for (const auto& o : outcomes) {
    ++a.n_tasks;
    if (!o.decided) {
      ++a.n_failed;
      continue;
    }
    ++decided;
    a.total_time_s += o.total_time_s();
    a.total_energy_j += o.total_energy_j();
    a.mean_loss += o.loss;
  }
  if (decided > 0) {
    a.mean_time_s = a.total_time_s / decided;
    a.mean_energy_j = a.total_energy_j / decided;
    a.mean_loss /= decided;
  }
  return a;
}

/// Pipeline per task: normalize features, predict the model with the
/// pre-classifier, build (platform, cost) candidates, filter and select,
/// account the outcome. Undecidable tasks are recorded and the run goes on.
inline RunReport run(const std::vector<Task>& tasks, const MLPModel& model,
                     const ProfileTable& table, const ScoreWeights& w,
                     const Constraints& c, const RunOptions& opts = {}) {
  RunReport report;
  report.preset_name = opts.preset_name;
  report.seed = opts.seed;
  for (const auto& task : tasks) {
    Outcome o;
    o.image_id = task.image_id;
    try {
      task.validate();
      std::string chosen_model;
      std::vector<Candidate> cands;
      if (opts.forced) {
        chosen_model = opts.forced->first;
        auto m = table.query(chosen_model, opts.forced->second);
        auto [tt, te] = transmission_cost(
            task.encoded_size_bytes, table.platform_info(opts.forced->second));
        cands.push_back({chosen_model, opts.forced->second, m.infer_time_s + tt,
                         m.infer_energy_j + te,
                         table.loss_for(chosen_model, task.image_id)});
      } else {
        auto [label, probs] = model.predict(normalize(task.features, model.norm));
        (void)probs;
        chosen_model = model.label_names.at(label);
        for (const auto& platform : table.platforms_for(chosen_model)) {
          auto m = table.query(chosen_model, platform);
          auto [tt, te] = transmission_cost(task.encoded_size_bytes,
                                            table.platform_info(platform));
          cands.push_back({chosen_model, platform, m.infer_time_s + tt,
                           m.infer_energy_j + te,
                           table.loss_for(chosen_model, task.image_id)});
        }
        if (cands.empty())
          throw std::runtime_error("no profile for model " + chosen_model);
      }
      Decision d = select(cands, w, c, FallbackPolicy::BestEffort);
      auto meas = table.query(d.model, d.platform);
      auto [tt, te] = transmission_cost(task.encoded_size_bytes,
                                        table.platform_info(d.platform));
      o.model = d.model;
      o.platform = d.platform;
      o.score = d.score;
      o.infer_time_s = meas.infer_time_s;
      o.infer_energy_j = meas.infer_energy_j;
      o.transmit_time_s = tt;
      o.transmit_energy_j = te;
      o.feasible = d.feasible;
      // Measured set loss when annotations are present, surrogate otherwise.
      if (!task.gts.empty() && task.detections.count(d.model))
        o.loss = total_loss(task.detections.at(d.model), task.gts,
                            opts.loss_weights)
                     .total;
      else
        o.loss = d.loss;
    } catch (const std::exception& e) {
      o.decided = false;
      o.error = e.what();
    }
    report.outcomes.push_back(std::move(o));
  }
  report.aggregates = aggregate(report.outcomes);
  return report;
}

// ---------------------------------------------------------------------------
// Reporting

inline nlohmann::ordered_json report_to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["preset"] = r.preset_name;
  j["seed"] = r.seed;
  j["aggregates"] = {{"total_time_s", r.aggregates.total_time_s},
                     {"total_energy_j", r.aggregates.total_energy_j},
                     {"mean_time_s", r.aggregates.mean_time_s},
                     {"mean_energy_j", r.aggregates.mean_energy_j},
                     {"mean_loss", r.aggregates.mean_loss},
                     {"n_tasks", r.aggregates.n_tasks},
                     {"n_failed", r.aggregates.n_failed}};
  j["outcomes"] = nlohmann::ordered_json::array();
  for (const auto& o : r.outcomes) {
    nlohmann::ordered_json oj = {{"image_id", o.image_id},
                                 {"decided", o.decided}};
    if (o.decided) {
      oj["model"] = o.model;
      oj["platform"] = o.platform;
      oj["score"] = o.score;
      oj["transmit_time_s"] = o.transmit_time_s;
      oj["infer_time_s"] = o.infer_time_s;
      oj["transmit_energy_j"] = o.transmit_energy_j;
      oj["infer_energy_j"] = o.infer_energy_j;
      oj["loss"] = o.loss;
      oj["feasible"] = o.feasible;
    } else {
      oj["error"] = o.error;
    }
    j["outcomes"].push_back(oj);
  }
  return j;
}

inline std::string report_to_csv(const RunReport& r) {
  std::ostringstream out;
  out << "image_id,decided,model,platform,score,transmit_time_s,infer_time_s,"
         "transmit_energy_j,infer_energy_j,loss,feasible\n";
  out.precision(17);
  for (const auto& o : r.outcomes) {
    out << o.image_id << ',' << (o.decided ? 1 : 0) << ',' << o.model << ','
        << o.platform << ',' << o.score << ',' << o.transmit_time_s << ','
        << o.infer_time_s << ',' << o.transmit_energy_j << ','
        << o.infer_energy_j << ',' << o.loss << ',' << (o.feasible ? 1 : 0)
        << '\n';
  }
  return out.str();
}

/// One strategy row: recorded totals plus (optionally) the percentages a
/// write-up quotes for it, used to cross-check the arithmetic.
struct StrategyRow {
  std::string name;
  double energy_j = 0.0;
  double time_s = 0.0;
  std::optional<double> quoted_time_reduction_pct;
  std::optional<double> quoted_energy_reduction_pct;
};

/// Reduction% = (1 - treatment/baseline) * 100, recomputed from the raw
/// sums. Rows whose quoted percentages disagree with the recomputation by
/// more than 0.5 pp are flagged as discrepancies instead of being matched.
inline nlohmann::ordered_json reduction_report(const std::vector<StrategyRow>& rows,
                                               const std::string& baseline_name) {
  const StrategyRow* base = nullptr;
  for (const auto& r : rows)
    if (r.name == baseline_name) base = &r;
  if (!base) throw std::invalid_argument("baseline row not found: " + baseline_name);
  if (!(base->time_s > 0.0) || !(base->energy_j > 0.0))
    throw std::invalid_argument("baseline totals must be positive");

  nlohmann::ordered_json j;
  j["baseline"] = baseline_name;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    if (r.name == baseline_name) continue;
    double tr = (1.0 - r.time_s / base->time_s) * 100.0;
    double er = (1.0 - r.energy_j / base->energy_j) * 100.0;
    nlohmann::ordered_json rj = {{"name", r.name},
                                 {"time_s", r.time_s},
                                 {"energy_j", r.energy_j},
                                 {"time_reduction_pct", tr},
                                 {"energy_reduction_pct", er}};
    bool discrepancy = false;
    if (r.quoted_time_reduction_pct) {
      rj["quoted_time_reduction_pct"] = *r.quoted_time_reduction_pct;
      if (std::abs(*r.quoted_time_reduction_pct - tr) > 0.5) discrepancy = true;
    }
    if (r.quoted_energy_reduction_pct) {
      rj["quoted_energy_reduction_pct"] = *r.quoted_energy_reduction_pct;
      if (std::abs(*r.quoted_energy_reduction_pct - er) > 0.5) discrepancy = true;
    }
    if (r.quoted_time_reduction_pct || r.quoted_energy_reduction_pct)
      rj["quoted_matches_recomputed"] = !discrepancy;
    j["rows"].push_back(rj);
  }
  return j;
}

inline std::vector<StrategyRow> strategy_rows_from_json(const nlohmann::json& j) {
  std::vector<StrategyRow> rows;
  for (const auto& rj : j.at("rows")) {
    StrategyRow r;
    r.name = rj.at("name").get<std::string>();
    r.energy_j = rj.at("energy_j").get<double>();
    r.time_s = rj.at("time_s").get<double>();
    if (rj.contains("quoted_time_reduction_pct"))
      r.quoted_time_reduction_pct = rj.at("quoted_time_reduction_pct").get<double>();
    if (rj.contains("quoted_energy_reduction_pct"))
      r.quoted_energy_reduction_pct =
          rj.at("quoted_energy_reduction_pct").get<double>();
    rows.push_back(r);
  }
  return rows;
}

}  // namespace esod
