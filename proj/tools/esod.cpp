// esod: operator CLI binding the pipeline together.
// Subcommands: extract, gen-labels, train, deploy, schedule, simulate, report.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "esod/classifier.hpp"
#include "esod/features.hpp"
#include "esod/io.hpp"
#include "esod/profiles.hpp"
#include "esod/scoring.hpp"
#include "esod/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

esod::ScoreWeights parse_weights(const std::string& weights_csv,
                                 const std::string& preset_name) {
  if (!weights_csv.empty()) {
    double a, b, g;
    if (std::sscanf(weights_csv.c_str(), "%lf,%lf,%lf", &a, &b, &g) != 3)
      throw CLI::ValidationError("--weights expects a,b,g");
    esod::ScoreWeights w{a, b, g};
    w.validate();
    return w;
  }
  if (!preset_name.empty()) return esod::preset(preset_name);
  throw CLI::ValidationError("one of --weights or --preset is required");
}

int cmd_extract(const std::string& images_dir, const std::string& out_csv) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images_dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::cerr << "extract: no files in " << images_dir << "\n";
    return 1;
  }
  std::vector<esod::FeatureRow> rows;
  int failures = 0;
  for (const auto& f : files) {
    cv::Mat img = cv::imread(f.string(), cv::IMREAD_COLOR);
    if (img.empty()) {
      std::cerr << "extract: unreadable image " << f << "\n";
      ++failures;
      continue;
    }
    try {
      rows.push_back({f.stem().string(),
                      esod::extract_features(img, fs::file_size(f))});
    } catch (const std::exception& e) {
      std::cerr << "extract: " << f << ": " << e.what() << "\n";
      ++failures;
    }
  }
  esod::write_features_csv(rows, out_csv);
  std::cout << "wrote " << rows.size() << " rows to " << out_csv << "\n";
  return failures == 0 ? 0 : 1;
}

std::map<std::string, std::vector<esod::ImageBoxes>> load_detection_files(
    const std::vector<std::string>& specs) {
  std::map<std::string, std::vector<esod::ImageBoxes>> out;
  for (const auto& s : specs) {
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--detections expects MODEL=PATH");
    out[s.substr(0, eq)] = esod::read_boxes_jsonl(s.substr(eq + 1));
  }
  return out;
}

std::vector<esod::TaskAnnotations> join_annotations(
    const std::vector<esod::ImageBoxes>& gts,
    const std::map<std::string, std::vector<esod::ImageBoxes>>& det_files) {
  std::vector<esod::TaskAnnotations> tasks;
  for (const auto& g : gts) {
    esod::TaskAnnotations t;
    t.image_id = g.image_id;
    t.gts = g.gts;
    for (const auto& [model, images] : det_files)
      for (const auto& ib : images)
        if (ib.image_id == g.image_id) t.detections[model] = ib.detections;
    tasks.push_back(std::move(t));
  }
  return tasks;
}

int cmd_gen_labels(const std::string& gt_path,
                   const std::vector<std::string>& det_specs,
                   const std::string& profiles_path,
                   const esod::ScoreWeights& w, const std::string& strategy,
                   double lambda_iou, double lambda_l2,
                   const std::string& out_csv) {
  auto table = esod::ingest_measurements(profiles_path);
  auto det_files = load_detection_files(det_specs);
  std::vector<std::string> models;
  for (const auto& [m, _] : det_files) models.push_back(m);
  auto tasks = join_annotations(esod::read_boxes_jsonl(gt_path), det_files);
  esod::LossWeights lw{lambda_iou, lambda_l2};
  auto labels = esod::gen_labels(tasks, models, table, w,
                                 esod::label_strategy_from_string(strategy), lw);
  std::vector<esod::LabelRow> rows;
  for (std::size_t i = 0; i < tasks.size(); ++i)
    rows.push_back({tasks[i].image_id, labels[i], models[labels[i]]});
  esod::write_labels_csv(rows, out_csv);
  std::cout << "wrote " << rows.size() << " labels to " << out_csv << "\n";
  return 0;
}

int cmd_train(const std::string& features_csv, const std::string& labels_csv,
              const std::string& out_model, double test_fraction,
              esod::TrainConfig cfg) {
  auto feats = esod::read_features_csv(features_csv);
  auto labels = esod::read_labels_csv(labels_csv);
  std::map<std::string, int> by_id;
  for (std::size_t i = 0; i < labels.size(); ++i) by_id[labels[i].image_id] = i;

  std::vector<esod::FeatureVector> raw;
  std::vector<int> y;
  std::vector<std::string> label_names;
  for (const auto& f : feats) {
    auto it = by_id.find(f.image_id);
    if (it == by_id.end())
      throw std::runtime_error("no label for image " + f.image_id);
    const auto& l = labels[it->second];
    if (l.label >= static_cast<int>(label_names.size()))
      label_names.resize(l.label + 1);
    label_names[l.label] = l.model;
    raw.push_back(f.features);
    y.push_back(l.label);
  }

  auto [train_idx, test_idx] =
      esod::split(static_cast<int>(raw.size()), test_fraction, cfg.seed);
  std::vector<esod::FeatureVector> train_rows;
  for (int i : train_idx) train_rows.push_back(raw[i]);
  auto norm = esod::fit_normalizer(train_rows);

  esod::LabeledSet set;
  set.X = Eigen::MatrixXd(raw.size(), esod::kFeatureCount);
  for (std::size_t r = 0; r < raw.size(); ++r) {
    auto z = esod::normalize(raw[r], norm);
    for (std::size_t c = 0; c < esod::kFeatureCount; ++c) set.X(r, c) = z[c];
  }
  set.y = y;
  set.train_idx = train_idx;
  set.test_idx = test_idx;
  set.label_names = label_names;

  auto model = esod::train(set, cfg, norm);
  esod::save_model(model, out_model);
  double acc = esod::evaluate_accuracy(model, set, test_idx);
  std::cout << "test accuracy " << acc << " (" << test_idx.size()
            << " held-out rows); model written to " << out_model << "\n";
  return 0;
}

int cmd_deploy(const std::string& profiles_path, const esod::ScoreWeights& w,
               const std::string& out_path) {
  auto table = esod::ingest_measurements(profiles_path);
  std::vector<std::string> models;
  for (const auto& m : table.models) models.push_back(m.name);
  auto pair_list = esod::deploy(models, table, w);
  ordered_json j;
  for (const auto& [model, platform] : pair_list) j[model] = platform;
  std::ofstream out(out_path);
  out << j.dump(2) << "\n";
  std::cout << "wrote pair-list to " << out_path << "\n";
  return 0;
}

int cmd_schedule(const std::string& model_path, const std::string& profiles_path,
                 const std::string& features_csv, const std::string& image_id,
                 const esod::ScoreWeights& w, const esod::Constraints& c) {
  auto model = esod::load_model(model_path);
  auto table = esod::ingest_measurements(profiles_path);
  auto feats = esod::read_features_csv(features_csv);
  const esod::FeatureRow* row = nullptr;
  for (const auto& f : feats)
    if (image_id.empty() || f.image_id == image_id) {
      row = &f;
      break;
    }
  if (!row) throw std::runtime_error("image id not found: " + image_id);

  esod::Task task;
  task.image_id = row->image_id;
  task.features = row->features;
  task.encoded_size_bytes = row->features.size_bytes();
  auto report = esod::run({task}, model, table, w, c);
  const auto& o = report.outcomes.at(0);
  if (!o.decided) throw std::runtime_error("undecidable task: " + o.error);
  ordered_json j = {{"image_id", o.image_id},   {"model", o.model},
                    {"platform", o.platform},   {"score", o.score},
                    {"total_time_s", o.total_time_s()},
                    {"total_energy_j", o.total_energy_j()},
                    {"feasible", o.feasible}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_simulate(const std::string& config_path,
                 std::optional<std::uint32_t> seed_override,
                 const std::string& out_override) {
  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot open " + config_path);
  json cfg;
  in >> cfg;

  auto table = esod::ingest_measurements(cfg.at("profiles").get<std::string>());
  auto model = esod::load_model(cfg.at("model").get<std::string>());
  auto feats = esod::read_features_csv(cfg.at("features").get<std::string>());

  esod::ScoreWeights w;
  std::string preset_name = cfg.value("preset", std::string{});
  if (!preset_name.empty()) {
    w = esod::preset(preset_name);
  } else {
    auto v = cfg.at("weights").get<std::vector<double>>();
    if (v.size() != 3) throw std::runtime_error("weights must have 3 entries");
    w = {v[0], v[1], v[2]};
    w.validate();
    preset_name = "custom";
  }

  esod::Constraints c;
  if (cfg.contains("constraints")) {
    const auto& cj = cfg.at("constraints");
    c.t_max_s = cj.value("t_max_s", c.t_max_s);
    c.e_max_j = cj.value("e_max_j", c.e_max_j);
    c.loss_max = cj.value("loss_max", c.loss_max);
  }

  std::map<std::string, std::vector<esod::ImageBoxes>> det_files;
  const json det_cfg = cfg.value("detections", json::object());
  for (const auto& [m, p] : det_cfg.items())
    det_files[m] = esod::read_boxes_jsonl(p.get<std::string>());
  std::vector<esod::ImageBoxes> gts;
  if (cfg.contains("gt"))
    gts = esod::read_boxes_jsonl(cfg.at("gt").get<std::string>());

  std::vector<esod::Task> tasks;
  for (const auto& f : feats) {
    esod::Task t;
    t.image_id = f.image_id;
    t.features = f.features;
    t.encoded_size_bytes = f.features.size_bytes();
    for (const auto& g : gts)
      if (g.image_id == f.image_id) t.gts = g.gts;
    for (const auto& [m, images] : det_files)
      for (const auto& ib : images)
        if (ib.image_id == f.image_id) t.detections[m] = ib.detections;
    tasks.push_back(std::move(t));
  }

  esod::RunOptions opts;
  opts.preset_name = preset_name;
  opts.seed = seed_override.value_or(cfg.value("seed", 0u));
  if (cfg.contains("forced"))
    opts.forced = {{cfg.at("forced").at("model").get<std::string>(),
                    cfg.at("forced").at("platform").get<std::string>()}};

  auto report = esod::run(tasks, model, table, w, c, opts);

  fs::path out_dir =
      out_override.empty() ? fs::path(cfg.value("out_dir", ".")) : fs::path(out_override);
  fs::create_directories(out_dir);
  {
    std::ofstream jf(out_dir / "report.json");
    jf << esod::report_to_json(report).dump(2) << "\n";
  }
  {
    std::ofstream cf(out_dir / "report.csv");
    cf << esod::report_to_csv(report);
  }
  {
    std::ofstream lf(out_dir / "decisions.jsonl");
    for (const auto& o : report.outcomes) {
      if (!o.decided) continue;
      ordered_json j = {{"image_id", o.image_id},
                        {"model", o.model},
                        {"platform", o.platform},
                        {"score", o.score},
                        {"total_time_s", o.total_time_s()},
                        {"total_energy_j", o.total_energy_j()},
                        {"feasible", o.feasible}};
      lf << j.dump() << "\n";
    }
  }
  std::cout << "simulated " << report.aggregates.n_tasks << " tasks ("
            << report.aggregates.n_failed << " failed); reports in "
            << out_dir.string() << "\n";
  return report.aggregates.n_failed == 0 ? 0 : 1;
}

int cmd_report(const std::string& strategy_path, std::string baseline,
               const std::string& out_path) {
  std::ifstream in(strategy_path);
  if (!in) throw std::runtime_error("cannot open " + strategy_path);
  json j;
  in >> j;
  auto rows = esod::strategy_rows_from_json(j);
  if (baseline.empty()) baseline = j.value("baseline", std::string{});
  auto report = esod::reduction_report(rows, baseline);
  if (out_path.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    std::ofstream out(out_path);
    out << report.dump(2) << "\n";
    std::cout << "wrote reduction report to " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"esod: task scheduling for object detection on edge clusters"};
  app.require_subcommand(1);

  std::string weights_csv, preset_name;
  auto add_weight_flags = [&](CLI::App* cmd) {
    cmd->add_option("--weights", weights_csv, "score weights a,b,g (sum 1)");
    cmd->add_option("--preset", preset_name,
                    "time-oriented | energy-oriented | balance");
  };

  // extract
  std::string images_dir, out_path;
  auto* extract = app.add_subcommand("extract", "extract feature CSV from images");
  extract->add_option("--images", images_dir, "image directory")->required();
  extract->add_option("--out", out_path, "output CSV path")->required();

  // gen-labels
  std::string gt_path, strategy = "score", labels_out;
  std::vector<std::string> det_specs;
  double lambda_iou = 2.0, lambda_l2 = 5.0;
  std::string gl_profiles;
  auto* gen = app.add_subcommand("gen-labels", "label tasks with the best model");
  gen->add_option("--gt", gt_path, "ground-truth JSONL")->required();
  gen->add_option("--detections", det_specs, "MODEL=PATH detection JSONL")
      ->required();
  gen->add_option("--profiles", gl_profiles, "profiles JSON/CSV")->required();
  gen->add_option("--label-strategy", strategy, "iou | score");
  gen->add_option("--lambda-iou", lambda_iou, "matched-box IoU weight");
  gen->add_option("--lambda-l2", lambda_l2, "matched-box L2 weight");
  gen->add_option("--out", labels_out, "output label CSV")->required();
  add_weight_flags(gen);

  // train
  std::string features_csv, labels_csv, model_out;
  double test_fraction = 0.2;
  esod::TrainConfig tc;
  auto* train = app.add_subcommand("train", "train the MLP pre-classifier");
  train->add_option("--features", features_csv, "feature CSV")->required();
  train->add_option("--labels", labels_csv, "label CSV")->required();
  train->add_option("--out", model_out, "output model JSON")->required();
  train->add_option("--test-fraction", test_fraction, "held-out fraction");
  train->add_option("--epochs", tc.epochs, "training epochs");
  train->add_option("--batch", tc.batch_size, "mini-batch size");
  train->add_option("--lr", tc.learning_rate, "Adam learning rate");
  train->add_option("--smoothing", tc.label_smoothing, "label smoothing mass");
  train->add_option("--hidden", tc.hidden_width, "hidden layer width");
  train->add_option("--seed", tc.seed, "RNG seed");

  // deploy
  std::string dp_profiles, pairlist_out;
  auto* deploy = app.add_subcommand("deploy", "emit the model->platform pair-list");
  deploy->add_option("--profiles", dp_profiles, "profiles JSON/CSV")->required();
  deploy->add_option("--out", pairlist_out, "output pair-list JSON")->required();
  add_weight_flags(deploy);

  // schedule
  std::string sc_model, sc_profiles, sc_features, sc_image;
  esod::Constraints sc_constraints;
  auto* schedule =
      app.add_subcommand("schedule", "decide one task, decision on stdout");
  schedule->add_option("--model", sc_model, "trained model JSON")->required();
  schedule->add_option("--profiles", sc_profiles, "profiles JSON/CSV")->required();
  schedule->add_option("--features", sc_features, "feature CSV")->required();
  schedule->add_option("--image-id", sc_image, "task id (default: first row)");
  schedule->add_option("--t-max", sc_constraints.t_max_s, "time threshold (s)");
  schedule->add_option("--e-max", sc_constraints.e_max_j, "energy threshold (J)");
  schedule->add_option("--loss-max", sc_constraints.loss_max, "loss threshold");
  add_weight_flags(schedule);

  // simulate
  std::string config_path, sim_out;
  std::optional<std::uint32_t> seed_override;
  std::uint32_t seed_value = 0;
  auto* simulate = app.add_subcommand("simulate", "run the full pipeline");
  simulate->add_option("--config", config_path, "run config JSON")->required();
  auto* seed_opt = simulate->add_option("--seed", seed_value, "seed override");
  simulate->add_option("--out", sim_out, "output directory override");

  // report
  std::string strategy_path, baseline, report_out;
  auto* report =
      app.add_subcommand("report", "reduction percentages vs a baseline");
  report->add_option("--strategy", strategy_path, "strategy rows JSON")->required();
  report->add_option("--baseline", baseline, "baseline row name");
  report->add_option("--out", report_out, "output JSON (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*extract) return cmd_extract(images_dir, out_path);
    if (*gen)
      return cmd_gen_labels(gt_path, det_specs, gl_profiles,
                            parse_weights(weights_csv, preset_name), strategy,
                            lambda_iou, lambda_l2, labels_out);
    if (*train) return cmd_train(features_csv, labels_csv, model_out,
                                 test_fraction, tc);
    if (*deploy)
      return cmd_deploy(dp_profiles, parse_weights(weights_csv, preset_name),
                        pairlist_out);
    if (*schedule)
      return cmd_schedule(sc_model, sc_profiles, sc_features, sc_image,
                          parse_weights(weights_csv, preset_name),
                          sc_constraints);
    if (*simulate) {
      if (seed_opt->count()) seed_override = seed_value;
      return cmd_simulate(config_path, seed_override, sim_out);
    }
    if (*report) return cmd_report(strategy_path, baseline, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
