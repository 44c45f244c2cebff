/// The pre-classification model: label generation over candidate
/// detectors, a deterministic train/test split, and a from-scratch MLP
/// (9 affine layers, ReLU then softmax) trained with Adam on smoothed
/// categorical cross-entropy.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "esod/features.hpp"
#include "esod/geometry.hpp"
#include "esod/matching_loss.hpp"
#include "esod/scoring.hpp"

namespace esod {

struct TrainConfig {
  int batch_size = 8;
  double learning_rate = 0.001;
  double label_smoothing = 0.05;  // total mass redistributed uniformly
  int epochs = 300;
  int hidden_width = 128;
  std::uint32_t seed = 0;

  void validate() const {
    if (batch_size <= 0 || epochs < 0 || hidden_width <= 0 ||
        !(learning_rate > 0.0))
      throw std::invalid_argument("nonpositive training parameter");
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
      throw std::invalid_argument("label smoothing outside [0,1)");
  }

  std::string describe() const {
    return "batch=" + std::to_string(batch_size) +
           " lr=" + std::to_string(learning_rate) +
           " smooth=" + std::to_string(label_smoothing) +
           " epochs=" + std::to_string(epochs) +
           " hidden=" + std::to_string(hidden_width) +
           " seed=" + std::to_string(seed);
  }
};

struct LabeledSet {
  Eigen::MatrixXd X;           // n x kFeatureCount, normalized
  std::vector<int> y;          // labels in [0, n_classes)
  std::vector<int> train_idx;
  std::vector<int> test_idx;
  std::vector<std::string> label_names;  // label -> model name

  int n_classes() const { return static_cast<int>(label_names.size()); }

  void validate() const {
    if (X.rows() != static_cast<Eigen::Index>(y.size()))
      throw std::invalid_argument("X/y row mismatch");
    if (train_idx.size() + test_idx.size() != y.size())
      throw std::invalid_argument("split does not cover the set");
    std::vector<bool> in_train(n_classes(), false);
    for (int i : train_idx) in_train[y[i]] = true;
    for (int k = 0; k < n_classes(); ++k)
      if (!in_train[k])
        throw std::invalid_argument("class " + label_names[k] +
                                    " missing from train split");
  }
};

/// Uniformly random disjoint train/test split, reproducible by seed.
inline std::pair<std::vector<int>, std::vector<int>> split(int n,
                                                           double test_fraction,
                                                           std::uint32_t seed) {
  if (n < 2) throw std::invalid_argument("need at least 2 rows to split");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test fraction outside (0,1)");
  int n_test = static_cast<int>(std::llround(n * test_fraction));
  if (n_test == 0 || n_test == n)
    throw std::invalid_argument("test fraction produces an empty side");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<int> test(idx.begin(), idx.begin() + n_test);
  std::vector<int> train(idx.begin() + n_test, idx.end());
  return {train, test};
}

struct EpochStats {
  double loss = 0.0;
  double train_accuracy = 0.0;
};

class MLPModel {
 public:
  struct Layer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;
  };

  std::vector<Layer> layers;
  NormStats norm;
  std::vector<std::string> label_names;
  std::string config_hash;
  std::vector<EpochStats> history;

  static constexpr int kHiddenLayers = 7;  // plus input and output layers

  /// He-style uniform init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)), zero bias.
  static MLPModel init(int n_inputs, int n_outputs, int hidden_width,
                       std::uint32_t seed) {
    MLPModel m;
    std::mt19937 rng(seed);
    std::vector<int> widths;
    widths.push_back(n_inputs);
    for (int i = 0; i < kHiddenLayers + 1; ++i) widths.push_back(hidden_width);
    widths.push_back(n_outputs);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      Layer layer;
      int in = widths[l], out = widths[l + 1];
      double limit = std::sqrt(6.0 / in);
      std::uniform_real_distribution<double> dist(-limit, limit);
      layer.W = Eigen::MatrixXd(out, in);
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) layer.W(r, c) = dist(rng);
      layer.b = Eigen::VectorXd::Zero(out);
      m.layers.push_back(std::move(layer));
    }
    return m;
  }

  int n_inputs() const { return static_cast<int>(layers.front().W.cols()); }
  int n_outputs() const { return static_cast<int>(layers.back().W.rows()); }

  /// Columns are samples. Returns post-activation of every layer
  /// (activations[0] is the input), final entry is the softmax output.
  std::vector<Eigen::MatrixXd> forward(const Eigen::MatrixXd& X) const {
    std::vector<Eigen::MatrixXd> acts;
    acts.push_back(X);
    Eigen::MatrixXd a = X;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Eigen::MatrixXd z =
          (layers[l].W * a).colwise() + layers[l].b;
      if (l + 1 < layers.size()) {
        a = z.cwiseMax(0.0);  // ReLU
      } else {
        a = softmax(z);
      }
      acts.push_back(a);
    }
    return acts;
  }

  static Eigen::MatrixXd softmax(const Eigen::MatrixXd& z) {
    Eigen::MatrixXd out(z.rows(), z.cols());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      Eigen::VectorXd col = z.col(c);
      double mx = col.maxCoeff();
      Eigen::VectorXd e = (col.array() - mx).exp();
      out.col(c) = e / e.sum();
    }
    return out;
  }

  std::pair<int, Eigen::VectorXd> predict(const FeatureVector& fv) const {
    if (n_inputs() != static_cast<int>(kFeatureCount))
      throw std::invalid_argument("model input width mismatch");
    Eigen::VectorXd x(kFeatureCount);
    for (std::size_t i = 0; i < kFeatureCount; ++i) x[i] = fv[i];
    Eigen::VectorXd p = forward(x).back().col(0);
    int label = 0;
    p.maxCoeff(&label);
    return {label, p};
  }
};

namespace detail {

inline Eigen::MatrixXd smoothed_targets(const std::vector<int>& labels,
                                        int n_classes, double smoothing) {
  Eigen::MatrixXd Y = Eigen::MatrixXd::Constant(
      n_classes, static_cast<Eigen::Index>(labels.size()),
      smoothing / n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i)
    Y(labels[i], static_cast<Eigen::Index>(i)) += 1.0 - smoothing;
  return Y;
}

/// Mean smoothed cross-entropy over the batch columns.
inline double cross_entropy(const Eigen::MatrixXd& probs,
                            const Eigen::MatrixXd& targets) {
  return -(targets.array() * probs.array().log()).sum() / probs.cols();
}

/// Backprop of mean smoothed cross-entropy through softmax and the ReLU
/// stack. Returns per-layer (dW, db).
inline std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>> backward(
    const MLPModel& m, const std::vector<Eigen::MatrixXd>& acts,
    const Eigen::MatrixXd& targets) {
  const double batch = static_cast<double>(targets.cols());
  std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>> grads(
      m.layers.size());
  Eigen::MatrixXd delta = (acts.back() - targets) / batch;  // dL/dz, last layer
  for (int l = static_cast<int>(m.layers.size()) - 1; l >= 0; --l) {
    grads[l].first = delta * acts[l].transpose();
    grads[l].second = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd da = m.layers[l].W.transpose() * delta;
      delta = da.array() * (acts[l].array() > 0.0).cast<double>();
    }
  }
  return grads;
}

struct AdamState {
  std::vector<Eigen::MatrixXd> mW, vW;
  std::vector<Eigen::VectorXd> mb, vb;
  long t = 0;
  static constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit AdamState(const MLPModel& m) {
    for (const auto& l : m.layers) {
      mW.push_back(Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()));
      vW.push_back(Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()));
      mb.push_back(Eigen::VectorXd::Zero(l.b.size()));
      vb.push_back(Eigen::VectorXd::Zero(l.b.size()));
    }
  }

  void step(MLPModel& m,
            const std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>>& g,
            double lr) {
    ++t;
    double bc1 = 1.0 - std::pow(beta1, t);
    double bc2 = 1.0 - std::pow(beta2, t);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      mW[l] = beta1 * mW[l] + (1 - beta1) * g[l].first;
      vW[l] = (beta2 * vW[l].array() + (1 - beta2) * g[l].first.array().square())
                  .matrix();
      mb[l] = beta1 * mb[l] + (1 - beta1) * g[l].second;
      vb[l] = (beta2 * vb[l].array() + (1 - beta2) * g[l].second.array().square())
                  .matrix();
      m.layers[l].W.array() -=
          lr * (mW[l].array() / bc1) / ((vW[l].array() / bc2).sqrt() + eps);
      m.layers[l].b.array() -=
          lr * (mb[l].array() / bc1) / ((vb[l].array() / bc2).sqrt() + eps);
    }
  }
};

inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

/// Mini-batch Adam training, shuffled per epoch from the config seed.
/// Deterministic: a fixed seed reproduces the weight trajectory exactly.
inline MLPModel train(const LabeledSet& set, const TrainConfig& cfg,
                      const NormStats& norm = {}) {
  cfg.validate();
  set.validate();
  MLPModel m = MLPModel::init(static_cast<int>(set.X.cols()), set.n_classes(),
                              cfg.hidden_width, cfg.seed);
  m.norm = norm;
  m.label_names = set.label_names;
  m.config_hash = detail::fnv1a_hex(cfg.describe());
  detail::AdamState adam(m);
  std::mt19937 rng(cfg.seed ^ 0x9e3779b9u);
  std::vector<int> order = set.train_idx;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int correct = 0;
    int n_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size, ++n_batches) {
      std::size_t end = std::min(order.size(),
                                 start + static_cast<std::size_t>(cfg.batch_size));
      Eigen::MatrixXd X(set.X.cols(), end - start);
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        X.col(static_cast<Eigen::Index>(i - start)) =
            set.X.row(order[i]).transpose();
        labels.push_back(set.y[order[i]]);
      }
      Eigen::MatrixXd Y =
          detail::smoothed_targets(labels, set.n_classes(), cfg.label_smoothing);
      auto acts = m.forward(X);
      double loss = detail::cross_entropy(acts.back(), Y);
      if (!std::isfinite(loss))
        throw std::runtime_error("NaN loss at epoch " + std::to_string(epoch) +
                                 " batch " + std::to_string(n_batches));
      epoch_loss += loss;
      for (Eigen::Index c = 0; c < acts.back().cols(); ++c) {
        int pred = 0;
        acts.back().col(c).maxCoeff(&pred);
        if (pred == labels[static_cast<std::size_t>(c)]) ++correct;
      }
      adam.step(m, detail::backward(m, acts, Y), cfg.learning_rate);
    }
    m.history.push_back({n_batches ? epoch_loss / n_batches : 0.0,
                         order.empty() ? 0.0
                                       : static_cast<double>(correct) /
                                             static_cast<double>(order.size())});
  }
  return m;
}

inline double evaluate_accuracy(const MLPModel& m, const LabeledSet& set,
                                const std::vector<int>& idx) {
  if (idx.empty()) return 0.0;
  int correct = 0;
  for (int i : idx) {
    Eigen::VectorXd x = set.X.row(i).transpose();
    Eigen::VectorXd p = m.forward(x).back().col(0);
    int pred = 0;
    p.maxCoeff(&pred);
    if (pred == set.y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

/// Compare analytic gradients with central finite differences on a small
/// batch. Checks a seeded sample of parameters per layer; returns the
/// maximum relative error.
inline double gradient_check(const MLPModel& model, const Eigen::MatrixXd& X,
                             const std::vector<int>& labels,
                             double smoothing = 0.05,
                             int samples_per_layer = 24,
                             std::uint32_t seed = 7) {
  MLPModel m = model;  // perturbed copy
  Eigen::MatrixXd Y =
      detail::smoothed_targets(labels, m.n_outputs(), smoothing);
  auto loss_at = [&]() {
    return detail::cross_entropy(m.forward(X).back(), Y);
  };
  auto grads = detail::backward(m, m.forward(X), Y);

  const double h = 1e-5;
  double max_rel = 0.0;
  std::mt19937 rng(seed);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& W = m.layers[l].W;
    auto& b = m.layers[l].b;
    std::uniform_int_distribution<int> rdist(0, static_cast<int>(W.rows()) - 1);
    std::uniform_int_distribution<int> cdist(0, static_cast<int>(W.cols()) - 1);
    for (int s = 0; s < samples_per_layer; ++s) {
      int r = rdist(rng), c = cdist(rng);
      double orig = W(r, c);
      W(r, c) = orig + h;
      double lp = loss_at();
      W(r, c) = orig - h;
      double lm = loss_at();
      W(r, c) = orig;
      double num = (lp - lm) / (2 * h);
      double ana = grads[l].first(r, c);
      double rel = std::abs(num - ana) / std::max(1e-6, std::abs(num) + std::abs(ana));
      max_rel = std::max(max_rel, rel);
    }
    for (int s = 0; s < std::min<int>(samples_per_layer, static_cast<int>(b.size()));
         ++s) {
      int r = rdist(rng);
      double orig = b[r];
      b[r] = orig + h;
      double lp = loss_at();
      b[r] = orig - h;
      double lm = loss_at();
      b[r] = orig;
      double num = (lp - lm) / (2 * h);
      double ana = grads[l].second[r];
      double rel = std::abs(num - ana) / std::max(1e-6, std::abs(num) + std::abs(ana));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

// ---------------------------------------------------------------------------
// Label generation

enum class LabelStrategy { Iou, Score };

inline LabelStrategy label_strategy_from_string(const std::string& s) {
  if (s == "iou") return LabelStrategy::Iou;
  if (s == "score") return LabelStrategy::Score;
  throw std::invalid_argument("unknown label strategy: " + s);
}

struct TaskAnnotations {
  std::string image_id;
  std::map<std::string, std::vector<Detection>> detections;  // per model
  std::vector<GroundTruthBox> gts;
};

/// Label = best model per task. Strategy "iou" takes the argmax of the
/// greedy mean IoU against ground truth; strategy "score" runs the
/// weighted score with each model's per-task set loss and its deployed
/// platform's costs. Ties break toward the earlier model in the list.
inline std::vector<int> gen_labels(const std::vector<TaskAnnotations>& tasks,
                                   const std::vector<std::string>& models,
                                   const ProfileTable& table,
                                   const ScoreWeights& w, LabelStrategy strategy,
                                   const LossWeights& lw = {}) {
  std::map<std::string, std::string> pair_list;
  if (strategy == LabelStrategy::Score) pair_list = deploy(models, table, w);
  std::vector<int> labels;
  labels.reserve(tasks.size());
  for (const auto& task : tasks) {
    for (const auto& model : models)
      if (!task.detections.count(model))
        throw std::runtime_error("task " + task.image_id +
                                 " missing detections for model " + model);
    int best = 0;
    if (strategy == LabelStrategy::Iou) {
      double best_iou = -1.0;
      for (std::size_t i = 0; i < models.size(); ++i) {
        double v = mean_iou(task.detections.at(models[i]), task.gts);
        if (v > best_iou) {
          best_iou = v;
          best = static_cast<int>(i);
        }
      }
    } else {
      std::vector<Candidate> cands;
      for (const auto& model : models) {
        auto m = table.query(model, pair_list.at(model));
        double loss = total_loss(task.detections.at(model), task.gts, lw).total;
        cands.push_back({model, pair_list.at(model), m.infer_time_s,
                         m.infer_energy_j, loss});
      }
      auto scored = score_candidates(cands, w);
      double best_score = scored[0].second;
      for (std::size_t i = 1; i < scored.size(); ++i)
        if (scored[i].second > best_score) {
          best_score = scored[i].second;
          best = static_cast<int>(i);
        }
    }
    labels.push_back(best);
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Model (de)serialization

inline nlohmann::ordered_json model_to_json(const MLPModel& m) {
  nlohmann::ordered_json j;
  j["labels"] = m.label_names;
  j["config_hash"] = m.config_hash;
  j["norm"] = {{"mean", m.norm.mean}, {"std", m.norm.std}};
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : m.layers) {
    std::vector<double> w(l.W.data(), l.W.data() + l.W.size());
    std::vector<double> b(l.b.data(), l.b.data() + l.b.size());
    j["layers"].push_back({{"rows", l.W.rows()}, {"cols", l.W.cols()},
                           {"W", w}, {"b", b}});
  }
  j["history"] = nlohmann::ordered_json::array();
  for (const auto& e : m.history)
    j["history"].push_back({{"loss", e.loss}, {"train_accuracy", e.train_accuracy}});
  return j;
}

inline MLPModel model_from_json(const nlohmann::json& j) {
  MLPModel m;
  m.label_names = j.at("labels").get<std::vector<std::string>>();
  m.config_hash = j.value("config_hash", std::string{});
  const auto& norm = j.at("norm");
  auto mean = norm.at("mean").get<std::vector<double>>();
  auto stdv = norm.at("std").get<std::vector<double>>();
  if (mean.size() != kFeatureCount || stdv.size() != kFeatureCount)
    throw std::runtime_error("model norm stats have wrong width");
  std::copy(mean.begin(), mean.end(), m.norm.mean.begin());
  std::copy(stdv.begin(), stdv.end(), m.norm.std.begin());
  for (const auto& lj : j.at("layers")) {
    MLPModel::Layer l;
    Eigen::Index rows = lj.at("rows").get<Eigen::Index>();
    Eigen::Index cols = lj.at("cols").get<Eigen::Index>();
    auto w = lj.at("W").get<std::vector<double>>();
    auto b = lj.at("b").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
        static_cast<Eigen::Index>(b.size()) != rows)
      throw std::runtime_error("layer shape mismatch in model file");
    l.W = Eigen::Map<Eigen::MatrixXd>(w.data(), rows, cols);
    l.b = Eigen::Map<Eigen::VectorXd>(b.data(), rows);
    m.layers.push_back(std::move(l));
  }
  for (const auto& e : j.value("history", nlohmann::json::array()))
    m.history.push_back({e.at("loss").get<double>(),
                         e.at("train_accuracy").get<double>()});
  return m;
}

inline void save_model(const MLPModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << model_to_json(m).dump() << "\n";
}

inline MLPModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return model_from_json(j);
}

}  // namespace esod
