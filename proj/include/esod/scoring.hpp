/// Weighted score fusion over (time, energy, loss) with min-max
/// normalization, feasibility filtering against user thresholds, and the
/// per-model deployment pass that emits the model -> platform pair-list.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "esod/profiles.hpp"

namespace esod {

struct ScoreWeights {
  double alpha = 1.0 / 3;  // time
  double beta = 1.0 / 3;   // energy
  double gamma = 1.0 / 3;  // loss

  void validate() const {
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0)
      throw std::invalid_argument("negative score weight");
    if (std::abs(alpha + beta + gamma - 1.0) > 1e-9)
      throw std::invalid_argument("score weights must sum to 1");
  }
};

struct Constraints {
  double t_max_s = std::numeric_limits<double>::infinity();
  double e_max_j = std::numeric_limits<double>::infinity();
  double loss_max = std::numeric_limits<double>::infinity();

  void validate() const {
    if (!(t_max_s > 0.0) || !(e_max_j > 0.0) || !(loss_max > 0.0))
      throw std::invalid_argument("constraint thresholds must be positive");
  }
};

struct Candidate {
  std::string model;
  std::string platform;
  double total_time_s = 0.0;    // inference + transmission
  double total_energy_j = 0.0;  // inference + transmission
  double loss = 0.0;
};

struct Decision {
  std::string model;
  std::string platform;
  double score = 0.0;
  double total_time_s = 0.0;
  double total_energy_j = 0.0;
  double loss = 0.0;
  bool feasible = true;
};

enum class FallbackPolicy { Error, BestEffort };

namespace detail {

// Min-max normalization of one cost column; a degenerate column
// (max == min) maps to 0 for every candidate, i.e. decision-neutral.
inline std::vector<double> min_max_normalize(const std::vector<double>& xs) {
  auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  std::vector<double> out(xs.size(), 0.0);
  if (*hi > *lo)
    for (std::size_t i = 0; i < xs.size(); ++i)
      out[i] = (xs[i] - *lo) / (*hi - *lo);
  return out;
}

}  // namespace detail

/// Score = alpha*(1 - T_norm) + beta*(1 - E_norm) + gamma*(1 - Loss_norm),
/// normalized over the candidate set. Higher is better; scores in [0,1].
inline std::vector<std::pair<Candidate, double>> score_candidates(
    const std::vector<Candidate>& cands, const ScoreWeights& w) {
  w.validate();
  if (cands.empty()) throw std::invalid_argument("no candidates to score");
  std::vector<double> t, e, l;
  for (const auto& c : cands) {
    t.push_back(c.total_time_s);
    e.push_back(c.total_energy_j);
    l.push_back(c.loss);
  }
  auto tn = detail::min_max_normalize(t);
  auto en = detail::min_max_normalize(e);
  auto ln = detail::min_max_normalize(l);
  std::vector<std::pair<Candidate, double>> out;
  out.reserve(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i)
    out.emplace_back(cands[i], w.alpha * (1.0 - tn[i]) + w.beta * (1.0 - en[i]) +
                                   w.gamma * (1.0 - ln[i]));
  return out;
}

/// Keep candidates strictly under every threshold.
inline std::vector<Candidate> filter_feasible(const std::vector<Candidate>& cands,
                                              const Constraints& c) {
  c.validate();
  std::vector<Candidate> out;
  for (const auto& cand : cands)
    if (cand.total_time_s < c.t_max_s && cand.total_energy_j < c.e_max_j &&
        cand.loss < c.loss_max)
      out.push_back(cand);
  return out;
}

/// Argmax score among feasible candidates. Ties break toward lower time,
/// then lower energy, then model name order.
inline Decision select(const std::vector<Candidate>& cands, const ScoreWeights& w,
                       const Constraints& c,
                       FallbackPolicy fallback = FallbackPolicy::Error) {
  if (cands.empty()) throw std::invalid_argument("no candidates");
  std::vector<Candidate> feasible = filter_feasible(cands, c);
  bool is_feasible = !feasible.empty();
  if (!is_feasible && fallback == FallbackPolicy::Error)
    throw std::runtime_error("no feasible candidate");
  const auto scored = score_candidates(is_feasible ? feasible : cands, w);
  std::size_t best = 0;
  for (std::size_t i = 1; i < scored.size(); ++i) {
    const auto& [bc, bs] = scored[best];
    const auto& [ic, is] = scored[i];
    bool better = is > bs ||
                  (is == bs && (ic.total_time_s < bc.total_time_s ||
                                (ic.total_time_s == bc.total_time_s &&
                                 (ic.total_energy_j < bc.total_energy_j ||
                                  (ic.total_energy_j == bc.total_energy_j &&
                                   ic.model < bc.model)))));
    if (better) best = i;
  }
  const auto& [cand, score] = scored[best];
  return {cand.model,        cand.platform, score, cand.total_time_s,
          cand.total_energy_j, cand.loss,   is_feasible};
}

/// Candidates for one model: its measured platforms, inference costs only
/// (deployment precedes any task, so there is nothing to transmit yet),
/// loss surrogate (100 - mAP)/100 constant across platforms.
inline std::vector<Candidate> deployment_candidates(const ProfileTable& table,
                                                    const std::string& model) {
  std::vector<Candidate> cands;
  double surrogate = (100.0 - table.model_info(model).map_score) / 100.0;
  for (const auto& platform : table.platforms_for(model)) {
    auto m = table.query(model, platform);
    cands.push_back({model, platform, m.infer_time_s, m.infer_energy_j, surrogate});
  }
  return cands;
}

/// For each model independently, pick the highest-scoring platform.
/// The resulting pair-list is what the scheduling algorithm consumes.
inline std::map<std::string, std::string> deploy(
    const std::vector<std::string>& models, const ProfileTable& table,
    const ScoreWeights& w) {
  std::map<std::string, std::string> pair_list;
  for (const auto& model : models) {
    auto cands = deployment_candidates(table, model);
    if (cands.empty())
      throw std::runtime_error("model " + model + " has no measured platform");
    Decision d = select(cands, w, Constraints{}, FallbackPolicy::Error);
    pair_list[model] = d.platform;
  }
  return pair_list;
}

}  // namespace esod
