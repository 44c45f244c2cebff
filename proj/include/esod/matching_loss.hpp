/// Detection-set loss: Hungarian bipartite matching on a box-loss cost
/// matrix, plus confidence penalties for surplus predictions (2^c - 1)
/// and area penalties for surplus ground-truth boxes.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "esod/geometry.hpp"
#include "esod/hungarian.hpp"

namespace esod {

struct LossWeights {
  double lambda_iou = 2.0;
  double lambda_l2 = 5.0;

  void validate() const {
    if (lambda_iou < 0.0 || lambda_l2 < 0.0)
      throw std::invalid_argument("negative loss weight");
    if (lambda_iou == 0.0 && lambda_l2 == 0.0)
      throw std::invalid_argument("loss weights both zero");
  }
};

enum class IouKind { Plain, Generalized };

struct MatchingOptions {
  bool class_aware = false;  // infinite-like cost across classes
  IouKind iou_kind = IouKind::Plain;
};

struct LossBreakdown {
  double box_term = 0.0;
  double conf_term = 0.0;
  double area_term = 0.0;
  double total = 0.0;
  std::vector<std::pair<int, int>> assignment;  // (pred_index, gt_index)
};

/// Generalized IoU: IoU minus the fraction of the smallest enclosing box
/// not covered by the union. In [-1, 1].
inline double giou(const Box& a, const Box& b) {
  auto ca = a.corners();
  auto cb = b.corners();
  double ix = std::max(0.0, std::min(ca.x1, cb.x1) - std::max(ca.x0, cb.x0));
  double iy = std::max(0.0, std::min(ca.y1, cb.y1) - std::max(ca.y0, cb.y0));
  double inter = ix * iy;
  double uni = a.area() + b.area() - inter;
  double ex = std::max(ca.x1, cb.x1) - std::min(ca.x0, cb.x0);
  double ey = std::max(ca.y1, cb.y1) - std::min(ca.y0, cb.y0);
  double enclose = ex * ey;
  if (enclose <= 0.0 || uni <= 0.0) return 0.0;
  return inter / uni - (enclose - uni) / enclose;
}

/// Matched-pair loss: lambda_iou * (1 - IoU) + lambda_l2 * ||b - bhat||_2
/// over the (cx, cy, w, h) coordinates.
inline double loss_box(const Box& b, const Box& bhat, const LossWeights& w,
                       IouKind kind = IouKind::Plain) {
  double overlap = kind == IouKind::Plain ? iou(b, bhat) : giou(b, bhat);
  double dx = b.cx - bhat.cx, dy = b.cy - bhat.cy;
  double dw = b.w - bhat.w, dh = b.h - bhat.h;
  double l2 = std::sqrt(dx * dx + dy * dy + dw * dw + dh * dh);
  return w.lambda_iou * (1.0 - overlap) + w.lambda_l2 * l2;
}

/// Confidence penalty for an unmatched prediction: 2^c - 1.
inline double loss_conf(double c) {
  if (!(c >= 0.0 && c <= 1.0))
    throw std::invalid_argument("confidence outside [0,1]");
  return std::exp2(c) - 1.0;
}

/// Area penalty for an unmatched ground-truth box: its area divided by
/// the mean area of all ground-truth boxes.
inline double loss_area(const Box& unmatched_gt, const std::vector<Box>& all_gts) {
  if (all_gts.empty()) throw std::invalid_argument("no ground-truth boxes");
  double mean = 0.0;
  for (const auto& g : all_gts) mean += g.area();
  mean /= static_cast<double>(all_gts.size());
  if (mean <= 0.0) throw std::invalid_argument("mean ground-truth area is zero");
  return unmatched_gt.area() / mean;
}

/// Full set loss. Matching minimizes summed loss_box over pairs; surplus
/// predictions pay loss_conf, surplus ground truths pay loss_area.
inline LossBreakdown total_loss(const std::vector<Detection>& preds,
                                const std::vector<GroundTruthBox>& gts,
                                const LossWeights& w,
                                const MatchingOptions& opt = {}) {
  w.validate();
  LossBreakdown out;
  const std::size_t np = preds.size(), ng = gts.size();
  if (np > 0 && ng > 0) {
    // Large finite surrogate for "never match across classes".
    constexpr double kClassBarrier = 1e9;
    CostMatrix cost = CostMatrix::zeros(np, ng);
    for (std::size_t p = 0; p < np; ++p)
      for (std::size_t g = 0; g < ng; ++g) {
        if (opt.class_aware && preds[p].class_id != gts[g].class_id)
          cost.at(p, g) = kClassBarrier;
        else
          cost.at(p, g) = loss_box(gts[g].box, preds[p].box, w, opt.iou_kind);
      }
    Assignment a = hungarian(cost);
    out.assignment = a.pairs;
    for (auto [p, g] : a.pairs) out.box_term += cost.at(p, g);
  }
  std::vector<bool> pmatched(np, false), gmatched(ng, false);
  for (auto [p, g] : out.assignment) {
    pmatched[p] = true;
    gmatched[g] = true;
  }
  for (std::size_t p = 0; p < np; ++p)
    if (!pmatched[p]) out.conf_term += loss_conf(preds[p].score);
  if (ng > 0) {
    std::vector<Box> gt_boxes;
    gt_boxes.reserve(ng);
    for (const auto& g : gts) gt_boxes.push_back(g.box);
    for (std::size_t g = 0; g < ng; ++g)
      if (!gmatched[g]) out.area_term += loss_area(gts[g].box, gt_boxes);
  }
  out.total = out.box_term + out.conf_term + out.area_term;
  return out;
}

}  // namespace esod
