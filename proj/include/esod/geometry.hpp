/// Bounding boxes, IoU, and the greedy mean-IoU matcher used for label
/// generation. Boxes are stored in normalized center form (cx, cy, w, h);
/// the corner form is derived and clipped to [0,1].
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace esod {

struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  /// Corner form (x0, y0, x1, y1), clipped to the unit square.
  struct Corners {
    double x0, y0, x1, y1;
  };

  Corners corners() const {
    auto clip = [](double v) { return std::clamp(v, 0.0, 1.0); };
    return {clip(cx - w / 2), clip(cy - h / 2), clip(cx + w / 2),
            clip(cy + h / 2)};
  }

  double area() const {
    auto c = corners();
    return (c.x1 - c.x0) * (c.y1 - c.y0);
  }

  /// Throws if the box violates the normalized-coordinate invariants.
  /// Degenerate boxes (zero width or height) are rejected, not fixed.
  void validate() const {
    if (!(cx >= 0.0 && cx <= 1.0 && cy >= 0.0 && cy <= 1.0))
      throw std::invalid_argument("box center outside [0,1]");
    if (!(w > 0.0 && w <= 1.0 && h > 0.0 && h <= 1.0))
      throw std::invalid_argument("box width/height outside (0,1]");
    auto c = corners();
    if (c.x1 - c.x0 <= 0.0 || c.y1 - c.y0 <= 0.0)
      throw std::invalid_argument("box degenerate after clipping");
  }

  static Box from_corners(double x0, double y0, double x1, double y1) {
    return Box{(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
  }
};

struct Detection {
  Box box;
  int class_id = 0;
  double score = 1.0;  // confidence c in [0,1]

  void validate() const {
    box.validate();
    if (!(score >= 0.0 && score <= 1.0))
      throw std::invalid_argument("detection score outside [0,1]");
  }
};

struct GroundTruthBox {
  Box box;
  int class_id = 0;

  void validate() const {
    box.validate();
    if (class_id < 0) throw std::invalid_argument("negative class id");
  }
};

/// Intersection over union. Disjoint or zero-area-union pairs give 0.
inline double iou(const Box& a, const Box& b) {
  auto ca = a.corners();
  auto cb = b.corners();
  double ix = std::max(0.0, std::min(ca.x1, cb.x1) - std::max(ca.x0, cb.x0));
  double iy = std::max(0.0, std::min(ca.y1, cb.y1) - std::max(ca.y0, cb.y0));
  double inter = ix * iy;
  double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

/// Greedy one-to-one matching of predictions to ground truth in descending
/// IoU order; unmatched GT contributes 0; result is the mean over GTs.
/// Class-agnostic by default; class_aware restricts matches to equal class.
inline double mean_iou(const std::vector<Detection>& preds,
                       const std::vector<GroundTruthBox>& gts,
                       bool class_aware = false) {
  if (gts.empty()) throw std::invalid_argument("no ground truth");
  struct Pair {
    double v;
    int p, g;
  };
  std::vector<Pair> pairs;
  pairs.reserve(preds.size() * gts.size());
  for (int p = 0; p < static_cast<int>(preds.size()); ++p)
    for (int g = 0; g < static_cast<int>(gts.size()); ++g) {
      if (class_aware && preds[p].class_id != gts[g].class_id) continue;
      pairs.push_back({iou(preds[p].box, gts[g].box), p, g});
    }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.v != b.v) return a.v > b.v;
    if (a.p != b.p) return a.p < b.p;
    return a.g < b.g;
  });
  std::vector<bool> pused(preds.size(), false), gused(gts.size(), false);
  double sum = 0.0;
  for (const auto& pr : pairs) {
    if (pused[pr.p] || gused[pr.g]) continue;
    pused[pr.p] = gused[pr.g] = true;
    sum += pr.v;
  }
  return sum / static_cast<double>(gts.size());
}

}  // namespace esod
