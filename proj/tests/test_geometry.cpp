#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "esod/geometry.hpp"

using namespace esod;

namespace {

Box corner_box(double x0, double y0, double x1, double y1) {
  return Box::from_corners(x0, y0, x1, y1);
}

Box random_box(std::mt19937& rng) {
  std::uniform_real_distribution<double> pos(0.05, 0.95);
  std::uniform_real_distribution<double> dim(0.02, 0.4);
  Box b{pos(rng), pos(rng), dim(rng), dim(rng)};
  return b;
}

// Best mean IoU over all one-to-one matchings, by exhaustive permutation.
double optimal_mean_iou(const std::vector<Detection>& preds,
                        const std::vector<GroundTruthBox>& gts) {
  std::size_t np = preds.size(), ng = gts.size();
  if (np == 0) return 0.0;
  double best = 0.0;
  if (np >= ng) {
    std::vector<int> perm(np);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      double sum = 0.0;
      for (std::size_t g = 0; g < ng; ++g)
        sum += iou(preds[perm[g]].box, gts[g].box);
      best = std::max(best, sum);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::vector<int> perm(ng);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      double sum = 0.0;
      for (std::size_t p = 0; p < np; ++p)
        sum += iou(preds[p].box, gts[perm[p]].box);
      best = std::max(best, sum);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return best / static_cast<double>(ng);
}

}  // namespace

TEST_CASE("iou identity and disjoint cases") {
  Box a{0.5, 0.5, 0.2, 0.2};
  CHECK(iou(a, a) == 1.0);

  // corner-form (0,0,2,2) vs (3,3,4,4) scaled into the unit square
  Box b = corner_box(0.0, 0.0, 0.5, 0.5);
  Box c = corner_box(0.75, 0.75, 1.0, 1.0);
  CHECK(iou(b, c) == 0.0);
}

TEST_CASE("iou hand-computed overlap is 1/3") {
  // inter = 0.1 x 0.2 = 0.02, union = 0.04 + 0.04 - 0.02 = 0.06
  Box a = corner_box(0.0, 0.0, 0.2, 0.2);
  Box b = corner_box(0.1, 0.0, 0.3, 0.2);
  CHECK_THAT(iou(a, b), Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));
}

TEST_CASE("iou is symmetric and 1 on identity for random boxes") {
  std::mt19937 rng(11);
  for (int i = 0; i < 200; ++i) {
    Box a = random_box(rng), b = random_box(rng);
    CHECK(iou(a, b) == iou(b, a));
    CHECK_THAT(iou(a, a), Catch::Matchers::WithinAbs(1.0, 1e-12));
    double v = iou(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("box validation rejects degenerate and out-of-range boxes") {
  CHECK_THROWS_AS((Box{0.5, 0.5, 0.0, 0.1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((Box{1.5, 0.5, 0.1, 0.1}.validate()), std::invalid_argument);
  CHECK_NOTHROW((Box{0.5, 0.5, 0.1, 0.1}.validate()));
}

TEST_CASE("mean_iou trivial cases") {
  std::vector<GroundTruthBox> gts = {{Box{0.3, 0.3, 0.2, 0.2}, 0},
                                     {Box{0.7, 0.7, 0.1, 0.1}, 1}};
  std::vector<Detection> perfect = {{gts[0].box, 0, 0.9}, {gts[1].box, 1, 0.9}};
  CHECK_THAT(mean_iou(perfect, gts), Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK(mean_iou({}, gts) == 0.0);
  CHECK_THROWS_AS(mean_iou(perfect, {}), std::invalid_argument);
}

TEST_CASE("mean_iou: one pred overlapping one of two GTs at 1/3") {
  std::vector<GroundTruthBox> gts = {
      {corner_box(0.0, 0.0, 0.2, 0.2), 0},
      {corner_box(0.6, 0.6, 0.8, 0.8), 0}};
  std::vector<Detection> preds = {{corner_box(0.1, 0.0, 0.3, 0.2), 0, 0.9}};
  CHECK_THAT(mean_iou(preds, gts),
             Catch::Matchers::WithinAbs(1.0 / 6.0, 1e-12));
}

TEST_CASE("greedy mean_iou never beats the optimal assignment") {
  std::mt19937 rng(29);
  std::uniform_int_distribution<int> count(1, 5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Detection> preds;
    std::vector<GroundTruthBox> gts;
    for (int i = 0, n = count(rng); i < n; ++i)
      preds.push_back({random_box(rng), 0, 0.9});
    for (int i = 0, n = count(rng); i < n; ++i)
      gts.push_back({random_box(rng), 0});
    double greedy = mean_iou(preds, gts);
    double optimal = optimal_mean_iou(preds, gts);
    CHECK(greedy <= optimal + 1e-12);
  }
}

TEST_CASE("greedy equals optimal on a strictly dominant diagonal") {
  // Well-separated boxes matched by near-identical predictions.
  std::vector<GroundTruthBox> gts = {{Box{0.15, 0.15, 0.2, 0.2}, 0},
                                     {Box{0.5, 0.5, 0.2, 0.2}, 0},
                                     {Box{0.85, 0.85, 0.2, 0.2}, 0}};
  std::vector<Detection> preds;
  for (const auto& g : gts)
    preds.push_back({Box{g.box.cx + 0.01, g.box.cy, g.box.w, g.box.h}, 0, 0.9});
  CHECK_THAT(mean_iou(preds, gts),
             Catch::Matchers::WithinAbs(optimal_mean_iou(preds, gts), 1e-12));
}

TEST_CASE("class-aware mean_iou skips cross-class pairs") {
  std::vector<GroundTruthBox> gts = {{Box{0.5, 0.5, 0.2, 0.2}, 1}};
  std::vector<Detection> preds = {{Box{0.5, 0.5, 0.2, 0.2}, 2, 0.9}};
  CHECK(mean_iou(preds, gts, /*class_aware=*/true) == 0.0);
  CHECK(mean_iou(preds, gts, /*class_aware=*/false) == 1.0);
}
