#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <random>
#include <vector>

#include <opencv2/core.hpp>

#include "esod/features.hpp"

using namespace esod;

namespace {

cv::Mat constant_image(int rows, int cols, uchar value) {
  return cv::Mat(rows, cols, CV_8UC3, cv::Scalar(value, value, value));
}

// Direct pixel-pair counting oracle for symmetric GLCM stats, independent
// of the extraction path.
struct OracleStats {
  double contrast = 0, homogeneity = 0, energy = 0, correlation = 0;
};

OracleStats glcm_oracle(const cv::Mat& gray, int dr, int dc, int levels = 8) {
  std::vector<double> counts(levels * levels, 0.0);
  double total = 0.0;
  for (int r = 0; r < gray.rows; ++r)
    for (int c = 0; c < gray.cols; ++c) {
      int r2 = r + dr, c2 = c + dc;
      if (r2 < 0 || r2 >= gray.rows || c2 < 0 || c2 >= gray.cols) continue;
      int a = gray.at<uchar>(r, c) * levels / 256;
      int b = gray.at<uchar>(r2, c2) * levels / 256;
      counts[a * levels + b] += 1;
      counts[b * levels + a] += 1;
      total += 2;
    }
  OracleStats s;
  double mi = 0, mj = 0;
  for (int i = 0; i < levels; ++i)
    for (int j = 0; j < levels; ++j) {
      double p = counts[i * levels + j] / total;
      s.contrast += p * (i - j) * (i - j);
      s.homogeneity += p / (1.0 + (i - j) * (i - j));
      s.energy += p * p;
      mi += i * p;
      mj += j * p;
    }
  double vi = 0, vj = 0, cov = 0;
  for (int i = 0; i < levels; ++i)
    for (int j = 0; j < levels; ++j) {
      double p = counts[i * levels + j] / total;
      vi += (i - mi) * (i - mi) * p;
      vj += (j - mj) * (j - mj) * p;
      cov += (i - mi) * (j - mj) * p;
    }
  s.correlation = vi * vj > 0 ? cov / std::sqrt(vi * vj) : 0.0;
  return s;
}

cv::Mat random_image(std::mt19937& rng, int rows = 32, int cols = 32) {
  cv::Mat img(rows, cols, CV_8UC3);
  std::uniform_int_distribution<int> d(0, 255);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      img.at<cv::Vec3b>(r, c) = cv::Vec3b(d(rng), d(rng), d(rng));
  return img;
}

FeatureVector random_feature_row(std::mt19937& rng) {
  FeatureVector fv;
  std::uniform_real_distribution<double> d(-10.0, 10.0);
  for (auto& v : fv.v) v = d(rng);
  return fv;
}

}  // namespace

TEST_CASE("constant mid-gray image identities") {
  auto fv = extract_features(constant_image(16, 16, 128), 1000);
  CHECK(fv.brightness_mean() == 128.0);
  CHECK(fv.brightness_rms() == 128.0);
  CHECK(fv.edge_num() == 0.0);
  CHECK(fv.corner_num() == 0.0);
  CHECK(fv.contours_num() == 0.0);
  CHECK(fv.size_bytes() == 1000.0);
  for (int d = 0; d < 4; ++d) {
    CHECK(fv.contrast(d) == 0.0);
    CHECK(fv.homogeneity(d) == 1.0);
    CHECK(fv.glcm_energy(d) == 1.0);
    CHECK(fv.correlation(d) == 0.0);  // zero variance, defined as 0
  }
}

TEST_CASE("pure red image channel means") {
  cv::Mat red(16, 16, CV_8UC3, cv::Scalar(0, 0, 255));  // BGR
  auto fv = extract_features(red, 1);
  CHECK(fv.red_mean() == 255.0);
  CHECK(fv.green_mean() == 0.0);
  CHECK(fv.blue_mean() == 0.0);
}

TEST_CASE("checkerboard GLCM matches the direct co-occurrence oracle") {
  cv::Mat board(8, 8, CV_8UC3);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      uchar v = ((r + c) % 2 == 0) ? 0 : 255;
      board.at<cv::Vec3b>(r, c) = cv::Vec3b(v, v, v);
    }
  auto fv = extract_features(board, 64);
  cv::Mat gray;
  cv::cvtColor(board, gray, cv::COLOR_BGR2GRAY);

  const std::array<std::pair<int, int>, 4> offsets = {
      {{0, 1}, {-1, 1}, {-1, 0}, {-1, -1}}};
  for (int d = 0; d < 4; ++d) {
    auto o = glcm_oracle(gray, offsets[d].first, offsets[d].second);
    CHECK_THAT(fv.contrast(d), Catch::Matchers::WithinAbs(o.contrast, 1e-12));
    CHECK_THAT(fv.homogeneity(d),
               Catch::Matchers::WithinAbs(o.homogeneity, 1e-12));
    CHECK_THAT(fv.glcm_energy(d), Catch::Matchers::WithinAbs(o.energy, 1e-12));
    CHECK_THAT(fv.correlation(d),
               Catch::Matchers::WithinAbs(o.correlation, 1e-12));
  }
  // Every horizontal neighbor pair differs by the full 2-level swing:
  // contrast at 0 degrees is maximal, (levels-1)^2 = 49.
  CHECK_THAT(fv.contrast(0), Catch::Matchers::WithinAbs(49.0, 1e-12));
}

TEST_CASE("90-degree rotation swaps the 0/90 texture directions") {
  std::mt19937 rng(3);
  cv::Mat img = random_image(rng);
  cv::Mat rotated;
  cv::rotate(img, rotated, cv::ROTATE_90_COUNTERCLOCKWISE);
  auto a = extract_features(img, 1);
  auto b = extract_features(rotated, 1);
  for (int base : {13, 17, 21, 25}) {  // contrast/homogeneity/energy/correlation
    CHECK_THAT(a[base + 0], Catch::Matchers::WithinAbs(b[base + 2], 1e-9));
    CHECK_THAT(a[base + 2], Catch::Matchers::WithinAbs(b[base + 0], 1e-9));
    CHECK_THAT(a[base + 1], Catch::Matchers::WithinAbs(b[base + 3], 1e-9));
    CHECK_THAT(a[base + 3], Catch::Matchers::WithinAbs(b[base + 1], 1e-9));
  }
}

TEST_CASE("extraction is deterministic, bit-exact") {
  std::mt19937 rng(9);
  cv::Mat img = random_image(rng, 48, 64);
  auto a = extract_features(img, 1234);
  auto b = extract_features(img, 1234);
  for (std::size_t i = 0; i < kFeatureCount; ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("undersized or wrongly typed images are rejected") {
  CHECK_THROWS_AS(extract_features(constant_image(2, 10, 0), 1),
                  std::invalid_argument);
  cv::Mat gray(16, 16, CV_8UC1, cv::Scalar(0));
  CHECK_THROWS_AS(extract_features(gray, 1), std::invalid_argument);
}

TEST_CASE("fit_normalizer basics") {
  std::mt19937 rng(21);
  FeatureVector a = random_feature_row(rng);
  auto same = fit_normalizer({a, a});
  for (std::size_t i = 0; i < kFeatureCount; ++i) CHECK(same.std[i] == 0.0);

  FeatureVector zero{}, ten{};
  for (auto& v : ten.v) v = 10.0;
  auto s = fit_normalizer({zero, ten});
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    CHECK(s.mean[i] == 5.0);
    CHECK(s.std[i] == 5.0);  // population std
  }
  CHECK_THROWS_AS(fit_normalizer({a}), std::invalid_argument);
}

TEST_CASE("fit_normalizer matches a two-pass oracle on random rows") {
  std::mt19937 rng(33);
  std::vector<FeatureVector> rows;
  for (int i = 0; i < 100; ++i) rows.push_back(random_feature_row(rng));
  auto s = fit_normalizer(rows);
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    double mean = 0.0;
    for (const auto& r : rows) mean += r[f];
    mean /= rows.size();
    double var = 0.0;
    for (const auto& r : rows) var += (r[f] - mean) * (r[f] - mean);
    var /= rows.size();
    CHECK_THAT(s.mean[f], Catch::Matchers::WithinAbs(mean, 1e-9));
    CHECK_THAT(s.std[f], Catch::Matchers::WithinAbs(std::sqrt(var), 1e-9));
  }
}

TEST_CASE("normalize maps mean to 0, one std above mean to 1, round-trips") {
  std::mt19937 rng(45);
  std::vector<FeatureVector> rows;
  for (int i = 0; i < 20; ++i) rows.push_back(random_feature_row(rng));
  auto s = fit_normalizer(rows);

  FeatureVector at_mean;
  for (std::size_t i = 0; i < kFeatureCount; ++i) at_mean[i] = s.mean[i];
  auto z = normalize(at_mean, s);
  for (std::size_t i = 0; i < kFeatureCount; ++i) CHECK(z[i] == 0.0);

  FeatureVector above;
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    above[i] = s.mean[i] + s.std[i];
  auto z1 = normalize(above, s);
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    CHECK_THAT(z1[i], Catch::Matchers::WithinAbs(1.0, 1e-12));

  auto back = denormalize(normalize(rows[0], s), s);
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    if (s.std[i] > 0.0)
      CHECK_THAT(back[i], Catch::Matchers::WithinAbs(rows[0][i], 1e-9));
}

TEST_CASE("normalized training matrix has mean ~0 and std ~1") {
  std::mt19937 rng(55);
  std::vector<FeatureVector> rows;
  for (int i = 0; i < 64; ++i) rows.push_back(random_feature_row(rng));
  auto s = fit_normalizer(rows);
  std::vector<FeatureVector> z;
  for (const auto& r : rows) z.push_back(normalize(r, s));
  auto zs = fit_normalizer(z);
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    CHECK(std::abs(zs.mean[i]) < 1e-9);
    if (s.std[i] > 0.0)
      CHECK_THAT(zs.std[i], Catch::Matchers::WithinAbs(1.0, 1e-9));
    else
      CHECK(zs.std[i] == 0.0);
  }
}
