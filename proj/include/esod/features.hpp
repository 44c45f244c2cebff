/// Image-complexity descriptor: 29 scalar features (keypoint/corner/edge
/// counts, brightness and channel statistics, longest-contour geometry,
/// and GLCM texture stats in four directions) plus z-score normalization.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/features2d.hpp>
#include <opencv2/imgproc.hpp>

namespace esod {

inline constexpr std::size_t kFeatureCount = 29;

inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "kpNum",        "brightnessMean", "brightnessRMS", "size",
    "cornerNum",    "edgeNum",        "contoursNum",   "maxPointNum",
    "area",         "arcLength",      "redMean",       "greenMean",
    "blueMean",     "contrast1",      "contrast2",     "contrast3",
    "contrast4",    "homogeneity1",   "homogeneity2",  "homogeneity3",
    "homogeneity4", "energy1",        "energy2",       "energy3",
    "energy4",      "correlation1",   "correlation2",  "correlation3",
    "correlation4"};

struct FeatureVector {
  std::array<double, kFeatureCount> v{};

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }

  double kp_num() const { return v[0]; }
  double brightness_mean() const { return v[1]; }
  double brightness_rms() const { return v[2]; }
  double size_bytes() const { return v[3]; }
  double corner_num() const { return v[4]; }
  double edge_num() const { return v[5]; }
  double contours_num() const { return v[6]; }
  double max_point_num() const { return v[7]; }
  double contour_area() const { return v[8]; }
  double arc_length() const { return v[9]; }
  double red_mean() const { return v[10]; }
  double green_mean() const { return v[11]; }
  double blue_mean() const { return v[12]; }
  // dir: 0 -> 0deg, 1 -> 45deg, 2 -> 90deg, 3 -> 135deg
  double contrast(int dir) const { return v[13 + dir]; }
  double homogeneity(int dir) const { return v[17 + dir]; }
  double glcm_energy(int dir) const { return v[21 + dir]; }
  double correlation(int dir) const { return v[25 + dir]; }
};

namespace detail {

/// Symmetric, normalized gray-level co-occurrence matrix at distance 1.
/// levels x levels, row-major. Directions as (drow, dcol) offsets.
inline constexpr int kGlcmLevels = 8;
inline constexpr std::array<std::pair<int, int>, 4> kGlcmOffsets = {
    {{0, 1}, {-1, 1}, {-1, 0}, {-1, -1}}};  // 0, 45, 90, 135 degrees

inline std::vector<double> glcm(const cv::Mat& quantized, int dr, int dc) {
  std::vector<double> m(kGlcmLevels * kGlcmLevels, 0.0);
  double count = 0.0;
  for (int r = 0; r < quantized.rows; ++r) {
    int r2 = r + dr;
    if (r2 < 0 || r2 >= quantized.rows) continue;
    for (int c = 0; c < quantized.cols; ++c) {
      int c2 = c + dc;
      if (c2 < 0 || c2 >= quantized.cols) continue;
      int a = quantized.at<uchar>(r, c);
      int b = quantized.at<uchar>(r2, c2);
      m[a * kGlcmLevels + b] += 1.0;  // symmetric counting
      m[b * kGlcmLevels + a] += 1.0;
      count += 2.0;
    }
  }
  if (count > 0.0)
    for (double& x : m) x /= count;
  return m;
}

struct GlcmStats {
  double contrast = 0.0, homogeneity = 0.0, energy = 0.0, correlation = 0.0;
};

inline GlcmStats glcm_stats(const std::vector<double>& p) {
  GlcmStats s;
  double mu_i = 0.0, mu_j = 0.0;
  for (int i = 0; i < kGlcmLevels; ++i)
    for (int j = 0; j < kGlcmLevels; ++j) {
      double pij = p[i * kGlcmLevels + j];
      double d = i - j;
      s.contrast += pij * d * d;
      s.homogeneity += pij / (1.0 + d * d);
      s.energy += pij * pij;  // angular second moment
      mu_i += i * pij;
      mu_j += j * pij;
    }
  double var_i = 0.0, var_j = 0.0, cov = 0.0;
  for (int i = 0; i < kGlcmLevels; ++i)
    for (int j = 0; j < kGlcmLevels; ++j) {
      double pij = p[i * kGlcmLevels + j];
      var_i += (i - mu_i) * (i - mu_i) * pij;
      var_j += (j - mu_j) * (j - mu_j) * pij;
      cov += (i - mu_i) * (j - mu_j) * pij;
    }
  // Constant image: zero variance, correlation defined as 0.
  double denom = std::sqrt(var_i * var_j);
  s.correlation = denom > 0.0 ? cov / denom : 0.0;
  return s;
}

}  // namespace detail

/// All fixed detector parameters live here so extraction is reproducible.
struct ExtractorParams {
  // Harris
  int harris_block = 2;
  int harris_aperture = 3;
  double harris_k = 0.04;
  double harris_rel_threshold = 0.01;  // of max response
  // Canny (8-bit grayscale)
  double canny_low = 100.0;
  double canny_high = 200.0;
  // Keypoint detector: "sift" (difference-of-Gaussians count) or "fast"
  std::string keypoint_detector = "sift";
};

/// Extract the 29-feature descriptor from an 8-bit BGR image (OpenCV
/// channel order). encoded_size_bytes is the on-disk size of the task.
inline FeatureVector extract_features(const cv::Mat& bgr,
                                      std::size_t encoded_size_bytes,
                                      const ExtractorParams& params = {}) {
  if (bgr.empty() || bgr.type() != CV_8UC3)
    throw std::invalid_argument("expected non-empty 8-bit 3-channel image");
  if (bgr.rows < 3 || bgr.cols < 3)
    throw std::invalid_argument("image smaller than 3x3");

  FeatureVector fv;
  cv::Mat gray;
  cv::cvtColor(bgr, gray, cv::COLOR_BGR2GRAY);

  // Keypoint count, detector stage only.
  {
    cv::Ptr<cv::Feature2D> det;
    if (params.keypoint_detector == "sift")
      det = cv::SIFT::create();
    else if (params.keypoint_detector == "fast")
      det = cv::FastFeatureDetector::create();
    else
      throw std::invalid_argument("unknown keypoint detector: " +
                                  params.keypoint_detector);
    std::vector<cv::KeyPoint> kps;
    det->detect(gray, kps);
    fv[0] = static_cast<double>(kps.size());
  }

  // Brightness statistics on the grayscale image.
  {
    double sum = 0.0, sumsq = 0.0;
    for (int r = 0; r < gray.rows; ++r)
      for (int c = 0; c < gray.cols; ++c) {
        double g = gray.at<uchar>(r, c);
        sum += g;
        sumsq += g * g;
      }
    double n = static_cast<double>(gray.rows) * gray.cols;
    fv[1] = sum / n;
    fv[2] = std::sqrt(sumsq / n);
  }

  fv[3] = static_cast<double>(encoded_size_bytes);

  // Harris corners: pixels above a fixed fraction of the peak response.
  {
    cv::Mat resp;
    cv::cornerHarris(gray, resp, params.harris_block, params.harris_aperture,
                     params.harris_k);
    double minv, maxv;
    cv::minMaxLoc(resp, &minv, &maxv);
    double thr = params.harris_rel_threshold * std::max(maxv, 0.0);
    int count = 0;
    for (int r = 0; r < resp.rows; ++r)
      for (int c = 0; c < resp.cols; ++c)
        if (resp.at<float>(r, c) > thr && resp.at<float>(r, c) > 0.0f) ++count;
    fv[4] = count;
  }

  // Canny edges and contours on the edge map.
  {
    cv::Mat edges;
    cv::Canny(gray, edges, params.canny_low, params.canny_high);
    fv[5] = static_cast<double>(cv::countNonZero(edges));
    std::vector<std::vector<cv::Point>> contours;
    cv::findContours(edges, contours, cv::RETR_EXTERNAL, cv::CHAIN_APPROX_NONE);
    fv[6] = static_cast<double>(contours.size());
    std::size_t best = 0;
    for (std::size_t i = 1; i < contours.size(); ++i)
      if (contours[i].size() > contours[best].size()) best = i;
    if (!contours.empty()) {
      fv[7] = static_cast<double>(contours[best].size());
      fv[8] = cv::contourArea(contours[best]);
      fv[9] = cv::arcLength(contours[best], /*closed=*/true);
    }
  }

  // Channel means (image is BGR).
  {
    cv::Scalar mean = cv::mean(bgr);
    fv[10] = mean[2];
    fv[11] = mean[1];
    fv[12] = mean[0];
  }

  // GLCM texture stats on 8-level quantized grayscale, distance 1.
  {
    cv::Mat quant(gray.size(), CV_8UC1);
    for (int r = 0; r < gray.rows; ++r)
      for (int c = 0; c < gray.cols; ++c)
        quant.at<uchar>(r, c) =
            static_cast<uchar>(gray.at<uchar>(r, c) * detail::kGlcmLevels / 256);
    for (int d = 0; d < 4; ++d) {
      auto [dr, dc] = detail::kGlcmOffsets[d];
      auto stats = detail::glcm_stats(detail::glcm(quant, dr, dc));
      fv[13 + d] = stats.contrast;
      fv[17 + d] = stats.homogeneity;
      fv[21 + d] = stats.energy;
      fv[25 + d] = stats.correlation;
    }
  }

  for (double x : fv.v)
    if (!std::isfinite(x)) throw std::runtime_error("non-finite feature value");
  return fv;
}

/// Per-feature mean and population standard deviation of a training split.
struct NormStats {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> std{};
};

inline NormStats fit_normalizer(const std::vector<FeatureVector>& rows) {
  if (rows.size() < 2)
    throw std::invalid_argument("need at least 2 rows to fit normalizer");
  NormStats s;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows)
    for (std::size_t i = 0; i < kFeatureCount; ++i) s.mean[i] += r[i];
  for (std::size_t i = 0; i < kFeatureCount; ++i) s.mean[i] /= n;
  for (const auto& r : rows)
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      double d = r[i] - s.mean[i];
      s.std[i] += d * d;
    }
  for (std::size_t i = 0; i < kFeatureCount; ++i) s.std[i] = std::sqrt(s.std[i] / n);
  return s;
}

/// z-score; a feature with zero training std maps to 0.
inline FeatureVector normalize(const FeatureVector& fv, const NormStats& s) {
  FeatureVector out;
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    out[i] = s.std[i] > 0.0 ? (fv[i] - s.mean[i]) / s.std[i] : 0.0;
  return out;
}

inline FeatureVector denormalize(const FeatureVector& fv, const NormStats& s) {
  FeatureVector out;
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    out[i] = s.std[i] > 0.0 ? fv[i] * s.std[i] + s.mean[i] : s.mean[i];
  return out;
}

}  // namespace esod
