#include "greyreid/augment.hpp"

#include <cmath>

#include <opencv2/imgproc.hpp>

#include "greyreid/errors.hpp"

namespace greyreid {

namespace {

cv::Mat resize_to(const cv::Mat& rgb, const AugmentConfig& cfg) {
  if (rgb.type() != CV_8UC3) throw ShapeError("augment expects an 8-bit 3-channel image");
  if (rgb.rows == cfg.height && rgb.cols == cfg.width) return rgb.clone();
  cv::Mat out;
  cv::resize(rgb, out, cv::Size(cfg.width, cfg.height), 0, 0, cv::INTER_LINEAR);
  return out;
}

std::optional<EraseRect> random_erase(cv::Mat& img, std::mt19937_64& rng, const AugmentConfig& cfg) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) >= cfg.erase_prob) return std::nullopt;
  const double area = static_cast<double>(img.rows) * img.cols;
  std::uniform_real_distribution<double> area_frac(cfg.erase_area_min, cfg.erase_area_max);
  std::uniform_real_distribution<double> aspect(cfg.erase_aspect_min, cfg.erase_aspect_max);
  for (int attempt = 0; attempt < cfg.erase_attempts; ++attempt) {
    const double target = area_frac(rng) * area;
    const double ratio = aspect(rng);
    const int h = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int w = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (h <= 0 || w <= 0 || h >= img.rows || w >= img.cols) continue;
    std::uniform_int_distribution<int> ys(0, img.rows - h);
    std::uniform_int_distribution<int> xs(0, img.cols - w);
    const EraseRect r{xs(rng), ys(rng), w, h};
    std::uniform_int_distribution<int> value(0, 255);
    for (int y = r.y; y < r.y + r.height; ++y) {
      auto* row = img.ptr<cv::Vec3b>(y);
      for (int x = r.x; x < r.x + r.width; ++x) {
        for (int c = 0; c < 3; ++c) row[x][c] = static_cast<std::uint8_t>(value(rng));
      }
    }
    return r;
  }
  return std::nullopt;
}

AugmentedPair finish(cv::Mat rgb, const AugmentConfig& cfg) {
  AugmentedPair out;
  out.grey_u8 = to_greyscale(rgb, cfg.grey);
  out.rgb = normalize_image(rgb, cfg.mean, cfg.std);
  out.grey = normalize_image(out.grey_u8, cfg.mean, cfg.std);
  out.rgb_u8 = std::move(rgb);
  return out;
}

}  // namespace

nlohmann::json preprocessing_json(const AugmentConfig& c) {
  return {{"height", c.height},
          {"width", c.width},
          {"mean", c.mean},
          {"std", c.std},
          {"grey_weights", {c.grey.r, c.grey.g, c.grey.b}}};
}

void apply_preprocessing_json(const nlohmann::json& j, AugmentConfig& c) {
  c.height = j.at("height").get<int>();
  c.width = j.at("width").get<int>();
  c.mean = j.at("mean").get<std::array<float, 3>>();
  c.std = j.at("std").get<std::array<float, 3>>();
  const auto w = j.at("grey_weights").get<std::array<double, 3>>();
  c.grey = {w[0], w[1], w[2]};
}

Tensor normalize_image(const cv::Mat& rgb_u8, const std::array<float, 3>& mean, const std::array<float, 3>& std) {
  if (rgb_u8.type() != CV_8UC3) throw ShapeError("normalize_image expects an 8-bit 3-channel image");
  const int h = rgb_u8.rows, w = rgb_u8.cols;
  Tensor t({3, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int y = 0; y < h; ++y) {
    const auto* row = rgb_u8.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        t[c * plane + static_cast<std::size_t>(y) * w + x] = (row[x][c] / 255.0f - mean[c]) / std[c];
      }
    }
  }
  return t;
}

AugmentedPair augment(const cv::Mat& rgb, std::mt19937_64& rng, const AugmentConfig& cfg) {
  cv::Mat img = resize_to(rgb, cfg);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool flip = unit(rng) < cfg.flip_prob;
  if (flip) cv::flip(img, img, 1);
  std::optional<EraseRect> erased;
  if (cfg.erase) erased = random_erase(img, rng, cfg);
  AugmentedPair out = finish(std::move(img), cfg);
  out.flipped = flip;
  out.erased = erased;
  return out;
}

AugmentedPair preprocess(const cv::Mat& rgb, const AugmentConfig& cfg) {
  return finish(resize_to(rgb, cfg), cfg);
}

}  // namespace greyreid
