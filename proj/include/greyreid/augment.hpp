#ifndef GREYREID_AUGMENT_HPP_
#define GREYREID_AUGMENT_HPP_

#include <array>
#include <optional>
#include <random>

#include <opencv2/core.hpp>

#include "json.hpp"

#include "greyreid/greyscale.hpp"
#include "greyreid/tensor.hpp"

namespace greyreid {

struct AugmentConfig {
  int height = 384;
  int width = 128;
  double flip_prob = 0.5;
  // Random erasing.
  bool erase = true;
  double erase_prob = 0.5;
  double erase_area_min = 0.02;
  double erase_area_max = 0.4;
  double erase_aspect_min = 0.3;
  double erase_aspect_max = 3.33;
  int erase_attempts = 100;
  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> std{0.229f, 0.224f, 0.225f};
  GreyWeights grey = GreyWeights::luma();

  static AugmentConfig imagenet() { return {}; }
  static AugmentConfig toy() {
    AugmentConfig c;
    c.mean = {0.5f, 0.5f, 0.5f};
    c.std = {0.5f, 0.5f, 0.5f};
    return c;
  }
};

struct EraseRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  bool operator==(const EraseRect&) const = default;
};

/// RGB / grey pair sharing one spatial augmentation. The 8-bit images are
/// kept for inspection; the tensors are 3 x H x W and normalized.
struct AugmentedPair {
  cv::Mat rgb_u8;
  cv::Mat grey_u8;
  Tensor rgb;
  Tensor grey;
  bool flipped = false;
  std::optional<EraseRect> erased;
};

// Preprocessing fields only (size, normalization, grey weights); stored in
// checkpoints so extraction reproduces the training-time input pipeline.
nlohmann::json preprocessing_json(const AugmentConfig& c);
void apply_preprocessing_json(const nlohmann::json& j, AugmentConfig& c);

// Scales 8-bit RGB to [0,1] and applies per-channel mean/std. Output 3 x H x W.
Tensor normalize_image(const cv::Mat& rgb_u8, const std::array<float, 3>& mean, const std::array<float, 3>& std);

// Training-mode augmentation: resize, flip, random erasing, then grey
// conversion, then normalization.
AugmentedPair augment(const cv::Mat& rgb, std::mt19937_64& rng, const AugmentConfig& cfg);

// Evaluation-mode preprocessing: resize only.
AugmentedPair preprocess(const cv::Mat& rgb, const AugmentConfig& cfg);

}  // namespace greyreid

#endif  // GREYREID_AUGMENT_HPP_
