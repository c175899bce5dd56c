#ifndef GREYREID_GREYSCALE_HPP_
#define GREYREID_GREYSCALE_HPP_

#include <cstdint>

#include <opencv2/core.hpp>

namespace greyreid {

/// Channel weights for the RGB -> grey projection.
struct GreyWeights {
  double r = 0.299;
  double g = 0.587;
  double b = 0.114;

  static GreyWeights luma() { return {}; }
  static GreyWeights average() { return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}; }
};

// Weighted sum before quantization.
inline double grey_exact(std::uint8_t r, std::uint8_t g, std::uint8_t b, const GreyWeights& w) {
  return w.r * r + w.g * g + w.b * b;
}

std::uint8_t grey_value(std::uint8_t r, std::uint8_t g, std::uint8_t b, const GreyWeights& w);

// 8-bit RGB (channel order R,G,B) in, 8-bit 3-channel grey out with the
// value replicated across channels. Throws ShapeError on non CV_8UC3 input.
cv::Mat to_greyscale(const cv::Mat& rgb, const GreyWeights& w = GreyWeights::luma());

}  // namespace greyreid

#endif  // GREYREID_GREYSCALE_HPP_
