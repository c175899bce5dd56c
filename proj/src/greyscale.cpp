#include "greyreid/greyscale.hpp"

#include <algorithm>
#include <cmath>

#include "greyreid/errors.hpp"

namespace greyreid {

std::uint8_t grey_value(std::uint8_t r, std::uint8_t g, std::uint8_t b, const GreyWeights& w) {
  const double v = std::nearbyint(grey_exact(r, g, b, w));
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

cv::Mat to_greyscale(const cv::Mat& rgb, const GreyWeights& w) {
  if (rgb.type() != CV_8UC3) {
    throw ShapeError("to_greyscale expects an 8-bit 3-channel image, got " + std::to_string(rgb.channels()) +
                     " channel(s) of depth " + std::to_string(rgb.depth()));
  }
  cv::Mat out(rgb.size(), CV_8UC3);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* src = rgb.ptr<cv::Vec3b>(y);
    auto* dst = out.ptr<cv::Vec3b>(y);
    for (int x = 0; x < rgb.cols; ++x) {
      const std::uint8_t v = grey_value(src[x][0], src[x][1], src[x][2], w);
      dst[x] = cv::Vec3b(v, v, v);
    }
  }
  return out;
}

}  // namespace greyreid
